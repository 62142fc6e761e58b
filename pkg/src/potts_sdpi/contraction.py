"""Contraction coefficients, log-Sobolev constants and tensorized bounds for Potts channels.

One-dimensional sup/inf problems are solved by a dense grid followed by a
golden-section refinement of the best bracket. Removable singularities at the
uniform point x = 1/k are filled with their analytic limits.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .envelope import (
    PiecewiseLinearFn,
    b1_truncation_point,
    concave_envelope,
    convex_envelope,
)
from .potts_core import (
    DomainError,
    as_prob_vector,
    as_stochastic_matrix,
    b_p_curve,
    check_lambda,
    is_potts,
    kl_displacement,
    potts_matrix,
    psi,
    psi_of_t,
    psi_scalar,
    psi_t_scalar,
    s_lambda_curve,
    skl_displacement,
    uniform,
    xi,
    xi_second_derivative_at_uniform,
)

DEFAULT_TOL = 1e-10
DEFAULT_GRID = 2048
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# offset from x = 1/k below which ratios are replaced by their analytic limit
SINGULAR_EPS = 1e-7


@dataclass
class OptResult:
    """Outcome of a sup/inf search.

    ``lower_bound`` marks heuristic searches whose value only bounds the true
    supremum from below.
    """

    arg: float | np.ndarray | None
    value: float
    tol_achieved: float
    evaluations: int
    lower_bound: bool = False
    info: dict = field(default_factory=dict)

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------------------
# 1-D search
# ---------------------------------------------------------------------------

def _golden(fn: Callable[[float], float], lo: float, hi: float, tol: float,
            maximize: bool, max_iter: int = 200):
    sign = -1.0 if maximize else 1.0
    g = lambda t: sign * fn(t)  # noqa: E731
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = g(c), g(d)
    evals = 2
    for _ in range(max_iter):
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            break
        if abs(fc - fd) <= 0.1 * tol and hi - lo < 1e-9:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = g(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = g(d)
        evals += 1
    if fc < fd:
        return c, sign * fc, abs(fc - fd), evals
    return d, sign * fd, abs(fc - fd), evals


def grid_golden(fn_vec: Callable[[np.ndarray], np.ndarray], fn: Callable[[float], float],
                lo: float, hi: float, *, maximize: bool, tol: float = DEFAULT_TOL,
                grid: int = DEFAULT_GRID, candidates: Iterable[tuple[float, float]] = ()) -> OptResult:
    """Optimize a function of one variable on [lo, hi].

    ``fn_vec`` evaluates the grid, ``fn`` is the scalar objective used by the
    golden-section stage. ``candidates`` are extra ``(arg, value)`` pairs such
    as analytic boundary limits; the best of all candidates wins.
    """
    if tol < 1e-12:
        raise DomainError("tol must be >= 1e-12")
    xs = np.linspace(lo, hi, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(fn_vec(xs), dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf if maximize else np.inf)
    i = int(np.argmax(vals) if maximize else np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid - 1)]
    arg, val, spread, ev = _golden(fn, a, b, tol, maximize)
    evaluations = grid + ev
    if (maximize and vals[i] > val) or (not maximize and vals[i] < val):
        arg, val = float(xs[i]), float(vals[i])
    best = (arg, val)
    for c_arg, c_val in candidates:
        if (maximize and c_val > best[1]) or (not maximize and c_val < best[1]):
            best = (c_arg, c_val)
    return OptResult(best[0], float(best[1]), float(spread), evaluations)


# ---------------------------------------------------------------------------
# Potts SDPI coefficients
# ---------------------------------------------------------------------------

def eta_kl_potts_restricted(k: int, lam: float, tol: float = DEFAULT_TOL,
                            grid: int = DEFAULT_GRID) -> OptResult:
    """Input-restricted KL contraction coefficient eta_KL(PC_lam, uniform).

    Maximizes psi(lam x + (1 - lam)/k) / psi(x) over x in (1/k, 1]; the
    limit lam^2 at x -> 1/k is always a candidate.
    """
    check_lambda(k, lam)
    lam = float(min(max(lam, -1.0 / (k - 1)), 1.0))
    u = 1.0 / k
    if lam == 0.0:
        return OptResult(u, 0.0, 0.0, 0)
    lo = u + SINGULAR_EPS
    lam2 = lam * lam

    # in t = kx - 1 the channel acts as t -> lam t, with no rounding in between
    def ratio_vec(x):
        t = k * np.asarray(x) - 1.0
        return psi_of_t(k, lam * t) / psi_of_t(k, t)

    def ratio(x):
        t = k * x - 1.0
        return psi_t_scalar(k, lam * t) / psi_t_scalar(k, t)

    res = grid_golden(ratio_vec, ratio, lo, 1.0, maximize=True, tol=tol, grid=grid,
                      candidates=[(u, lam2), (1.0, ratio(1.0))])
    return res


def eta_kl_potts_unrestricted(k: int, lam: float) -> float:
    check_lambda(k, lam)
    return k * lam * lam / ((k - 2) * lam + 2)


def eta_kl_coloring(k: int) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    return (math.log(k) - math.log(k - 1)) / math.log(k)


def eta_tv(M) -> float:
    """Dobrushin coefficient: the largest total-variation distance between two rows."""
    M = as_stochastic_matrix(M)
    diff = np.abs(M[:, None, :] - M[None, :, :]).sum(axis=-1)
    return float(0.5 * diff.max())


def _upper_bound_const(k: int) -> float:
    return 2 * (k - 1) * math.log(k - 1) / (k * (k - 2))


def eta_upper_bounds(k: int, lam: float) -> float:
    """Closed-form upper bound on eta_KL(PC_lam, uniform), valid for k >= 3."""
    if k < 3:
        raise DomainError("the upper bound is only available for k >= 3")
    check_lambda(k, lam)
    c = _upper_bound_const(k)
    if lam >= 0:
        return lam * lam / ((1 - lam) * c + lam)
    col = math.log(k) / ((k - 1) * (math.log(k) - math.log(k - 1)))
    return lam * lam / ((1 + (k - 1) * lam) * c - lam * col)


def eta_small_lambda_limit(k: int) -> float:
    """Limit of eta_KL(PC_lam, uniform) / lam^2 as lam -> 0."""
    if k < 3:
        raise DomainError("small-lambda limit formula needs k >= 3")
    return k * (k - 2) / (2 * (k - 1) * math.log(k - 1))


# ---------------------------------------------------------------------------
# log-Sobolev constants
# ---------------------------------------------------------------------------

def alpha_p(k: int, p: float, tol: float = DEFAULT_TOL, grid: int = DEFAULT_GRID) -> OptResult:
    """p-log-Sobolev constant of the Potts semigroup: inf of xi_p / psi over (1/k, 1]."""
    if k < 2:
        raise DomainError("k must be >= 2")
    if p < 1:
        raise DomainError("p must be >= 1")
    u = 1.0 / k
    # both xi_p and psi vanish to second order at 1/k; psi''(1/k) = k^2/(k-1)
    limit = xi_second_derivative_at_uniform(k, p) / (k * k / (k - 1))
    lo = u + 1e-5
    hi = 1.0 - 1e-12 if p == 1 else 1.0

    def ratio_vec(x):
        return np.asarray(xi(k, p, x)) / np.asarray(psi(k, x))

    def ratio(x):
        return float(xi(k, p, x)) / psi_scalar(k, x)

    cands = [(u, limit)]
    if p > 1:
        cands.append((1.0, ratio(1.0)))
    return grid_golden(ratio_vec, ratio, lo, hi, maximize=False, tol=tol, grid=grid,
                       candidates=cands)


def alpha_2_closed(k: int) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    if k == 2:
        return 1.0
    return (k - 2) / ((k - 1) * math.log(k - 1))


def alpha_1_lower(k: int) -> float:
    if k < 3:
        raise DomainError("the lower bound is stated for k >= 3")
    return k / (k - 1) * (1 + 1 / math.log(k))


def alpha_1_upper(k: int) -> float:
    """Known upper bound (k/(k-1))(1 + 4/log(k-1)) on the 1-log-Sobolev constant."""
    if k < 3:
        raise DomainError("the upper bound is stated for k >= 3")
    return k / (k - 1) * (1 + 4 / math.log(k - 1))


# ---------------------------------------------------------------------------
# general channels
# ---------------------------------------------------------------------------

def _chi2_limit(M: np.ndarray, q: np.ndarray) -> float:
    """Limit of D(PM||qM)/D(P||q) as P -> q, maximized over directions.

    Both divergences behave like chi-square near q, so the limit is the top
    generalized eigenvalue of (M D_{qM}^{-1} M^T, D_q^{-1}) on the
    sum-zero subspace.
    """
    supp = q > 0
    if supp.sum() < 2:
        return 0.0
    Ms = M[supp]
    qs = q[supp]
    out = qs @ Ms
    osupp = out > 0
    A = Ms[:, osupp] @ np.diag(1.0 / out[osupp]) @ Ms[:, osupp].T
    B = np.diag(1.0 / qs)
    n = qs.size
    # basis of the sum-zero subspace
    V = np.linalg.qr(np.vstack([np.ones(n), np.eye(n)[:-1]]).T)[0][:, 1:]
    Av = V.T @ A @ V
    Bv = V.T @ B @ V
    L = np.linalg.cholesky(Bv)
    Li = np.linalg.inv(L)
    return float(np.max(np.linalg.eigvalsh(Li @ Av @ Li.T)))


def _boundary_limit(M: np.ndarray, q: np.ndarray, P0: np.ndarray) -> float:
    """Limit of the SKL ratio as P approaches a boundary point P0 of the simplex.

    Both divergences blow up like log(1/t); the ratio tends to the stationary
    mass of the output zeros over that of the input zeros.
    """
    Z = (P0 <= 0) & (q > 0)
    if not np.any(Z):
        return 0.0
    out0 = P0 @ M
    qM = q @ M
    Zp = (out0 <= 0) & (qM > 0)
    return float(qM[Zp].sum() / q[Z].sum())


def _prepare(M, qstar):
    M = as_stochastic_matrix(M)
    q = as_prob_vector(qstar)
    if q.size != M.shape[0]:
        raise DomainError("qstar and M have different alphabet sizes")
    return M, q


def _ratio_fn(M, q, div):
    """Divergence ratio as a function of P, evaluated from P - q.

    Numerator and denominator use the same displacement, so the ratio stays
    accurate arbitrarily close to q. Leading axes of P broadcast.
    """
    qM = q @ M

    def r(P):
        delta = np.asarray(P, dtype=float) - q
        den = np.asarray(div(q, delta))
        num = np.asarray(div(qM, delta @ M))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / den
        out = np.where(np.isfinite(out) & (den > 0), out, -np.inf)
        return float(out) if out.ndim == 0 else out

    return r


def _binary_search(M, q, div, tol, grid, boundary_limits: bool) -> OptResult:
    r = _ratio_fn(M, q, div)

    def fvec(ps):
        ps = np.asarray(ps, dtype=float)
        return r(np.stack([ps, 1.0 - ps], axis=-1))

    def fscalar(p):
        return float(fvec(np.array(p)))

    q0 = q[0]
    cands = [(q0, _chi2_limit(M, q))]
    if boundary_limits:
        for end in (0.0, 1.0):
            cands.append((end, _boundary_limit(M, q, np.array([end, 1.0 - end]))))
    best: OptResult | None = None
    evals = 0
    for lo, hi in ((0.0, q0 - SINGULAR_EPS), (q0 + SINGULAR_EPS, 1.0)):
        if hi - lo <= 1e-9:
            continue
        res = grid_golden(fvec, fscalar, lo, hi, maximize=True, tol=tol, grid=grid // 2)
        evals += res.evaluations
        if best is None or res.value > best.value:
            best = res
    for c in cands:
        if best is None or c[1] > best.value:
            best = OptResult(c[0], c[1], 0.0, 0)
    best.evaluations = evals
    best.arg = np.array([best.arg, 1.0 - best.arg])
    return best


def _softmax(z):
    z = np.concatenate([z, [0.0]])
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _multistart(M, q, div, tol, restarts, seed, boundary_limits: bool) -> OptResult:
    k = M.shape[0]
    r = _ratio_fn(M, q, div)
    rng = np.random.default_rng(seed)
    starts = []
    for i in range(k):
        # near each vertex and on the two-valued family through it
        for x in (0.99, 0.7, 0.45):
            P = np.full(k, (1 - x) / (k - 1))
            P[i] = x
            starts.append(P)
        P = np.full(k, 1.0 / (k - 1) * 0.98)
        P[i] = 0.02
        starts.append(P)
    while len(starts) < restarts:
        starts.append(rng.dirichlet(np.full(k, 0.5)))
    starts = starts[:max(restarts, 1)]

    def obj(z):
        v = r(_softmax(z))
        return -v if np.isfinite(v) else 1e300

    best_val, best_P, evals = -np.inf, None, 0
    for P in starts:
        P = np.clip(P, 1e-12, None)
        P = P / P.sum()
        z0 = np.log(P[:-1]) - np.log(P[-1])
        res = minimize(obj, z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": tol * 0.1, "maxiter": 4000})
        evals += res.nfev
        if -res.fun > best_val:
            best_val, best_P = -res.fun, _softmax(res.x)
    cands = [(q.copy(), _chi2_limit(M, q))]
    if boundary_limits:
        for i in range(k):
            e = np.zeros(k)
            e[i] = 1.0
            cands.append((e, _boundary_limit(M, q, e)))
    for P, v in cands:
        if v > best_val:
            best_val, best_P = v, P
    return OptResult(best_P, float(best_val), float(tol), evals, lower_bound=True)


def _restricted_general(M, qstar, div, tol, restarts, seed, grid, boundary_limits) -> OptResult:
    M, q = _prepare(M, qstar)
    k = M.shape[0]
    if np.count_nonzero(q) < 2:
        # D(P || q) is infinite for every P != q: the supremum is over an empty set
        return OptResult(q, 0.0, 0.0, 0)
    if np.allclose(M, np.eye(k)):
        return OptResult(q, 1.0, 0.0, 0)
    if k == 2:
        return _binary_search(M, q, div, tol, grid, boundary_limits)
    return _multistart(M, q, div, tol, restarts, seed, boundary_limits)


def eta_kl_restricted_general(M, qstar, tol: float = DEFAULT_TOL, restarts: int = 64,
                              seed: int = 0, grid: int = 4096) -> OptResult:
    """sup_P D(PM || q*M) / D(P || q*) for an arbitrary channel.

    Exact 1-D search for binary alphabets; for k >= 3 a multistart
    Nelder-Mead search whose value is flagged as a lower bound.
    """
    return _restricted_general(M, qstar, kl_displacement, tol, restarts, seed, grid, False)


def eta_skl_restricted(M, qstar, tol: float = DEFAULT_TOL, restarts: int = 64,
                       seed: int = 0, grid: int = 4096) -> OptResult:
    """Same as :func:`eta_kl_restricted_general` with symmetrized KL on both sides."""
    return _restricted_general(M, qstar, skl_displacement, tol, restarts, seed, grid, True)


def eta_skl_potts_symmetric(k: int, lam: float, tol: float = DEFAULT_TOL,
                            grid: int = DEFAULT_GRID) -> OptResult:
    """SKL ratio maximized over the two-valued family P = (x, (1-x)/(k-1), ...).

    This is a lower bound on eta_SKL(PC_lam, uniform).
    """
    check_lambda(k, lam)
    M = potts_matrix(k, lam)
    q = uniform(k)
    u = 1.0 / k
    if lam == 0.0:
        return OptResult(u, 0.0, 0.0, 0, lower_bound=True)

    def fam(x):
        P = np.full(k, (1.0 - x) / (k - 1))
        P[0] = x
        return P

    r = _ratio_fn(M, q, skl_displacement)
    # P - q along the family is (x - 1/k) (1, -1/(k-1), ...)
    direction = np.full(k, -1.0 / (k - 1))
    direction[0] = 1.0

    def fvec(xs):
        xs = np.asarray(xs, dtype=float)
        return r(q + (xs - u)[..., None] * direction)

    def fscalar(x):
        return float(fvec(np.array(x)))

    cands = [(u, lam * lam)]
    for end in (0.0, 1.0):
        cands.append((end, _boundary_limit(M, q, fam(end))))
    best, evals = None, 0
    for lo, hi in ((0.0, u - SINGULAR_EPS), (u + SINGULAR_EPS, 1.0)):
        res = grid_golden(fvec, fscalar, lo, hi, maximize=True, tol=tol, grid=grid // 2,
                          candidates=[c for c in cands if lo - 1e-6 <= c[0] <= hi + 1e-6])
        evals += res.evaluations
        if best is None or res.value > best.value:
            best = res
    if lam * lam > best.value:
        best = OptResult(u, lam * lam, 0.0, 0)
    best.evaluations = evals
    best.lower_bound = True
    return best


# ---------------------------------------------------------------------------
# envelopes and tensorization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def s_hat(k: int, lam: float) -> PiecewiseLinearFn:
    """Concave envelope of the SDPI curve s_lam on [0, log k]."""
    f = s_lambda_curve(k, lam)
    return concave_envelope(f, 0.0, math.log(k))


@lru_cache(maxsize=64)
def b_check(k: int, p: float) -> PiecewiseLinearFn:
    """Convex envelope of the NLSI curve b_p.

    b_1 diverges at log k, so its envelope is built on a truncated domain and
    extended linearly beyond it.
    """
    f = b_p_curve(k, p)
    top = b1_truncation_point(k) if p == 1 else math.log(k)
    return convex_envelope(f, 0.0, top)


def tensorized_entropy_bound(k: int, lam: float, n: int, Hx_per_symbol: float) -> float:
    """Lower bound on H(Y^n)/n given H(X^n)/n for n uses of PC_lam."""
    if n < 1:
        raise DomainError("n must be >= 1")
    top = math.log(k)
    if not (-1e-12 <= Hx_per_symbol <= top + 1e-12):
        raise DomainError("per-symbol entropy must lie in [0, log k]")
    y = min(max(top - Hx_per_symbol, 0.0), top)
    return top - float(s_hat(k, lam)(y))


def product_distribution(factors: Sequence) -> np.ndarray:
    out = np.asarray(as_prob_vector(factors[0]))
    for f in factors[1:]:
        out = np.multiply.outer(out, as_prob_vector(f))
    return out


def apply_channel_per_coordinate(M: np.ndarray, joint: np.ndarray) -> np.ndarray:
    """Push a joint law on [k]^n through M independently in every coordinate."""
    out = joint
    for axis in range(joint.ndim):
        out = np.moveaxis(np.tensordot(out, M, axes=([axis], [0])), -1, axis)
    return out


def tensorization_slack(k: int, lam: float, joint) -> float:
    """H(Y^n)/n minus its lower bound; nonnegative when the inequality holds."""
    joint = np.asarray(joint, dtype=float)
    n = joint.ndim
    if joint.shape != (k,) * n:
        raise DomainError(f"joint law must have shape {(k,) * n}")
    if abs(joint.sum() - 1) > 1e-10 or np.any(joint < 0):
        raise DomainError("joint law is not a probability distribution")
    out = apply_channel_per_coordinate(potts_matrix(k, lam), joint)
    hx = float(-np.sum(joint[joint > 0] * np.log(joint[joint > 0]))) / n
    hy = float(-np.sum(out[out > 0] * np.log(out[out > 0]))) / n
    return hy - tensorized_entropy_bound(k, lam, n, min(hx, math.log(k)))


def tensorization_check(k: int, lam: float, factors: Sequence, slack: float = 1e-10) -> bool:
    """Check the tensorized SDPI on the product of ``factors``."""
    if len(factors) < 1 or any(len(f) != k for f in factors):
        raise DomainError("each factor must be a distribution on k symbols")
    return tensorization_slack(k, lam, product_distribution(factors)) >= -slack


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("k", "lambda_or_p", "quantity", "value", "argmax", "tol")


def sweep_csv(rows: Iterable[Sequence]) -> str:
    """Format sweep rows (k, lambda_or_p, quantity, value, argmax, tol) as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for k, par, name, val, arg, tol in rows:
        w.writerow([int(k), f"{par:.12g}", name, f"{val:.12g}",
                    "" if arg is None else f"{float(np.ravel(arg)[0]):.12g}", f"{tol:.12g}"])
    return buf.getvalue()


def potts_lambda_of(M) -> float | None:
    """lambda if M is a Potts channel, else None."""
    return is_potts(np.asarray(M, dtype=float))

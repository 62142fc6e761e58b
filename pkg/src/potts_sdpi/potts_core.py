"""Scalar functions, divergences, channels and Dirichlet forms for Potts models.

Everything here works in natural logarithms and double precision. Infinite
divergences are returned as ``math.inf`` instead of raising, so callers doing
sup/inf searches can compare against them directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import rel_entr, xlog1py, xlogy


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class SizeError(ValueError):
    """A brute-force or exact computation would exceed its size cap."""


class NumericalError(ArithmeticError):
    """A numeric procedure failed (degenerate normalization, no convergence)."""


PROB_ATOL = 1e-10
ROW_ATOL = 1e-12


# ---------------------------------------------------------------------------
# channels and distributions
# ---------------------------------------------------------------------------

def lambda_range(k: int) -> tuple[float, float]:
    return -1.0 / (k - 1), 1.0


def check_lambda(k: int, lam: float) -> None:
    if k < 2 or int(k) != k:
        raise DomainError(f"alphabet size must be an integer >= 2, got {k!r}")
    lo, hi = lambda_range(k)
    # 1e-12 slack so that -1/(k-1) computed by the caller is accepted
    if not (lo - 1e-12 <= lam <= hi + 1e-12):
        raise DomainError(f"lambda={lam} outside [{lo:.6g}, 1] for k={k}")


@dataclass(frozen=True)
class PottsChannel:
    """k-ary Potts channel with second eigenvalue ``lam``."""

    k: int
    lam: float

    def __post_init__(self):
        check_lambda(self.k, self.lam)

    @classmethod
    def from_time(cls, k: int, t: float) -> "PottsChannel":
        """Kernel T_t of the Potts semigroup (random walk on K_k)."""
        if t < 0:
            raise DomainError("semigroup time must be nonnegative")
        return cls(k, math.exp(-k * t / (k - 1)))

    @classmethod
    def coloring(cls, k: int) -> "PottsChannel":
        return cls(k, -1.0 / (k - 1))

    @property
    def ferromagnetic(self) -> bool:
        return self.lam > 0

    def matrix(self) -> np.ndarray:
        return potts_matrix(self)


def potts_matrix(ch_or_k, lam: float | None = None) -> np.ndarray:
    """Stochastic matrix of a Potts channel.

    Accepts either a :class:`PottsChannel` or ``(k, lam)``.
    """
    if isinstance(ch_or_k, PottsChannel):
        k, lam = ch_or_k.k, ch_or_k.lam
    else:
        k = int(ch_or_k)
        check_lambda(k, lam)
    off = (1.0 - lam) / k
    diag = 1.0 / k + (k - 1) * lam / k
    M = np.full((k, k), off)
    np.fill_diagonal(M, diag)
    return M


def coloring_matrix(k: int) -> np.ndarray:
    """Uniform proper-coloring channel: output is uniform over the other k-1 symbols."""
    if k < 2:
        raise DomainError("coloring channel needs k >= 2")
    M = np.full((k, k), 1.0 / (k - 1))
    np.fill_diagonal(M, 0.0)
    return M


def binary_asymmetric_matrix(a: float, b: float) -> np.ndarray:
    """Binary channel flipping 0->1 with probability a and 1->0 with probability b."""
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise DomainError("flip probabilities must lie in [0, 1]")
    return np.array([[1 - a, a], [b, 1 - b]], dtype=float)


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def as_prob_vector(p: Sequence[float], atol: float = PROB_ATOL) -> np.ndarray:
    """Validate and return ``p`` as a float array on the simplex."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("probability vector must be one-dimensional and nonempty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("probability vector has negative or non-finite entries")
    if abs(p.sum() - 1.0) > atol:
        raise DomainError(f"probability vector sums to {p.sum()!r}, not 1")
    return p


def as_stochastic_matrix(M, atol: float = ROW_ATOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"channel must be a square matrix, got shape {M.shape}")
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise DomainError("channel has negative or non-finite entries")
    if np.any(np.abs(M.sum(axis=1) - 1.0) > atol):
        raise DomainError("channel rows do not sum to 1")
    return M


def apply_channel(M, P) -> np.ndarray:
    """Output distribution P M (row vector times matrix)."""
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    if P.shape[-1] != M.shape[0]:
        raise DomainError(f"dimension mismatch: P has {P.shape[-1]} entries, M has {M.shape[0]} rows")
    return P @ M


def stationary_distribution(M, tol: float = 1e-12) -> np.ndarray:
    """Solve q M = q, sum q = 1.

    Uses a direct least-squares solve of the augmented system; falls back to
    power iteration when that leaves a residual above ``tol``.
    """
    M = as_stochastic_matrix(M)
    k = M.shape[0]
    A = np.vstack([M.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    q, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    # flush least-squares round-off so transient states get exactly zero mass
    q = np.where(q > 1e-14, q, 0.0)
    if q.sum() > 0:
        q = q / q.sum()
    if q.sum() > 0 and np.max(np.abs(q @ M - q)) <= tol:
        return q
    # reducible or ill-conditioned: lazy power iteration converges to a fixed point
    q = uniform(k)
    lazy = 0.5 * (M + np.eye(k))
    for _ in range(200_000):
        nxt = q @ lazy
        if np.max(np.abs(nxt - q)) <= tol * 1e-2:
            q = nxt
            break
        q = nxt
    if np.max(np.abs(q @ M - q)) > 1e3 * tol:
        raise NumericalError("stationary distribution did not converge")
    q = np.where(q > 1e-14, q, 0.0)
    return q / q.sum()


def reverse_channel(M, qstar, atol: float = 1e-9) -> np.ndarray:
    """Time reversal of M with respect to its stationary distribution ``qstar``.

    Rows for states with zero stationary mass are unreachable under ``qstar``;
    they are filled with ``qstar`` itself so the result stays stochastic.
    """
    M = as_stochastic_matrix(M)
    q = as_prob_vector(qstar)
    if q.size != M.shape[0]:
        raise DomainError("qstar and M have different alphabet sizes")
    if np.max(np.abs(q @ M - q)) > atol:
        raise DomainError("qstar is not stationary for M")
    R = np.empty_like(M)
    for j in range(M.shape[0]):
        if q[j] > 0:
            R[j] = q * M[:, j] / q[j]
            R[j] /= R[j].sum()
        else:
            R[j] = q
    return R


def is_potts(M, atol: float = 1e-12) -> float | None:
    """Return lambda when M is a Potts channel, else None."""
    M = np.asarray(M, dtype=float)
    k = M.shape[0]
    if k < 2 or M.shape != (k, k):
        return None
    diag = np.diag(M)
    off = M[~np.eye(k, dtype=bool)]
    if np.ptp(diag) > atol or np.ptp(off) > atol:
        return None
    lam = 1.0 - k * off[0]
    lo, hi = lambda_range(k)
    if not (lo - atol <= lam <= hi + atol):
        return None
    return float(min(max(lam, lo), hi))


# ---------------------------------------------------------------------------
# psi and friends
# ---------------------------------------------------------------------------

def _check_k(k: int) -> None:
    if k < 2 or int(k) != k:
        raise DomainError(f"alphabet size must be an integer >= 2, got {k!r}")


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise DomainError("x must lie in [0, 1]")
    return x


def _scalar_or_array(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


_H_COEFFS = tuple((-1.0) ** n / (n * (n - 1)) for n in range(11, 1, -1))


def kl_h(t):
    """h(t) = (1+t) log(1+t) - t for t >= -1, accurate for small |t|.

    D(P||Q) = sum_i Q_i h(P_i/Q_i - 1), each term nonnegative.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 1e-2
    ts = t[small]
    # sum_{n>=2} (-1)^n t^n / (n(n-1))
    series = np.zeros_like(ts)
    for c in _H_COEFFS:
        series = series * ts + c
    out[small] = series * ts * ts
    tb = t[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = xlog1py(1.0 + tb, tb) - tb
    return _scalar_or_array(out)


def psi(k: int, x):
    """KL divergence from (x, (1-x)/(k-1), ..., (1-x)/(k-1)) to the uniform law.

    Written as (h(t) + (k-1) h(-t/(k-1)))/k with t = kx - 1 so that values
    near x = 1/k keep relative accuracy.
    """
    _check_k(k)
    x = _check_unit(x)
    return _scalar_or_array(_psi_raw(k, x))


def _h_scalar(t: float) -> float:
    if abs(t) < 1e-2:
        acc = 0.0
        for n in range(11, 1, -1):
            acc = acc * t + (-1.0) ** n / (n * (n - 1))
        return acc * t * t
    if t <= -1.0:
        return 1.0
    return (1.0 + t) * math.log1p(t) - t


def psi_scalar(k: int, x: float) -> float:
    """Unchecked scalar ``psi`` for inner loops."""
    return psi_t_scalar(k, k * x - 1.0)


def psi_t_scalar(k: int, t: float) -> float:
    out = (_h_scalar(t) + (k - 1) * _h_scalar(-t / (k - 1))) / k
    return out if out > 0.0 else 0.0


def psi_derivatives(k: int, x):
    """First and second derivative of ``psi`` at interior points."""
    _check_k(k)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("psi derivatives are singular at x in {0, 1}")
    d1 = np.log(x) - np.log((1.0 - x) / (k - 1))
    d2 = 1.0 / x + 1.0 / (1.0 - x)
    return _scalar_or_array(d1), _scalar_or_array(d2)


def psi_third_derivative(k: int, x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(1.0 / (1.0 - x) ** 2 - 1.0 / x ** 2)


def psi_of_t(k: int, t):
    """psi written in the centered variable t = k x - 1 in [-1, k-1]."""
    t = np.asarray(t, dtype=float)
    return np.maximum((kl_h(t) + (k - 1) * kl_h(-t / (k - 1))) / k, 0.0)


def _psi_raw(k: int, x: np.ndarray) -> np.ndarray:
    return psi_of_t(k, k * np.asarray(x, dtype=float) - 1.0)


@lru_cache(maxsize=64)
def _inverse_table(k: int) -> tuple[np.ndarray, np.ndarray]:
    # sqrt(psi) is close to linear in x near 1/k, so it interpolates well
    u = np.linspace(0.0, 1.0, 4097)
    xs = 1.0 / k + (1.0 - 1.0 / k) * u
    return np.sqrt(_psi_raw(k, xs)), xs


def psi_inv_right(k: int, y, iters: int = 4):
    """Inverse of ``psi`` on its increasing branch [1/k, 1].

    Starts from a tabulated guess and runs safeguarded Newton steps on
    sqrt(psi(x)) - sqrt(y), falling back to bisection when a step leaves the
    current bracket. The result is accurate to a few ulps.
    """
    _check_k(k)
    y = np.asarray(y, dtype=float)
    top = math.log(k)
    if np.any(y < -1e-15) or np.any(y > top * (1 + 1e-15)) or np.any(np.isnan(y)):
        raise DomainError(f"y must lie in [0, log k] = [0, {top}]")
    y = np.clip(y, 0.0, top)
    sy = np.sqrt(y)
    su, tx = _inverse_table(k)
    j = np.clip(np.searchsorted(su, sy), 1, su.size - 1)
    lo, hi = tx[j - 1], tx[j]
    w = (sy - su[j - 1]) / (su[j] - su[j - 1])
    x = lo + w * (hi - lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(iters):
            p = _psi_raw(k, x)
            sp = np.sqrt(p)
            g = sp - sy
            hi = np.where(g > 0, np.minimum(hi, x), hi)
            lo = np.where(g <= 0, np.maximum(lo, x), lo)
            slope = (np.log(x) - np.log((1.0 - x) / (k - 1))) / (2.0 * sp)
            nxt = x - g / slope
            ok = np.isfinite(nxt) & (nxt >= lo) & (nxt <= hi)
            x = np.where(ok, nxt, 0.5 * (lo + hi))
    x = np.where(y <= 0.0, 1.0 / k, np.where(y >= top, 1.0, x))
    return _scalar_or_array(x)


def _two_valued_log_ratio(k: int, x: np.ndarray) -> np.ndarray:
    """log(x / x') with x' = (1-x)/(k-1); +-inf at the endpoints."""
    with np.errstate(divide="ignore"):
        return np.log(x) - np.log((1.0 - x) / (k - 1))


def xi_p(k: int, p: float, x):
    """Dirichlet form E(f^{1/p}, f^{1-1/p}) along the two-valued family, p > 1.

    Here f = k P with P = (x, x', ..., x'), x' = (1-x)/(k-1), so E_pi f = 1.
    On this family the form factors as
    ((kx)^r - (kx')^r) ((kx)^{1-r} - (kx')^{1-r}) / k, written with expm1 so
    that it keeps relative accuracy near x = 1/k.
    """
    _check_k(k)
    if p <= 1:
        raise DomainError("xi_p requires p > 1; use xi_1 for p = 1")
    x = _check_unit(x)
    r = 1.0 / p
    rest = (1.0 - x) / (k - 1)
    d = _two_valued_log_ratio(k, x)
    with np.errstate(invalid="ignore", over="ignore"):
        g = np.where(np.isfinite(d), (k * rest) ** r * np.expm1(r * d), (k * x) ** r - (k * rest) ** r)
        h = np.where(np.isfinite(d), (k * rest) ** (1 - r) * np.expm1((1 - r) * d),
                     (k * x) ** (1 - r) - (k * rest) ** (1 - r))
    return _scalar_or_array(g * h / k)


def xi_1(k: int, x):
    """Dirichlet form E(f, log f) along the two-valued family: (x - x') log(x / x').

    Returns ``inf`` at x in {0, 1}, where a logarithm diverges.
    """
    _check_k(k)
    x = _check_unit(x)
    rest = (1.0 - x) / (k - 1)
    out = (x - rest) * _two_valued_log_ratio(k, x)
    out = np.where((x <= 0) | (x >= 1), np.inf, out)
    return _scalar_or_array(out)


def xi(k: int, p: float, x):
    return xi_1(k, x) if p == 1 else xi_p(k, p, x)


def xi_second_derivative_at_uniform(k: int, p: float) -> float:
    """Curvature of xi_p at x = 1/k (where xi_p and its slope vanish)."""
    if p == 1:
        return 2.0 * k ** 3 / (k - 1) ** 2
    r = 1.0 / p
    return 2.0 * r * (1 - r) * k ** 3 / (k - 1) ** 2


# ---------------------------------------------------------------------------
# real functions on an interval
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealFn:
    """A vectorized real function together with its closed domain [a, b]."""

    func: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    name: str = ""

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self.a - 1e-12) or np.any(y > self.b + 1e-12):
            raise DomainError(f"argument outside [{self.a}, {self.b}]")
        return _scalar_or_array(self.func(np.clip(y, self.a, self.b)))


def b_p_curve(k: int, p: float) -> RealFn:
    """Optimal p-NLSI curve: Dirichlet form as a function of entropy."""
    _check_k(k)
    if p < 1:
        raise DomainError("p must be >= 1")

    def f(y):
        return np.asarray(xi(k, p, psi_inv_right(k, y)))

    return RealFn(f, 0.0, math.log(k), name=f"b_{p:g}(k={k})")


def s_lambda_curve(k: int, lam: float) -> RealFn:
    """Optimal input-restricted SDPI curve of the Potts channel."""
    check_lambda(k, lam)

    def f(y):
        x = np.asarray(psi_inv_right(k, y))
        z = np.clip(lam * x + (1 - lam) / k, 0.0, 1.0)
        return np.asarray(psi(k, z))

    return RealFn(f, 0.0, math.log(k), name=f"s_{lam:g}(k={k})")


# ---------------------------------------------------------------------------
# entropies and divergences
# ---------------------------------------------------------------------------

def entropy(P) -> float:
    P = np.asarray(P, dtype=float)
    return float(-np.sum(xlogy(P, P)))


def kl(P, Q) -> float:
    """D(P || Q) in nats; ``inf`` when P is not absolutely continuous w.r.t. Q."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise DomainError("distributions have different shapes")
    return float(np.sum(rel_entr(P, Q)))


def skl(P, Q) -> float:
    return kl(P, Q) + kl(Q, P)


def kl_displacement(Q, delta):
    """D(Q + delta || Q), computed from the displacement for accuracy near Q.

    Broadcasts over leading axes of ``delta``; the last axis is the alphabet.
    """
    Q = np.asarray(Q, dtype=float)
    delta = np.asarray(delta, dtype=float)
    pos = Q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(pos, delta / np.where(pos, Q, 1.0), 0.0)
        terms = np.where(pos, Q * kl_h(np.maximum(t, -1.0)), np.where(delta > 0, np.inf, 0.0))
    return _scalar_or_array(terms.sum(axis=-1))


def skl_displacement(Q, delta):
    """D(P||Q) + D(Q||P) with P = Q + delta: sum_i delta_i log(1 + delta_i/Q_i)."""
    Q = np.asarray(Q, dtype=float)
    delta = np.asarray(delta, dtype=float)
    pos = Q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(pos, delta / np.where(pos, Q, 1.0), 0.0)
        terms = np.where(pos, xlog1py(delta, np.maximum(t, -1.0)),
                         np.where(delta > 0, np.inf, 0.0))
    terms = np.where(np.isnan(terms), np.inf, terms)
    return _scalar_or_array(terms.sum(axis=-1))


# ---------------------------------------------------------------------------
# Dirichlet form of the Potts semigroup
# ---------------------------------------------------------------------------

def dirichlet_form(k: int, f, g) -> float:
    """E(f, g) = -E_pi[(L f) g] for the random walk on the complete graph K_k."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (k,) or g.shape != (k,):
        raise DomainError(f"f and g must have length k={k}")
    return float(-f.sum() * g.sum() / (k * (k - 1)) + f @ g / (k - 1))


def dirichlet_r(k: int, f, r: float) -> float:
    """E(f^r, f^{1-r}) for strictly positive f."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("dirichlet_r needs strictly positive f")
    return dirichlet_form(k, f ** r, f ** (1 - r))


def entropy_form(f) -> float:
    """Ent_pi(f) = E_pi[f log(f / E_pi f)] under the uniform measure."""
    f = np.asarray(f, dtype=float)
    m = f.mean()
    return float(np.mean(xlogy(f, f / m)))


def nlsi_dirichlet(k: int, f, p: float) -> float:
    """The Dirichlet-form side of the p-NLSI: E(f, log f) for p = 1, else E(f^{1/p}, f^{1-1/p})."""
    f = np.asarray(f, dtype=float)
    if p == 1:
        if np.any(f <= 0):
            raise DomainError("E(f, log f) needs strictly positive f")
        return dirichlet_form(k, f, np.log(f))
    return dirichlet_r(k, f, 1.0 / p)

"""Piecewise-linear concave/convex envelopes and non-convexity certificates."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .potts_core import DomainError, NumericalError, psi

DEFAULT_GRID = 4097
DEFAULT_REFINE_TOL = 1e-10
# vertical distance (relative to max |f|) below which a hull point counts as collinear
COLLINEAR_TOL = 1e-13
MAX_POINTS = 2_000_000


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Linear interpolation through breakpoints ``(xs[i], ys[i])``.

    Outside ``[xs[0], xs[-1]]`` the first/last piece is extended linearly.
    """

    xs: np.ndarray
    ys: np.ndarray
    kind: str = "concave"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise DomainError("need at least two breakpoints with matching x and y")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("breakpoint x values must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def a(self) -> float:
        return float(self.xs[0])

    @property
    def b(self) -> float:
        return float(self.xs[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.ys) / np.diff(self.xs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.xs, self.ys)
        s = self.slopes
        left = x < self.xs[0]
        right = x > self.xs[-1]
        if np.any(left) or np.any(right):
            out = np.where(left, self.ys[0] + s[0] * (x - self.xs[0]), out)
            out = np.where(right, self.ys[-1] + s[-1] * (x - self.xs[-1]), out)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, fh=None) -> str:
        """Write ``x,y`` rows with 12 significant digits; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in zip(self.xs, self.ys):
            w.writerow([f"{x:.12g}", f"{y:.12g}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, kind: str = "concave") -> "PiecewiseLinearFn":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] == ["x", "y"]:
            rows = rows[1:]
        xs = [float(r[0]) for r in rows if r]
        ys = [float(r[1]) for r in rows if r]
        return cls(np.array(xs), np.array(ys), kind)


def _sample_adaptive(f, a: float, b: float, grid_n: int, refine_tol: float):
    """Sample f on a uniform grid, then bisect intervals where f is not locally linear."""
    if grid_n < 16:
        raise DomainError("grid_n must be at least 16")
    if not b > a:
        raise DomainError("empty interval")
    xs = np.linspace(a, b, grid_n)
    if isinstance(f, PiecewiseLinearFn):
        # sample a piecewise-linear input at its own kinks
        inner = f.xs[(f.xs > a) & (f.xs < b)]
        xs = np.union1d(xs, inner)
    ys = np.asarray(f(xs), dtype=float)
    if not np.all(np.isfinite(ys)):
        bad = xs[~np.isfinite(ys)]
        raise NumericalError(f"non-finite sample at x={bad[0]!r}")
    scale = max(1.0, float(np.max(np.abs(ys)))) if refine_tol > 0 else 0.0
    min_width = 1e-14 * max(1.0, b - a)
    active = np.ones(xs.size - 1, dtype=bool)
    while refine_tol > 0 and np.any(active) and xs.size < MAX_POINTS:
        idx = np.flatnonzero(active)
        mids = 0.5 * (xs[idx] + xs[idx + 1])
        ym = np.asarray(f(mids), dtype=float)
        if not np.all(np.isfinite(ym)):
            raise NumericalError(f"non-finite sample at x={mids[~np.isfinite(ym)][0]!r}")
        dev = np.abs(ym - 0.5 * (ys[idx] + ys[idx + 1]))
        split = (dev > scale * refine_tol) & (xs[idx + 1] - xs[idx] > min_width)
        # keep every evaluated midpoint; only split intervals stay active
        xs = np.insert(xs, idx + 1, mids)
        ys = np.insert(ys, idx + 1, ym)
        new_active = np.zeros(xs.size - 1, dtype=bool)
        pos = idx + np.arange(idx.size)  # left half of interval idx after insertion
        new_active[pos] = split
        new_active[pos + 1] = split
        active = new_active
    return xs, ys


def _prune_dents(xs: np.ndarray, ys: np.ndarray, eps: float):
    """Drop points lying clearly below the chord of their neighbours.

    Such points are never hull vertices, so whole passes can be removed at once.
    Stops once a pass removes under 1% of the points; the long tail of one-point
    passes (under a bridging segment) is left to the monotone chain.
    """
    while xs.size > 2:
        chord = ys[:-2] + (ys[2:] - ys[:-2]) * (xs[1:-1] - xs[:-2]) / (xs[2:] - xs[:-2])
        dent = ys[1:-1] < chord - eps
        n_dent = int(np.count_nonzero(dent))
        if n_dent == 0:
            break
        keep = np.ones(xs.size, dtype=bool)
        keep[1:-1] = ~dent
        xs, ys = xs[keep], ys[keep]
        if n_dent < 0.01 * xs.size:
            break
    return xs, ys


def _upper_hull(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = max(1.0, float(np.max(np.abs(ys))))
    eps = COLLINEAR_TOL * scale
    xs, ys = _prune_dents(xs, ys, eps)
    hx: list[float] = []
    hy: list[float] = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        while len(hx) >= 2:
            ox, oy, mx, my = hx[-2], hy[-2], hx[-1], hy[-1]
            chord = oy + (y - oy) * (mx - ox) / (x - ox)
            if my - chord <= eps:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(x)
        hy.append(y)
    return np.array(hx), np.array(hy)


def concave_envelope(f, a: float, b: float, grid_n: int = DEFAULT_GRID,
                     refine_tol: float = DEFAULT_REFINE_TOL) -> PiecewiseLinearFn:
    """Smallest concave piecewise-linear majorant of the samples of f on [a, b]."""
    xs, ys = _sample_adaptive(f, a, b, grid_n, refine_tol)
    hx, hy = _upper_hull(xs, ys)
    return PiecewiseLinearFn(hx, hy, "concave")


def convex_envelope(f, a: float, b: float, grid_n: int = DEFAULT_GRID,
                    refine_tol: float = DEFAULT_REFINE_TOL) -> PiecewiseLinearFn:
    """Largest convex piecewise-linear minorant of the samples of f on [a, b]."""
    xs, ys = _sample_adaptive(f, a, b, grid_n, refine_tol)
    hx, hy = _upper_hull(xs, -ys)
    return PiecewiseLinearFn(hx, -hy, "convex")


def linear_piece_near_zero(f, envelope: PiecewiseLinearFn, tol: float = 1e-12,
                           probes: int = 257) -> tuple[float, float] | None:
    """Initial interval on which the envelope detaches from f, if any.

    The candidate piece is the first hull segment ``[a, c]``. It counts as a
    linear piece when the envelope strictly dominates f (from above for a
    concave envelope, from below for a convex one) by more than
    ``tol * max(1, |f|)`` somewhere inside it. Interpolation error of the
    opposite sign is ignored.
    """
    a, c = float(envelope.xs[0]), float(envelope.xs[1])
    inner = np.linspace(a, c, probes + 2)[1:-1]
    fv = np.asarray(f(inner), dtype=float)
    gap = envelope(inner) - fv
    if envelope.kind == "convex":
        gap = -gap
    scale = max(1.0, float(np.max(np.abs(envelope.ys))))
    if np.max(gap) > tol * scale:
        return (a, c)
    return None


def envelope_gap(f, envelope: PiecewiseLinearFn, ys) -> np.ndarray:
    """Signed gap envelope - f at the given points."""
    ys = np.asarray(ys, dtype=float)
    return envelope(ys) - np.asarray(f(ys), dtype=float)


def nonconvexity_certificate(k: int, kind: str, param: float | None = None) -> float:
    """Sign certificate (g''f''' - f''g''')(1/k) with g = psi.

    ``kind`` is ``"b1"``, ``"bp"`` (``param`` = p > 1) or ``"s"`` (``param`` =
    lambda). A positive value means the curve has a linear piece in its
    envelope near 0; for k = 2 the value is 0.
    """
    if k < 2:
        raise DomainError("k must be >= 2")
    base = (k - 2) / (k - 1) ** 3
    if kind == "b1":
        return k ** 6 * base
    if kind == "bp":
        if param is None or param <= 1:
            raise DomainError("bp certificate needs p > 1")
        r = 1.0 / param
        return r * (1 - r) * k ** 6 * base
    if kind == "s":
        if param is None:
            raise DomainError("s certificate needs lambda")
        lam = float(param)
        return k ** 5 * base * (lam ** 2 - lam ** 3)
    raise DomainError(f"unknown certificate kind {kind!r}")


def b1_truncation_point(k: int, x_max: float = 1.0 - 1e-8) -> float:
    """Right end of the domain used for the envelope of b_1, which diverges at log k."""
    return float(psi(k, x_max))


__all__ = [
    "PiecewiseLinearFn",
    "concave_envelope",
    "convex_envelope",
    "linear_piece_near_zero",
    "envelope_gap",
    "nonconvexity_certificate",
    "b1_truncation_point",
    "DEFAULT_GRID",
    "DEFAULT_REFINE_TOL",
]

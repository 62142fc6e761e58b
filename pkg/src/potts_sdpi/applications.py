"""Stochastic block model impossibility regions and edge isoperimetry on Hamming graphs."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .contraction import b_check, eta_kl_potts_restricted
from .potts_core import DomainError, SizeError
from .tree_recon import default_threads, info_percolation_threshold

BRUTE_FORCE_CAP = 16
LINDSEY_CAP = 32


# ---------------------------------------------------------------------------
# stochastic block model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SbmParams:
    """Symmetric k-community SBM with edge intensities a/n inside and b/n across."""

    a: float
    b: float
    k: int

    def __post_init__(self):
        if self.k < 2 or int(self.k) != self.k:
            raise DomainError("k must be an integer >= 2")
        if self.a < 0 or self.b < 0:
            raise DomainError("a and b must be nonnegative")
        if self.a + (self.k - 1) * self.b <= 0:
            raise DomainError("a + (k-1) b must be positive")

    @property
    def d(self) -> float:
        return (self.a + (self.k - 1) * self.b) / self.k

    @property
    def lam(self) -> float:
        lam = (self.a - self.b) / (self.a + (self.k - 1) * self.b)
        return min(max(lam, -1.0 / (self.k - 1)), 1.0)


class Verdict(NamedTuple):
    impossible: bool
    margin: float


def sbm_eta(params: SbmParams) -> float:
    return eta_kl_potts_restricted(params.k, params.lam).value


def sbm_impossible_theorem(params: SbmParams, eta: float | None = None) -> Verdict:
    """Weak recovery is impossible when d * eta_KL(PC_lam, uniform) < 1."""
    if eta is None:
        eta = sbm_eta(params)
    prod = params.d * eta
    return Verdict(bool(prod < 1), 1.0 - prod)


def sbm_impossible_bmnn(params: SbmParams) -> bool:
    """(a-b)^2 / (a+(k-1)b) < 2k log(k-1)/(k-1).

    For k = 2 the right side is 0 and only a = b qualifies.
    """
    k = params.k
    if k == 2:
        return params.a == params.b
    lhs = (params.a - params.b) ** 2 / (params.a + (k - 1) * params.b)
    return bool(lhs < 2 * k * math.log(k - 1) / (k - 1))


def sbm_impossible_infoperc(params: SbmParams) -> bool:
    lhs = (math.sqrt(params.a) - math.sqrt(params.b)) ** 2
    return bool(lhs < info_percolation_threshold(params.k))


SBM_COLUMNS = ("a", "b", "d", "lambda", "eta", "thm5", "bmnn", "infoperc")


def sbm_point(params: SbmParams) -> dict:
    eta = sbm_eta(params)
    thm = sbm_impossible_theorem(params, eta)
    return {
        "a": params.a, "b": params.b, "d": params.d, "lambda": params.lam, "eta": eta,
        "thm5": thm.impossible, "thm5_margin": thm.margin,
        "bmnn": sbm_impossible_bmnn(params), "infoperc": sbm_impossible_infoperc(params),
    }


def sbm_region_sweep(k: int, a_max: float, b_max: float, step: float,
                     threads: int | None = None) -> list[dict]:
    """Evaluate the three impossibility criteria on the grid a, b in (0, max] with spacing step."""
    if not step > 0:
        raise DomainError("step must be positive")
    if a_max <= 0 or b_max <= 0:
        raise DomainError("grid bounds must be positive")
    avals = step * np.arange(1, int(math.floor(a_max / step + 1e-9)) + 1)
    bvals = step * np.arange(1, int(math.floor(b_max / step + 1e-9)) + 1)
    pts = [SbmParams(float(a), float(b), k) for a in avals for b in bvals]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(sbm_point, pts))
    return [sbm_point(p) for p in pts]


# ---------------------------------------------------------------------------
# edge isoperimetry on K_k^n
# ---------------------------------------------------------------------------

def _check_knm(k: int, n: int, m: int) -> None:
    if k < 2 or n < 0 or not (0 <= m <= n):
        raise DomainError("need k >= 2 and 0 <= m <= n")


def isoperimetry_exact(k: int, n: int, m: int) -> int:
    """Minimal edge boundary of a k^m-vertex subset of the Hamming graph K_k^n."""
    _check_knm(k, n, m)
    return (n - m) * (k - 1) * k ** m


def isoperimetry_lsi_bound(k: int, n: int, m: int) -> float:
    """Lower bound from the 2-log-Sobolev constant (k >= 3)."""
    _check_knm(k, n, m)
    if k < 3:
        raise DomainError("the 2-LSI bound needs k >= 3")
    return k ** m * (n - m) * (k - 2) * math.log(k) / math.log(k - 1)


def isoperimetry_nlsi_bound(k: int, n: int, m: int) -> float:
    """Lower bound from the convexified 2-NLSI curve."""
    _check_knm(k, n, m)
    if n == 0 or m == n:
        return 0.0
    y = (n - m) * math.log(k) / n
    return (k - 1) * k ** m * n * float(b_check(k, 2.0)(y))


def hamming_edges(k: int, n: int) -> np.ndarray:
    """Edges (u, v), u < v, of K_k^n with vertices indexed in base k (first coordinate most significant)."""
    V = k ** n
    digits = (np.arange(V)[:, None] // k ** np.arange(n - 1, -1, -1)[None, :]) % k
    edges = []
    for pos in range(n):
        w = k ** (n - 1 - pos)
        for delta in range(1, k):
            u = np.flatnonzero(digits[:, pos] + delta < k)
            edges.append(np.stack([u, u + delta * w], axis=1))
    if not edges:
        return np.zeros((0, 2), dtype=int)
    return np.concatenate(edges)


def edge_boundary(k: int, n: int, subset) -> int:
    """|E(S, S^c)| for a set of vertex indices S."""
    mask = np.zeros(k ** n, dtype=bool)
    mask[list(subset)] = True
    E = hamming_edges(k, n)
    return int(np.count_nonzero(mask[E[:, 0]] != mask[E[:, 1]]))


def edge_boundary_bruteforce(k: int, n: int, N: int) -> int:
    """Minimum edge boundary over all N-subsets of K_k^n, by exhaustive enumeration."""
    V = k ** n
    if V > BRUTE_FORCE_CAP:
        raise SizeError(f"k^n = {V} exceeds the brute-force cap {BRUTE_FORCE_CAP}")
    if not 0 <= N <= V:
        raise DomainError("N must lie in [0, k^n]")
    masks = np.arange(1 << V, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(V)[None, :]) & 1).astype(np.int8)
    keep = bits.sum(axis=1) == N
    bits = bits[keep]
    E = hamming_edges(k, n)
    cut = (bits[:, E[:, 0]] != bits[:, E[:, 1]]).sum(axis=1)
    return int(cut.min())


def lindsey_set(k: int, n: int, N: int) -> tuple[set[tuple[int, ...]], int]:
    """The N lexicographically largest strings of [k]^n and their edge boundary."""
    V = k ** n
    if V > LINDSEY_CAP:
        raise SizeError(f"k^n = {V} exceeds the cap {LINDSEY_CAP}")
    if not 0 <= N <= V:
        raise DomainError("N must lie in [0, k^n]")
    top = list(itertools.product(range(k), repeat=n))[V - N:]
    return set(top), edge_boundary(k, n, range(V - N, V))


ISO_COLUMNS = ("k", "n", "m", "exact", "lsi_bound", "nlsi_bound", "bruteforce_or_NA")


def isoperimetry_table(k: int, n: int) -> list[dict]:
    rows = []
    for m in range(n + 1):
        brute = edge_boundary_bruteforce(k, n, k ** m) if k ** n <= BRUTE_FORCE_CAP else None
        rows.append({
            "k": k, "n": n, "m": m,
            "exact": isoperimetry_exact(k, n, m),
            "lsi_bound": isoperimetry_lsi_bound(k, n, m) if k >= 3 else None,
            "nlsi_bound": isoperimetry_nlsi_bound(k, n, m),
            "bruteforce_or_NA": brute,
        })
    return rows

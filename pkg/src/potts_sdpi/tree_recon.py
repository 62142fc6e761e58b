"""Broadcast models on trees: non-reconstruction certificates, thresholds and simulators."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

from .contraction import eta_kl_potts_restricted, eta_kl_restricted_general
from .potts_core import (
    DomainError,
    NumericalError,
    SizeError,
    as_prob_vector,
    as_stochastic_matrix,
    is_potts,
    reverse_channel,
    stationary_distribution,
)

EXACT_CAP = 10 ** 7


@dataclass(frozen=True)
class TreeSpec:
    """An infinite rooted tree, described by its growth.

    ``variant`` is ``"regular"`` (every node has ``d`` children),
    ``"gw"`` (Galton-Watson with Poisson(d) offspring) or ``"explicit"``
    (only the branching number is known).
    """

    variant: str
    d: float

    def __post_init__(self):
        if self.variant not in ("regular", "gw", "explicit"):
            raise DomainError(f"unknown tree variant {self.variant!r}")
        if self.variant == "regular" and (self.d < 1 or int(self.d) != self.d):
            raise DomainError("regular trees need an integer degree d >= 1")
        if not self.d > 0:
            raise DomainError("tree parameter must be positive")

    @classmethod
    def regular(cls, d: int) -> "TreeSpec":
        return cls("regular", int(d))

    @classmethod
    def galton_watson(cls, mean: float) -> "TreeSpec":
        return cls("gw", float(mean))

    @classmethod
    def explicit(cls, br: float) -> "TreeSpec":
        return cls("explicit", float(br))

    @classmethod
    def parse(cls, text: str) -> "TreeSpec":
        """Parse ``regular:7``, ``gw:3.5`` or ``br:2.2``."""
        kind, _, val = text.partition(":")
        kind = kind.strip().lower()
        try:
            num = float(val)
        except ValueError:
            raise DomainError(f"cannot parse tree spec {text!r}") from None
        if kind == "regular":
            if num != int(num):
                raise DomainError("regular tree degree must be an integer")
            return cls.regular(int(num))
        if kind in ("gw", "poisson"):
            return cls.galton_watson(num)
        if kind in ("br", "explicit"):
            return cls.explicit(num)
        raise DomainError(f"cannot parse tree spec {text!r}")

    @property
    def branching_number(self) -> float:
        # GW(d): equals d almost surely on non-extinction
        return float(self.d)

    def __str__(self) -> str:
        tag = {"regular": "regular", "gw": "gw", "explicit": "br"}[self.variant]
        return f"{tag}:{self.d:g}"


class Certificate(NamedTuple):
    certified: bool
    margin: float
    eta: float
    br: float

    @property
    def product(self) -> float:
        return self.eta * self.br


def certificate_eta(M, qstar) -> float:
    """eta_KL of the reverse channel with reference input qstar.

    Uses the exact one-dimensional formula when M is a Potts channel and
    qstar is uniform; otherwise the multistart search (a lower bound).
    """
    M = as_stochastic_matrix(M)
    q = as_prob_vector(qstar)
    if q.size != M.shape[0]:
        raise DomainError("qstar and M have different alphabet sizes")
    if np.max(np.abs(q @ M - q)) > 1e-9:
        raise DomainError("qstar is not stationary for M")
    k = M.shape[0]
    lam = is_potts(M)
    if lam is not None and np.allclose(q, 1.0 / k, atol=1e-12):
        return eta_kl_potts_restricted(k, lam).value
    return eta_kl_restricted_general(reverse_channel(M, q), q).value


def nonreconstruction_certificate(M, qstar, tree: TreeSpec) -> Certificate:
    """Sufficient condition eta * br(T) < 1 for non-reconstruction.

    ``certified=False`` is inconclusive, not a proof of reconstruction.
    """
    eta = certificate_eta(M, qstar)
    br = tree.branching_number
    prod = eta * br
    return Certificate(bool(prod < 1), 1.0 - prod, float(eta), br)


def coloring_threshold(k: int) -> float:
    """Branching number below which the k-coloring broadcast is certified."""
    if k < 2:
        raise DomainError("k must be >= 2")
    return math.log(k) / (math.log(k) - math.log(k - 1))


def kesten_stigum(k: int, lam: float, d: float) -> bool:
    """True when d lam^2 > 1, i.e. reconstruction holds by the second-eigenvalue bound."""
    if k < 2:
        raise DomainError("k must be >= 2")
    return d * lam * lam > 1


def info_percolation_threshold(k: int) -> float:
    if k < 2:
        raise DomainError("k must be >= 2")
    eta = (math.log(k) - math.log(k - 1)) / math.log(k)
    return 1.0 / (eta * (k - 1) / k + 1.0 / k)


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

def leaf_likelihoods(M, d: int, depth: int) -> list[np.ndarray]:
    """Likelihood tables P(leaves at depth h | root spin) for h = 1..depth.

    Row sigma of the h-th table is a distribution over the k^(d^h) leaf
    configurations of a d-ary tree.
    """
    M = as_stochastic_matrix(M)
    k = M.shape[0]
    if d < 1 or depth < 0:
        raise DomainError("need d >= 1 and depth >= 0")
    if depth and float(k) ** (d ** depth) > EXACT_CAP:
        raise SizeError(f"k^(d^depth) = {k}^{d ** depth} exceeds the cap {EXACT_CAP}")
    out = []
    L = np.eye(k)  # depth 0: the root itself is observed
    for _ in range(depth):
        G = M @ L  # one subtree hanging off a child edge
        L = G
        for _ in range(d - 1):
            L = (L[:, :, None] * G[:, None, :]).reshape(k, -1)
        out.append(L)
    return out


def mutual_information(prior, L: np.ndarray) -> float:
    """I(root; observation) for root law ``prior`` and likelihood table L."""
    prior = np.asarray(prior, dtype=float)
    joint = prior[:, None] * L
    marg = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, L / np.where(marg > 0, marg, 1.0)[None, :], 1.0)
    return float(np.sum(xlogy(joint, ratio)))


def exact_tree_mi(M, prior, d: int, depth: int) -> np.ndarray:
    """Exact I(root spin; spins at depth h) for h = 1..depth on the d-ary tree."""
    prior = as_prob_vector(prior)
    M = as_stochastic_matrix(M)
    if prior.size != M.shape[0]:
        raise DomainError("prior and M have different alphabet sizes")
    return np.array([mutual_information(prior, L) for L in leaf_likelihoods(M, d, depth)])


# ---------------------------------------------------------------------------
# population dynamics
# ---------------------------------------------------------------------------

@dataclass
class PopulationResult:
    """Per-level estimates of I(root; depth-h spins), h = 1..depth.

    ``stderr`` is the batch-means standard error over ``replicas``
    independent sub-populations.
    """

    mi: np.ndarray
    stderr: np.ndarray
    pool_size: int
    seed: int
    replicas: int = 1

    def rows(self):
        for h, (m, s) in enumerate(zip(self.mi, self.stderr), start=1):
            yield h, float(m), float(s), self.pool_size, self.seed


def default_threads() -> int:
    env = os.environ.get("POTTS_SDPI_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"POTTS_SDPI_THREADS must be an integer, got {env!r}") from None
    return 1


def _combine(children: np.ndarray, mask, Mt_over_pi, log_pi, level) -> np.ndarray:
    """BP rule f(sigma) ~ pi(sigma) prod_j sum_s' M(sigma, s') f_j(s') / pi(s')."""
    n, _, k = children.shape
    logf = np.broadcast_to(log_pi, (n, k)).copy()
    if children.shape[1]:
        msg = children @ Mt_over_pi
        with np.errstate(divide="ignore"):
            lm = np.log(msg)
        if mask is not None:
            lm = np.where(mask[..., None], lm, 0.0)
        logf += lm.sum(axis=1)
    top = logf.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericalError(f"all-zero posterior at level {level}")
    f = np.exp(logf - top)
    f /= f.sum(axis=1, keepdims=True)
    return f


def _offspring(rng, n, deg, mean):
    if mean is None:
        return deg, None
    counts = rng.poisson(mean, size=n)
    width = int(counts.max()) if n else 0
    return width, np.arange(width)[None, :] < counts[:, None]


def population_dynamics(M, d: float, k: int | None = None, depth: int = 10,
                        pool_size: int = 100_000, seed: int = 1, *,
                        galton_watson: bool = False, threads: int | None = None,
                        replicas: int = 16) -> PopulationResult:
    """Density-evolution estimate of I(root; leaves at depth h).

    Keeps pools of root posteriors given the depth-h leaves, conditioned on
    the root spin. I_h averages kl(posterior, pi) over the pools, weighted by
    the stationary law pi. For Potts channels a single pool conditioned on
    root spin 0 is kept and the others are obtained by relabeling colors;
    every new entry gets a random relabeling of the non-root colors, which
    keeps the finite pool from drifting away from color symmetry.

    The pool is split into ``replicas`` independent sub-populations that
    only sample from themselves; the standard error is computed across them.
    Random streams are keyed by (seed, level, replica), so the output does
    not depend on ``threads``.
    """
    M = as_stochastic_matrix(M)
    if k is None:
        k = M.shape[0]
    if M.shape[0] != k:
        raise DomainError(f"channel is {M.shape[0]}x{M.shape[0]}, expected k={k}")
    if pool_size < 1000:
        raise DomainError("pool_size must be >= 1000")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if replicas < 2 or pool_size // replicas < 64:
        raise DomainError("need at least 2 replicas of at least 64 entries each")
    if galton_watson:
        if not d > 0:
            raise DomainError("mean offspring must be positive")
        mean, deg = float(d), None
    else:
        if d < 1 or int(d) != d:
            raise DomainError("regular trees need an integer d >= 1")
        mean, deg = None, int(d)
    threads = default_threads() if threads is None else max(1, int(threads))
    pi = stationary_distribution(M)
    if np.any(pi <= 0):
        raise DomainError("stationary law must have full support")
    log_pi = np.log(pi)
    Mt_over_pi = (M / pi[None, :]).T
    N = int(pool_size)
    bounds = np.linspace(0, N, replicas + 1).astype(int)
    symmetric = is_potts(M) is not None
    spins = 1 if symmetric else k
    # swap[c] relabels a spin-0 posterior as a spin-c posterior
    swap = np.tile(np.arange(k), (k, 1))
    swap[np.arange(k), 0] = np.arange(k)
    swap[np.arange(k), np.arange(k)] = 0

    pools = np.zeros((spins, N, k))
    pools[np.arange(spins), :, np.arange(spins)] = 1.0

    def work(g, level, pools):
        g0, g1 = bounds[g], bounds[g + 1]
        n = g1 - g0
        rng = np.random.default_rng(np.random.SeedSequence([seed, level, g]))
        out = np.empty((spins, n, k))
        for s in range(spins):
            width, mask = _offspring(rng, n, deg, mean)
            child = rng.choice(k, size=(n, width), p=M[s])
            idx = rng.integers(g0, g1, size=(n, width))
            if symmetric:
                F = np.take_along_axis(pools[0][idx], swap[child], axis=-1)
            else:
                F = pools[child, idx]
            f = _combine(F, mask, Mt_over_pi, log_pi, level)
            if symmetric and k > 2:
                perm = np.argsort(rng.random((n, k - 1)), axis=1) + 1
                perm = np.concatenate([np.zeros((n, 1), dtype=int), perm], axis=1)
                f = np.take_along_axis(f, perm, axis=1)
            out[s] = f
        return out

    mi = np.empty(depth)
    se = np.empty(depth)
    weights = np.ones(1) if symmetric else pi
    ex = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for level in range(1, depth + 1):
            tasks = range(replicas)
            parts = (list(ex.map(lambda g: work(g, level, pools), tasks)) if ex
                     else [work(g, level, pools) for g in tasks])
            pools = np.concatenate(parts, axis=1)
            div = np.sum(xlogy(pools, pools / pi[None, None, :]), axis=-1)  # (spins, N)
            per_rep = np.array([weights @ div[:, bounds[g]:bounds[g + 1]].mean(axis=1)
                                for g in range(replicas)])
            sizes = np.diff(bounds)
            mi[level - 1] = float(weights @ div.mean(axis=1))
            se[level - 1] = float(np.sqrt(np.sum(sizes ** 2 * (per_rep - mi[level - 1]) ** 2)
                                          / (N ** 2) * replicas / (replicas - 1)))
    finally:
        if ex:
            ex.shutdown()
    return PopulationResult(mi, se, N, int(seed), replicas)

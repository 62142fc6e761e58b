"""Quick invariant checks, run by ``potts-sdpi selftest`` (a few seconds)."""
from __future__ import annotations

import math

import numpy as np

from .applications import edge_boundary_bruteforce, isoperimetry_exact
from .contraction import (
    alpha_2_closed,
    alpha_p,
    eta_kl_coloring,
    eta_kl_potts_restricted,
    eta_kl_potts_unrestricted,
    eta_tv,
    eta_upper_bounds,
    tensorization_check,
)
from .potts_core import b_p_curve, kl, nlsi_dirichlet, potts_matrix, psi, s_lambda_curve, uniform


def _checks(rng):
    yield "alpha_2 closed form (k=3..8)", all(
        abs(alpha_p(k, 2).value - alpha_2_closed(k)) < 1e-6 for k in range(3, 9))
    yield "coloring coefficient (k=3..8)", all(
        abs(eta_kl_potts_restricted(k, -1 / (k - 1)).value - eta_kl_coloring(k)) < 1e-7
        for k in range(3, 9))
    ok = True
    for k in (3, 4):
        for lam in np.linspace(0, 1, 11):
            r = eta_kl_potts_restricted(k, lam).value
            ub, un = eta_upper_bounds(k, lam), eta_kl_potts_unrestricted(k, lam)
            ok &= lam * lam - 1e-9 <= r <= ub + 1e-9 <= un + 2e-9 <= eta_tv(potts_matrix(k, lam)) + 3e-9
    yield "coefficient sandwich (k=3,4)", bool(ok)
    ok = True
    for k, lam in ((3, 0.6), (4, -0.2)):
        s = s_lambda_curve(k, lam)
        M = potts_matrix(k, lam)
        for P in rng.dirichlet(np.ones(k), 50):
            ok &= kl(P @ M, uniform(k)) <= float(s(min(kl(P, uniform(k)), math.log(k)))) + 1e-10
    yield "SDPI curve dominance", bool(ok)
    ok = True
    for k, p in ((3, 1), (4, 2)):
        b = b_p_curve(k, p)
        for f in rng.dirichlet(np.ones(k), 50) * k:
            ent = float(np.mean(f * np.log(f)))
            ok &= nlsi_dirichlet(k, f, p) >= float(b(min(ent, math.log(k)))) - 1e-10
    yield "NLSI curve dominance", bool(ok)
    yield "tensorization (k=3, n=2)", all(
        tensorization_check(3, 0.6, list(rng.dirichlet(np.ones(3), 2))) for _ in range(20))
    yield "edge isoperimetry oracle", edge_boundary_bruteforce(3, 2, 3) == isoperimetry_exact(3, 2, 1)
    yield "psi at x = 1", abs(psi(4, 1.0) - math.log(4)) < 1e-15


def run_selftest(seed: int = 0) -> tuple[list[str], bool]:
    rng = np.random.default_rng(seed)
    lines, all_ok = [], True
    for name, ok in _checks(rng):
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
        all_ok &= bool(ok)
    return lines, all_ok

"""Optimal log-Sobolev and strong data processing curves for Potts channels.

Submodules:

- ``potts_core``: psi, xi_p, the NLSI/SDPI curves b_p and s_lambda, divergences, channels.
- ``envelope``: concave/convex envelopes and non-convexity certificates.
- ``contraction``: contraction coefficients, log-Sobolev constants, tensorization.
- ``tree_recon``: tree non-reconstruction certificates, exact and Monte Carlo mutual information.
- ``applications``: SBM impossibility regions and Hamming-graph edge isoperimetry.
"""
__version__ = "0.1.0"

from .potts_core import (  # noqa: E402
    DomainError,
    NumericalError,
    PottsChannel,
    SizeError,
    b_p_curve,
    coloring_matrix,
    kl,
    potts_matrix,
    psi,
    s_lambda_curve,
    xi,
)
from .envelope import PiecewiseLinearFn, concave_envelope, convex_envelope  # noqa: E402
from .contraction import (  # noqa: E402
    OptResult,
    alpha_p,
    b_check,
    eta_kl_coloring,
    eta_kl_potts_restricted,
    eta_kl_potts_unrestricted,
    eta_kl_restricted_general,
    s_hat,
)
from .tree_recon import TreeSpec, nonreconstruction_certificate, population_dynamics  # noqa: E402
from .applications import SbmParams  # noqa: E402

__all__ = [
    "DomainError", "NumericalError", "SizeError", "PottsChannel", "potts_matrix",
    "coloring_matrix", "psi", "xi", "kl", "b_p_curve", "s_lambda_curve",
    "PiecewiseLinearFn", "concave_envelope", "convex_envelope", "OptResult",
    "alpha_p", "b_check", "s_hat", "eta_kl_coloring", "eta_kl_potts_restricted",
    "eta_kl_potts_unrestricted", "eta_kl_restricted_general", "TreeSpec",
    "nonreconstruction_certificate", "population_dynamics", "SbmParams",
]

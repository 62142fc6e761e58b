"""Locate the linear piece of the concave envelope of s_lambda near zero."""
from potts_sdpi import s_hat, s_lambda_curve
from potts_sdpi.envelope import linear_piece_near_zero, nonconvexity_certificate

for k in (2, 3, 5):
    for lam in (-1 / (k - 1), 0.5):
        piece = linear_piece_near_zero(s_lambda_curve(k, lam), s_hat(k, lam))
        cert = nonconvexity_certificate(k, "s", lam)
        span = "none" if piece is None else f"[{piece[0]:.4g}, {piece[1]:.4g}]"
        print(f"k={k} lambda={lam:+.3f}: certificate={cert:.4g} linear piece={span}")

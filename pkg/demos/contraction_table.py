"""Print restricted/unrestricted KL contraction of Potts channels next to lambda^2."""
import numpy as np

from potts_sdpi import eta_kl_potts_restricted, eta_kl_potts_unrestricted

for k in (3, 5, 10):
    print(f"k = {k}")
    print(f"{'lambda':>9} {'lambda^2':>10} {'restricted':>11} {'unrestricted':>13}")
    for lam in np.linspace(-1 / (k - 1), 1, 7):
        r = eta_kl_potts_restricted(k, lam).value
        u = eta_kl_potts_unrestricted(k, lam)
        print(f"{lam:9.4f} {lam * lam:10.6f} {r:11.6f} {u:13.6f}")
    print()

"""Count SBM impossibility verdicts on a coarse grid for k = 5."""
from potts_sdpi.applications import sbm_region_sweep

rows = sbm_region_sweep(5, 15.0, 15.0, 0.5)
for key in ("bmnn", "thm5", "infoperc"):
    print(f"{key:>9}: {sum(r[key] for r in rows)} of {len(rows)} grid points impossible")

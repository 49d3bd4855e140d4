"""Split-vs-full differences at t=1 for both couplings."""
from nsp2d.experiments import split_consistency

for coupling in ("interpolated", "coupled"):
    r = split_consistency(coupling=coupling)
    diffs = ", ".join(f"{d:.3e}" for d in r["differences"])
    print(f"{coupling:12s} dt={r['dts']}  |split - full| = {diffs}")

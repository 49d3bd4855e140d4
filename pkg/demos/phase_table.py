"""Phase lower bounds and symbol-bound ratios for the four sign cases."""
from nsp2d.phase import phase_report

for eps in (1.0, 0.1, 0.01):
    for case in ("++", "+-", "-+", "--"):
        rep = phase_report(eps, case, samples=20_000, sweep_samples=500)
        ratios = " ".join(f"{v:8.3g}" for v in rep["max_ratio_by_order"].values())
        print(f"eps={eps:<5g} {case}  min A {rep['min_A']:.3f}  "
              f"min|phi| {rep['min_abs_phi']:.3f}  ratios by order {ratios}")

"""Acceptance criteria 1-13 at their stated tolerances and runtime budgets.

Each test prints one PASS/FAIL line with the measured values; the lines are
also repeated in the pytest summary.  Run standalone with
``python3 tests/test_acceptance.py`` to get just the lines.
"""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from nsp2d import experiments as ex
from nsp2d.splitting import lifespan_slope

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES  # noqa: E402

KAPPA0 = 1.0 / 200.0


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def verdict(number: int, name: str, passed: bool, measured: str, elapsed: float,
            budget: float = None) -> bool:
    in_time = budget is None or elapsed <= budget
    ok = bool(passed and in_time)
    limit = f" / {budget:g}s" if budget is not None else ""
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}: {measured} "
            f"[{elapsed:.1f}s{limit}]")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_c01_propagator_oracle():
    with Timer() as tm:
        r = ex.green_oracle_error(10_000, 100)
    assert verdict(1, "green matrix vs expm oracle", r["max_rel_error"] <= 1e-10,
                   f"max rel {r['max_rel_error']:.2e} (confluent {r['max_rel_error_confluent']:.2e}) "
                   f"over {r['count']} modes", tm.elapsed, 5)


def test_c02_semigroup_diagonalization():
    with Timer() as tm:
        r = ex.semigroup_and_diagonalization(2000)
    ok = r["semigroup_rel_error"] <= 1e-10 and r["diagonalization_rel_error"] <= 1e-10
    assert verdict(2, "semigroup and diagonalization", ok,
                   f"semigroup {r['semigroup_rel_error']:.2e}, "
                   f"diagonalization {r['diagonalization_rel_error']:.2e}", tm.elapsed, 5)


def test_c03_dispersive_decay():
    with Timer() as tm:
        fit, mass, _ = ex.dispersive_decay(0.01, 512, 64 * np.pi, (2.0, 40.0))
    ok = -1.25 <= fit.exponent <= -0.75 and fit.r_squared >= 0.95
    assert verdict(3, "dispersive decay", ok,
                   f"exponent {fit.exponent:.4f}, r^2 {fit.r_squared:.4f}, "
                   f"min mass fraction {mass:.4f}", tm.elapsed, 60)


def test_c04_band_decay():
    with Timer() as tm:
        rates = ex.band_decay_rates((1.0, 0.1, 0.01))
    high = [r["fitted_rate"] for r in rates if r["band"] == "high"]
    mid = [r["fitted_rate"] for r in rates if r["band"] == "mid"]
    ok = min(high) > 0 and max(high) / min(high) < 4 and min(mid) >= 0.8 * KAPPA0 / 5
    assert verdict(4, "band semigroup decay", ok,
                   "high " + ", ".join(f"{v:.4g}" for v in high)
                   + f" (spread {max(high) / min(high):.2f}x); mid "
                   + ", ".join(f"{v:.4g}" for v in mid) + f" (floor {0.8 * KAPPA0 / 5:.4g})",
                   tm.elapsed, 30)


def test_c05_curl_transport():
    with Timer() as tm:
        r = ex.curl_transport(256, 64 * np.pi, 20.0)
    assert verdict(5, "curl transport", r["max_relative_curl"] <= 1e-8,
                   f"max relative curl {r['max_relative_curl']:.2e} to t={r['final_time']:g}",
                   tm.elapsed, 120)


def test_c06_split_consistency():
    with Timer() as tm:
        r = ex.split_consistency((0.1, 0.05, 0.025))
    ok = min(r["orders"]) >= 1.7
    assert verdict(6, "split vs full consistency", ok,
                   "differences " + ", ".join(f"{d:.3e}" for d in r["differences"])
                   + "; orders " + ", ".join(f"{o:.3f}" for o in r["orders"]),
                   tm.elapsed, 300)


@pytest.mark.slow
def test_c07_lifespan():
    theta = 0.1
    with Timer() as tm:
        results = [ex.run_lifespan(ex.lifespan_config(e, theta, 256)) for e in (0.2, 0.1, 0.05)]
        slope = lifespan_slope(results)
    floors = [0.5 * r.epsilon ** (-(1 - theta)) for r in results]
    ok = (all(not r.aborted and r.t_star >= f for r, f in zip(results, floors))
          and slope >= 0.8)
    parts = [f"eps={r.epsilon:g}: t*={r.t_star:.4g} (floor {f:.4g}, crossed {int(r.crossed)}, "
             f"max E3/threshold {max(r.energy) / r.threshold:.3f})" for r, f in zip(results, floors)]
    assert verdict(7, "lifespan law", ok, "; ".join(parts) + f"; slope {slope:.4f}",
                   tm.elapsed, 45 * 60)


def test_c08_phase_bounds():
    with Timer() as tm:
        bounds, sweeps, spread = ex.phase_checks((1.0, 0.1, 0.01), 100_000, 2000)
    min_a = min(b["min_A"] for b in bounds)
    min_phi = min(b["min_abs_phi"] for b in bounds)
    worst = max(spread.values())
    ok = min_a >= 0.9 and min_phi >= 0.5 and worst < 10
    assert verdict(8, "phase bounds", ok,
                   f"min A {min_a:.4f}, min |phi++| {min_phi:.4f}; ratio spread across eps by "
                   "order " + ", ".join(f"{k}: {v:.2f}x" for k, v in sorted(spread.items())),
                   tm.elapsed, 60)


def test_c09_bilinear():
    with Timer() as tm:
        r = ex.bilinear_checks(64, pairs=20)
    ok = r["T1_error"] <= 1e-12 and r["separable_error"] <= 1e-12 and r["holder_spread"] <= 0.5
    assert verdict(9, "bilinear operator", ok,
                   f"T1 {r['T1_error']:.2e}, separable {r['separable_error']:.2e}, "
                   f"Holder constant within +-{100 * r['holder_spread']:.1f}% of median",
                   tm.elapsed, 120)


def test_c10_s_matrix():
    with Timer() as tm:
        rows = ex.s_matrix_checks((1.0, 0.1, 0.01), 100_000)
    res = max(r["max_scaled_residual"] for r in rows)
    det = min(r["min_det"] for r in rows)
    assert verdict(10, "S-matrix identity", res <= 1e-12 and det > 0,
                   f"max residual/(|x|+|y|) {res:.2e}, min det {det:.4f}", tm.elapsed, 10)


def test_c11_commutator():
    with Timer() as tm:
        r = ex.commutator_check((4, 8, 16))
    assert verdict(11, "commutator scaling", -1.2 <= r["slope"] <= -0.8,
                   f"slope {r['slope']:.4f}; values " + ", ".join(f"{v:.3e}" for v in r["values"]),
                   tm.elapsed, 10)


def test_c12_energy_envelope():
    with Timer() as tm:
        c, details = ex.energy_envelope()
    assert verdict(12, "energy inequality envelope", c <= 20,
                   f"C = {c:.4f} over {len(details)} runs", tm.elapsed, 300)


DET_CONFIG = """\
grid.n = 64
grid.length = 100.53096491487338
params.epsilon = 0.1
params.dt = 0.05
params.t_end = 1.0
params.theta = 0.1
init.profile = combined
init.seed = 11
output.dir = det
output.sample_every = 5
output.snapshot_every = 10
run.system = full
"""


def _run_cli(args, threads, cwd):
    env = dict(os.environ, NSP2D_THREADS=str(threads))
    return subprocess.run([sys.executable, "-m", "nsp2d.cli", *args], env=env, cwd=cwd,
                          capture_output=True, text=True)


def test_c13_determinism(tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(DET_CONFIG)
    with Timer() as tm:
        trees = []
        for run, threads in enumerate((1, 4, 1)):
            out = tmp_path / f"run{run}"
            for cmd in ("run", "gen-init"):
                proc = _run_cli(["--output-dir", str(out), cmd, str(cfg)], threads, tmp_path)
                assert proc.returncode == 0, proc.stderr
            trees.append({p.relative_to(out).as_posix(): p.read_bytes()
                          for p in sorted(out.rglob("*")) if p.is_file()})
    same = trees[0] == trees[1] == trees[2] and len(trees[0]) > 2
    assert verdict(13, "determinism across thread counts", same,
                   f"{len(trees[0])} files byte-identical over NSP2D_THREADS in (1, 4, 1)",
                   tm.elapsed)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

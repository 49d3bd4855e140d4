"""Command-line entry point: ``nsp2d <subcommand> ...``.

Exit codes: 0 success, 1 validation failure (bad config, missing file,
failed verification check), 2 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import experiments as ex
from .config import ConfigError, ScenarioConfig, load_config, window
from .initial import CalibrationError, generate_initial
from .io import read_series, write_csv, write_snapshot
from .phase import phase_report, report_json, s_matrix, sample_s_domain
from .solver import NumericalAbort, PrimitiveSolver
from .splitting import lifespan_slope

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2


def _out_dir(args, cfg: ScenarioConfig = None) -> Path:
    base = Path(args.output_dir)
    return base / cfg["output.dir"] if cfg is not None else base


def _print_checks(checks) -> int:
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVALID


# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    grid, params = cfg.grid(), cfg.params()
    state = generate_initial(cfg, grid, params)
    solver = PrimitiveSolver(grid, params, cfg["run.system"])
    rows = []
    every, snap_every = cfg["output.sample_every"], cfg["output.snapshot_every"]

    def sample(s):
        rows.append(dg.norm_report(s, params, params.n_reg).row())

    def flush():
        write_csv(out / "norms.csv", dg.NORM_COLUMNS, rows)

    sample(state)
    if snap_every:
        write_snapshot(out / "snap_000000.bin", state)
    n_steps = int(np.ceil(params.t_end / params.dt - 1e-9))
    try:
        for k in range(1, n_steps + 1):
            t_next = min(k * params.dt, params.t_end)
            state = solver.advance(state, t_next)
            if k % every == 0 or k == n_steps:
                sample(state)
            if snap_every and (k % snap_every == 0 or k == n_steps):
                write_snapshot(out / f"snap_{k:06d}.bin", state)
    except NumericalAbort as err:
        flush()
        if err.snapshot is not None and hasattr(err.snapshot, "phi"):
            write_snapshot(out / "abort.bin", err.snapshot)
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_ABORT
    flush()
    print(f"wrote {len(rows)} samples to {out / 'norms.csv'}")
    return EXIT_OK


def _sweep_one(item):
    cfg, factor, check_every = item
    return ex.run_lifespan(cfg, factor, check_every)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    cfgs = [cfg.replace(params__epsilon=e) for e in cfg["sweep.epsilons"]]
    items = [(c, cfg["sweep.t_cap_factor"], cfg["sweep.check_every"]) for c in cfgs]
    workers = cfg["sweep.workers"]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, items))
    else:
        results = [_sweep_one(it) for it in items]
    rows = [(r.epsilon, r.theta, r.threshold, r.t_star, r.t_cap, int(r.crossed), int(r.aborted))
            for r in results]
    slope = lifespan_slope(results) if len(results) > 1 else float("nan")
    write_csv(out / "lifespan.csv",
              ("epsilon", "theta", "threshold", "t_star", "t_cap", "crossed", "aborted"),
              rows, footer=[("fitted_slope", slope)])
    for r in results:
        write_csv(out / f"energy_e3_eps{r.epsilon:g}.csv", ("time", "E3"), r.energy_series)
        print(f"epsilon={r.epsilon:g} t_star={r.t_star:.6g} t_cap={r.t_cap:.6g} "
              f"crossed={int(r.crossed)} aborted={int(r.aborted)}")
    print(f"fitted_slope={slope:.6g}")
    return EXIT_ABORT if any(r.aborted for r in results) else EXIT_OK


def cmd_verify_linear(args) -> int:
    quick = args.quick
    checks, rows = [], []
    oracle = ex.green_oracle_error(2000 if quick else 10_000, 100)
    checks.append(ex.Check("green matrix vs expm oracle (rel <= 1e-10)",
                           oracle["max_rel_error"] <= 1e-10,
                           f"max {oracle['max_rel_error']:.3e}, confluent {oracle['max_rel_error_confluent']:.3e}"))
    sd = ex.semigroup_and_diagonalization(300 if quick else 2000)
    checks.append(ex.Check("semigroup G(t+s) = G(t)G(s) (rel <= 1e-10)",
                           sd["semigroup_rel_error"] <= 1e-10, f"{sd['semigroup_rel_error']:.3e}"))
    checks.append(ex.Check("Q diag Q^-1 = A on chi^L (rel <= 1e-10)",
                           sd["diagonalization_rel_error"] <= 1e-10, f"{sd['diagonalization_rel_error']:.3e}"))
    fit, mass, _ = ex.dispersive_decay(n=256 if quick else 512)
    checks.append(ex.Check("dispersive decay exponent in [-1.25, -0.75], r^2 >= 0.95",
                           -1.25 <= fit.exponent <= -0.75 and fit.r_squared >= 0.95,
                           f"exponent {fit.exponent:.4f}, r^2 {fit.r_squared:.4f}, mass {mass:.4f}"))
    rates = ex.band_decay_rates()
    high = [r["fitted_rate"] for r in rates if r["band"] == "high"]
    mid = [r["fitted_rate"] for r in rates if r["band"] == "mid"]
    kappa0 = 1.0 / 200.0
    checks.append(ex.Check("high-band rates positive, spread < 4x",
                           min(high) > 0 and max(high) / min(high) < 4,
                           ", ".join(f"{r:.4g}" for r in high)))
    checks.append(ex.Check("mid-band rates >= 0.8 kappa0/5",
                           min(mid) >= 0.8 * kappa0 / 5, ", ".join(f"{r:.4g}" for r in mid)))
    for r in rates:
        rows.append((r["epsilon"], r["band"], r["fitted_rate"], oracle["max_rel_error"]))
    write_csv(_out_dir(args) / "verify_linear.csv",
              ("epsilon", "band", "fitted_rate", "max_residual_vs_oracle"), rows)
    return _print_checks(checks)


def cmd_verify_phase(args) -> int:
    rep = phase_report(args.epsilon, args.case, args.samples, args.sweep_samples)
    x, y = sample_s_domain(args.epsilon, args.samples)
    s = s_matrix(x, y, args.epsilon)
    scaled = float((s.residual / (np.linalg.norm(x, axis=-1) + np.linalg.norm(y, axis=-1))).max())
    rep["s_matrix_max_scaled_residual"] = scaled
    rep["s_matrix_min_det"] = float(s.det.min())
    print(report_json(rep))
    checks = [ex.Check("min A >= 0.9", rep["min_A"] >= 0.9, f"{rep['min_A']:.6g}"),
              ex.Check("min |phi| >= 0.5", rep["min_abs_phi"] >= 0.5, f"{rep['min_abs_phi']:.6g}"),
              ex.Check("S-matrix residual <= 1e-12 (|x|+|y|)", scaled <= 1e-12, f"{scaled:.3e}"),
              ex.Check("det S > 0", rep["s_matrix_min_det"] > 0, f"{rep['s_matrix_min_det']:.6g}")]
    return _print_checks(checks)


def cmd_fit_decay(args) -> int:
    path = Path(args.csv)
    if not path.is_file():
        raise ConfigError(f"series file not found: {path}")
    from .io import read_csv
    header, _ = read_csv(path)
    columns = [args.column] if args.column else header[1:]
    win = window(args.window) if args.window else None
    for col in columns:
        if col not in header:
            raise ConfigError(f"{path}: no column {col!r}")
        fit = dg.fit_decay(read_series(path, col), win)
        print(json.dumps({"column": col, **fit.as_dict()}))
    return EXIT_OK


def cmd_gen_init(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    params = cfg.params()
    state = generate_initial(cfg, cfg.grid(), params)
    write_snapshot(out / "init.bin", state)
    from .spectral import CutoffFamily, leray_split
    rot, pot = leray_split(state.u)
    pot_state = state.with_data(np.stack([state.data[0], pot[0].coefficients, pot[1].coefficients]))
    report = {"y4_potential": dg.y_norm(pot_state, 4, CutoffFamily(params.epsilon, params.kappa0)),
              "h3_rotational": dg.sobolev_norm(list(rot), 3, 2),
              "relative_curl_potential": ex.relative_curl(pot_state)}
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsp2d", description=__doc__.splitlines()[0])
    p.add_argument("--output-dir", default=".", help="base directory for all outputs")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one scenario and write norms.csv")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="lifespan probes over sweep.epsilons")
    s.add_argument("config")
    s.set_defaults(func=cmd_sweep)

    vl = sub.add_parser("verify-linear", help="checks of the exact linear propagator")
    vl.add_argument("--quick", action="store_true")
    vl.set_defaults(func=cmd_verify_linear)

    vp = sub.add_parser("verify-phase", help="phase, symbol and S-matrix checks")
    vp.add_argument("--epsilon", type=float, default=0.1)
    vp.add_argument("--case", default="++", choices=["++", "+-", "-+", "--"])
    vp.add_argument("--samples", type=int, default=100_000)
    vp.add_argument("--sweep-samples", type=int, default=2000)
    vp.set_defaults(func=cmd_verify_phase)

    fd = sub.add_parser("fit-decay", help="power-law fit of a CSV time series")
    fd.add_argument("csv")
    fd.add_argument("--window", help="a,b time window")
    fd.add_argument("--column", help="value column (default: every non-time column)")
    fd.set_defaults(func=cmd_fit_decay)

    g = sub.add_parser("gen-init", help="write the calibrated initial snapshot")
    g.add_argument("config")
    g.set_defaults(func=cmd_gen_init)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CalibrationError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalAbort as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


run_cli = main

if __name__ == "__main__":
    sys.exit(main())

import json
import time

import numpy as np
import pytest

from nsp2d import cli
from nsp2d.config import ConfigError, ScenarioConfig, format_config, load_config, parse_config, window
from nsp2d.diagnostics import NORM_COLUMNS, sobolev_norm, y_norm
from nsp2d.experiments import relative_curl
from nsp2d.initial import CalibrationError, calibrate, generate_initial, philox
from nsp2d.io import (CSV_FORMAT_LINE, HEADER, csv_text, load_state, read_csv, read_series,
                      read_snapshot, snapshot_bytes, write_csv, write_snapshot)
from nsp2d.solver import PrimitiveState, VacuumError
from nsp2d.spectral import CutoffFamily, Grid2D, leray_split

SMALL = """\
# small smoke scenario
grid.n = 32
grid.length = 50.26548245743669
params.epsilon = 0.2
params.dt = 0.05
params.t_end = 0.5
params.theta = 0.1
init.profile = gaussian_irrotational
init.seed = 7
output.dir = out
output.sample_every = 2
output.snapshot_every = 5
"""


# ---------------------------------------------------------------------------
# config

def test_parse_defaults_and_values():
    cfg = parse_config(SMALL)
    assert cfg["grid.n"] == 32 and cfg["params.epsilon"] == 0.2
    assert cfg["init.profile"] == "gaussian_irrotational"
    assert cfg["params.kappa0"] == 1 / 200 and cfg["run.system"] == "low"
    assert parse_config(format_config(cfg)).values == cfg.values


@pytest.mark.parametrize("text, msg", [
    ("grid.nn = 3", "unknown key"),
    ("grid.n = 32\ngrid.n = 64", "duplicate"),
    ("grid.n = -4", "grid.n"),
    ("grid.n = 33", "even"),
    ("params.epsilon = 2", "epsilon"),
    ("init.profile = square", "init.profile"),
    ("init.seed = -1", "init.seed"),
    ("grid.n 32", "key = value"),
    ("sweep.epsilons = 0.1, 0", "sweep.epsilons"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_window_parse():
    assert window("2,40") == (2.0, 40.0)
    with pytest.raises(ValueError):
        window("5,1")


# ---------------------------------------------------------------------------
# initial data

def _cfg(**kw):
    base = {"grid.n": 64, "grid.length": 32 * np.pi, "params.epsilon": 0.2, "params.theta": 0.1}
    base.update(kw)
    return ScenarioConfig(base)


def test_philox_streams():
    a = philox(3, 0).random(4)
    assert np.array_equal(a, philox(3, 0).random(4))
    assert not np.array_equal(a, philox(3, 1).random(4))
    assert not np.array_equal(a, philox(4, 0).random(4))


def test_theta_zero_is_equilibrium():
    s = generate_initial(_cfg(**{"params.theta": 0.0}))
    assert np.all(s.data == 0)


def test_same_seed_bitwise():
    a = generate_initial(_cfg(**{"init.profile": "combined"}))
    b = generate_initial(_cfg(**{"init.profile": "combined"}))
    assert np.array_equal(a.data, b.data)
    c = generate_initial(_cfg(**{"init.profile": "combined", "init.seed": 1}))
    assert not np.array_equal(a.data, c.data)


def test_vortex_h3_calibration():
    cfg = _cfg(**{"init.profile": "gaussian_vortex", "init.target": "h3_norm",
                  "params.epsilon": 0.1, "params.theta": 0.1})
    s = generate_initial(cfg)
    assert 0.0099 <= sobolev_norm(s.data[1:], 3, 2, s.grid) <= 0.0101


def test_irrotational_y_calibration_and_curl():
    cfg = _cfg(**{"init.profile": "gaussian_irrotational"})
    s = generate_initial(cfg)
    cut = CutoffFamily(0.2)
    assert y_norm(s, 4, cut) == pytest.approx(0.1 / 10, rel=0.01)
    assert relative_curl(s) <= 1e-10


def test_combined_parts():
    s = generate_initial(_cfg(**{"init.profile": "combined"}))
    rot, pot = leray_split(s.u)
    assert sobolev_norm(list(rot), 3, 2) == pytest.approx(0.1 * 0.2, rel=0.01)
    pot_state = s.with_data(np.stack([s.data[0], pot[0].coefficients, pot[1].coefficients]))
    assert y_norm(pot_state, 4, CutoffFamily(0.2)) == pytest.approx(0.01, rel=0.01)


def test_calibration_failure_reports_norms():
    with pytest.raises(CalibrationError, match="measure"):
        calibrate(lambda a: 1e-30 * a, 1.0)


# ---------------------------------------------------------------------------
# on-disk formats

def test_snapshot_round_trip(tmp_path):
    s = generate_initial(_cfg(**{"grid.n": 32}))
    s = s.with_data(s.data, time=1.25)
    path = write_snapshot(tmp_path / "s.bin", s)
    n, length, t, fields = read_snapshot(path)
    assert (n, length, t, fields.shape) == (32, s.grid.length, 1.25, (4, 32, 32))
    np.testing.assert_array_equal(fields[3], s.grid.inverse(s.phi.coefficients))
    back = load_state(path)
    assert np.max(np.abs(back.data - s.data)) <= 1e-12 * np.max(np.abs(s.data))
    assert path.stat().st_size == HEADER.size + 4 * 32 * 32 * 8
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_snapshot_rejects_corrupt(tmp_path):
    s = PrimitiveState.equilibrium(Grid2D(8, 1.0))
    raw = snapshot_bytes(s)
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="expected"):
        read_snapshot(tmp_path / "short.bin")


def test_csv_round_trip(tmp_path):
    x = 0.1 + 0.2
    path = write_csv(tmp_path / "a.csv", ("time", "v"), [(0.0, x), (1.0, True)], [("note", 1)])
    text = path.read_text()
    assert text.splitlines()[0] == CSV_FORMAT_LINE
    assert text.splitlines()[1] == "time,v"
    header, rows = read_csv(path)
    assert header == ["time", "v"] and float(rows[0][1]) == x and rows[1][1] == "1"
    assert read_series(path) == [(0.0, x), (1.0, 1.0)]
    assert csv_text(("a",), []) == CSV_FORMAT_LINE + "\na\n"


# ---------------------------------------------------------------------------
# CLI

def test_cli_missing_config(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_bad_config(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("grid.n = banana\n")
    assert cli.main(["run", str(tmp_path / "bad.cfg")]) == 1
    assert "grid.n" in capsys.readouterr().err


def test_cli_run_outputs(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL)
    assert cli.main(["--output-dir", str(tmp_path), "run", str(cfg)]) == 0
    out = tmp_path / "out"
    header, rows = read_csv(out / "norms.csv")
    assert tuple(header) == NORM_COLUMNS
    assert [float(r[0]) for r in rows] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5], abs=1e-15)
    snaps = sorted(p.name for p in out.glob("snap_*.bin"))
    assert snaps == ["snap_000000.bin", "snap_000005.bin", "snap_000010.bin"]
    first = (out / "norms.csv").read_bytes()
    assert cli.main(["--output-dir", str(tmp_path), "run", str(cfg)]) == 0
    assert (out / "norms.csv").read_bytes() == first


def test_cli_run_abort_exit_code(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL)

    def explode(self, state, t_end, callback=None):
        raise VacuumError("vacuum guard: forced", state)

    monkeypatch.setattr(cli.PrimitiveSolver, "advance", explode)
    assert cli.main(["--output-dir", str(tmp_path), "run", str(cfg)]) == 2
    assert (tmp_path / "out" / "abort.bin").exists()
    assert (tmp_path / "out" / "norms.csv").exists()
    assert "vacuum" in capsys.readouterr().err


def test_cli_gen_init(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL.replace("gaussian_irrotational", "combined"))
    assert cli.main(["--output-dir", str(tmp_path), "gen-init", str(cfg)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["y4_potential"] == pytest.approx(0.01, rel=0.01)
    assert report["h3_rotational"] == pytest.approx(0.02, rel=0.01)
    assert read_snapshot(tmp_path / "out" / "init.bin")[0] == 32


def test_cli_fit_decay(tmp_path, capsys):
    t = np.linspace(0, 50, 51)
    write_csv(tmp_path / "series.csv", ("time", "value"), list(zip(t, 1 / (1 + t))))
    assert cli.main(["fit-decay", str(tmp_path / "series.csv"), "--window", "2,40"]) == 0
    line = json.loads(capsys.readouterr().out.strip().splitlines()[0])
    assert f"{line['exponent']:.3f}" == "-1.000"
    assert cli.main(["fit-decay", str(tmp_path / "nope.csv")]) == 1


def test_cli_verify_phase_small(capsys):
    code = cli.main(["verify-phase", "--epsilon", "0.1", "--case", "++", "--samples", "2000",
                     "--sweep-samples", "200"])
    out = capsys.readouterr().out.splitlines()
    report = json.loads(out[0])
    assert {"min_A", "min_abs_phi", "max_ratio_by_order", "samples", "skipped"} <= set(report)
    assert all(l.startswith(("PASS", "FAIL")) for l in out[1:]) and len(out) == 5
    assert code == 0


def test_threads_env_does_not_change_bytes(tmp_path, monkeypatch):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL)
    outs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("NSP2D_THREADS", threads)
        d = tmp_path / threads
        assert cli.main(["--output-dir", str(d), "run", str(cfg)]) == 0
        outs.append((d / "out" / "norms.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_verify_linear_quick(tmp_path, capsys):
    t0 = time.perf_counter()
    code = cli.main(["--output-dir", str(tmp_path), "verify-linear", "--quick"])
    elapsed = time.perf_counter() - t0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert code == 0 and len(lines) >= 4 and elapsed < 60
    header, rows = read_csv(tmp_path / "verify_linear.csv")
    assert header == ["epsilon", "band", "fitted_rate", "max_residual_vs_oracle"]
    assert len(rows) == 6

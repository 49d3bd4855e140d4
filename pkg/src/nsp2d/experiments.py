"""Measurement routines shared by the verification CLI, tests and demos.

Each function runs one experiment and returns plain measured numbers;
pass/fail thresholds live with the callers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np
import scipy.linalg

from . import diagnostics as dg
from .config import ScenarioConfig
from .initial import generate_initial
from .linear import (band_propagator_norms, eval_linear_symbol, green_matrix, half_wave)
from .phase import (bilinear_T, holder_ratio, normal_form_symbol, phase_bounds,
                    random_band_limited, s_matrix, sample_s_domain, symbol_bound_sweep)
from .solver import PrimitiveSolver, PrimitiveState, SimulationParams
from .spectral import CutoffFamily, Grid2D, SpectralField
from .splitting import SplitSolver, lifespan_probe, lifespan_slope, split_initial


@dataclass
class Check:
    name: str
    passed: bool
    measured: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.measured}"


# ---------------------------------------------------------------------------
# linear theory

def confluent_radius(epsilon: float) -> float:
    """|xi| where 1 + |xi|^2 - eps^2 |xi|^4 = 0."""
    return float(np.sqrt((1 + np.sqrt(1 + 4 * epsilon ** 2)) / (2 * epsilon ** 2)))


def random_modes(count: int, n_confluent: int, seed: int = 0, t_max: float = 10.0,
                 k_max: float = 20.0):
    """Random (t, xi, eps) triples, the last ``n_confluent`` near b = 0."""
    rng = np.random.default_rng(seed)
    n_free = count - n_confluent
    t = rng.uniform(0, t_max, count)
    eps = 10 ** rng.uniform(-3, 0, count)
    r = rng.uniform(0, k_max, count)
    # near-confluent modes: relative offsets 1e-14 .. 1e-6 from the double root
    eps[n_free:] = rng.uniform(0.1, 1.0, n_confluent)
    rc = np.array([confluent_radius(e) for e in eps[n_free:]])
    off = 10 ** rng.uniform(-14, -6, n_confluent) * rng.choice([-1, 1], n_confluent)
    r[n_free:] = rc * (1 + off)
    ang = rng.uniform(0, 2 * np.pi, count)
    xi = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
    return t, xi, eps


def green_oracle_error(count: int = 10_000, n_confluent: int = 100, seed: int = 0) -> Dict[str, float]:
    """Max relative Frobenius error of green_matrix against scipy's expm."""
    t, xi, eps = random_modes(count, n_confluent, seed)
    ours = np.empty((count, 2, 2), dtype=complex)
    # eval_linear_symbol takes one eps; group by value
    for i in range(count):
        ours[i] = green_matrix(t[i], eval_linear_symbol(xi[i], eps[i]))
    ksq = np.sum(xi ** 2, -1)
    br = np.sqrt(1 + ksq)
    a = np.zeros((count, 2, 2))
    a[:, 0, 1] = br
    a[:, 1, 0] = -br
    a[:, 1, 1] = 2 * eps * ksq
    oracle = scipy.linalg.expm(-t[:, None, None] * a)
    err = np.linalg.norm(ours - oracle, axis=(1, 2)) / np.linalg.norm(oracle, axis=(1, 2))
    return {"max_rel_error": float(err.max()),
            "max_rel_error_confluent": float(err[count - n_confluent:].max()),
            "count": count, "confluent": n_confluent}


def semigroup_and_diagonalization(count: int = 2000, seed: int = 1,
                                  kappa0: float = 1.0 / 200.0) -> Dict[str, float]:
    rng = np.random.default_rng(seed)
    semi, diag = 0.0, 0.0
    for eps in (1.0, 0.1, 0.01):
        cut = CutoffFamily(eps, kappa0)
        r = rng.uniform(0, 3.0 / cut.scale, count)
        ang = rng.uniform(0, 2 * np.pi, count)
        xi = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
        t, s = rng.uniform(0, 10, count), rng.uniform(0, 10, count)
        sym = eval_linear_symbol(xi, eps)
        for i in range(count):
            one = eval_linear_symbol(xi[i], eps)
            lhs = green_matrix(t[i] + s[i], one)
            rhs = green_matrix(t[i], one) @ green_matrix(s[i], one)
            semi = max(semi, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300)))
        d = np.zeros(xi.shape[:-1] + (2, 2), dtype=complex)
        d[..., 0, 0] = -sym.lambda_minus
        d[..., 1, 1] = -sym.lambda_plus
        rebuilt = sym.q @ d @ sym.q_inv
        rel = np.linalg.norm(rebuilt - sym.a_hat, axis=(-2, -1)) / np.linalg.norm(sym.a_hat, axis=(-2, -1))
        diag = max(diag, float(rel.max()))
    return {"semigroup_rel_error": semi, "diagonalization_rel_error": diag}


def gaussian_field(grid: Grid2D, width: float = 2.0, center=(0.0, 0.0)) -> SpectralField:
    r2 = (grid.x1 - center[0]) ** 2 + (grid.x2 - center[1]) ** 2
    return SpectralField.from_physical(grid, np.exp(-r2 / width ** 2))


def dispersive_decay(epsilon: float = 0.01, n: int = 512, length: float = 64 * np.pi,
                     window=(2.0, 40.0), samples: int = 40, width: float = 2.0,
                     kappa0: float = 1.0 / 200.0):
    """Fit of sup_x |e^{itb(D)} chi^L f| for Gaussian f over ``window``."""
    grid = Grid2D(n, length)
    f = gaussian_field(grid, width)
    cut = CutoffFamily(epsilon, kappa0)
    times = np.linspace(window[0], window[1], samples)
    series, mass = [], []
    for t in times:
        out = half_wave(f, float(t), cut)
        phys = grid.inverse(out.coefficients, real=False)
        series.append((t, float(np.abs(phys).max())))
        mass.append(dg.mass_fraction(out))
    fit = dg.fit_decay(series, window)
    return fit, float(min(mass)), series


def band_decay_rates(epsilons=(1.0, 0.1, 0.01), n: int = 256, length: float = 64 * np.pi,
                     kappa0: float = 1.0 / 200.0) -> List[Dict[str, float]]:
    """Fitted exponential rates of max_{band} ||e^{-tA}|| for the high and mid bands."""
    grid = Grid2D(n, length)
    out = []
    for eps in epsilons:
        for band, t_max in (("high", 200.0), ("mid", 4000.0)):
            times = np.linspace(0, t_max, 201)
            norms = band_propagator_norms(grid, eps, band, times, kappa0)
            rate, _, r2 = dg.fit_exponential_rate(times, norms)
            out.append({"epsilon": eps, "band": band, "fitted_rate": rate, "r_squared": r2})
    return out


# ---------------------------------------------------------------------------
# nonlinear runs

def irrotational_data(grid: Grid2D, amplitude: float = 0.05, width: float = 4.0,
                      params: SimulationParams = None) -> PrimitiveState:
    """Smooth curl-free bump: rho = A Lap(g) w^2, u = A grad(g) w at a fixed centre."""
    r2 = (grid.x1 - 0.5) ** 2 + (grid.x2 + 0.3) ** 2
    gh = grid.dealias(grid.forward(np.exp(-r2 / width ** 2)))
    rho = amplitude * grid.laplacian(gh) * width ** 2
    u = amplitude * grid.grad(gh) * width
    return PrimitiveState(grid, np.concatenate([rho[None], u]), 0.0, params)


def vortex_data(grid: Grid2D, amplitude: float = 0.05, width: float = 4.0) -> np.ndarray:
    r2 = (grid.x1 + 0.4) ** 2 + (grid.x2 - 0.2) ** 2
    psi = amplitude * width * grid.dealias(grid.forward(np.exp(-r2 / width ** 2)))
    return np.stack([np.zeros_like(psi), -1j * grid.k2 * psi, 1j * grid.k1 * psi])


def relative_curl(state: PrimitiveState) -> float:
    g = state.grid
    curl = g.curl(state.data[1:])
    grad = np.concatenate([g.grad(state.data[1]), g.grad(state.data[2])])
    denom = np.sqrt(np.sum(np.abs(grad) ** 2))
    return float(np.sqrt(np.sum(np.abs(curl) ** 2)) / denom) if denom > 0 else 0.0


def curl_transport(n: int = 256, length: float = 64 * np.pi, t_end: float = 20.0,
                   epsilon: float = 0.1, dt: float = 0.05, amplitude: float = 0.05):
    grid = Grid2D(n, length)
    params = SimulationParams(epsilon=epsilon, dt=dt, t_end=t_end)
    state = irrotational_data(grid, amplitude, params=params)
    worst = [relative_curl(state)]
    solver = PrimitiveSolver(grid, params, "low")
    state = solver.advance(state, t_end, callback=lambda s: worst.append(relative_curl(s)))
    return {"max_relative_curl": max(worst), "final_relative_curl": worst[-1],
            "final_time": state.time}


def split_consistency(dts=(0.1, 0.05, 0.025), n: int = 64, length: float = 16 * np.pi,
                      epsilon: float = 0.1, amplitude: float = 0.05, t_end: float = 1.0,
                      coupling: str = "interpolated"):
    """||(main + pert) - full||_{L^2} at t_end for each dt, and observed orders."""
    grid = Grid2D(n, length)
    diffs = []
    for dt in dts:
        params = SimulationParams(epsilon=epsilon, dt=dt, t_end=t_end)
        init = irrotational_data(grid, amplitude, 2.0, params)
        init = init.with_data(init.data + vortex_data(grid, amplitude * epsilon, 2.0))
        split = SplitSolver(grid, params, coupling=coupling).advance(split_initial(init), t_end)
        full = PrimitiveSolver(grid, params, "full").advance(init, t_end)
        diffs.append((split.combined() - full).l2())
    diffs = np.array(diffs)
    orders = np.log(diffs[:-1] / diffs[1:]) / np.log(np.array(dts[:-1]) / np.array(dts[1:]))
    return {"dts": list(dts), "differences": diffs.tolist(), "orders": orders.tolist()}


def lifespan_config(epsilon: float, theta: float = 0.1, n: int = 256,
                    length: float = 64 * np.pi, dt: float = 0.05, seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig({"grid.n": n, "grid.length": length, "params.epsilon": epsilon,
                           "params.theta": theta, "params.dt": dt, "init.profile": "combined",
                           "init.seed": seed})


def run_lifespan(cfg: ScenarioConfig, t_cap_factor: float = 4.0, check_every: int = 10):
    params = cfg.params()
    init = generate_initial(cfg, cfg.grid(), params)
    split = split_initial(init)
    t_cap = t_cap_factor * params.epsilon ** (-(1 - params.theta))
    return lifespan_probe(split, params, t_cap, check_every)


def lifespan_sweep(epsilons=(0.2, 0.1, 0.05), theta: float = 0.1, n: int = 256, **kw):
    results = [run_lifespan(lifespan_config(e, theta, n), **kw) for e in epsilons]
    return results, lifespan_slope(results)


def energy_envelope(n: int = 128, length: float = 32 * np.pi, runs: int = 5,
                    t_end: float = 10.0, dt: float = 0.05, order: int = 11,
                    sample_every: int = 10):
    """Smallest C with E_N(t) <= E_N(0) exp(C int_0^t (|grad u|_inf + |rho|_inf)) over the runs."""
    grid = Grid2D(n, length)
    worst = 0.0
    details = []
    for i in range(runs):
        eps = (0.05, 0.1, 0.2, 0.5, 1.0)[i % 5]
        amp = 0.02 * (1 + i)
        params = SimulationParams(epsilon=eps, dt=dt, t_end=t_end)
        state = irrotational_data(grid, amp, 4.0, params)
        solver = PrimitiveSolver(grid, params, "low")
        e0 = dg.energy_EN(state, order)
        integral = 0.0
        run_c = 0.0

        def drive(s):
            rho = grid.inverse(s.data[0])
            du = grid.inverse(np.concatenate([grid.grad(s.data[1]), grid.grad(s.data[2])]))
            return float(np.sqrt(np.sum(du ** 2, 0)).max() + np.abs(rho).max())

        prev = drive(state)
        n_steps = int(round(t_end / dt))
        for k in range(1, n_steps + 1):
            state = solver.step(state, dt)
            cur = drive(state)
            integral += 0.5 * dt * (prev + cur)
            prev = cur
            if k % sample_every == 0:
                growth = np.log(dg.energy_EN(state, order) / e0)
                if integral > 0:
                    run_c = max(run_c, growth / integral)
        details.append({"epsilon": eps, "amplitude": amp, "C": run_c})
        worst = max(worst, run_c)
    return max(0.0, worst), details


# ---------------------------------------------------------------------------
# phase lab

def phase_checks(epsilons=(1.0, 0.1, 0.01), samples: int = 100_000, sweep_samples: int = 2000):
    bounds = [phase_bounds(e, samples) for e in epsilons]
    sweeps = {e: symbol_bound_sweep(1, 1, e, sweep_samples) for e in epsilons}
    orders = sorted(next(iter(sweeps.values())).max_ratio_by_order)
    spread = {o: max(s.max_ratio_by_order[o] for s in sweeps.values())
              / min(s.max_ratio_by_order[o] for s in sweeps.values()) for o in orders}
    return bounds, sweeps, spread


def bilinear_checks(n: int = 64, length: float = 64 * np.pi, pairs: int = 20,
                    epsilon: float = 0.1, seed: int = 3):
    grid = Grid2D(n, length)
    rng = np.random.default_rng(seed)
    f, g = random_band_limited(grid, rng), random_band_limited(grid, rng)
    prod = grid.forward(f.physical() * g.physical())
    t1 = bilinear_T(lambda xi, eta: np.ones(np.broadcast_shapes(xi.shape, eta.shape)[:-1]), f, g)
    err_one = float(np.abs(t1.coefficients - prod).max() / np.abs(prod).max())

    def a(v):
        return np.exp(-np.sum(v ** 2, -1))

    def b(v):
        return 1 + np.sum(v ** 2, -1)

    ts = bilinear_T(lambda xi, eta: a(xi - eta) * b(eta), f, g)
    kv = np.stack([grid.k1, grid.k2], -1)
    ref = grid.forward(grid.inverse(f.coefficients * a(kv)) * grid.inverse(g.coefficients * b(kv)))
    err_sep = float(np.abs(ts.coefficients - ref).max() / np.abs(ref).max())
    sym = normal_form_symbol(epsilon)
    ratios = np.array([holder_ratio(sym, random_band_limited(grid, rng), random_band_limited(grid, rng))
                       for _ in range(pairs)])
    return {"T1_error": err_one, "separable_error": err_sep, "holder_ratios": ratios.tolist(),
            "holder_spread": float(np.max(np.abs(ratios / np.median(ratios) - 1)))}


def s_matrix_checks(epsilons=(1.0, 0.1, 0.01), count: int = 100_000):
    out = []
    for e in epsilons:
        x, y = sample_s_domain(e, count)
        res = s_matrix(x, y, e)
        scale = np.linalg.norm(x, axis=-1) + np.linalg.norm(y, axis=-1)
        out.append({"epsilon": e, "max_scaled_residual": float((res.residual / scale).max()),
                    "min_det": float(res.det.min()), "max_inv_norm": float(res.inv_norm.max())})
    return out


def commutator_check(radii=(4, 8, 16), n: int = 256, length: float = 64 * np.pi, width: float = 2.0):
    grid = Grid2D(n, length)
    f = gaussian_field(grid, width)
    vals = [dg.commutator_probe(R, f=f) for R in radii]
    return {"radii": list(radii), "values": vals,
            "slope": float(np.polyfit(np.log(radii), np.log(vals), 1)[0])}

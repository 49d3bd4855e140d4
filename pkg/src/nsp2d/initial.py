"""Deterministic initial data with calibrated norms.

Random draws come from numpy's Philox counter-based generator keyed by
(seed, stream id), so the same streams can be reproduced elsewhere:

    stream 0  irrotational part (bump centres, density/velocity weight)
    stream 1  vortex part (centre)
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .config import ScenarioConfig
from .diagnostics import sobolev_norm, y_norm
from .solver import PrimitiveState, SimulationParams
from .spectral import CutoffFamily, Grid2D

STREAM_IRROTATIONAL = 0
STREAM_VORTEX = 1
CALIBRATION_RTOL = 1e-6
_MAX_BISECTIONS = 200


class CalibrationError(ValueError):
    pass


def philox(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _gaussian_hat(grid: Grid2D, center, width: float) -> np.ndarray:
    """Dealiased coefficients of exp(-|x - center|^2 / width^2)."""
    r2 = (grid.x1 - center[0]) ** 2 + (grid.x2 - center[1]) ** 2
    return grid.dealias(grid.forward(np.exp(-r2 / width ** 2)))


def irrotational_shape(grid: Grid2D, seed: int, width: float = 4.0) -> np.ndarray:
    """(rho, u) with rho = Lap psi_1 (mean zero) and u = grad psi_2."""
    rng = philox(seed, STREAM_IRROTATIONAL)
    c1, c2 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
    weight = rng.uniform(0.5, 1.5)
    # Laplacian and gradient scale like 1/width^2 and 1/width; normalize both
    rho = grid.laplacian(_gaussian_hat(grid, c1, width)) * width ** 2
    u = grid.grad(_gaussian_hat(grid, c2, width)) * width * weight
    return np.concatenate([rho[None], u])


def vortex_shape(grid: Grid2D, seed: int, width: float = 4.0) -> np.ndarray:
    """(0, grad-perp psi) for a Gaussian stream function psi."""
    rng = philox(seed, STREAM_VORTEX)
    c = rng.uniform(-1, 1, 2)
    psi = _gaussian_hat(grid, c, width) * width
    u = np.stack([-1j * grid.k2 * psi, 1j * grid.k1 * psi])
    return np.concatenate([np.zeros_like(psi)[None], u])


def calibrate(measure: Callable[[float], float], target: float) -> float:
    """Amplitude A with measure(A) = target, by bisection on log A."""
    if target == 0:
        return 0.0
    lo, hi = 1e-12, 1.0
    while measure(hi) < target:
        hi *= 10
        if hi > 1e12:
            raise CalibrationError(f"could not bracket target {target:.4g}; "
                                   f"measure(1e12) = {measure(hi):.4g}")
    if measure(lo) > target:
        raise CalibrationError(f"target {target:.4g} below measure(1e-12) = {measure(lo):.4g}")
    for _ in range(_MAX_BISECTIONS):
        mid = np.sqrt(lo * hi)
        if measure(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < CALIBRATION_RTOL:
            break
    amp = np.sqrt(lo * hi)
    got = measure(amp)
    if abs(got / target - 1) > 0.01:
        raise CalibrationError(f"calibration stalled: target {target:.6g}, measured {got:.6g}")
    return float(amp)


def measured_norm(data: PrimitiveState, target: str, cutoffs: CutoffFamily, sigma: int = 4) -> float:
    if target == "y_norm":
        return y_norm(data, sigma, cutoffs)
    return sobolev_norm(data.data[1:], 3, 2, data.grid)


def generate_initial(config: ScenarioConfig, grid: Grid2D = None,
                     params: SimulationParams = None) -> PrimitiveState:
    """Initial state for the configured profile and calibration target.

    The irrotational part is scaled so its Y^4 norm equals theta / C; the
    vortex part so its velocity has H^3 norm theta * eps.  A single-part
    profile uses ``init.target`` to choose between the two conditions.
    """
    grid = grid or config.grid()
    params = params or config.params()
    theta, eps = params.theta, params.epsilon
    profile, target = config["init.profile"], config["init.target"]
    seed, width = config["init.seed"], config["init.width"]
    cut = CutoffFamily(eps, params.kappa0)
    y_target = theta / config["init.constant"]
    h3_target = theta * eps
    state = PrimitiveState.equilibrium(grid, params)
    if theta == 0:
        return state

    def scaled(shape, tgt, kind):
        base = state.with_data(shape)
        amp = calibrate(lambda a: measured_norm(base.with_data(a * shape), kind, cut), tgt)
        return amp * shape

    parts = []
    if profile in ("gaussian_irrotational", "combined"):
        kind = "y_norm" if profile == "combined" else target
        parts.append(scaled(irrotational_shape(grid, seed, width),
                            y_target if kind == "y_norm" else h3_target, kind))
    if profile in ("gaussian_vortex", "combined"):
        kind = "h3_norm" if profile == "combined" else target
        parts.append(scaled(vortex_shape(grid, seed, width),
                            y_target if kind == "y_norm" else h3_target, kind))
    return state.with_data(sum(parts))

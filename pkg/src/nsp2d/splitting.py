"""Main/perturbation decomposition and the lifespan experiment.

The solution of the full system is written as (rho, u) + (n, v): the main
part solves the curl-free "low" system from the potential part of the data,
and the perturbation carries the rotational velocity and is driven by the
source eps (1/(rho+n) - 1)(L v + L u).

Two step orderings are available.  ``"interpolated"`` (the default) takes a
full Strang step of the main system first, then a Strang step of the
perturbation whose nonlinear substep sees the main state frozen at the
linear interpolant (main(t) + main(t+dt))/2.  ``"coupled"`` advances the
stacked six-component state with a single Strang step; its stages add up
to the full-system stages, so main + pert then agrees with the full solver
to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .solver import (NumericalAbort, PrimitiveSolver, PrimitiveState, SimulationParams,
                     _advance_with_cfl, apply_modewise, check_density)
from .spectral import Grid2D

COUPLINGS = ("interpolated", "coupled")
# multi-indices with |alpha| <= 3
MULTI_INDICES = [(i, o - i) for o in range(4) for i in range(o, -1, -1)]


@dataclass(frozen=True, eq=False)
class SplitState:
    main: PrimitiveState
    pert: PrimitiveState

    @property
    def time(self) -> float:
        return self.main.time

    @property
    def grid(self) -> Grid2D:
        return self.main.grid

    def combined(self) -> PrimitiveState:
        return self.main + self.pert


def split_initial(data: PrimitiveState) -> SplitState:
    """Main part gets (rho0, P_perp u0); perturbation gets (0, P u0)."""
    g = data.grid
    rho, u1, u2 = data.data
    kdotu = g.k1 * u1 + g.k2 * u2
    pot = np.stack([g.k1 * kdotu, g.k2 * kdotu]) * g._inv_ksq
    pot[:, 0, 0] = data.data[1:, 0, 0]
    rot = data.data[1:] - pot
    main = data.with_data(np.concatenate([rho[None], pot]))
    pert = data.with_data(np.concatenate([np.zeros_like(rho)[None], rot]))
    return SplitState(main, pert)


class SplitSolver:
    """Synchronous stepping of the main and perturbation systems."""

    def __init__(self, grid: Grid2D, params: SimulationParams, nonlinear: bool = True,
                 coupling: str = "interpolated"):
        if coupling not in COUPLINGS:
            raise ValueError(f"unknown coupling {coupling!r}; expected one of {COUPLINGS}")
        self.grid = grid
        self.params = params
        self.nonlinear = nonlinear
        self.coupling = coupling
        self.main_solver = PrimitiveSolver(grid, params, "low", nonlinear)
        self.pert_solver = PrimitiveSolver(grid, params, "general", nonlinear)

    def pert_tendency(self, main: np.ndarray, pert: np.ndarray) -> np.ndarray:
        """Nonlinear and source terms of the perturbation equations."""
        g = self.grid
        eps = self.params.epsilon
        rho = g.inverse(main[0])
        n = g.inverse(pert[0])
        check_density(rho + n, "rho + n")
        u = g.inverse(main[1:])
        v = g.inverse(pert[1:])
        du = g.inverse(np.stack([1j * g.k1 * main[1:], 1j * g.k2 * main[1:]]))
        dv = g.inverse(np.stack([1j * g.k1 * pert[1:], 1j * g.k2 * pert[1:]]))
        # -div(rho v + n u + n v); the linear -div v lives in the propagator
        flux = g.product(np.stack([rho * v[i] + n * u[i] + n * v[i] for i in range(2)]))
        dn = -g.div(flux)
        lap_total = self.pert_solver.viscous(main[1:] + pert[1:])
        lv_lu = g.inverse(lap_total)
        weight = 1.0 / (1.0 + rho + n) - 1.0
        terms = np.stack([
            u[0] * dv[0, i] + u[1] * dv[1, i]
            + v[0] * du[0, i] + v[1] * du[1, i]
            + v[0] * dv[0, i] + v[1] * dv[1, i]
            - eps * weight * lv_lu[i]
            for i in range(2)])
        dvel = -g.product(terms)
        return np.concatenate([dn[None], dvel])

    def rhs_perturbation(self, split: SplitState) -> np.ndarray:
        """Full tendency of (n, v) (linear part included)."""
        out = self.pert_solver.linear_tendency(split.pert.data)
        return out + self.pert_tendency(split.main.data, split.pert.data)

    # stepping --------------------------------------------------------------
    def _nonlinear(self, z: np.ndarray) -> np.ndarray:
        main, pert = z[:3], z[3:]
        nm = self.main_solver.nonlinear_tendency(main)
        npert = self.pert_tendency(main, pert)
        return np.concatenate([nm, npert])

    def _strang(self, z: np.ndarray, dt: float) -> np.ndarray:
        if self.coupling == "interpolated":
            return self._strang_interpolated(z, dt)
        pm = self.main_solver.propagator(0.5 * dt)
        pp = self.pert_solver.propagator(0.5 * dt)

        def lin(arr):
            return np.concatenate([apply_modewise(pm, arr[:3]), apply_modewise(pp, arr[3:])])

        z = lin(z)
        if self.nonlinear:
            k1 = self._nonlinear(z)
            k2 = self._nonlinear(z + 0.5 * dt * k1)
            z = z + dt * k2
        return lin(z)

    def _strang_interpolated(self, z: np.ndarray, dt: float) -> np.ndarray:
        m0 = z[:3]
        m1 = self.main_solver._strang(m0, dt)
        mid = 0.5 * (m0 + m1)
        pp = self.pert_solver.propagator(0.5 * dt)
        p = apply_modewise(pp, z[3:])
        if self.nonlinear:
            k1 = self.pert_tendency(mid, p)
            k2 = self.pert_tendency(mid, p + 0.5 * dt * k1)
            p = p + dt * k2
        return np.concatenate([m1, apply_modewise(pp, p)])

    def cfl_limit(self, z: np.ndarray) -> float:
        g = self.grid
        vel = g.inverse(z[1:3] + z[4:6])
        umax = np.max(np.sqrt(np.sum(vel ** 2, axis=0)))
        return np.inf if umax == 0 else 0.5 * g.dx / umax

    def step(self, split: SplitState, dt: Optional[float] = None) -> SplitState:
        dt = self.params.dt if dt is None else dt
        z = np.concatenate([split.main.data, split.pert.data])
        holder = _Stacked(split.main.grid, z, split)
        out = _advance_with_cfl(self, holder, dt)
        t = split.time + dt
        return SplitState(split.main.with_data(out[:3], t), split.pert.with_data(out[3:], t))

    def advance(self, split: SplitState, t_end: float, callback=None) -> SplitState:
        dt = self.params.dt
        t0 = split.time
        span = t_end - t0
        n_steps = int(np.ceil(span / dt - 1e-9))
        for i in range(max(n_steps, 0)):
            h = dt
            if i == n_steps - 1:
                last = span - (n_steps - 1) * dt
                if abs(last - dt) > 1e-9 * dt:
                    h = last
            split = self.step(split, h)
            t = t_end if i == n_steps - 1 else t0 + (i + 1) * dt
            split = SplitState(replace(split.main, time=t), replace(split.pert, time=t))
            if callback is not None:
                callback(split)
        return split


@dataclass
class _Stacked:
    grid: Grid2D
    data: np.ndarray
    origin: SplitState

    @property
    def time(self):
        return self.origin.time


# ---------------------------------------------------------------------------
# energy and lifespan

def energy_E3(pert: PrimitiveState, main: PrimitiveState) -> float:
    """sum_{|alpha|<=3} 1/2 int (1+rho+n)|d^a v|^2 + |d^a n|^2 + |d^a grad psi|^2."""
    g = pert.grid
    n_h = pert.data[0]
    v_h = pert.data[1:]
    psi_grad = g.grad(g.inv_laplacian(n_h))
    weight = 1.0 + g.inverse(main.data[0]) + g.inverse(n_h)
    parseval = g.length ** 2
    total = 0.0
    for a1, a2 in MULTI_INDICES:
        sym = (1j * g.k1) ** a1 * (1j * g.k2) ** a2
        dv = g.inverse(sym * v_h)
        total += 0.5 * g.cell_area * float(np.sum(weight * (dv[0] ** 2 + dv[1] ** 2)))
        total += 0.5 * parseval * float(np.sum(np.abs(sym) ** 2
                                               * (np.abs(n_h) ** 2 + np.sum(np.abs(psi_grad) ** 2, 0))))
    return total


def lifespan_threshold(epsilon: float, theta: float) -> float:
    return 4 * theta ** 2 * epsilon ** (2 - theta)


@dataclass
class LifespanResult:
    epsilon: float
    theta: float
    threshold: float
    t_star: float
    t_cap: float
    crossed: bool
    aborted: bool = False
    message: str = ""
    times: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)

    @property
    def energy_series(self):
        return list(zip(self.times, self.energy))


def lifespan_probe(split: SplitState, params: SimulationParams, t_cap: Optional[float] = None,
                   check_every: int = 10) -> LifespanResult:
    """Integrate until E3 exceeds 4 theta^2 eps^(2-theta) or t reaches t_cap.

    E3 is evaluated every ``check_every`` steps; the crossing time is the
    first such sample above threshold.
    """
    eps, theta = params.epsilon, params.theta
    if t_cap is None:
        t_cap = 4.0 * eps ** (-(1 - theta))
    threshold = lifespan_threshold(eps, theta)
    solver = SplitSolver(split.grid, params)
    res = LifespanResult(eps, theta, threshold, t_cap, t_cap, False)

    def sample(s):
        res.times.append(float(s.time))
        res.energy.append(energy_E3(s.pert, s.main))
        return res.energy[-1] > threshold

    if sample(split):
        res.t_star, res.crossed = split.time, True
        return res
    dt = params.dt
    chunk = check_every * dt
    t = split.time
    try:
        while t < t_cap - 1e-12:
            t_next = min(t + chunk, t_cap)
            split = solver.advance(split, t_next)
            t = t_next
            if sample(split):
                res.t_star, res.crossed = t, True
                break
    except NumericalAbort as err:
        res.t_star, res.aborted, res.message = float(t), True, str(err)
    return res


def lifespan_slope(results) -> float:
    """Least-squares slope of log t_star against log(1/eps)."""
    x = np.log([1.0 / r.epsilon for r in results])
    y = np.log([r.t_star for r in results])
    return float(np.polyfit(x, y, 1)[0])

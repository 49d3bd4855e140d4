"""Time integration of the Navier-Stokes-Poisson system on the torus.

Primitive unknowns are the density perturbation rho = rho_total - 1 and the
velocity u; the potential phi solves Laplacian(phi) = rho and is always
recomputed.  Three variants of the momentum equation are supported:

``"low"``      du/dt + u.grad u - 2 eps Lap u + grad rho - grad phi = 0
               (viscous operator 2 Lap, valid for curl-free flows)
``"general"``  same with eps (Lap u + grad div u)
``"full"``     the density-weighted form  - (eps / rho_total)(Lap u + grad div u)

Stepping is Strang splitting: exact linear propagation over dt/2, an
explicit-midpoint nonlinear substep over dt, exact linear over dt/2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .linear import SymmetrizedState, green_entries
from .spectral import Grid2D, SpectralField

VACUUM_FLOOR = 0.25
MAX_DT_HALVINGS = 10
SYSTEMS = ("low", "general", "full")


class NumericalAbort(RuntimeError):
    """Integration stopped; ``snapshot`` holds the last good state."""

    def __init__(self, message: str, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class VacuumError(NumericalAbort):
    pass


class CFLError(NumericalAbort):
    pass


@dataclass(frozen=True)
class SimulationParams:
    epsilon: float = 0.1
    kappa0: float = 1.0 / 200.0
    dt: float = 0.05
    t_end: float = 1.0
    theta: float = 0.1
    delta: float = 1.0 / 1000.0
    n_reg: int = 11
    n_prime: int = 7
    sigma: int = 0

    gamma = 2
    mu = 1
    lambda_lame = 0

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"params.epsilon must lie in (0, 1], got {self.epsilon}")
        for name in ("kappa0", "dt", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"params.{name} must be positive, got {getattr(self, name)}")
        if self.t_end < 0:
            raise ValueError(f"params.t_end must be non-negative, got {self.t_end}")
        if self.theta < 0:
            raise ValueError(f"params.theta must be non-negative, got {self.theta}")

    @property
    def alpha_decay(self) -> float:
        return 2 - 5 * self.delta


@dataclass(frozen=True, eq=False)
class PrimitiveState:
    """Coefficients of (rho, u1, u2) stacked along the first axis."""

    grid: Grid2D
    data: np.ndarray
    time: float = 0.0
    params: Optional[SimulationParams] = None

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.shape != (3, self.grid.n, self.grid.n):
            raise ValueError(f"state array has shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @classmethod
    def from_fields(cls, rho: SpectralField, u, time=0.0, params=None):
        return cls(rho.grid, np.stack([rho.coefficients, u[0].coefficients, u[1].coefficients]),
                   time, params)

    @classmethod
    def equilibrium(cls, grid: Grid2D, params=None):
        return cls(grid, np.zeros((3, grid.n, grid.n), dtype=complex), 0.0, params)

    @property
    def rho(self) -> SpectralField:
        return SpectralField(self.grid, self.data[0])

    @property
    def u(self):
        return SpectralField(self.grid, self.data[1]), SpectralField(self.grid, self.data[2])

    @property
    def phi(self) -> SpectralField:
        return SpectralField(self.grid, self.grid.inv_laplacian(self.data[0]))

    def with_data(self, data, time=None) -> "PrimitiveState":
        return PrimitiveState(self.grid, data, self.time if time is None else time, self.params)

    def __add__(self, other: "PrimitiveState") -> "PrimitiveState":
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "PrimitiveState") -> "PrimitiveState":
        return self.with_data(self.data - other.data)

    def l2(self) -> float:
        """L^2 norm of (rho, u) via Parseval."""
        return float(np.sqrt(self.grid.length ** 2 * np.sum(np.abs(self.data) ** 2)))


# ---------------------------------------------------------------------------
# change of variables

def to_symmetrized(state: PrimitiveState) -> SymmetrizedState:
    """a = (<D>/|D|) rho, c = (div/|D|) u; the zero modes are dropped."""
    g = state.grid
    rho, u1, u2 = state.data
    a = g.kbracket * g._inv_k * rho
    c = 1j * (g.k1 * u1 + g.k2 * u2) * g._inv_k
    return SymmetrizedState(SpectralField(g, a), SpectralField(g, c), state.time)


def to_primitive(U: SymmetrizedState, params=None) -> PrimitiveState:
    """Inverse map for curl-free data: rho = (|D|/<D>) a, u = -R c."""
    g = U.grid
    a, c = U.stacked()
    rho = g.kabs / g.kbracket * a
    u = -1j * np.stack([g.k1, g.k2]) * g._inv_k * c
    return PrimitiveState(g, np.stack([rho, u[0], u[1]]), U.time, params)


# ---------------------------------------------------------------------------
# linear propagation in primitive variables

def primitive_propagator(grid: Grid2D, t: float, epsilon: float,
                         transverse_factor: float) -> np.ndarray:
    """3x3 per-mode matrix advancing (rho, u1, u2) under the linear system.

    The longitudinal pair follows the Green matrix of A(k); the transverse
    velocity decays like exp(-transverse_factor * eps |k|^2 t).
    """
    g1, g2, g3 = green_entries(t, grid.ksq, epsilon)
    e = np.exp(-transverse_factor * epsilon * grid.ksq * t)
    h1 = grid.k1 * grid._inv_k
    h2 = grid.k2 * grid._inv_k
    ratio = grid.kabs / grid.kbracket
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_ratio = np.where(grid.kabs > 0, grid.kbracket * grid._inv_k, 0.0)
    h = (h1, h2)
    hp = (-h2, h1)
    m = np.zeros((3, 3) + grid.ksq.shape, dtype=complex)
    m[0, 0] = g1
    m[0, 1] = -1j * ratio * g2 * h1
    m[0, 2] = -1j * ratio * g2 * h2
    for j in range(2):
        m[1 + j, 0] = -1j * inv_ratio * g2 * h[j]
        for l in range(2):
            m[1 + j, 1 + l] = g3 * h[j] * h[l] + e * hp[j] * hp[l]
    # k = 0: no linear dynamics for the mean density and mean flow
    m[:, :, 0, 0] = np.eye(3)
    return m


def apply_modewise(m: np.ndarray, data: np.ndarray) -> np.ndarray:
    return np.einsum("ijxy,jxy->ixy", m, data)


# ---------------------------------------------------------------------------
# solver

class PrimitiveSolver:
    """Strang-split integrator for one of the ``SYSTEMS`` variants."""

    def __init__(self, grid: Grid2D, params: SimulationParams, system: str = "low",
                 nonlinear: bool = True):
        if system not in SYSTEMS:
            raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
        self.grid = grid
        self.params = params
        self.system = system
        self.nonlinear = nonlinear
        self.transverse_factor = 2.0 if system == "low" else 1.0
        self._props = {}

    # -- operators ---------------------------------------------------------
    def propagator(self, t: float) -> np.ndarray:
        key = float(t)
        if key not in self._props:
            if len(self._props) > 8:
                self._props.clear()
            self._props[key] = primitive_propagator(self.grid, key, self.params.epsilon,
                                                    self.transverse_factor)
        return self._props[key]

    def viscous(self, uh: np.ndarray) -> np.ndarray:
        """The viscous operator (without eps) applied to velocity coefficients."""
        g = self.grid
        if self.system == "low":
            return 2 * g.laplacian(uh)
        return g.laplacian(uh) + g.grad(g.div(uh))

    def linear_tendency(self, data: np.ndarray) -> np.ndarray:
        g = self.grid
        rho, uh = data[0], data[1:]
        eps = self.params.epsilon
        drho = -g.div(uh)
        du = eps * self.viscous(uh) - g.grad(rho) + g.grad(g.inv_laplacian(rho))
        return np.concatenate([drho[None], du])

    def nonlinear_tendency(self, data: np.ndarray) -> np.ndarray:
        g = self.grid
        rho_h, uh = data[0], data[1:]
        rho = g.inverse(rho_h)
        check_density(rho, "1 + rho")
        u = g.inverse(uh)
        du = g.inverse(np.stack([1j * g.k1 * uh, 1j * g.k2 * uh]))  # du[j, i] = d_j u_i
        flux = g.product(np.stack([rho * u[0], rho * u[1]]))
        drho = -g.div(flux)
        adv = np.stack([u[0] * du[0, i] + u[1] * du[1, i] for i in range(2)])
        if self.system == "full":
            lu = g.inverse(self.viscous(uh))
            adv = adv - self.params.epsilon * (1.0 / (1.0 + rho) - 1.0) * lu
        dvel = -g.product(adv)
        return np.concatenate([drho[None], dvel])

    def rhs(self, state: PrimitiveState) -> np.ndarray:
        """Full tendency (linear + nonlinear) of (rho, u)."""
        out = self.linear_tendency(state.data)
        if self.nonlinear:
            out = out + self.nonlinear_tendency(state.data)
        return out

    # -- stepping ----------------------------------------------------------
    def cfl_limit(self, data: np.ndarray) -> float:
        umax = np.max(np.sqrt(np.sum(self.grid.inverse(data[1:]) ** 2, axis=0)))
        return np.inf if umax == 0 else 0.5 * self.grid.dx / umax

    def _strang(self, data: np.ndarray, dt: float) -> np.ndarray:
        half = self.propagator(0.5 * dt)
        z = apply_modewise(half, data)
        if self.nonlinear:
            k1 = self.nonlinear_tendency(z)
            k2 = self.nonlinear_tendency(z + 0.5 * dt * k1)
            z = z + dt * k2
        return apply_modewise(half, z)

    def step(self, state: PrimitiveState, dt: Optional[float] = None) -> PrimitiveState:
        dt = self.params.dt if dt is None else dt
        data = _advance_with_cfl(self, state, dt)
        return state.with_data(data, state.time + dt)

    def advance(self, state: PrimitiveState, t_end: float,
                callback: Optional[Callable[[PrimitiveState], None]] = None) -> PrimitiveState:
        """Step to ``t_end`` with the configured dt (last step shortened)."""
        return _march(self, state, t_end, callback)


def check_density(rho_phys: np.ndarray, label: str, snapshot=None):
    lo = float(np.min(1.0 + rho_phys))
    if not np.isfinite(lo) or lo < VACUUM_FLOOR:
        raise VacuumError(f"vacuum guard: min({label}) = {lo:.4g} < {VACUUM_FLOOR}", snapshot)


def _advance_with_cfl(solver, state, dt: float) -> np.ndarray:
    """One step of size dt, split into 2^k substeps if the CFL bound fails."""
    for halvings in range(MAX_DT_HALVINGS + 1):
        sub = dt / 2 ** halvings
        if sub <= solver.cfl_limit(state.data):
            break
    else:
        raise CFLError(f"CFL violated after {MAX_DT_HALVINGS} halvings of dt={dt}", state)
    data = state.data
    try:
        for _ in range(2 ** halvings):
            data = solver._strang(data, sub)
    except VacuumError as err:
        raise VacuumError(str(err), state) from None
    if not np.all(np.isfinite(data)):
        raise NumericalAbort(f"non-finite state after step at t={state.time}", state)
    return data


def _march(solver, state, t_end: float, callback=None):
    dt = solver.params.dt
    t0 = state.time
    span = t_end - t0
    n_steps = int(np.ceil(span / dt - 1e-9))
    for i in range(max(n_steps, 0)):
        h = dt
        if i == n_steps - 1:
            last = span - (n_steps - 1) * dt
            if abs(last - dt) > 1e-9 * dt:
                h = last
        state = solver.step(state, h)
        # pin the clock to the nominal grid so repeated runs agree exactly
        state = replace(state, time=t_end if i == n_steps - 1 else t0 + (i + 1) * dt)
        if callback is not None:
            callback(state)
    return state


# ---------------------------------------------------------------------------
# symmetrized (curl-free) formulation

def rhs_symmetrized(state: SymmetrizedState) -> np.ndarray:
    """Quadratic part F(a, c) of the symmetrized system.

    F1 = -<D>/|D| div(rho u),  F2 = (div/|D|)(-u.grad u) = |D| |u|^2 / 2,
    with rho = (|D|/<D>) a and u = -R c.
    """
    g = state.grid
    a, c = state.stacked()
    rho = g.inverse(g.kabs / g.kbracket * a)
    u = g.inverse(-1j * np.stack([g.k1, g.k2]) * g._inv_k * c)
    flux = g.product(np.stack([rho * u[0], rho * u[1]]))
    f1 = -g.kbracket * g._inv_k * g.div(flux)
    f2 = 0.5 * g.kabs * g.product(u[0] ** 2 + u[1] ** 2)
    return np.stack([f1, f2])


class SymmetrizedSolver:
    """Strang stepping of dU/dt + A U = F(U) with the exact Green matrix."""

    def __init__(self, grid: Grid2D, params: SimulationParams, nonlinear: bool = True):
        self.grid = grid
        self.params = params
        self.nonlinear = nonlinear

    def _green(self, arr, t):
        from .linear import apply_green
        return apply_green(arr, t, self.grid, self.params.epsilon)

    def step(self, state: SymmetrizedState, dt: Optional[float] = None) -> SymmetrizedState:
        dt = self.params.dt if dt is None else dt
        g = self.grid
        z = self._green(state.stacked(), 0.5 * dt)
        if self.nonlinear:
            k1 = rhs_symmetrized(SymmetrizedState.from_stacked(g, z))
            mid = z + 0.5 * dt * k1
            k2 = rhs_symmetrized(SymmetrizedState.from_stacked(g, mid))
            z = z + dt * k2
        z = self._green(z, 0.5 * dt)
        return SymmetrizedState.from_stacked(g, z, state.time + dt)


# ---------------------------------------------------------------------------

def run_trajectory(initial: PrimitiveState, params: SimulationParams,
                   sample_times: Iterable[float], system: str = "low",
                   diagnostics: Optional[Callable[[PrimitiveState], object]] = None,
                   on_sample: Optional[Callable[[PrimitiveState, object], None]] = None):
    """Integrate to the last sample time, recording (state, report) pairs.

    ``diagnostics`` maps a state to its report (None if omitted).  On a
    numerical abort the samples gathered so far are attached to the raised
    exception as ``partial``.
    """
    solver = PrimitiveSolver(initial.grid, params, system)
    times = sorted(float(t) for t in sample_times)
    state = replace(initial, params=params)
    out = []

    def record(s):
        rep = diagnostics(s) if diagnostics is not None else None
        out.append((s, rep))
        if on_sample is not None:
            on_sample(s, rep)

    try:
        for t in times:
            if t < state.time - 1e-12:
                continue
            state = solver.advance(state, t)
            record(state)
    except NumericalAbort as err:
        err.partial = out
        raise
    return out

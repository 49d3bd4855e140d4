import numpy as np
import pytest

from nsp2d.experiments import irrotational_data, vortex_data
from nsp2d.linear import (SymmetrizedState, eval_linear_symbol, green_matrix, propagate_linear)
from nsp2d.solver import (CFLError, PrimitiveSolver, PrimitiveState, SimulationParams,
                          SymmetrizedSolver, VacuumError, rhs_symmetrized, run_trajectory,
                          to_primitive, to_symmetrized)
from nsp2d.spectral import Grid2D, SpectralField

from conftest import random_real

G = Grid2D(32, 16 * np.pi)
P = SimulationParams(epsilon=0.1, dt=0.05, t_end=1.0)


def small_irrotational(amp=0.02):
    return irrotational_data(G, amp, 3.0, P)


def test_params_validation():
    with pytest.raises(ValueError, match="epsilon"):
        SimulationParams(epsilon=0.0)
    with pytest.raises(ValueError, match="dt"):
        SimulationParams(dt=-1.0)
    with pytest.raises(ValueError):
        PrimitiveSolver(G, P, "bogus")


def test_round_trip_symmetrized():
    s = small_irrotational()
    back = to_primitive(to_symmetrized(s))
    assert np.max(np.abs(back.data - s.data)) <= 1e-10 * np.max(np.abs(s.data))


def test_phi_is_poisson_of_rho():
    s = small_irrotational()
    lap = G.laplacian(s.phi.coefficients)
    assert np.max(np.abs(lap - G.mean_zero(s.data[0]))) < 1e-14


@pytest.mark.parametrize("system", ["low", "general", "full"])
def test_equilibrium_zero_tendency(system):
    st = PrimitiveState.equilibrium(G, P)
    assert np.max(np.abs(PrimitiveSolver(G, P, system).rhs(st))) == 0.0


def test_single_mode_density_tendency():
    rho = np.zeros((G.n, G.n), complex)
    rho[3, 2] = rho[-3, -2] = 1e-6
    st = PrimitiveState(G, np.stack([rho, 0 * rho, 0 * rho]), 0.0, P)
    du = PrimitiveSolver(G, P, "low", nonlinear=False).rhs(st)[1:]
    k = np.array([G.k1[3, 2], G.k2[3, 2]])
    expected = -1j * k * (1 + 1 / (k @ k)) * 1e-6
    np.testing.assert_allclose(du[:, 3, 2], expected, rtol=1e-13)


def test_linear_tendency_matches_generator():
    s = small_irrotational(1e-3)
    U = to_symmetrized(s)
    tend = PrimitiveSolver(G, P, "low", nonlinear=False).rhs(s)
    # generator -A U mapped back through the same change of variables
    xi = np.stack([G.k1, G.k2], -1)
    a_hat = eval_linear_symbol(xi, P.epsilon).a_hat
    vec = np.moveaxis(U.stacked(), 0, -1)[..., None]
    gen = -np.moveaxis((a_hat @ vec)[..., 0], -1, 0)
    mapped = to_primitive(SymmetrizedState.from_stacked(G, gen)).data
    tend = tend.copy()
    tend[:, 0, 0] = 0
    assert np.max(np.abs(tend - mapped)) <= 1e-10 * np.max(np.abs(tend))


def test_symmetrized_nonlinearity_trivial_cases(rng):
    zero = SymmetrizedState(SpectralField.zeros(G), SpectralField.zeros(G))
    assert np.max(np.abs(rhs_symmetrized(zero))) == 0.0
    a_only = SymmetrizedState(random_real(G, rng, 1e-2), SpectralField.zeros(G))
    assert np.max(np.abs(rhs_symmetrized(a_only))) == 0.0


def test_symmetrized_nonlinearity_matches_primitive():
    s = small_irrotational(0.01)
    F = rhs_symmetrized(to_symmetrized(s))
    mapped = to_primitive(SymmetrizedState.from_stacked(G, F)).data
    prim = PrimitiveSolver(G, P, "low").nonlinear_tendency(s.data)
    prim = prim.copy()
    prim[:, 0, 0] = 0
    assert np.max(np.abs(mapped - prim)) <= 1e-9 * np.max(np.abs(prim))


def test_linear_strang_equals_green(rng):
    U = SymmetrizedState(random_real(G, rng), random_real(G, rng))
    solver = SymmetrizedSolver(G, P, nonlinear=False)
    out = solver.step(U, 0.05).stacked()
    ref = propagate_linear(U, 0.05, P.epsilon).stacked()
    assert np.max(np.abs(out - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_linear_single_mode_to_t1():
    rho = np.zeros((G.n, G.n), complex)
    rho[2, 1] = 1e-3
    st = PrimitiveState(G, np.stack([rho, 0 * rho, 0 * rho]), 0.0, P)
    out = PrimitiveSolver(G, P, "low", nonlinear=False).advance(st, 1.0)
    U0 = to_symmetrized(st).stacked()[:, 2, 1]
    gm = green_matrix(1.0, eval_linear_symbol(np.array([G.k1[2, 1], G.k2[2, 1]]), P.epsilon))
    ref = gm @ U0
    got = to_symmetrized(out).stacked()[:, 2, 1]
    assert np.max(np.abs(got - ref)) <= 1e-8 * np.max(np.abs(U0))


def _run(dt, system="low", t_end=0.4, data=None):
    params = SimulationParams(epsilon=0.1, dt=dt, t_end=t_end)
    init = data if data is not None else irrotational_data(G, 0.05, 2.0, params)
    return PrimitiveSolver(G, params, system).advance(init, t_end).data


@pytest.mark.parametrize("system", ["low", "full"])
def test_self_convergence_order(system):
    a, b, c = (_run(dt, system) for dt in (0.1, 0.05, 0.025))
    order = np.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert 1.8 <= order <= 2.2


def test_trajectory_zero_time_returns_initial():
    s = small_irrotational()
    out = run_trajectory(s, P, [0.0])
    assert len(out) == 1 and np.array_equal(out[0][0].data, s.data)


def test_mass_conservation_and_determinism():
    s = small_irrotational(0.05)
    a = run_trajectory(s, P, [0.5, 1.0])
    b = run_trajectory(s, P, [0.5, 1.0])
    assert abs(a[-1][0].data[0, 0, 0] - s.data[0, 0, 0]) * G.length ** 2 <= 1e-10
    assert all(np.array_equal(x[0].data, y[0].data) for x, y in zip(a, b))


def test_vacuum_guard():
    s = small_irrotational(1.0)
    st = s.with_data(s.data * 0 + np.stack([G.forward(-0.9 * np.exp(-(G.x1 ** 2 + G.x2 ** 2))),
                                            0 * s.data[1], 0 * s.data[2]]))
    with pytest.raises(VacuumError) as info:
        PrimitiveSolver(G, P, "low").step(st)
    assert info.value.snapshot is not None


def test_cfl_abort():
    params = SimulationParams(epsilon=0.1, dt=1e3)
    data = np.stack([0 * G.ksq, G.forward(np.full((G.n, G.n), 1e6)), 0 * G.ksq]).astype(complex)
    with pytest.raises(CFLError):
        PrimitiveSolver(G, params).step(PrimitiveState(G, data, 0.0, params))


def test_dissipation_monotone_in_epsilon():
    """Larger eps dissipates at least as much integrated enstrophy."""
    data = irrotational_data(G, 0.02, 2.0)
    data = data.with_data(data.data + vortex_data(G, 0.02, 2.0))
    loss = []
    for eps in (0.05, 0.1, 0.2):
        params = SimulationParams(epsilon=eps, dt=0.05)
        grad = lambda s: np.sum(np.abs(np.concatenate([G.grad(s.data[1]), G.grad(s.data[2])])) ** 2)
        vals = [grad(data)]
        PrimitiveSolver(G, params, "general").advance(data.with_data(data.data), 2.0,
                                                       callback=lambda s: vals.append(grad(s)))
        # viscous dissipation eps * int ||grad u||^2 dt (trapezoid)
        loss.append(eps * 0.05 * (np.sum(vals) - 0.5 * (vals[0] + vals[-1])))
    assert loss[0] <= loss[1] * 1.01 and loss[1] <= loss[2] * 1.01

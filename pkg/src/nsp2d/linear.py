"""Exact per-mode linear theory of the symmetrized system.

For each frequency the linearization reads dU/dt + A(xi) U = 0 with

    A(xi) = [[0, <xi>], [-<xi>, 2 eps |xi|^2]],

whose eigenvalues are -lambda_pm, lambda_pm = -eps|xi|^2 +- i b(xi),
b(xi) = sqrt(1 + |xi|^2 - eps^2 |xi|^4).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import CutoffFamily, Grid2D, SpectralField

# |lambda_+ - lambda_-| below this uses the confluent (t-multiplied) form
CONFLUENT_TOL = 1e-8
# |(lambda_+ - lambda_-) t / 2| below this uses the sinh(z)/z series
_SERIES_TOL = 0.1


def dispersion(ksq, epsilon):
    """b(xi) on the branch that keeps Re lambda_+ <= 0.

    Where the radicand r = 1 + |xi|^2 - eps^2 |xi|^4 is negative the root is
    i sqrt(-r): the square root is cut along the negative imaginary axis.
    """
    ksq = np.asarray(ksq, dtype=float)
    r = 1.0 + ksq - epsilon ** 2 * ksq ** 2
    root = np.sqrt(np.abs(r))
    return np.where(r >= 0, root + 0j, 1j * root)


def eigenvalues(ksq, epsilon):
    b = dispersion(ksq, epsilon)
    damp = -epsilon * np.asarray(ksq, dtype=float)
    return damp + 1j * b, damp - 1j * b


@dataclass(frozen=True)
class LinearSymbol:
    """Per-mode bundle of the linear theory at frequency ``xi``.

    Arrays broadcast over any leading shape of ``xi`` (last axis = 2).
    """

    xi: np.ndarray
    epsilon: float
    b: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    a_hat: np.ndarray
    q: np.ndarray
    q_inv: np.ndarray

    @property
    def ksq(self):
        return np.sum(self.xi ** 2, axis=-1)


def eval_linear_symbol(xi, epsilon: float) -> LinearSymbol:
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    xi = np.asarray(xi, dtype=float)
    ksq = np.sum(xi ** 2, axis=-1)
    bracket = np.sqrt(1.0 + ksq)
    b = dispersion(ksq, epsilon)
    lp, lm = eigenvalues(ksq, epsilon)
    zero = np.zeros_like(ksq)
    a_hat = np.stack([np.stack([zero, bracket], -1),
                      np.stack([-bracket, 2 * epsilon * ksq], -1)], -2).astype(complex)
    q = np.stack([np.stack([np.ones_like(lp), np.ones_like(lp)], -1),
                  np.stack([-lm / bracket, -lp / bracket], -1)], -2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q_inv = np.stack([np.stack([lp, bracket + 0j], -1),
                          np.stack([-lm, -bracket + 0j], -1)], -2) / (2j * b)[..., None, None]
    return LinearSymbol(xi, float(epsilon), b, lp, lm, a_hat, q, q_inv)


def _exp_divided_difference(t, mean, half_gap):
    """(e^{lambda_+ t} - e^{lambda_- t}) / (lambda_+ - lambda_-), stably.

    lambda_pm = mean +- half_gap.  Small |half_gap t| falls back to the
    series e^{mean t} t sinh(z)/z, z = half_gap t, which reduces to the
    confluent limit t e^{lambda t} when the eigenvalues coincide.
    """
    z = half_gap * t
    small = np.abs(z) < _SERIES_TOL
    confluent = np.abs(2 * half_gap) < CONFLUENT_TOL
    z2 = z * z
    series = 1 + z2 / 6 * (1 + z2 / 20 * (1 + z2 / 42 * (1 + z2 / 72)))
    series = np.where(confluent, 1.0 + z2 / 6, series)
    em = np.exp(mean * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.exp((mean + half_gap) * t) - np.exp((mean - half_gap) * t)) / (2 * half_gap)
    return np.where(small, em * t * series, direct)


def green_entries(t, ksq, epsilon):
    """(G1, G2, G3) with exp(-t A) = [[G1, -G2], [G2, G3]]."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("green_entries needs t >= 0")
    ksq = np.asarray(ksq, dtype=float)
    damp = epsilon * ksq
    bracket = np.sqrt(1.0 + ksq)
    half_gap = 1j * dispersion(ksq, epsilon)
    mean = -damp
    lp_t = (mean + half_gap) * t
    lm_t = (mean - half_gap) * t
    cosh_part = 0.5 * (np.exp(lp_t) + np.exp(lm_t))
    s = _exp_divided_difference(t, mean, half_gap)
    g1 = cosh_part + damp * s
    g2 = bracket * s
    g3 = cosh_part - damp * s
    return g1, g2, g3


def green_matrix(t, sym: LinearSymbol) -> np.ndarray:
    """exp(-t A(xi)) as an array of 2x2 matrices."""
    g1, g2, g3 = green_entries(t, sym.ksq, sym.epsilon)
    return np.stack([np.stack([g1, -g2], -1), np.stack([g2, g3], -1)], -2)


def spectral_norm_2x2(m: np.ndarray) -> np.ndarray:
    """Largest singular value of each 2x2 matrix in ``m``."""
    fro2 = np.sum(np.abs(m) ** 2, axis=(-2, -1))
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2 ** 2 - 4 * np.abs(det) ** 2, 0.0))
    return np.sqrt(0.5 * (fro2 + disc))


@dataclass(frozen=True, eq=False)
class SymmetrizedState:
    """U = (a, c): a = (<D>/|D|) rho, c = (div/|D|) u."""

    a: SpectralField
    c: SpectralField
    time: float = 0.0

    @property
    def grid(self) -> Grid2D:
        return self.a.grid

    def stacked(self) -> np.ndarray:
        return np.stack([self.a.coefficients, self.c.coefficients])

    @classmethod
    def from_stacked(cls, grid: Grid2D, arr: np.ndarray, time: float = 0.0):
        return cls(SpectralField(grid, arr[0]), SpectralField(grid, arr[1]), time)


def apply_green(arr: np.ndarray, t: float, grid: Grid2D, epsilon: float) -> np.ndarray:
    """Apply exp(-t A(k)) mode-wise to a stacked (a, c) coefficient array."""
    g1, g2, g3 = green_entries(t, grid.ksq, epsilon)
    a, c = arr
    return np.stack([g1 * a - g2 * c, g2 * a + g3 * c])


def propagate_linear(state: SymmetrizedState, t: float, epsilon: float) -> SymmetrizedState:
    """Homogeneous solve of dU/dt + A U = 0 over time ``t``."""
    out = apply_green(state.stacked(), t, state.grid, epsilon)
    return SymmetrizedState.from_stacked(state.grid, out, state.time + t)


def propagate_diagonal(state: SymmetrizedState, t: float, epsilon: float,
                       cutoffs: CutoffFamily) -> SymmetrizedState:
    """Low-band propagation through Q diag(e^{lambda_- t}, e^{lambda_+ t}) Q^{-1}.

    Only meaningful where chi^L > 0; elsewhere the output is zero.
    """
    g = state.grid
    xi = np.stack([g.k1, g.k2], -1)
    sym = eval_linear_symbol(xi, epsilon)
    low = cutoffs.low_total(g.kabs) > 0
    u = state.stacked()
    vec = np.moveaxis(u, 0, -1)[..., None]
    q_inv = np.where(low[..., None, None], sym.q_inv, 0)
    w = (q_inv @ vec)[..., 0]
    w = w * np.stack([np.exp(sym.lambda_minus * t), np.exp(sym.lambda_plus * t)], -1)
    out = (sym.q @ w[..., None])[..., 0]
    out = np.where(low[..., None], out, 0)
    return SymmetrizedState.from_stacked(g, np.moveaxis(out, -1, 0), state.time + t)


def half_wave(w: SpectralField, t: float, cutoffs: CutoffFamily) -> SpectralField:
    """exp(i t b(D)) chi^L(D) w."""
    g = w.grid
    b = dispersion(g.ksq, cutoffs.epsilon)
    chi = cutoffs.low_total(g.kabs)
    # exp(i t b) is only needed on supp chi^L, where b is real
    phase = np.where(chi > 0, np.exp(1j * t * b), 0.0)
    return SpectralField(g, w.coefficients * chi * phase)


def band_propagator_norms(grid: Grid2D, epsilon: float, band: str, times,
                          kappa0: float = 1.0 / 200.0) -> np.ndarray:
    """max over lattice modes in a band of ||exp(-t A(xi))||_2, for each t.

    ``band`` is ``"high"`` (supp chi^h) or ``"mid"`` (supp chi^m).
    """
    if band not in ("high", "mid"):
        raise ValueError(f"unknown band {band!r}")
    cut = CutoffFamily(epsilon, kappa0)
    chi = cut.high(grid.kabs) if band == "high" else cut.mid(grid.kabs)
    ksq = np.unique(grid.ksq[chi > 0])
    if ksq.size == 0:
        raise ValueError(f"no lattice modes in the {band} band for epsilon={epsilon}")
    out = np.empty(len(times))
    for i, t in enumerate(times):
        g1, g2, g3 = green_entries(t, ksq, epsilon)
        mats = np.stack([np.stack([g1, -g2], -1), np.stack([g2, g3], -1)], -2)
        out[i] = spectral_norm_2x2(mats).max()
    return out

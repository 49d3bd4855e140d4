"""Norms, energy functionals and fitted rates.

Every norm is evaluated on the physical grid with the cell weight (L/N)^2.
Vector-valued data are reduced with the pointwise Euclidean magnitude
before the Lebesgue sum.  Fractional smoothness is realized uniformly
through the Bessel potential <D>^s.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .linear import SymmetrizedState, dispersion
from .solver import PrimitiveState, SimulationParams, to_symmetrized
from .spectral import CutoffFamily, Grid2D, SpectralField, littlewood_paley_symbols

MIN_FIT_SAMPLES = 8
MASS_FRACTION = 0.99
# fixed values for the "2+" and "3+" regularity indices of the symbol bounds
TWO_PLUS = 2.25
THREE_PLUS = 3.25


def _coefficients(f, grid: Optional[Grid2D] = None) -> Tuple[Grid2D, np.ndarray]:
    """Normalize a field argument to (grid, coefficient array with leading component axes)."""
    if isinstance(f, SpectralField):
        return f.grid, f.coefficients
    if isinstance(f, PrimitiveState):
        return f.grid, f.data
    if isinstance(f, (list, tuple)) and f and isinstance(f[0], SpectralField):
        return f[0].grid, np.stack([c.coefficients for c in f])
    if grid is None:
        raise TypeError("a grid is required for raw coefficient arrays")
    return grid, np.asarray(f)


def lp_norm(values: np.ndarray, p: float, cell_area: float) -> float:
    """Discrete L^p norm of physical samples; leading axes are vector components."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")
    if values.ndim > 2:
        mag = np.sqrt(np.sum(np.abs(values) ** 2, axis=tuple(range(values.ndim - 2))))
    else:
        mag = np.abs(values)
    if np.isinf(p):
        return float(np.max(mag))
    if p < 1:
        raise ValueError(f"L^p needs p >= 1, got {p}")
    peak = float(np.max(mag))
    if peak == 0.0:
        return 0.0
    # scale out the peak so large p does not overflow
    return peak * float(cell_area * np.sum((mag / peak) ** p)) ** (1.0 / p)


def sobolev_norm(f, s: float, p: float, grid: Optional[Grid2D] = None) -> float:
    """||<D>^s f||_{L^p}."""
    if s < 0:
        raise ValueError(f"smoothness must be non-negative, got {s}")
    grid, c = _coefficients(f, grid)
    if not np.all(np.isfinite(c)):
        raise ValueError("field contains non-finite coefficients")
    if p == 2:
        # Parseval avoids a transform
        return float(np.sqrt(grid.length ** 2 * np.sum(grid.kbracket ** (2 * s) * np.abs(c) ** 2)))
    phys = grid.inverse(c * grid.kbracket ** s, real=False)
    return lp_norm(phys, p, grid.cell_area)


def besov_sum(f, s: float, grid: Optional[Grid2D] = None) -> float:
    """sum_j 2^(2js) ||Delta_j f||_{L^2}^2 over the blocks Psi, Phi_1, Phi_2, ..."""
    grid, c = _coefficients(f, grid)
    blocks = littlewood_paley_symbols(grid.kabs)
    weight = np.abs(c) ** 2
    if weight.ndim > 2:
        weight = weight.sum(axis=tuple(range(weight.ndim - 2)))
    return float(sum(4.0 ** (j * s) * grid.length ** 2 * np.sum(blk ** 2 * weight)
                     for j, blk in enumerate(blocks)))


def mass_fraction(f, grid: Optional[Grid2D] = None) -> float:
    """Share of int |f|^2 inside the central box of side L/2."""
    grid, c = _coefficients(f, grid)
    phys = grid.inverse(c, real=False)
    mag = np.abs(phys) ** 2
    if mag.ndim > 2:
        mag = mag.sum(axis=tuple(range(mag.ndim - 2)))
    total = mag.sum()
    if total == 0:
        return 1.0
    inner = (np.abs(grid.x1) < grid.length / 4) & (np.abs(grid.x2) < grid.length / 4)
    return float(mag[inner].sum() / total)


def primitive_triple(state: PrimitiveState) -> np.ndarray:
    """Coefficients of (rho, u1, u2, d1 phi, d2 phi)."""
    g = state.grid
    return np.concatenate([state.data, g.grad(g.inv_laplacian(state.data[0]))])


def _bracket_t(t: float) -> float:
    return float(np.sqrt(1.0 + t * t))


# ---------------------------------------------------------------------------
# X_T components

def dispersive_profile(U: SymmetrizedState, cutoffs: CutoffFamily) -> np.ndarray:
    """Q^{-1} chi^L U, stacked (w, second component)."""
    g = U.grid
    a, c = U.stacked()
    chi = cutoffs.low_total(g.kabs)
    on = chi > 0
    b = dispersion(g.ksq, cutoffs.epsilon)
    lp = -cutoffs.epsilon * g.ksq + 1j * b
    lm = -cutoffs.epsilon * g.ksq - 1j * b
    denom = np.where(on, 2j * b, 1.0)
    w1 = np.where(on, (lp * a + g.kbracket * c) / denom, 0.0) * chi
    w2 = np.where(on, (-lm * a - g.kbracket * c) / denom, 0.0) * chi
    return np.stack([w1, w2])


def weighted_profile(U: SymmetrizedState, t: float, cutoffs: CutoffFamily) -> np.ndarray:
    """Coefficients of x e^{itb(D)} chi^L w, stacked over the two weight components."""
    g = U.grid
    w = dispersive_profile(U, cutoffs)[0]
    chi = cutoffs.low_total(g.kabs)
    b = dispersion(g.ksq, cutoffs.epsilon)
    prof = np.where(chi > 0, np.exp(1j * t * b), 0.0) * chi * w
    phys = g.inverse(prof, real=False)
    return g.forward(np.stack([g.x1 * phys, g.x2 * phys]))


def xt_components(U: SymmetrizedState, t: float, params: SimulationParams,
                  cutoffs: Optional[CutoffFamily] = None) -> Dict[str, float]:
    """Instantaneous values of the pieces of the X_T norm.

    ``weighted`` uses the W^{sigma+4, 2/(1-delta)} index; ``weighted_h``
    is the same object measured in H^{sigma+4+delta}.
    """
    g = U.grid
    cut = cutoffs or CutoffFamily(params.epsilon, params.kappa0)
    sig, delta = params.sigma, params.delta
    n_reg, n_prime = params.n_reg, params.n_prime
    tb = _bracket_t(t)
    arr = U.stacked()
    chi_low = cut.low_total(g.kabs)
    chi_mid = cut.mid(g.kabs)
    chi_high = cut.high(g.kabs)

    qw = dispersive_profile(U, cut)
    low_disp = tb * sobolev_norm(np.sqrt(g.kabs) * g.kbracket * qw, sig, np.inf, g)
    xw = weighted_profile(U, t, cut)
    return {
        "low_disp": low_disp,
        "weighted": sobolev_norm(xw, sig + 4, 2.0 / (1.0 - delta), g),
        "weighted_h": sobolev_norm(xw, sig + 4 + delta, 2, g),
        "low_sob": sobolev_norm(arr * chi_low, sig + n_prime, 2, g),
        "mid_sob": tb ** (1 - 3 * delta) * sobolev_norm(arr * chi_mid, 2 * sig + n_reg - 1, 2, g),
        "mid_w14": tb ** 1.5 * sobolev_norm(arr * chi_mid, 1, 4, g),
        "high_sob": tb ** params.alpha_decay * sobolev_norm(arr * chi_high, 2 * sig + n_reg - 2, 2, g),
        "top_sob": tb ** (-delta) * sobolev_norm(arr, 2 * sig + n_reg, 2, g),
    }


# ---------------------------------------------------------------------------
# energies and the initial-data norm

def multi_indices(order: int):
    return [(i, o - i) for o in range(order + 1) for i in range(o, -1, -1)]


def energy_EN(state: PrimitiveState, order: int = 11) -> float:
    """E_N = sum_{|alpha|<=N} 1/2 int rho|d^a u|^2 + |d^a rho|^2 + |d^a grad phi|^2."""
    g = state.grid
    rho_h, uh = state.data[0], state.data[1:]
    gphi = g.grad(g.inv_laplacian(rho_h))
    rho_phys = g.inverse(rho_h)
    parseval = g.length ** 2
    total = 0.0
    for a1, a2 in multi_indices(order):
        sym = (1j * g.k1) ** a1 * (1j * g.k2) ** a2
        s2 = np.abs(sym) ** 2
        # rho = 1 + rho_pert: the unit part by Parseval, the rest on the grid
        total += 0.5 * parseval * float(np.sum(s2 * (np.abs(uh[0]) ** 2 + np.abs(uh[1]) ** 2
                                                     + np.abs(rho_h) ** 2
                                                     + np.abs(gphi[0]) ** 2 + np.abs(gphi[1]) ** 2)))
        du = g.inverse(sym * uh)
        total += 0.5 * g.cell_area * float(np.sum(rho_phys * (du[0] ** 2 + du[1] ** 2)))
    return total


def y_norm(initial: PrimitiveState, sigma: int = 0, cutoffs: Optional[CutoffFamily] = None,
           delta: float = 1.0 / 1000.0) -> float:
    """||F^L||_{W^{s+4,1}} + ||x F^L||_{H^{s+4+delta}} + ||x F^h||_{L^2} + ||F||_{H^{11+2s}}

    with F = (rho0 - 1, u0, grad phi0).
    """
    g = initial.grid
    if cutoffs is None:
        p = initial.params
        cutoffs = CutoffFamily(p.epsilon, p.kappa0) if p is not None else CutoffFamily(0.1)
    tri = primitive_triple(initial)
    low = tri * cutoffs.low_total(g.kabs)
    high = tri * cutoffs.high(g.kabs)
    low_phys = g.inverse(low)
    high_phys = g.inverse(high)
    x_low = g.forward(np.concatenate([g.x1 * low_phys, g.x2 * low_phys]))
    x_high = np.concatenate([g.x1 * high_phys, g.x2 * high_phys])
    return (sobolev_norm(low, sigma + 4, 1, g)
            + sobolev_norm(x_low, sigma + 4 + delta, 2, g)
            + lp_norm(x_high, 2, g.cell_area)
            + sobolev_norm(tri, 11 + 2 * sigma, 2, g))


def weighted_high_norm(state: PrimitiveState, cutoffs: Optional[CutoffFamily] = None) -> float:
    """||<x> (rho, u, grad phi)^h||_{L^2} with the centred weight."""
    g = state.grid
    if cutoffs is None:
        p = state.params or SimulationParams()
        cutoffs = CutoffFamily(p.epsilon, p.kappa0)
    high = g.inverse(primitive_triple(state) * cutoffs.high(g.kabs))
    weight = np.sqrt(1.0 + g.x1 ** 2 + g.x2 ** 2)
    return lp_norm(weight * high, 2, g.cell_area)


# ---------------------------------------------------------------------------
# report

NORM_COLUMNS = ("time", "l2", "linf", "w1inf", "low_disp", "weighted", "weighted_h",
                "low_sob", "mid_sob", "mid_w14", "high_sob", "top_sob", "e_n",
                "weighted_high", "mass_fraction", "stale")


@dataclass
class NormReport:
    time: float
    l2: float
    linf: float
    w1inf: float
    xt_components: Dict[str, float] = field(default_factory=dict)
    e_n: float = 0.0
    weighted_high: float = 0.0
    mass_fraction: float = 1.0

    @property
    def stale(self) -> bool:
        """True once wrap-around makes the whole-space reading unreliable."""
        return self.mass_fraction < MASS_FRACTION

    def row(self):
        vals = {"time": self.time, "l2": self.l2, "linf": self.linf, "w1inf": self.w1inf,
                "e_n": self.e_n, "weighted_high": self.weighted_high,
                "mass_fraction": self.mass_fraction, "stale": int(self.stale)}
        vals.update(self.xt_components)
        return [vals[c] for c in NORM_COLUMNS]


def norm_report(state: PrimitiveState, params: Optional[SimulationParams] = None,
                energy_order: int = 3) -> NormReport:
    params = params or state.params or SimulationParams()
    g = state.grid
    cut = CutoffFamily(params.epsilon, params.kappa0)
    tri = primitive_triple(state)
    phys = g.inverse(tri)
    grads = g.inverse(np.concatenate([1j * g.k1 * tri, 1j * g.k2 * tri]))
    xt = xt_components(to_symmetrized(state), state.time, params, cut)
    return NormReport(
        time=float(state.time),
        l2=lp_norm(phys, 2, g.cell_area),
        linf=lp_norm(phys, np.inf, g.cell_area),
        w1inf=lp_norm(phys, np.inf, g.cell_area) + lp_norm(grads, np.inf, g.cell_area),
        xt_components=xt,
        e_n=energy_EN(state, energy_order),
        weighted_high=weighted_high_norm(state, cut),
        mass_fraction=mass_fraction(tri, g),
    )


# ---------------------------------------------------------------------------
# fits

@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r_squared: float
    window: Tuple[float, float]
    samples: int = 0

    def as_dict(self):
        return {"exponent": self.exponent, "intercept": self.intercept,
                "r_squared": self.r_squared, "window": list(self.window), "samples": self.samples}


def _linear_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def fit_decay(series, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """Least-squares slope of log(value) against log(1 + t)."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t, v = arr[:, 0], arr[:, 1]
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if t.size < MIN_FIT_SAMPLES:
        raise ValueError(f"decay fit needs at least {MIN_FIT_SAMPLES} samples, got {t.size}")
    if np.any(v <= 0):
        raise ValueError("decay fit needs positive values in the window")
    slope, intercept, r2 = _linear_fit(np.log1p(t), np.log(v))
    return DecayFit(slope, intercept, r2, (float(t.min()), float(t.max())), int(t.size))


def fit_exponential_rate(times, values, discard: float = 0.1):
    """Rate c in value ~ C exp(-c t), dropping the first ``discard`` share of samples.

    Returns (rate, log C, r_squared).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    start = int(np.floor(discard * t.size))
    t, v = t[start:], v[start:]
    if t.size < 2 or np.any(v <= 0):
        raise ValueError("exponential fit needs at least two positive samples")
    slope, intercept, r2 = _linear_fit(t, np.log(v))
    return -slope, intercept, r2


# ---------------------------------------------------------------------------
# commutator

def bump(x1, x2, center=(0.5, 0.0), radius: float = 1.0):
    """Smooth bump supported in the disc of ``radius`` about ``center``."""
    r2 = ((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2) / radius ** 2
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def commutator_probe(R: float, theta_symbol=None, zeta_profile=None, f: SpectralField = None,
                     support: float = 1.5) -> float:
    """||zeta_R Theta(D) f - Theta(D)(zeta_R f)||_{L^2}, zeta_R(x) = zeta(x/R).

    ``support`` bounds |x| on supp zeta; the default bump sits off the
    origin so grad zeta(0) != 0 and the leading 1/R term survives.
    """
    if f is None:
        raise ValueError("commutator_probe needs a field f")
    g = f.grid
    if R * support > g.length / 2:
        raise ValueError(f"zeta_R with R={R} reaches |x| = {R * support:.4g}, "
                         f"beyond the half box {g.length / 2:.4g}")
    zeta = zeta_profile or bump
    if theta_symbol is None:
        sym = 1.0 / g.kbracket
    elif callable(theta_symbol):
        sym = np.broadcast_to(np.asarray(theta_symbol(g.k1, g.k2), dtype=complex), g.ksq.shape)
    else:
        sym = np.broadcast_to(np.asarray(theta_symbol, dtype=complex), g.ksq.shape)
    z = zeta(g.x1 / R, g.x2 / R)
    fphys = g.inverse(f.coefficients, real=False)
    left = z * g.inverse(sym * f.coefficients, real=False)
    right = g.inverse(sym * g.forward(z * fphys), real=False)
    return lp_norm(left - right, 2, g.cell_area)


def commutator_slope(f: SpectralField, radii: Sequence[float] = (4, 8, 16), **kw) -> float:
    vals = [commutator_probe(R, f=f, **kw) for R in radii]
    return float(np.polyfit(np.log(radii), np.log(vals), 1)[0])

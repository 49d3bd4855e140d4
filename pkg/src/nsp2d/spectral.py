"""Periodic-box spectral machinery.

The plane is approximated by the torus [-L/2, L/2)^2 sampled on an N x N
grid.  Coefficients follow the convention

    f(x) = sum_k fhat(k) exp(i k.x),

with x measured from the box centre, so a product of two fields has the
discrete convolution of their coefficient arrays as its coefficients.
Coefficient arrays are stored in FFT order (index 0 is the zero mode).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import scipy.fft as sfft

Symbol = Union[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def fft_workers() -> int:
    """Thread count for FFTs, capped by ``NSP2D_THREADS`` (default 1)."""
    raw = os.environ.get("NSP2D_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class Grid2D:
    """Uniform grid on [-L/2, L/2)^2 with its frequency lattice."""

    def __init__(self, n: int = 256, length: float = 64 * np.pi,
                 dealias_fraction: float = 2.0 / 3.0):
        if n <= 0 or n % 2:
            raise ValueError(f"grid size must be a positive even integer, got {n}")
        if not length > 0:
            raise ValueError(f"box length must be positive, got {length}")
        if not 0 < dealias_fraction <= 1:
            raise ValueError(f"dealias fraction must lie in (0, 1], got {dealias_fraction}")
        self.n = int(n)
        self.length = float(length)
        self.dealias_fraction = float(dealias_fraction)
        self.dx = self.length / self.n
        self.cell_area = self.dx ** 2

        coords = -self.length / 2 + self.dx * np.arange(self.n)
        self.x1, self.x2 = np.meshgrid(coords, coords, indexing="ij")

        m = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)
        self.m1, self.m2 = np.meshgrid(m, m, indexing="ij")
        dk = 2 * np.pi / self.length
        self.dk = dk
        self.k1 = dk * self.m1
        self.k2 = dk * self.m2
        self.ksq = self.k1 ** 2 + self.k2 ** 2
        self.kabs = np.sqrt(self.ksq)
        self.kbracket = np.sqrt(1.0 + self.ksq)

        self.nyquist = (self.m1 == -self.n // 2) | (self.m2 == -self.n // 2)
        cut = self.dealias_fraction * self.n / 2
        self.dealias_mask = ((np.abs(self.m1) <= cut) & (np.abs(self.m2) <= cut)
                             & ~self.nyquist)
        # exp(i k.x) evaluated at the corner x = (-L/2, -L/2)
        self._shift = np.where((self.m1 + self.m2) % 2 == 0, 1.0, -1.0)
        self._inv_k = np.zeros_like(self.kabs)
        nz = self.kabs > 0
        self._inv_k[nz] = 1.0 / self.kabs[nz]
        self._inv_ksq = self._inv_k ** 2

    def __repr__(self) -> str:
        return f"Grid2D(n={self.n}, length={self.length!r})"

    def same_as(self, other: "Grid2D") -> bool:
        return (self is other or (self.n == other.n and self.length == other.length
                                  and self.dealias_fraction == other.dealias_fraction))

    # transforms -----------------------------------------------------------
    def forward(self, f: np.ndarray) -> np.ndarray:
        """Physical samples -> coefficients (acts on the last two axes)."""
        return sfft.fft2(f, workers=fft_workers()) * (self._shift / self.n ** 2)

    def inverse(self, fhat: np.ndarray, real: bool = True) -> np.ndarray:
        """Coefficients -> physical samples; ``real`` drops the imaginary part."""
        out = sfft.ifft2(fhat * self._shift, workers=fft_workers()) * self.n ** 2
        return out.real if real else out

    def dealias(self, fhat: np.ndarray) -> np.ndarray:
        return fhat * self.dealias_mask

    def product(self, *fields_phys: np.ndarray) -> np.ndarray:
        """Dealiased coefficients of a pointwise product of physical fields."""
        prod = fields_phys[0]
        for f in fields_phys[1:]:
            prod = prod * f
        return self.forward(prod) * self.dealias_mask

    # elementary multipliers ----------------------------------------------
    def grad(self, fhat: np.ndarray) -> np.ndarray:
        return np.stack([1j * self.k1 * fhat, 1j * self.k2 * fhat])

    def div(self, vhat: np.ndarray) -> np.ndarray:
        return 1j * self.k1 * vhat[0] + 1j * self.k2 * vhat[1]

    def curl(self, vhat: np.ndarray) -> np.ndarray:
        return 1j * self.k1 * vhat[1] - 1j * self.k2 * vhat[0]

    def laplacian(self, fhat: np.ndarray) -> np.ndarray:
        return -self.ksq * fhat

    def riesz(self) -> np.ndarray:
        """Symbol i k/|k| stacked over components; zero at k = 0."""
        return np.stack([1j * self.k1 * self._inv_k, 1j * self.k2 * self._inv_k])

    def inv_laplacian(self, fhat: np.ndarray) -> np.ndarray:
        return -fhat * self._inv_ksq

    def mean_zero(self, fhat: np.ndarray) -> np.ndarray:
        out = np.array(fhat, copy=True)
        out[..., 0, 0] = 0.0
        return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of a scalar field on ``grid``."""

    grid: Grid2D
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"coefficient array has shape {c.shape}, "
                             f"expected {(self.grid.n, self.grid.n)}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_physical(cls, grid: Grid2D, values: np.ndarray) -> "SpectralField":
        return cls(grid, grid.forward(np.asarray(values)))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    def physical(self, real: bool = True) -> np.ndarray:
        return self.grid.inverse(self.coefficients, real=real)

    def _check(self, other: "SpectralField"):
        if not self.grid.same_as(other.grid):
            raise ValueError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coefficients - other.coefficients)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coefficients * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coefficients)

    def l2(self) -> float:
        """L^2 norm over the box via Parseval."""
        return float(np.sqrt(self.grid.length ** 2 * np.sum(np.abs(self.coefficients) ** 2)))


def _evaluate_symbol(grid: Grid2D, symbol: Symbol) -> np.ndarray:
    if callable(symbol):
        values = np.asarray(symbol(grid.k1, grid.k2))
    else:
        values = np.asarray(symbol)
    return np.broadcast_to(values, (grid.n, grid.n))


def apply_multiplier(field: SpectralField, symbol: Symbol,
                     zero_mode=None) -> SpectralField:
    """Multiply coefficients pointwise by ``symbol``.

    ``symbol`` is an array over the lattice or a callable ``(k1, k2) -> array``.
    ``zero_mode`` overrides the symbol value at k = 0, which is where the
    singular symbols (Riesz, |D|^-1) need a stated convention.
    """
    values = np.array(_evaluate_symbol(field.grid, symbol), dtype=complex)
    if zero_mode is not None:
        values[0, 0] = zero_mode
    bad = ~np.isfinite(values)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        g = field.grid
        raise ValueError(f"symbol is not finite at mode (m1, m2) = "
                         f"({g.m1[i, j]}, {g.m2[i, j]}), k = ({g.k1[i, j]:.6g}, {g.k2[i, j]:.6g})")
    return SpectralField(field.grid, field.coefficients * values)


def poisson_solve(rho: SpectralField) -> SpectralField:
    """phi with Laplacian(phi) = rho; the zero mode of phi is set to 0."""
    return SpectralField(rho.grid, rho.grid.inv_laplacian(rho.coefficients))


def leray_split(u: Sequence[SpectralField]):
    """Split a vector field into divergence-free and curl-free parts.

    Returns ``(rotational, potential)``, each a pair of fields; the mean
    flow is assigned to the potential part.
    """
    grid = u[0].grid
    uh = np.stack([u[0].coefficients, u[1].coefficients])
    kdotu = grid.k1 * uh[0] + grid.k2 * uh[1]
    pot = np.stack([grid.k1 * kdotu, grid.k2 * kdotu]) * grid._inv_ksq
    pot[:, 0, 0] = uh[:, 0, 0]
    rot = uh - pot
    return ((SpectralField(grid, rot[0]), SpectralField(grid, rot[1])),
            (SpectralField(grid, pot[0]), SpectralField(grid, pot[1])))


def leray_projector(grid: Grid2D, vhat: np.ndarray) -> np.ndarray:
    """Array form of the divergence-free projection (zero mode dropped)."""
    kdotv = grid.k1 * vhat[0] + grid.k2 * vhat[1]
    out = vhat - np.stack([grid.k1 * kdotv, grid.k2 * kdotv]) * grid._inv_ksq
    out[..., 0, 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# smooth cutoffs

def _mollifier(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(r, start: float, stop: float):
    """C-infinity transition from 0 (r <= start) to 1 (r >= stop)."""
    t = (np.asarray(r, dtype=float) - start) / (stop - start)
    a = _mollifier(t)
    b = _mollifier(1.0 - t)
    return a / (a + b)


def chi1(r):
    """Equal to 1 for r <= 1/2, supported in r <= 1."""
    return 1.0 - smooth_step(r, 0.5, 1.0)


def chi3(r):
    """Zero for r <= 5/2, equal to 1 for r >= 3."""
    return smooth_step(r, 2.5, 3.0)


def chi2(r):
    """Remainder 1 - chi1 - chi3, supported in 1/2 <= r <= 3."""
    return 1.0 - chi1(r) - chi3(r)


def lp_psi(r):
    """Littlewood-Paley low-pass: 1 on |x| <= 3/2, 0 beyond 5/3."""
    return 1.0 - smooth_step(r, 1.5, 5.0 / 3.0)


def lp_phi(r, j: int):
    """Dyadic annulus Phi_j(r) = Psi(r/2^j) - Psi(r/2^(j-1))."""
    r = np.asarray(r, dtype=float)
    return lp_psi(r / 2.0 ** j) - lp_psi(r / 2.0 ** (j - 1))


def littlewood_paley_symbols(kabs: np.ndarray, j_max=None):
    """[Psi, Phi_1, ..., Phi_J] on the given |k| values.

    J is chosen so that the family sums to one on every supplied frequency.
    """
    kmax = float(np.max(kabs)) if np.size(kabs) else 0.0
    if j_max is None:
        j_max = 1
        while 1.5 * 2.0 ** j_max < kmax:
            j_max += 1
    return [lp_psi(kabs)] + [lp_phi(kabs, j) for j in range(1, j_max + 1)]


@dataclass(frozen=True)
class CutoffFamily:
    """Three-band cutoffs at the scaled argument sqrt(eps/kappa0) |xi|."""

    epsilon: float
    kappa0: float = 1.0 / 200.0

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.kappa0 > 0:
            raise ValueError(f"kappa0 must be positive, got {self.kappa0}")

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.epsilon / self.kappa0))

    def low(self, kabs):
        return chi1(self.scale * np.asarray(kabs))

    def mid(self, kabs):
        return chi2(self.scale * np.asarray(kabs))

    def high(self, kabs):
        return chi3(self.scale * np.asarray(kabs))

    def low_total(self, kabs):
        """chi^L = chi^l + chi^m."""
        return 1.0 - self.high(kabs)

    def high_total(self, kabs):
        """chi^H = chi^m + chi^h."""
        return 1.0 - self.low(kabs)

    def radius(self, edge: float) -> float:
        """|xi| at which the scaled argument equals ``edge``."""
        return edge / self.scale


def band_split(field: SpectralField, cutoffs: CutoffFamily):
    """(low, mid, high) parts; the high part is the remainder so the sum is exact."""
    g = field.grid
    c = field.coefficients
    low = c * cutoffs.low(g.kabs)
    mid = c * cutoffs.mid(g.kabs)
    high = c - low - mid
    return SpectralField(g, low), SpectralField(g, mid), SpectralField(g, high)

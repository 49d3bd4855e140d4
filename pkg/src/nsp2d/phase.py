"""Phase functions, multipliers and bilinear operators of the normal form.

All symbols here take frequency vectors with the last axis of length 2 and
broadcast over the leading axes.  Signs mu, nu are given as +1 / -1 (or
the strings "+" / "-").
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Dict, Optional

import numpy as np

from .diagnostics import THREE_PLUS, TWO_PLUS, sobolev_norm
from .linear import dispersion
from .spectral import CutoffFamily, Grid2D, SpectralField, chi3

BILINEAR_MAX_N = 64
# finite-difference steps for symbol derivatives, by total derivative order
FD_STEPS = {0: 0.0, 1: 1e-4, 2: 1e-4, 3: 1e-3, 4: 3e-3}
# chi^L is identically one for scaled radius <= 5/2 and vanishes beyond 3
PLATEAU_EDGE = 2.5
SUPPORT_EDGE = 3.0


def _sign(s) -> int:
    if s in ("+", 1, +1):
        return 1
    if s in ("-", -1):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {s!r}")


def _sq(v):
    v = np.asarray(v, dtype=float)
    return v[..., 0] ** 2 + v[..., 1] ** 2


def b_of(v, epsilon):
    return dispersion(_sq(v), epsilon)


def quantity_Z(xi, eta, epsilon):
    """eps(|xi+eta|^2 - |xi|^2 - |eta|^2) = 2 eps xi.eta."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    return epsilon * (_sq(xi + eta) - _sq(xi) - _sq(eta))


def quantity_A(xi, eta, epsilon):
    """(b(xi) + b(eta))^2 - b(xi+eta)^2, real on the low-frequency support."""
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    out = (b_of(xi, epsilon) + b_of(eta, epsilon)) ** 2 - b_of(xi + eta, epsilon) ** 2
    return np.real(out)


def quantity_A_expanded(xi, eta, epsilon):
    """1 + 2 b(xi) b(eta) - 2 xi.eta - eps^2 (|xi|^4 + |eta|^4 - |xi+eta|^4).

    Algebraically equal to :func:`quantity_A`; kept separate as a cross-check.
    """
    xi, eta = np.asarray(xi, float), np.asarray(eta, float)
    bb = np.real(b_of(xi, epsilon) * b_of(eta, epsilon))
    dot = np.sum(xi * eta, axis=-1)
    quart = _sq(xi) ** 2 + _sq(eta) ** 2 - _sq(xi + eta) ** 2
    return 1 + 2 * bb - 2 * dot - epsilon ** 2 * quart


@dataclass(frozen=True)
class PhaseSymbol:
    """phi_{mu nu}(xi+eta, eta) and m_{mu nu}(xi+eta, eta) as functions of (xi, eta).

    ``n_factor`` picks the factor n_pm: ``"lambda"`` uses -lambda_-/<xi>
    for n_+ and -lambda_+/<xi> for n_-, ``"one"`` uses 1.
    ``cutoffs=False`` drops the chi^L product (the plateau symbol).
    """

    epsilon: float
    kappa0: float = 1.0 / 200.0
    mu: int = 1
    nu: int = 1
    n_factor: str = "lambda"
    cutoffs: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mu", _sign(self.mu))
        object.__setattr__(self, "nu", _sign(self.nu))
        if self.n_factor not in ("lambda", "one"):
            raise ValueError(f"n_factor must be 'lambda' or 'one', got {self.n_factor!r}")

    @property
    def family(self) -> CutoffFamily:
        return CutoffFamily(self.epsilon, self.kappa0)

    def b(self, v):
        return b_of(v, self.epsilon)

    def Z(self, xi, eta):
        return quantity_Z(xi, eta, self.epsilon)

    def A(self, xi, eta):
        return quantity_A(xi, eta, self.epsilon)

    def phi(self, xi, eta):
        xi, eta = np.asarray(xi, float), np.asarray(eta, float)
        return (1j * (self.b(xi + eta) - self.mu * self.b(xi) - self.nu * self.b(eta))
                + self.Z(xi, eta))

    def n(self, sign: int, v):
        if self.n_factor == "one":
            return np.ones(np.shape(v)[:-1], dtype=complex)
        ksq = _sq(v)
        b = dispersion(ksq, self.epsilon)
        lam = -self.epsilon * ksq - sign * 1j * b  # lambda_- for sign +, lambda_+ for sign -
        return -lam / np.sqrt(1.0 + ksq)

    def chi_low(self, v):
        return 1.0 - chi3(self.family.scale * np.sqrt(_sq(v)))

    def m(self, xi, eta):
        xi, eta = np.asarray(xi, float), np.asarray(eta, float)
        s = xi + eta
        out = np.sqrt(1.0 + _sq(s)) * self.n(self.mu, xi) * self.n(self.nu, eta)
        if self.cutoffs:
            out = out * self.chi_low(xi) * self.chi_low(eta) * self.chi_low(s)
        return out

    def ratio(self, xi, eta):
        """m / phi."""
        return self.m(xi, eta) / self.phi(xi, eta)

    def bound(self, xi, eta):
        """<xi+eta> min{b(xi), b(eta), b(xi+eta)} (b real on the support)."""
        xi, eta = np.asarray(xi, float), np.asarray(eta, float)
        bs = np.stack([np.real(self.b(xi)), np.real(self.b(eta)), np.real(self.b(xi + eta))])
        return np.sqrt(1.0 + _sq(xi + eta)) * bs.min(axis=0)


# ---------------------------------------------------------------------------
# sampling

def sample_admissible(epsilon: float, count: int, kappa0: float = 1.0 / 200.0,
                      rng: Optional[np.random.Generator] = None, edge: float = SUPPORT_EDGE,
                      margin: float = 0.0):
    """Pairs (xi, eta) with |xi|, |eta|, |xi+eta| < (edge/scale) - margin.

    Points are drawn uniformly from the product of discs; the returned
    ``drawn`` count includes the rejected ones.
    """
    rng = rng or np.random.default_rng(0)
    radius = edge / CutoffFamily(epsilon, kappa0).scale - margin
    if radius <= 0:
        raise ValueError("sampling radius is not positive")
    got_xi, got_eta, drawn = [], [], 0
    have = 0
    while have < count:
        batch = max(2 * (count - have), 64)
        r = radius * np.sqrt(rng.random((2, batch)))
        ang = 2 * np.pi * rng.random((2, batch))
        pts = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
        ok = np.sqrt(_sq(pts[0] + pts[1])) < radius
        drawn += batch
        got_xi.append(pts[0][ok])
        got_eta.append(pts[1][ok])
        have += int(ok.sum())
    xi = np.concatenate(got_xi)[:count]
    eta = np.concatenate(got_eta)[:count]
    return xi, eta, drawn


def phase_bounds(epsilon: float, count: int = 100_000, kappa0: float = 1.0 / 200.0,
                 seed: int = 0) -> Dict[str, float]:
    """Minimum of A and |phi_{++}| over admissible samples."""
    xi, eta, drawn = sample_admissible(epsilon, count, kappa0, np.random.default_rng(seed))
    ps = PhaseSymbol(epsilon, kappa0)
    return {"epsilon": epsilon, "min_A": float(quantity_A(xi, eta, epsilon).min()),
            "min_abs_phi": float(np.abs(ps.phi(xi, eta)).min()),
            "samples": int(count), "drawn": int(drawn)}


# ---------------------------------------------------------------------------
# symbol-bound sweep

def _central_weights(order: int):
    """Offsets (in units of h) and weights of the centred difference of given order."""
    return [((order / 2.0 - j), (-1) ** j * comb(order, j)) for j in range(order + 1)]


def mixed_derivative(func: Callable, xi: np.ndarray, eta: np.ndarray, alpha, beta, h: float):
    """d_xi^alpha d_eta^beta func by tensor-product centred differences."""
    orders = (alpha[0], alpha[1], beta[0], beta[1])
    if sum(orders) == 0:
        return func(xi, eta)
    stencils = [_central_weights(o) for o in orders]
    total = 0.0
    for combo in itertools.product(*stencils):
        shift = np.array([c[0] for c in combo]) * h
        w = np.prod([c[1] for c in combo])
        total = total + w * func(xi + shift[:2], eta + shift[2:])
    return total / h ** sum(orders)


def _multi_up_to(order):
    return [(i, o - i) for o in range(order + 1) for i in range(o, -1, -1)]


@dataclass
class SymbolBoundReport:
    mu: int
    nu: int
    epsilon: float
    samples: int
    skipped: int
    max_ratio_by_order: Dict[int, float] = field(default_factory=dict)
    max_ratio_by_index: Dict[str, float] = field(default_factory=dict)
    plateau: bool = True

    @property
    def max_ratio(self) -> float:
        return max(self.max_ratio_by_order.values())


def symbol_bound_sweep(mu, nu, epsilon: float, sample_count: int = 2000,
                       kappa0: float = 1.0 / 200.0, seed: int = 0, plateau: bool = True,
                       max_order: int = 2, steps: Optional[Dict[int, float]] = None
                       ) -> SymbolBoundReport:
    """max |d^a_xi d^b_eta (m/phi)| / (<xi+eta> min b) for |a|, |b| <= max_order.

    With ``plateau`` the samples keep a full stencil inside the region where
    the chi^L product is identically one; otherwise the whole support is
    sampled and samples whose stencil leaves it are skipped and counted.
    """
    steps = steps or FD_STEPS
    ps = PhaseSymbol(epsilon, kappa0, mu, nu, cutoffs=not plateau)
    scale = ps.family.scale
    reach = 2 * max(steps.values())
    rng = np.random.default_rng(seed)
    edge = PLATEAU_EDGE if plateau else SUPPORT_EDGE
    xi, eta, drawn = sample_admissible(epsilon, sample_count, kappa0, rng, edge=edge,
                                       margin=reach if plateau else 0.0)
    skipped = drawn - sample_count
    if not plateau:
        # drop samples whose stencil would leave the support
        lim = SUPPORT_EDGE / scale - reach
        ok = ((np.sqrt(_sq(xi)) < lim) & (np.sqrt(_sq(eta)) < lim)
              & (np.sqrt(_sq(xi + eta)) < lim))
        skipped += int((~ok).sum())
        xi, eta = xi[ok], eta[ok]
    bound = ps.bound(xi, eta)
    rep = SymbolBoundReport(ps.mu, ps.nu, epsilon, int(xi.shape[0]), int(skipped), plateau=plateau)
    for a in _multi_up_to(max_order):
        for b in _multi_up_to(max_order):
            order = sum(a) + sum(b)
            d = mixed_derivative(ps.ratio, xi, eta, a, b, steps[order])
            val = float(np.max(np.abs(d) / bound))
            rep.max_ratio_by_index[f"{a[0]}{a[1]}|{b[0]}{b[1]}"] = val
            rep.max_ratio_by_order[order] = max(val, rep.max_ratio_by_order.get(order, 0.0))
    return rep


def phase_report(epsilon: float, case: str = "++", samples: int = 100_000,
                 sweep_samples: int = 2000, kappa0: float = 1.0 / 200.0, seed: int = 0) -> dict:
    """JSON-ready summary of the phase checks for one (epsilon, case)."""
    if len(case) != 2:
        raise ValueError(f"case must be two signs like '++', got {case!r}")
    mu, nu = _sign(case[0]), _sign(case[1])
    xi, eta, drawn = sample_admissible(epsilon, samples, kappa0, np.random.default_rng(seed))
    ps = PhaseSymbol(epsilon, kappa0, mu, nu)
    sweep = symbol_bound_sweep(mu, nu, epsilon, sweep_samples, kappa0, seed)
    return {
        "epsilon": epsilon, "case": case, "kappa0": kappa0,
        "min_A": float(quantity_A(xi, eta, epsilon).min()),
        "min_abs_phi": float(np.abs(ps.phi(xi, eta)).min()),
        "max_ratio_by_order": {str(k): v for k, v in sorted(sweep.max_ratio_by_order.items())},
        "samples": samples,
        "skipped": int(drawn - samples) + sweep.skipped,
        "two_plus": TWO_PLUS, "three_plus": THREE_PLUS,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True)


# ---------------------------------------------------------------------------
# bilinear operator

def bilinear_T(symbol: Callable, f: SpectralField, g: SpectralField,
               batch: int = 64) -> SpectralField:
    """T_m(f, g) with coefficients sum_eta m(xi, eta) fhat(xi - eta) ghat(eta).

    ``symbol(xi, eta)`` receives frequency vectors (last axis 2) in the
    (output, second input) convention of the definition; ``eta`` arrives
    with shape (B, 1, 1, 2) and must broadcast against ``xi``.  Sums run over
    the lattice and wrap cyclically, so the constant symbol reproduces the
    grid product exactly.
    """
    grid = f.grid
    if not grid.same_as(g.grid):
        raise ValueError("fields live on different grids")
    n = grid.n
    if n > BILINEAR_MAX_N:
        terms = float(n) ** 4
        raise ValueError(f"bilinear_T is O(N^4): N={n} means ~{terms:.2e} terms "
                         f"(cap is N={BILINEAR_MAX_N}, ~{float(BILINEAR_MAX_N) ** 4:.2e})")
    fh = f.coefficients
    gh = g.coefficients
    zeta = np.stack([grid.k1, grid.k2], -1)
    out = np.zeros((n, n), dtype=complex)
    rows, cols = np.nonzero(gh)
    # symbol evaluations are batched over eta; the deposit order stays fixed
    for start in range(0, rows.size, batch):
        ii, jj = rows[start:start + batch], cols[start:start + batch]
        eta = np.stack([grid.k1[ii, jj], grid.k2[ii, jj]], -1)[:, None, None, :]
        # unwrapped output frequency xi = zeta + eta
        weights = np.broadcast_to(symbol(zeta[None] + eta, eta), (eta.shape[0], n, n)) * fh
        for w, i, j in zip(weights, ii, jj):
            out += gh[i, j] * np.roll(w, (grid.m1[i, j], grid.m2[i, j]), axis=(0, 1))
    return SpectralField(grid, out)


def normal_form_symbol(epsilon: float, kappa0: float = 1.0 / 200.0, mu=1, nu=1):
    """m_{mu nu}/phi_{mu nu} in the (xi, eta) -> T_m convention.

    The definition evaluates m(xi, eta) at (output, second input); the
    phase symbol is written on the pair (xi'+eta, eta), so xi' = xi - eta.
    """
    ps = PhaseSymbol(epsilon, kappa0, mu, nu)

    def sym(xi, eta):
        return ps.ratio(xi - eta, eta)

    return sym


def holder_ratio(symbol: Callable, f: SpectralField, g: SpectralField) -> float:
    """||T(f,g)||_{L^2} / (||f||_{W^{2+,4}} ||g||_{W^{2,4}})."""
    t = bilinear_T(symbol, f, g)
    return t.l2() / (sobolev_norm(f, TWO_PLUS, 4) * sobolev_norm(g, 2, 4))


def random_band_limited(grid: Grid2D, rng: np.random.Generator, radius: Optional[float] = None,
                        decay: float = 2.0) -> SpectralField:
    """Real random field with Gaussian-weighted coefficients inside the dealiased band."""
    amp = rng.standard_normal((grid.n, grid.n))
    phys = grid.inverse(grid.forward(amp))
    coef = grid.forward(phys)
    env = np.exp(-(grid.kabs / (radius or grid.kabs[grid.dealias_mask].max() / 2)) ** decay)
    return SpectralField(grid, coef * env * grid.dealias_mask)


# ---------------------------------------------------------------------------
# S-matrix

@dataclass(frozen=True)
class SMatrixResult:
    s: np.ndarray
    residual: np.ndarray
    det: np.ndarray
    inv_norm: np.ndarray


def s_matrix(x, y, epsilon: float, kappa0: float = 1.0 / 200.0) -> SMatrixResult:
    """S(x, y) with (1-2e^2|x|^2) x/b(x) - (1-2e^2|y|^2) y/b(y) = S (x - y).

    S = (1-2e^2|x|^2)/b(y) [Id - (1 - e^2(|x|^2+|y|^2)) / (b(x)(b(x)+b(y))) x (x) (x+y)
                             - 2e^2/(1-2e^2|x|^2) y (x) (x+y)].
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    e2 = epsilon ** 2
    nx, ny = _sq(x), _sq(y)
    if np.any(epsilon * nx > 3 * kappa0 * (1 + 1e-12)) or np.any(epsilon * ny > 3 * kappa0 * (1 + 1e-12)):
        raise ValueError("s_matrix needs eps|x|^2 <= 3 kappa0 and eps|y|^2 <= 3 kappa0")
    bx = np.real(dispersion(nx, epsilon))
    by = np.real(dispersion(ny, epsilon))
    px = 1 - 2 * e2 * nx
    s_sum = x + y
    c1 = (1 - e2 * (nx + ny)) / (bx * (bx + by))
    c2 = 2 * e2 / px
    eye = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))
    outer_x = x[..., :, None] * s_sum[..., None, :]
    outer_y = y[..., :, None] * s_sum[..., None, :]
    s = (px / by)[..., None, None] * (eye - c1[..., None, None] * outer_x
                                      - c2[..., None, None] * outer_y)
    lhs = px[..., None] * x / bx[..., None] - (1 - 2 * e2 * ny)[..., None] * y / by[..., None]
    rhs = np.einsum("...ij,...j->...i", s, x - y)
    residual = np.sqrt(_sq(lhs - rhs))
    det = s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] * s[..., 1, 0]
    inv_norm = 1.0 / np.linalg.svd(s, compute_uv=False)[..., -1]
    return SMatrixResult(s, residual, det, inv_norm)


def sample_s_domain(epsilon: float, count: int, kappa0: float = 1.0 / 200.0, seed: int = 0):
    """Uniform samples of x, y in the disc eps|.|^2 <= 3 kappa0."""
    rng = np.random.default_rng(seed)
    radius = np.sqrt(3 * kappa0 / epsilon)
    r = radius * np.sqrt(rng.random((2, count)))
    ang = 2 * np.pi * rng.random((2, count))
    pts = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
    return pts[0], pts[1]

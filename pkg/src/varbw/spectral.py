"""Spectral measure, synthesis, analysis and density recovery.

Convention: the space is the spectral band ``lambda in [0, Lambda]`` of
``-(p f')'``.  Everything is integrated in ``zeta = sqrt(lambda)`` over
``[0, sqrt(Lambda)]``, where the measure has the smooth density

    dmu_pm(lambda) = dzeta / (2 pi p_N q_pm |b_minus[N](zeta)|**2)

with ``q_plus = q_0`` (paired with ``phi_plus``) and ``q_minus = q_N``.
A member is parametrised by a density pair on a zeta-grid,

    f(x) = int_0^zmax G_minus(zeta) phi_minus(zeta, x) + G_plus(zeta) phi_plus(zeta, x) dzeta,

with ``G_pm`` linearly interpolated between grid nodes (held constant
outside the node range).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGrid,
    GridCutoffMismatch,
    InputError,
    NearSingularSystem,
    NonPositiveLambda,
    OutOfBand,
    VanishingDenominator,
    WindowTooNarrow,
)
from .profile import BandwidthProfile, CoefficientTable, fundamental_solutions
from .quadrature import QuadratureConfig, oscillatory_rule

DENOMINATOR_FLOOR = 1e-12
SINGULAR_FLOOR = 1e-10
REGULARIZATION = 1e-10


@dataclass(frozen=True)
class SpectralCutoff:
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise NonPositiveLambda(f"spectral cutoff must be > 0, got {self.lam}")

    @property
    def zeta_max(self) -> float:
        return math.sqrt(self.lam)

    def band_limit(self, profile: BandwidthProfile) -> np.ndarray:
        """Per-interval classical band limit ``sqrt(Lambda) * q_j``."""
        return self.zeta_max * profile.q


@dataclass(frozen=True, eq=False)
class SpectralDensityPair:
    zeta: np.ndarray
    g_minus: np.ndarray
    g_plus: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float).reshape(-1)
        gm = np.asarray(self.g_minus, dtype=complex).reshape(-1)
        gp = np.asarray(self.g_plus, dtype=complex).reshape(-1)
        if not (len(z) == len(gm) == len(gp)) or len(z) == 0:
            raise InputError("density grid and values must be non-empty and of equal length")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise InputError("density grid must be strictly increasing and > 0")
        if not (np.all(np.isfinite(gm)) and np.all(np.isfinite(gp)) and np.all(np.isfinite(z))):
            raise InputError("density values must be finite")
        for name, v in (("zeta", z), ("g_minus", gm), ("g_plus", gp)):
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def zeros(cls, zeta) -> "SpectralDensityPair":
        z = np.asarray(zeta, dtype=float)
        return cls(z, np.zeros(len(z)), np.zeros(len(z)))

    def check_cutoff(self, cutoff: SpectralCutoff) -> None:
        if self.zeta[-1] > cutoff.zeta_max * (1 + 1e-12):
            raise GridCutoffMismatch(
                f"density grid reaches zeta={self.zeta[-1]} beyond sqrt(Lambda)={cutoff.zeta_max}")

    def interpolate(self, zeta):
        z = np.abs(np.asarray(zeta, dtype=float))
        return (np.interp(z, self.zeta, self.g_minus.real) + 1j * np.interp(z, self.zeta, self.g_minus.imag),
                np.interp(z, self.zeta, self.g_plus.real) + 1j * np.interp(z, self.zeta, self.g_plus.imag))

    def __add__(self, other):
        _same_grid(self, other)
        return SpectralDensityPair(self.zeta, self.g_minus + other.g_minus, self.g_plus + other.g_plus)

    def __mul__(self, c):
        return SpectralDensityPair(self.zeta, self.g_minus * c, self.g_plus * c)

    __rmul__ = __mul__


def _same_grid(a: SpectralDensityPair, b: SpectralDensityPair) -> None:
    if len(a.zeta) != len(b.zeta) or np.any(a.zeta != b.zeta):
        raise InputError("density pairs live on different grids")


def default_zeta_grid(cutoff: SpectralCutoff, n: int = 48) -> np.ndarray:
    return cutoff.zeta_max * np.arange(1, n + 1) / n


@dataclass(frozen=True, eq=False)
class GridFunction:
    x: np.ndarray
    values: np.ndarray
    aligned: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        v = np.asarray(self.values).reshape(-1)
        if len(x) != len(v):
            raise InputError("grid and values differ in length")
        if len(x) and np.any(np.diff(x) <= 0):
            raise InputError("grid must be strictly increasing")
        if not np.iscomplexobj(v):
            v = v.astype(float)
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.zeros(len(self.x))
        if len(self.x) > 1:
            dx = np.diff(self.x)
            w[1:] += 0.5 * dx
            w[:-1] += 0.5 * dx
        return w

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.trapezoid_weights() * np.abs(self.values) ** 2)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.x, values, self.aligned)


def aligned_grid(lo: float, hi: float, dx: float, points=()) -> np.ndarray:
    """Near-uniform grid on ``[lo, hi]`` with spacing <= ``dx`` that contains every ``points`` inside."""
    if not (hi > lo and dx > 0):
        raise DegenerateGrid("need hi > lo and dx > 0")
    pts = np.asarray(points, dtype=float)
    knots = np.unique(np.concatenate([[lo, hi], pts[(pts > lo) & (pts < hi)]]))
    parts = [knots[:1]]
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, int(np.ceil((b - a) / dx - 1e-9)))
        parts.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(parts)


def breakpoint_grid(profile: BandwidthProfile, window: float, dx: float, extra=()) -> GridFunction:
    """Empty-valued grid on ``[-window, window]`` aligned with the breakpoints (and ``extra`` points)."""
    pts = np.concatenate([profile.breakpoints, np.asarray(extra, dtype=float)])
    x = aligned_grid(-window, window, dx, pts)
    return GridFunction(x, np.zeros(len(x)), np.isin(x, profile.breakpoints))


# --- spectral measure -------------------------------------------------------

def spectral_weight(profile: BandwidthProfile, table: CoefficientTable, lam):
    """Diagonal densities ``(w_minus, w_plus)`` of the spectral measure w.r.t. ``dlambda``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise NonPositiveLambda("lambda must be > 0")
    z = np.sqrt(lam)
    b2 = np.abs(table.b_minus[-1](z)) ** 2
    if np.any(b2 < DENOMINATOR_FLOOR ** 2):
        raise VanishingDenominator("|b_minus[N]| below 1e-12")
    base = 1.0 / (4 * np.pi * profile.values[-1] * b2 * z)
    return base / profile.q[-1], base / profile.q[0]


def zeta_weight(profile: BandwidthProfile, table: CoefficientTable, zeta):
    """``(omega_minus, omega_plus)`` with ``dmu = omega dzeta`` after ``lambda = zeta**2``."""
    z = np.asarray(zeta, dtype=float)
    b2 = np.abs(table.b_minus[-1](z)) ** 2
    if np.any(b2 < DENOMINATOR_FLOOR ** 2):
        raise VanishingDenominator("|b_minus[N]| below 1e-12")
    base = 1.0 / (2 * np.pi * profile.values[-1] * b2)
    return base / profile.q[-1], base / profile.q[0]


def coefficient_frequency(table: CoefficientTable) -> float:
    return max((float(np.max(np.abs(s.freqs))) for col in
                (table.a_plus, table.b_plus, table.a_minus, table.b_minus) for s in col if len(s)),
               default=0.0)


def zeta_rule(table: CoefficientTable, cutoff: SpectralCutoff, xmax: float,
              quad: QuadratureConfig | None = None, breaks=()):
    """Quadrature in zeta on ``[0, zmax]`` resolving plane waves up to ``|x| <= xmax``."""
    freq = float(np.max(table.profile.q)) * abs(xmax) + coefficient_frequency(table)
    nodes, weights = oscillatory_rule(0.0, cutoff.zeta_max, max(freq, 1.0), quad, breaks)
    return nodes, weights


# --- synthesis --------------------------------------------------------------

def _hat_matrix(zq, nodes) -> np.ndarray:
    eye = np.eye(len(nodes))
    return np.column_stack([np.interp(zq, nodes, eye[k]) for k in range(len(nodes))])


def _real_left_product(a, z):
    """``(a @ z).T`` for real ``a`` and complex C-contiguous ``z`` as one real product."""
    z = np.ascontiguousarray(z)
    nz, nx = z.shape
    return (a @ z.view(float).reshape(nz, 2 * nx)).reshape(a.shape[0], nx, 2).view(complex)[..., 0].T


def synthesis_matrices(table: CoefficientTable, cutoff: SpectralCutoff, zeta_nodes, x,
                       quad: QuadratureConfig | None = None, interval=None, chunk: int = 1024):
    """``(B_minus, B_plus)`` with ``f(x) = B_minus @ G_minus + B_plus @ G_plus`` for node values ``G``."""
    xs = np.asarray(x, dtype=float).reshape(-1)
    nodes = np.asarray(zeta_nodes, dtype=float)
    xmax = float(np.max(np.abs(xs))) if len(xs) else 0.0
    zq, wq = zeta_rule(table, cutoff, xmax, quad, breaks=nodes)
    hwt = np.ascontiguousarray((wq[:, None] * _hat_matrix(zq, nodes)).T)
    bm = np.empty((len(xs), len(nodes)), dtype=complex)
    bp = np.empty_like(bm)
    for s in range(0, len(xs), chunk):
        phi_p, phi_m = fundamental_solutions(table, zq, xs[s:s + chunk], interval)
        bm[s:s + chunk] = _real_left_product(hwt, phi_m)
        bp[s:s + chunk] = _real_left_product(hwt, phi_p)
    return bm, bp


def synthesize(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
               density: SpectralDensityPair, x, quad: QuadratureConfig | None = None, interval=None):
    """Evaluate the member of the space with spectral density ``density`` at ``x``."""
    density.check_cutoff(cutoff)
    xs = np.asarray(x, dtype=float)
    bm, bp = synthesis_matrices(table, cutoff, density.zeta, xs.reshape(-1), quad, interval)
    out = bm @ density.g_minus + bp @ density.g_plus
    return out.reshape(xs.shape) if xs.ndim else complex(out[0])


def synthesize_grid(profile, table, cutoff, density, grid: GridFunction, quad=None, real=False) -> GridFunction:
    v = synthesize(profile, table, cutoff, density, grid.x, quad)
    return grid.with_values(v.real if real else v)


def interval_spectrum(table: CoefficientTable, j: int, g_minus, g_plus, zeta):
    """Forward combination ``(G_j(zeta), G_j(-zeta))`` for ``zeta > 0`` from the density values at ``zeta``."""
    z = np.asarray(zeta, dtype=float)
    pos = table.b_minus[j](z) * g_minus + table.b_plus[j](z) * g_plus
    neg = table.a_minus[j](z) * g_minus + table.a_plus[j](z) * g_plus
    return pos, neg


def g_j(table: CoefficientTable, cutoff: SpectralCutoff, density: SpectralDensityPair, j: int, zeta):
    """Spectrum of the classical band-limited extension on interval ``j``: ``f = int G_j e^{-i q_j zeta x}``."""
    z = np.asarray(zeta, dtype=float)
    if np.any(z == 0) or np.any(np.abs(z) > cutoff.zeta_max * (1 + 1e-12)):
        raise OutOfBand(f"|zeta| must lie in (0, {cutoff.zeta_max}]")
    gm, gp = density.interpolate(z)
    pos, neg = interval_spectrum(table, j, gm, gp, np.abs(z))
    out = np.where(z > 0, pos, neg)
    return out if out.ndim else complex(out)


def solve_recovery_system(a_minus, a_plus, b_minus, b_plus, fhat_pos, fhat_neg, floor=SINGULAR_FLOOR):
    det = b_minus * a_plus - b_plus * a_minus
    if np.any(np.abs(det) < floor):
        raise NearSingularSystem(f"recovery determinant below {floor}")
    g_minus = (fhat_pos * a_plus - b_plus * fhat_neg) / det
    g_plus = (b_minus * fhat_neg - a_minus * fhat_pos) / det
    return g_minus, g_plus


def recover_density(table: CoefficientTable, j: int, fhat_pos, fhat_neg, zeta):
    """Solve the 2x2 system mapping ``(G_j(zeta), G_j(-zeta))`` back to ``(G_minus, G_plus)``."""
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise OutOfBand("zeta must be > 0")
    return solve_recovery_system(table.a_minus[j](z), table.a_plus[j](z),
                                 table.b_minus[j](z), table.b_plus[j](z), fhat_pos, fhat_neg)


# --- analysis ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ForwardTransform:
    lam: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray
    truncation_estimate: float


def edge_energy_fraction(f: GridFunction, band: float = 0.1) -> float:
    """Share of the sampled energy in the outer ``band`` fraction of the window (both ends)."""
    w = f.trapezoid_weights() * np.abs(f.values) ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    lo, hi = f.x[0], f.x[-1]
    width = band * (hi - lo)
    edge = (f.x <= lo + width) | (f.x >= hi - width)
    return float(w[edge].sum() / total)


def forward_transform(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
                      f: GridFunction, lam, max_truncation: float | None = None, chunk: int = 256):
    """Trapezoid approximation of ``F_pm(lambda) = int f(x) conj(phi_pm(sqrt(lambda), x)) dx``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise NonPositiveLambda("lambda must be > 0")
    trunc = edge_energy_fraction(f)
    if max_truncation is not None and trunc > max_truncation:
        raise WindowTooNarrow(f"edge energy fraction {trunc:.3g} exceeds {max_truncation:.3g}")
    wf = f.trapezoid_weights() * f.values
    z = np.sqrt(lam.reshape(-1))
    fp = np.empty(len(z), dtype=complex)
    fm = np.empty(len(z), dtype=complex)
    for s in range(0, len(z), chunk):
        phi_p, phi_m = fundamental_solutions(table, z[s:s + chunk], f.x)
        fp[s:s + chunk] = np.conj(phi_p) @ wf
        fm[s:s + chunk] = np.conj(phi_m) @ wf
    return ForwardTransform(lam, fp.reshape(lam.shape), fm.reshape(lam.shape), trunc)


def spectral_energy(profile: BandwidthProfile, table: CoefficientTable, f: GridFunction,
                    zeta_lo: float, zeta_hi: float, quad: QuadratureConfig | None = None) -> float:
    """``int |F_plus|^2 dmu_plus + |F_minus|^2 dmu_minus`` over ``zeta in [zeta_lo, zeta_hi]``."""
    xmax = float(np.max(np.abs(f.x)))
    freq = float(np.max(profile.q)) * xmax + coefficient_frequency(table)
    z, w = oscillatory_rule(zeta_lo, zeta_hi, max(freq, 1.0), quad)
    ft = forward_transform(profile, table, SpectralCutoff(zeta_hi ** 2), f, z ** 2)
    om, op = zeta_weight(profile, table, z)
    return float(np.sum(w * (np.abs(ft.f_plus) ** 2 * op + np.abs(ft.f_minus) ** 2 * om)))


def density_energy(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
                   density: SpectralDensityPair, quad: QuadratureConfig | None = None) -> float:
    """``||f||^2`` of the synthesis of ``density`` on all of R: ``int |G|^2 / omega dzeta``."""
    density.check_cutoff(cutoff)
    cfg = quad or QuadratureConfig()
    z, w = oscillatory_rule(0.0, cutoff.zeta_max, max(coefficient_frequency(table), 1.0), cfg,
                            breaks=density.zeta)
    gm, gp = density.interpolate(z)
    om, op = zeta_weight(profile, table, z)
    return float(np.sum(w * (np.abs(gm) ** 2 / om + np.abs(gp) ** 2 / op)))


# --- membership -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MembershipFit:
    residual: float
    density: SpectralDensityPair
    fitted: np.ndarray
    coefficients: np.ndarray = field(repr=False)


class MembershipSolver:
    """Regularised least-squares projection onto the discretised space, reusable across right-hand sides.

    Complex data are fitted by ``(G_minus, G_plus)`` on the node grid.  Real
    data are fitted by ``Re`` of a synthesis with ``G_minus = 0`` and complex
    ``G_plus``, which spans exactly the real members (the real part of
    ``phi_plus`` and its imaginary part form a real fundamental system).
    """

    def __init__(self, profile, table, cutoff, x, zeta_nodes=None, real=True,
                 quad: QuadratureConfig | None = None, weights=None, reg: float = REGULARIZATION):
        self.profile, self.table, self.cutoff = profile, table, cutoff
        self.x = np.asarray(x, dtype=float)
        self.nodes = default_zeta_grid(cutoff) if zeta_nodes is None else np.asarray(zeta_nodes, float)
        if self.nodes[-1] > cutoff.zeta_max * (1 + 1e-12):
            raise GridCutoffMismatch("zeta nodes exceed sqrt(Lambda)")
        self.real = real
        if weights is None:
            weights = GridFunction(self.x, np.zeros(len(self.x))).trapezoid_weights()
        self.weights = np.asarray(weights, dtype=float)
        bm, bp = synthesis_matrices(table, cutoff, self.nodes, self.x, quad)
        self.design = np.hstack([bp.real, -bp.imag]) if real else np.hstack([bm, bp])
        self.reg = reg
        self._factor()

    def reweighted(self, weights) -> "MembershipSolver":
        """Same basis, new sample weights (the expensive design matrix is shared)."""
        new = object.__new__(MembershipSolver)
        new.__dict__.update(self.__dict__)
        new.weights = np.asarray(weights, dtype=float)
        new._factor()
        return new

    def _factor(self):
        # real: one equation per sample and real column; complex: two per sample, two per column
        n_data = int(np.count_nonzero(self.weights > 0))
        if n_data < self.design.shape[1]:
            raise DegenerateGrid(f"{n_data} weighted samples for {self.design.shape[1]} basis columns")
        reg = self.reg
        sw = np.sqrt(self.weights)[:, None]
        a = sw * self.design
        scale = float(np.max(np.sum(np.abs(a) ** 2, axis=0)))
        aug = np.vstack([a, np.sqrt(reg * scale) * np.eye(a.shape[1])])
        self._q, self._r = np.linalg.qr(aug)
        self._sw = sw[:, 0]
        self._n = len(self.x)

    def solve(self, values):
        """Coefficients, fitted samples and relative weighted L2 residuals for one or many columns."""
        g = np.asarray(values)
        single = g.ndim == 1
        g2 = g.reshape(self._n, -1)
        rhs = np.vstack([self._sw[:, None] * g2, np.zeros((self._r.shape[0], g2.shape[1]))])
        coef = np.linalg.solve(self._r, self._q.conj().T @ rhs)
        fitted = self.design @ coef
        num = np.sqrt(np.sum(self.weights[:, None] * np.abs(g2 - fitted) ** 2, axis=0))
        den = np.sqrt(np.sum(self.weights[:, None] * np.abs(g2) ** 2, axis=0))
        res = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        if single:
            return coef[:, 0], fitted[:, 0], float(res[0])
        return coef, fitted, res

    def density_of(self, coef) -> SpectralDensityPair:
        k = len(self.nodes)
        if not self.real:
            return SpectralDensityPair(self.nodes, coef[:k], coef[k:])
        g = coef[:k] + 1j * coef[k:]
        # Re(G phi_plus) = (G phi_plus + conj(G) conj(phi_plus)) / 2, and
        # conj(phi_plus) = alpha phi_plus + beta phi_minus with beta = 1/b, alpha = -a/b at interval N
        a, b = self.table.a_minus[-1](self.nodes), self.table.b_minus[-1](self.nodes)
        return SpectralDensityPair(self.nodes, 0.5 * np.conj(g) / b, 0.5 * (g - a / b * np.conj(g)))

    def fit(self, values) -> MembershipFit:
        coef, fitted, res = self.solve(values)
        return MembershipFit(res, self.density_of(coef), fitted, coef)


def membership_residual(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
                        g: GridFunction, zeta_nodes=None, quad: QuadratureConfig | None = None,
                        weights=None) -> MembershipFit:
    """Relative L2 misfit of ``g`` against its best approximation in the (discretised) space."""
    solver = MembershipSolver(profile, table, cutoff, g.x, zeta_nodes, real=g.is_real,
                              quad=quad, weights=weights)
    return solver.fit(g.values)

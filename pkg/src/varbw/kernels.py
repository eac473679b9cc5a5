"""Reproducing kernels, the classical sinc projection and dilation calculus.

``sinc`` is the unnormalised ``sin(t)/t`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricWindow, DegenerateGrid, NonPositiveScale, ToyRequiresSingleJump
from .profile import BandwidthProfile, CoefficientTable, fundamental_solutions
from .quadrature import QuadratureConfig
from .spectral import GridFunction, SpectralCutoff, zeta_rule, zeta_weight


def sinc(t):
    return np.sinc(np.asarray(t) / np.pi)


@dataclass(frozen=True)
class ToyModelParams:
    """Single jump at ``jump`` from ``p_minus`` (left, jump included) to ``p_plus``."""

    p_minus: float
    p_plus: float
    lam: float
    jump: float = 0.0

    def __post_init__(self):
        if not (self.p_minus > 0 and self.p_plus > 0 and self.lam > 0):
            raise ValueError("toy model needs p_minus, p_plus, lam > 0")

    @classmethod
    def from_profile(cls, profile: BandwidthProfile, cutoff: SpectralCutoff) -> "ToyModelParams":
        if profile.n_jumps != 1:
            raise ToyRequiresSingleJump(f"closed-form kernel needs N=1, got N={profile.n_jumps}")
        return cls(float(profile.values[0]), float(profile.values[1]), cutoff.lam,
                   float(profile.breakpoints[0]))

    @property
    def c_minus(self) -> float:
        return math.sqrt(self.lam / self.p_minus)

    @property
    def c_plus(self) -> float:
        return math.sqrt(self.lam / self.p_plus)

    @property
    def rho_minus(self) -> float:
        sm, sp = math.sqrt(self.p_minus), math.sqrt(self.p_plus)
        return sm / (sp + sm)

    @property
    def rho_plus(self) -> float:
        sm, sp = math.sqrt(self.p_minus), math.sqrt(self.p_plus)
        return sp / (sp + sm)


def kernel_toy(params: ToyModelParams, x, y):
    """Closed-form reproducing kernel of the single-jump model (broadcasts over ``x`` and ``y``)."""
    x = np.asarray(x, dtype=float) - params.jump
    y = np.asarray(y, dtype=float) - params.jump
    cm, cp = params.c_minus, params.c_plus
    rm, rp = params.rho_minus, params.rho_plus
    xl, yl = x <= 0, y <= 0
    both_left = cm / np.pi * (sinc(cm * (x - y)) - (rp - rm) * sinc(cm * (x + y)))
    left_right = 2 * cp * rp / np.pi * sinc(cm * x - cp * y)
    both_right = cp / np.pi * (sinc(cp * (x - y)) + (rp - rm) * sinc(cp * (x + y)))
    right_left = 2 * cm * rm / np.pi * sinc(cp * x - cm * y)
    out = np.where(xl, np.where(yl, both_left, left_right), np.where(yl, right_left, both_right))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    imag_max: float


def kernel_matrix(profile: BandwidthProfile, table: CoefficientTable, cutoff: SpectralCutoff,
                  x, y, quad: QuadratureConfig | None = None) -> KernelMatrix:
    """``k(x_i, y_k) = int conj(Phi(zeta, x_i)) . Phi(zeta, y_k) dmu`` by zeta-quadrature.

    The imaginary part vanishes analytically; its size is returned as a
    quadrature diagnostic.
    """
    xs = np.asarray(x, dtype=float).reshape(-1)
    ys = np.asarray(y, dtype=float).reshape(-1)
    xmax = float(np.max(np.abs(np.concatenate([xs, ys]))))
    # the integrand carries phases from both arguments
    z, w = zeta_rule(table, cutoff, 2 * xmax, quad)
    om, op = zeta_weight(profile, table, z)
    px_p, px_m = fundamental_solutions(table, z, xs)
    py_p, py_m = fundamental_solutions(table, z, ys)
    k = (np.conj(px_p).T * (w * op)) @ py_p + (np.conj(px_m).T * (w * om)) @ py_m
    return KernelMatrix(xs, ys, k.real, float(np.max(np.abs(k.imag))) if k.size else 0.0)


def kernel_generic(profile, table, cutoff, x: float, y: float, quad=None) -> float:
    return float(kernel_matrix(profile, table, cutoff, [x], [y], quad).values[0, 0])


def pw_projection(c: float, f: GridFunction, x, chunk: int = 512):
    """Classical projection ``(c/pi) int sinc(c (x - y)) f(y) dy`` by the trapezoid rule on ``f``'s grid."""
    if len(f.x) < 2:
        raise DegenerateGrid("projection needs at least two samples")
    if c <= 0:
        raise NonPositiveScale("band limit must be > 0")
    xs = np.asarray(x, dtype=float)
    flat = xs.reshape(-1)
    wf = f.trapezoid_weights() * f.values
    out = np.empty(len(flat), dtype=wf.dtype)
    for s in range(0, len(flat), chunk):
        out[s:s + chunk] = sinc(c * (flat[s:s + chunk, None] - f.x[None, :])) @ wf
    out *= c / np.pi
    return out.reshape(xs.shape) if xs.ndim else out[0]


def dilate(a: float, f: GridFunction) -> GridFunction:
    """Unitary dilation ``sqrt(a) f(a x)``: the grid maps ``x -> x / a``."""
    if not a > 0:
        raise NonPositiveScale(f"dilation factor must be > 0, got {a}")
    return GridFunction(f.x / a, math.sqrt(a) * f.values)


def reflect(f: GridFunction) -> GridFunction:
    return GridFunction(-f.x[::-1], f.values[::-1])


def _relative_l2(f: GridFunction, g) -> float:
    w = f.trapezoid_weights()
    den = np.sqrt(np.sum(w * np.abs(f.values) ** 2))
    if den == 0:
        return 0.0
    return float(np.sqrt(np.sum(w * np.abs(f.values - g) ** 2)) / den)


def toy_fixedpoint_residual(params: ToyModelParams, f: GridFunction):
    """Relative L2 residuals of the two half-line fixed-point identities of the single-jump space.

    Each half ``f_pm = f 1_{R_pm}`` must equal the classical projection (band
    ``c_pm``) of itself, its reflection and the dilated other half, restricted
    back to its own half-line.
    """
    x = f.x - params.jump
    span = max(abs(x[0]), abs(x[-1]))
    if abs(x[0] + x[-1]) > 1e-9 * span:
        raise AsymmetricWindow(f"window [{f.x[0]}, {f.x[-1]}] is not symmetric about the jump")
    if not np.any(np.abs(x) <= 1e-12 * span):
        raise AsymmetricWindow("grid must contain the jump point")
    left, right = x <= 0, x >= 0
    fm = GridFunction(x[left], f.values[left])
    fp = GridFunction(x[right], f.values[right])
    cm, cp = params.c_minus, params.c_plus
    rm, rp = params.rho_minus, params.rho_plus

    rhs_m = (pw_projection(cm, fm, fm.x)
             - (rp - rm) * pw_projection(cm, reflect(fm), fm.x)
             + 2 * rp * math.sqrt(cp / cm) * pw_projection(cm, dilate(cm / cp, fp), fm.x))
    rhs_p = (pw_projection(cp, fp, fp.x)
             + (rp - rm) * pw_projection(cp, reflect(fp), fp.x)
             + 2 * rm * math.sqrt(cm / cp) * pw_projection(cp, dilate(cp / cm, fm), fp.x))
    return _relative_l2(fm, rhs_m), _relative_l2(fp, rhs_p)

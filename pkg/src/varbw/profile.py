"""Step-function bandwidth profiles and fundamental-solution coefficients.

A profile ``p`` takes the value ``p_j`` on the interval ``I_j = (x_j, x_{j+1}]``
(``x_0 = -inf``, ``x_{N+1} = +inf``).  On ``I_j`` every solution of
``-(p f')' = zeta**2 f`` is a pair of plane waves with wavenumber ``q_j * zeta``
where ``q_j = p_j ** -0.5``; the coefficients of the two fundamental solutions
are carried from interval to interval by 2x2 transfer matrices whose entries
are exponentials in ``zeta``.  Products of those stay finite exponential sums,
which is how the coefficients are stored here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    InputError,
    LengthMismatch,
    NonIncreasingBreakpoints,
    NonPositiveSpectralParameter,
    NonPositiveValue,
)

#: frequencies closer than this are treated as one term
FREQ_MERGE_TOL = 1e-12


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BandwidthProfile:
    breakpoints: np.ndarray
    values: np.ndarray
    q: np.ndarray

    @property
    def n_jumps(self) -> int:
        return len(self.breakpoints)

    @property
    def n_intervals(self) -> int:
        return len(self.values)

    def interval_of(self, x):
        """Index of the interval containing ``x``; a breakpoint belongs to the interval on its left."""
        return np.searchsorted(self.breakpoints, x, side="left")

    def to_dict(self) -> dict:
        return {"breakpoints": [float(v) for v in self.breakpoints],
                "values": [float(v) for v in self.values]}

    def __repr__(self) -> str:
        return f"BandwidthProfile(breakpoints={list(self.breakpoints)}, values={list(self.values)})"


def make_profile(breakpoints: Sequence[float], values: Sequence[float]) -> BandwidthProfile:
    bp = np.asarray(breakpoints, dtype=float).reshape(-1)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if len(vals) != len(bp) + 1:
        raise LengthMismatch(
            f"need exactly len(breakpoints)+1 = {len(bp) + 1} values, got {len(vals)}")
    if not np.all(np.isfinite(bp)) or not np.all(np.isfinite(vals)):
        raise InputError("breakpoints and values must be finite")
    if np.any(np.diff(bp) <= 0):
        raise NonIncreasingBreakpoints(f"breakpoints must be strictly increasing: {bp.tolist()}")
    if np.any(vals <= 0):
        raise NonPositiveValue(f"profile values must be > 0: {vals.tolist()}")
    return BandwidthProfile(_frozen(bp, float), _frozen(vals, float), _frozen(vals ** -0.5, float))


def profile_from_dict(data) -> BandwidthProfile:
    if not isinstance(data, dict):
        raise InputError("profile must be a JSON object with keys 'breakpoints' and 'values'")
    missing = {"breakpoints", "values"} - set(data)
    if missing:
        raise InputError(f"profile is missing key(s): {sorted(missing)}")
    try:
        bp = [float(v) for v in data["breakpoints"]]
        vals = [float(v) for v in data["values"]]
    except (TypeError, ValueError) as exc:
        raise InputError(f"profile entries must be numbers ({exc})") from None
    return make_profile(bp, vals)


def load_profile(path) -> BandwidthProfile:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return profile_from_dict(data)


@dataclass(frozen=True, eq=False)
class ExponentialSum:
    """``t(zeta) = sum_k amps[k] * exp(1j * freqs[k] * zeta)`` with ascending, distinct ``freqs``."""

    amps: np.ndarray
    freqs: np.ndarray

    @classmethod
    def from_terms(cls, amps, freqs, tol: float = FREQ_MERGE_TOL) -> "ExponentialSum":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        freqs = np.asarray(freqs, dtype=float).reshape(-1)
        order = np.argsort(freqs, kind="stable")
        amps, freqs = amps[order], freqs[order]
        out_a, out_f = [], []
        for a, f in zip(amps, freqs):
            if out_f and f - out_f[-1] < tol:
                out_a[-1] += a
            else:
                out_a.append(a)
                out_f.append(f)
        keep = [i for i, a in enumerate(out_a) if a != 0]
        return cls(_frozen([out_a[i] for i in keep], complex),
                   _frozen([out_f[i] for i in keep], float))

    @classmethod
    def constant(cls, c) -> "ExponentialSum":
        return cls.from_terms([c], [0.0])

    @classmethod
    def monomial(cls, amp, freq) -> "ExponentialSum":
        return cls.from_terms([amp], [freq])

    def __len__(self) -> int:
        return len(self.freqs)

    def __add__(self, other: "ExponentialSum") -> "ExponentialSum":
        return ExponentialSum.from_terms(np.concatenate([self.amps, other.amps]),
                                         np.concatenate([self.freqs, other.freqs]))

    def __neg__(self) -> "ExponentialSum":
        return ExponentialSum(_frozen(-self.amps, complex), self.freqs)

    def __sub__(self, other: "ExponentialSum") -> "ExponentialSum":
        return self + (-other)

    def __mul__(self, other) -> "ExponentialSum":
        if isinstance(other, ExponentialSum):
            amps = np.multiply.outer(self.amps, other.amps).ravel()
            freqs = np.add.outer(self.freqs, other.freqs).ravel()
            return ExponentialSum.from_terms(amps, freqs)
        return ExponentialSum.from_terms(self.amps * complex(other), self.freqs)

    __rmul__ = __mul__

    def bound(self) -> float:
        """Upper bound of ``|t(zeta)|`` over the real line."""
        return float(np.sum(np.abs(self.amps)))

    def __call__(self, zeta):
        return eval_exponential_sum(self, zeta)

    def terms(self):
        return list(zip(self.amps.tolist(), self.freqs.tolist()))


def eval_exponential_sum(s: ExponentialSum, zeta):
    z = np.asarray(zeta, dtype=float)
    out = np.zeros(z.shape, dtype=complex)
    # ascending-frequency accumulation keeps results bit-reproducible
    for a, f in zip(s.amps, s.freqs):
        out += a * np.exp(1j * f * z)
    return out if out.ndim else complex(out)


def _check_jump_index(profile: BandwidthProfile, j: int) -> None:
    if not 1 <= j <= profile.n_jumps:
        raise IndexOutOfRange(f"jump index {j} outside 1..{profile.n_jumps}")


def _check_interval_index(profile: BandwidthProfile, j: int) -> None:
    if not 0 <= j <= profile.n_jumps:
        raise IndexOutOfRange(f"interval index {j} outside 0..{profile.n_jumps}")


def transfer_sums(profile: BandwidthProfile, j: int):
    """Entries of the transfer matrix across breakpoint ``x_j`` as a 2x2 nested list of ExponentialSums.

    The diagonal phases are ``exp(+-1j * x_j * (q_{j-1} - q_j) * zeta)``; this
    is the sign that makes both ``f`` and ``p f'`` continuous at ``x_j``.
    """
    _check_jump_index(profile, j)
    x = profile.breakpoints[j - 1]
    qa, qb = profile.q[j - 1], profile.q[j]
    r = qb / qa
    m = ExponentialSum.monomial
    return [[m(1 + r, x * (qa - qb)), m(1 - r, -x * (qa + qb))],
            [m(1 - r, x * (qa + qb)), m(1 + r, -x * (qa - qb))]]


def transfer_matrix(profile: BandwidthProfile, j: int, zeta: float) -> np.ndarray:
    """Transfer matrix ``L_j(zeta)`` (without the 1/2 of the induction step)."""
    _check_jump_index(profile, j)
    x = profile.breakpoints[j - 1]
    qa, qb = profile.q[j - 1], profile.q[j]
    r = qb / qa
    d = np.exp(1j * x * (qa - qb) * zeta)
    o = np.exp(1j * x * (qa + qb) * zeta)
    return np.array([[(1 + r) * d, (1 - r) / o], [(1 - r) * o, (1 + r) / d]])


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Plane-wave coefficients of the fundamental solutions on every interval.

    ``phi_plus = a_plus[j] e^{i q_j zeta x} + b_plus[j] e^{-i q_j zeta x}`` on ``I_j``,
    normalised by ``(a_plus[N], b_plus[N]) = (1, 0)``; ``phi_minus`` likewise with
    ``(a_minus[0], b_minus[0]) = (0, 1)``.
    """

    profile: BandwidthProfile
    a_plus: tuple
    b_plus: tuple
    a_minus: tuple
    b_minus: tuple

    def evaluate(self, zeta):
        """Coefficient values at ``zeta``: four arrays of shape ``(N+1,) + zeta.shape``."""
        z = np.asarray(zeta, dtype=float)
        return tuple(np.array([eval_exponential_sum(s, z) for s in col], dtype=complex)
                     for col in (self.a_plus, self.b_plus, self.a_minus, self.b_minus))


def propagate_coefficients(profile: BandwidthProfile) -> CoefficientTable:
    n = profile.n_jumps
    zero, one = ExponentialSum.from_terms([], []), ExponentialSum.constant(1.0)

    a_m, b_m = [zero], [one]
    for j in range(1, n + 1):
        L = transfer_sums(profile, j)
        a, b = a_m[-1], b_m[-1]
        a_m.append((L[0][0] * a + L[0][1] * b) * 0.5)
        b_m.append((L[1][0] * a + L[1][1] * b) * 0.5)

    a_p, b_p = [one], [zero]
    for j in range(n, 0, -1):
        L = transfer_sums(profile, j)
        # 2 L^{-1} with det L = 4 q_j / q_{j-1}
        s = 0.5 * profile.q[j - 1] / profile.q[j]
        a, b = a_p[0], b_p[0]
        a_p.insert(0, (L[1][1] * a - L[0][1] * b) * s)
        b_p.insert(0, (L[0][0] * b - L[1][0] * a) * s)

    return CoefficientTable(profile, tuple(a_p), tuple(b_p), tuple(a_m), tuple(b_m))


def _require_positive(zeta):
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise NonPositiveSpectralParameter("spectral parameter zeta must be > 0")
    return z


def _interval_waves(table: CoefficientTable, zeta, x, interval, flux: bool):
    """Both fundamental solutions (or their fluxes), looping over the intervals present in ``x``."""
    z = _require_positive(zeta).reshape(-1)
    xs = np.asarray(x, dtype=float)
    flat = xs.reshape(-1)
    prof = table.profile
    if interval is None:
        j_of = prof.interval_of(flat)
    else:
        _check_interval_index(prof, interval)
        j_of = np.full(flat.size, interval)
    ap, bp, am, bm = table.evaluate(z)  # (N+1, nz) each
    out_p = np.empty((z.size, flat.size), dtype=complex)
    out_m = np.empty_like(out_p)
    for j in np.unique(j_of):
        sel = j_of == j
        k = z * prof.q[j]
        e = np.exp(1j * np.outer(k, flat[sel]))
        ec = e.conj()
        c = [v[j][:, None] for v in (ap, bp, am, bm)]
        if flux:
            # p_j * q_j * zeta, with p_j = q_j**-2
            pk = 1j * (k / prof.q[j] ** 2)[:, None]
            out_p[:, sel] = pk * (c[0] * e - c[1] * ec)
            out_m[:, sel] = pk * (c[2] * e - c[3] * ec)
        else:
            out_p[:, sel] = c[0] * e + c[1] * ec
            out_m[:, sel] = c[2] * e + c[3] * ec
    shape = np.shape(zeta) + xs.shape
    return out_p.reshape(shape), out_m.reshape(shape)


def fundamental_solutions(table: CoefficientTable, zeta, x, interval=None):
    """Evaluate ``(phi_plus, phi_minus)`` on the grid ``zeta x x``.

    Returns arrays of shape ``zeta.shape + x.shape``.  ``interval`` forces the
    plane-wave expression of one interval (used to take one-sided limits at a
    breakpoint); by default each ``x`` uses the interval containing it.
    """
    return _interval_waves(table, zeta, x, interval, flux=False)


def solution_flux(table: CoefficientTable, zeta, x, interval=None):
    """``p * d/dx`` of both fundamental solutions, same shapes as :func:`fundamental_solutions`."""
    return _interval_waves(table, zeta, x, interval, flux=True)


def coefficient_determinant(table: CoefficientTable, j: int, zeta):
    """``a_plus[j] b_minus[j] - a_minus[j] b_plus[j]`` at ``zeta``."""
    _check_interval_index(table.profile, j)
    z = _require_positive(zeta)
    ap, bp = table.a_plus[j](z), table.b_plus[j](z)
    am, bm = table.a_minus[j](z), table.b_minus[j](z)
    return ap * bm - am * bp

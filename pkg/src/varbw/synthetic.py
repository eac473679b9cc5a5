"""Seeded random profiles and densities for tests, self-test and experiments."""

from __future__ import annotations

import numpy as np

from .profile import BandwidthProfile, make_profile
from .spectral import SpectralCutoff, SpectralDensityPair, default_zeta_grid


def random_profile(rng: np.random.Generator, n_jumps: int, span: float = 3.0,
                   min_gap: float = 1.0, p_range=(0.25, 4.0)) -> BandwidthProfile:
    """Breakpoints in ``[-span, span]`` at least ``min_gap`` apart, values log-uniform in ``p_range``."""
    if n_jumps:
        free = 2 * span - (n_jumps - 1) * min_gap
        u = np.sort(rng.uniform(0.0, free, n_jumps))
        bp = -span + u + min_gap * np.arange(n_jumps)
    else:
        bp = np.array([])
    lo, hi = np.log(p_range[0]), np.log(p_range[1])
    vals = np.exp(rng.uniform(lo, hi, n_jumps + 1))
    return make_profile(bp, vals)


def smooth_envelope(zeta, zeta_max: float, power: int = 4):
    return np.sin(np.pi * np.asarray(zeta) / zeta_max) ** power


def _random_series(rng, t, modes):
    c =(rng.standard_normal(modes) + 1j * rng.standard_normal(modes)) / np.sqrt(2 * modes)
    return np.polynomial.legendre.legval(2 * t - 1, c)


def random_density(rng: np.random.Generator, cutoff: SpectralCutoff, n_nodes: int = 48,
                   modes: int = 4, power: int = 4, plus_only: bool = False) -> SpectralDensityPair:
    """Smooth random density: a low-degree random Legendre series times a ``sin**power`` bump.

    With ``plus_only`` the minus component is zero; the real part of such a
    synthesis is a generic real member of the space.
    """
    z = default_zeta_grid(cutoff, n_nodes)
    t = z / cutoff.zeta_max
    env = smooth_envelope(z, cutoff.zeta_max, power)
    gp = env * _random_series(rng, t, modes)
    gm = np.zeros_like(gp) if plus_only else env * _random_series(rng, t, modes)
    return SpectralDensityPair(z, gm, gp)

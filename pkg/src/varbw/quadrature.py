"""Composite Gauss-Legendre rules for smooth oscillatory integrands."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureConfig:
    """``order`` nodes per panel; panels are split so the integrand phase advances at most ``max_phase`` per panel."""

    order: int = 10
    max_phase: float = np.pi

    def __post_init__(self):
        if self.order < 1 or self.max_phase <= 0:
            raise ValueError("quadrature order and max_phase must be positive")


@lru_cache(maxsize=32)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(edges, order: int):
    """Nodes and weights of the composite rule on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    t, w = _leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * t
    return nodes.ravel(), (half * w).ravel()


def oscillatory_rule(a: float, b: float, max_freq: float, config: QuadratureConfig | None = None,
                     breaks=()):
    """Composite rule on ``[a, b]`` resolving ``exp(1j * max_freq * t)``.

    ``breaks`` are points that must be panel edges (kinks of the integrand).
    """
    cfg = config or QuadratureConfig()
    pts = np.unique(np.concatenate([[a, b], np.asarray(breaks, dtype=float)]))
    pts = pts[(pts >= a) & (pts <= b)]
    edges = [pts[:1]]
    for lo, hi in zip(pts[:-1], pts[1:]):
        n = max(1, int(np.ceil(abs(max_freq) * (hi - lo) / cfg.max_phase)))
        edges.append(np.linspace(lo, hi, n + 1)[1:])
    return gauss_legendre(np.concatenate(edges), cfg.order)

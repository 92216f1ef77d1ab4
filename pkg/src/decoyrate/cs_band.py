"""Cauchy-Schwarz band functions, their derivatives, and tangent outer relaxations.

The band linking the yields of two intensity settings with overlap ``z`` is

    G_-(y, z) <= y_other <= G_+(y, z),

where ``g_pm(y, z) = y + (1-z)(1-2y) +- 2 sqrt(z(1-z)y(1-y))``, G_- is g_- on
y > 1-z and 0 otherwise, and G_+ is g_+ on y < z and 1 otherwise. G_- is convex
and G_+ concave on [0, 1], so first-order tangents taken with the piecewise
derivative convention bound them from below/above everywhere; that global
domination is what makes the certification stage sound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_INTERIOR_CLAMP = 1e-9


class DomainError(ValueError):
    """Argument outside the domain where the requested quantity is defined."""


def g_plus(y: float, z: float) -> float:
    """g_+(y, z) = y + (1-z)(1-2y) + 2 sqrt(z(1-z)y(1-y)); y, z in [0, 1]."""
    return y + (1.0 - z) * (1.0 - 2.0 * y) + 2.0 * math.sqrt(
        max(z * (1.0 - z), 0.0) * max(y * (1.0 - y), 0.0)
    )


def g_minus(y: float, z: float) -> float:
    """g_-(y, z) = y + (1-z)(1-2y) - 2 sqrt(z(1-z)y(1-y)); y, z in [0, 1]."""
    return y + (1.0 - z) * (1.0 - 2.0 * y) - 2.0 * math.sqrt(
        max(z * (1.0 - z), 0.0) * max(y * (1.0 - y), 0.0)
    )


def band(y: float, z: float) -> tuple[float, float]:
    """The piecewise band (G_-(y, z), G_+(y, z))."""
    lo = g_minus(y, z) if y > 1.0 - z else 0.0
    hi = g_plus(y, z) if y < z else 1.0
    return lo, hi


def _g_prime(y: float, z: float, sign: float) -> float:
    root = math.sqrt(max(z * (1.0 - z), 0.0) / max(y * (1.0 - y), 1e-300))
    return -1.0 + 2.0 * z + sign * (1.0 - 2.0 * y) * root


def band_derivatives(
    y: float, z: float, eps: float = DEFAULT_INTERIOR_CLAMP
) -> tuple[float, float]:
    """Slopes (G_-'(y, z), G_+'(y, z)) with the piecewise zero convention.

    Raises DomainError for y outside [eps, 1-eps]: the square-root slopes
    diverge at the boundary.
    """
    if y < eps or y > 1.0 - eps:
        raise DomainError(f"y={y} outside clamped interior [{eps}, {1.0 - eps}]")
    d_lo = _g_prime(y, z, -1.0) if y > 1.0 - z else 0.0
    d_hi = _g_prime(y, z, +1.0) if y < z else 0.0
    return d_lo, d_hi


@dataclass(frozen=True)
class TangentLine:
    """The line intercept + slope * y."""

    intercept: float
    slope: float

    def at(self, y: float) -> float:
        return self.intercept + self.slope * y


@dataclass(frozen=True)
class TangentPair:
    """Supporting lines: lower.at(y) <= G_-(y, z) and upper.at(y) >= G_+(y, z) on [0, 1]."""

    lower: TangentLine
    upper: TangentLine
    reference: float


def tangent_relaxation(
    y_ref: float, z: float, eps: float = DEFAULT_INTERIOR_CLAMP
) -> TangentPair:
    """Tangent outer relaxation of the band at reference point ``y_ref``.

    The reference is clamped into [eps, 1-eps]; on inactive branches the
    constant relaxations (0 for G_-, 1 for G_+) are returned, which coincide
    with the limiting tangents since the band functions are C^1 at the branch
    crossings.
    """
    y = min(max(y_ref, eps), 1.0 - eps)
    lo, hi = band(y, z)
    d_lo, d_hi = band_derivatives(y, z, eps)
    lower = TangentLine(lo - d_lo * y, d_lo)
    upper = TangentLine(hi - d_hi * y, d_hi)
    return TangentPair(lower=lower, upper=upper, reference=y)


@dataclass(frozen=True)
class CsBand:
    """One band constraint's overlap parameter bundled with its interior clamp."""

    tau: float
    epsilon_interior: float = DEFAULT_INTERIOR_CLAMP

    def evaluate(self, y: float) -> tuple[float, float]:
        return band(y, self.tau)

    def derivatives(self, y: float) -> tuple[float, float]:
        return band_derivatives(y, self.tau, self.epsilon_interior)

    def tangents(self, y_ref: float) -> TangentPair:
        return tangent_relaxation(y_ref, self.tau, self.epsilon_interior)

"""Reduced two-body problem with potential ``-1/r**alpha``.

The relative motion of two bodies with ``m1 + m2 = 1`` is governed by the
radial equation ``r'' = -V_c'(r)`` with effective potential
``V_c(r) = c**2 / (2 r**2) - 1 / r**alpha``.  Two-body energy and angular
momentum are ``m1 m2`` times their reduced counterparts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import PhaseState
from .errors import AlphaOutOfRange, InconsistentEnergy, MassNormalization, ZeroAngularMomentum

SEPARATRIX_BAND = 1e-9


class KeplerOutcome(enum.Enum):
    Collision = "Collision"
    Escape = "Escape"
    Circular = "Circular"
    BoundedOscillation = "BoundedOscillation"
    Undecided = "Undecided"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class KeplerParams:
    alpha: float
    c: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.alpha == 2:
            raise AlphaOutOfRange("the alpha = 2 effective potential has no critical point")


@dataclass(frozen=True)
class CriticalPoint:
    r0: float
    v_star: float


def effective_potential(params: KeplerParams, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    out = params.c**2 / (2 * r**2) - r ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


def effective_force(params: KeplerParams, r):
    """``-V_c'(r)``, the radial acceleration."""
    r = np.asarray(r, dtype=float)
    out = params.c**2 / r**3 - params.alpha * r ** (-params.alpha - 1)
    return float(out) if out.ndim == 0 else out


def critical_point(params: KeplerParams) -> CriticalPoint:
    """Radius and value of the unique critical point of ``V_c``.

    A maximum for ``alpha > 2`` (the unstable circular orbit) and a minimum
    for ``alpha < 2``.
    """
    a, c = params.alpha, params.c
    if c == 0:
        raise ZeroAngularMomentum("V_c has no critical point when c = 0")
    r0 = (c**2 / a) ** (1 / (2 - a))
    v_star = a ** (2 / (2 - a)) * (0.5 - 1 / a) * abs(c) ** (2 * a / (a - 2))
    return CriticalPoint(r0, v_star)


def omega_c_map(alpha: float, omega: float) -> float:
    """Reduced angular momentum of the circular orbit with angular speed ``omega``."""
    if alpha == 2:
        raise AlphaOutOfRange("the frequency map degenerates at alpha = 2")
    if omega <= 0:
        raise ValueError("omega must be positive")
    return alpha ** (2 / (2 + alpha)) * omega ** ((alpha - 2) / (alpha + 2))


def c_omega_map(alpha: float, c: float) -> float:
    """Inverse of :func:`omega_c_map`."""
    if alpha == 2:
        raise AlphaOutOfRange("the frequency map degenerates at alpha = 2")
    if c <= 0:
        raise ValueError("c must be positive")
    return (c * alpha ** (-2 / (2 + alpha))) ** ((alpha + 2) / (alpha - 2))


def threshold_radius(alpha: float, omega: float) -> float:
    """Radius where ``K_omega`` changes sign: ``r**(alpha+2) = alpha / omega**2``."""
    return (alpha / omega**2) ** (1 / (alpha + 2))


def classify_kepler_state(
    params: KeplerParams, r: float, rdot: float, energy: float, band: float = SEPARATRIX_BAND
) -> KeplerOutcome:
    """Fate of a reduced orbit read off the effective-potential portrait.

    States within ``band`` of the circular-orbit energy lie on or next to a
    separatrix and are reported as undecided, unless they are the circular
    orbit itself.

    Raises
    ------
    InconsistentEnergy
        If ``energy`` differs from ``rdot**2 / 2 + V_c(r)`` by more than
        ``1e-9 (1 + |energy|)``.
    """
    a, c = params.alpha, params.c
    expected = 0.5 * rdot**2 + effective_potential(params, r)
    if abs(expected - energy) > 1e-9 * (1 + abs(energy)):
        raise InconsistentEnergy(f"energy {energy!r} but state gives {expected!r}")
    if c == 0:
        if energy < 0 or rdot < 0:
            return KeplerOutcome.Collision
        return KeplerOutcome.Escape
    crit = critical_point(params)
    near = abs(energy - crit.v_star) < band
    if a < 2:
        if near:
            return KeplerOutcome.Circular
        return KeplerOutcome.Escape if energy >= 0 else KeplerOutcome.BoundedOscillation
    if near:
        if abs(rdot) < band and abs(r - crit.r0) < math.sqrt(band) * crit.r0:
            return KeplerOutcome.Circular
        return KeplerOutcome.Undecided
    if energy < crit.v_star:
        return KeplerOutcome.Collision if r < crit.r0 else KeplerOutcome.Escape
    # above the barrier nothing turns the radial motion around
    return KeplerOutcome.Collision if rdot < 0 else KeplerOutcome.Escape


@dataclass(frozen=True)
class TwoBodyThresholds:
    e_star: float
    a_star: float
    r0: float


def twobody_thresholds(m1: float, m2: float, alpha: float, omega: float) -> TwoBodyThresholds:
    """Excited energy and critical angular momentum for two bodies with ``m1 + m2 = 1``."""
    if alpha <= 2:
        raise AlphaOutOfRange("two-body thresholds need alpha > 2")
    if abs(m1 + m2 - 1) > 1e-12:
        raise MassNormalization(f"masses sum to {m1 + m2!r}, expected 1")
    c = omega_c_map(alpha, omega)
    crit = critical_point(KeplerParams(alpha, c))
    mu = m1 * m2
    return TwoBodyThresholds(mu * crit.v_star, mu * c, crit.r0)


def collision_time_bound(inertia: float, inertia_rate: float, delta: float) -> float:
    """Positive root of ``I + I' t - 2 delta t**2``.

    Below the barrier and inside ``r0`` the moment of inertia is dominated by
    this parabola, so collision happens no later than its root.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (inertia_rate + math.sqrt(inertia_rate**2 + 8 * delta * inertia)) / (4 * delta)


def twobody_state(m1: float, m2: float, r: float, rdot: float, c: float) -> PhaseState:
    """Planar two-body state in the center-of-mass frame from reduced data.

    The relative vector is ``(r, 0, 0)`` with relative velocity
    ``(rdot, c / r, 0)``; the reduced angular momentum is ``c``.
    """
    big_m = m1 + m2
    rel = np.array([r, 0.0, 0.0])
    vrel = np.array([rdot, c / r, 0.0])
    x = np.array([-m2 / big_m * rel, m1 / big_m * rel])
    v = np.array([-m2 / big_m * vrel, m1 / big_m * vrel])
    return PhaseState(x, v)


def union_scan(alpha: float, r: float, rdot: float, c: float, omegas) -> tuple:
    """Membership of a reduced state in the sets indexed by each ``omega``.

    Returns ``(labels, consistent)`` where ``labels[k]`` is ``"-"`` (inside
    the barrier), ``"+"`` (outside) or ``None`` when the state is not below
    the threshold energy with enough angular momentum at ``omegas[k]``.
    ``consistent`` is true when all assigned labels agree.
    """
    params = KeplerParams(alpha, c)
    e = 0.5 * rdot**2 + effective_potential(params, r)
    labels = []
    for w in omegas:
        cw = omega_c_map(alpha, w)
        crit = critical_point(KeplerParams(alpha, cw))
        if e < crit.v_star and abs(c) >= cw:
            labels.append("-" if r < threshold_radius(alpha, w) else "+")
        else:
            labels.append(None)
    seen = {lab for lab in labels if lab is not None}
    return labels, len(seen) <= 1

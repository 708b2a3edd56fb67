"""Threshold function K_omega, the frequency energy E_omega and set labels.

``K_omega(x) = omega**2 I(x) + alpha U(x)`` separates configurations that
tend to collapse (negative) from those that tend to expand (non-negative).
Phase-space points below the excited energy are labelled by the sign of
``K_omega`` and by comparing ``|A|`` with ``omega I``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    AlphaSystem,
    PhaseState,
    angular_momentum,
    energy,
    inertia,
    kinetic_energy,
    potential,
)
from .errors import PreconditionViolated

# Minimum energy at fixed |A| = c is always attained by bodies at rest at
# infinity for alpha > 2 and N >= 3, so it is useless as a threshold.
FIXED_ANGULAR_MOMENTUM_EXCITED_ENERGY = 0.0


class SetLabel(enum.Enum):
    K1Plus = "K1Plus"
    K1Minus = "K1Minus"
    K2Plus = "K2Plus"
    K2Minus = "K2Minus"
    OutOfK = "OutOfK"

    def __str__(self):
        return self.value


def k_omega(system: AlphaSystem, omega: float, positions) -> float:
    return omega**2 * inertia(system, positions) + system.alpha * potential(system, positions)


def e_omega(system: AlphaSystem, omega: float, positions) -> float:
    return 0.5 * omega**2 * inertia(system, positions) + potential(system, positions)


def _bisect(f, lo, hi, rtol=1e-12, maxiter=200):
    flo = f(lo)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * mid:
            break
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scaled_k(system, omega, positions):
    i0 = inertia(system, positions)
    u0 = potential(system, positions)
    a = system.alpha
    return (lambda lam: omega**2 * lam**2 * i0 + lam ** (-a) * a * u0), i0, u0


def scale_to_null_up(system: AlphaSystem, omega: float, positions, rtol=1e-12) -> float:
    """Dilation factor ``lam > 1`` with ``K_omega(lam x) = 0`` for ``K_omega(x) < 0``."""
    f, i0, u0 = _scaled_k(system, omega, positions)
    if f(1.0) >= 0:
        raise PreconditionViolated("scale_to_null_up needs K_omega(x) < 0")
    hi = (-system.alpha * u0 / (omega**2 * i0)) ** (1.0 / (system.alpha + 2)) + 1.0
    return _bisect(f, 1.0, hi, rtol)


def scale_to_null_down(system: AlphaSystem, omega: float, positions, rtol=1e-12) -> float:
    """Contraction factor ``0 < lam < 1`` with ``K_omega(lam x) = 0`` for ``K_omega(x) > 0``."""
    f, _, _ = _scaled_k(system, omega, positions)
    if f(1.0) <= 0:
        raise PreconditionViolated("scale_to_null_down needs K_omega(x) > 0")
    lo = 0.5
    while f(lo) >= 0:
        lo *= 0.5
    return _bisect(f, lo, 1.0, rtol)


@dataclass(frozen=True)
class RotatingEnergyTerms:
    centrifugal_term: float
    potential: float
    omega_a3: float
    rotating_kinetic: float
    residual: float

    @property
    def total(self) -> float:
        return self.centrifugal_term + self.potential + self.omega_a3 + self.rotating_kinetic


_J = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def rotating_energy_decomposition(
    system: AlphaSystem, omega: float, state: PhaseState
) -> RotatingEnergyTerms:
    """Split the energy as seen from a frame rotating at ``omega`` about z.

    ``E = -(omega**2/2) sum m (x1**2 + x2**2) + U + omega A_3 + T_rot`` where
    ``T_rot`` is the kinetic energy of the velocities ``v - omega J x``
    measured in the rotating frame.
    """
    x, v, m = state.positions, state.velocities, system.m
    planar = float(np.sum(m * (x[:, 0] ** 2 + x[:, 1] ** 2)))
    u = potential(system, x)
    a3 = float(angular_momentum(system, state)[2])
    v_rot = v - omega * x @ _J.T
    terms = (-0.5 * omega**2 * planar, u, omega * a3, kinetic_energy(system, v_rot))
    e = kinetic_energy(system, v) + u
    return RotatingEnergyTerms(*terms, residual=e - sum(terms))


def classify_state(
    system: AlphaSystem, omega: float, state: PhaseState, e_star: float
) -> SetLabel:
    """Place a phase-space point into one of the four sub-threshold sets.

    Points with ``E >= e_star`` (excited states included) or with vanishing
    angular momentum lie outside the characterised region.  The boundary
    ``K_omega = 0`` counts as the ``+`` side.
    """
    e = energy(system, state)
    a = float(np.linalg.norm(angular_momentum(system, state)))
    if e >= e_star or a == 0.0:
        return SetLabel.OutOfK
    wide = a >= omega * inertia(system, state.positions)
    plus = k_omega(system, omega, state.positions) >= 0
    if wide:
        return SetLabel.K1Plus if plus else SetLabel.K1Minus
    return SetLabel.K2Plus if plus else SetLabel.K2Minus


def sundman_gap(system: AlphaSystem, state: PhaseState, tol: float = 1e-12) -> float:
    """``E - (|A|**2 / (2 I) + U)``, non-negative for any state."""
    a = np.linalg.norm(angular_momentum(system, state))
    i = inertia(system, state.positions)
    u = potential(system, state.positions)
    e = kinetic_energy(system, state.velocities) + u
    gap = e - (a**2 / (2 * i) + u)
    scale = 1.0 + abs(e) + abs(u)
    assert gap >= -tol * scale, f"Sundman inequality violated by {gap:.3e}"
    return float(gap)

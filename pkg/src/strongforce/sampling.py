"""Seeded generators of initial states used by tests, the CLI and sweeps."""

from __future__ import annotations

import math

import numpy as np

from . import core, kepler
from .core import AlphaSystem, PhaseState
from .threshold import k_omega


def rng_from_seed(seed) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed))


def random_configuration(n: int, rng, scale: float = 1.0, min_separation: float = 0.3) -> np.ndarray:
    """Gaussian positions with a minimum pairwise separation, centered on the origin."""
    while True:
        x = scale * rng.normal(size=(n, 3))
        x -= x.mean(axis=0)
        if core.pairwise_distances(x).min() > min_separation * scale:
            return x


def dispersing_state(system: AlphaSystem, rng, speed: float = 1.0, jitter: float = 0.3) -> PhaseState:
    """Bodies spread out and moving away from the center of mass.

    Velocities are radial at ``speed`` per unit distance plus a random
    component, then boosted to zero total momentum.  The energy is
    positive for the default parameters, so close encounters are rare.
    """
    x = random_configuration(system.n, rng, scale=2.0, min_separation=0.5)
    x -= core.center_of_mass(system, x)
    v = speed * x + jitter * rng.normal(size=x.shape)
    state = core.to_com_frame(system, PhaseState(x, v))
    return state


def homothetic_triangle(alpha: float = 4.0, circumradius: float = 1.0, spin: float = 0.0):
    """Equal masses on an equilateral triangle, at rest or slowly spinning about z.

    At rest the motion is a homothetic total collapse.  A small ``spin``
    gives nonzero angular momentum while still collapsing.
    """
    system = AlphaSystem((1.0, 1.0, 1.0), alpha)
    ang = 2 * np.pi * np.arange(3) / 3
    x = circumradius * np.column_stack([np.cos(ang), np.sin(ang), np.zeros(3)])
    v = spin * np.column_stack([-x[:, 1], x[:, 0], np.zeros(3)])
    return system, PhaseState(x, v)


def rotating_state(system: AlphaSystem, rng, omega: float, spin: float, radial: float = 0.0,
                   size: float = 1.0) -> PhaseState:
    """Planar configuration spinning at ``spin * omega`` about z with radial velocity ``radial``."""
    x = random_configuration(system.n, rng, scale=size, min_separation=0.4)
    x[:, 2] = 0.0
    x -= core.center_of_mass(system, x)
    v = spin * omega * np.column_stack([-x[:, 1], x[:, 0], np.zeros(system.n)]) + radial * x
    return PhaseState(x, v)


def k1_plus_candidate(system: AlphaSystem, rng, omega: float) -> PhaseState:
    """A state with ``|A| >= omega I`` and ``K_omega >= 0``.

    A random configuration is dilated until ``K_omega >= 0``, then given a
    rigid spin of at least ``omega`` plus a random velocity that does not
    reduce the angular momentum below ``omega I``.
    """
    x = random_configuration(system.n, rng, scale=1.0, min_separation=0.2)
    x -= core.center_of_mass(system, x)
    k = k_omega(system, omega, x)
    if k < 0:
        i0 = core.inertia(system, x)
        u0 = core.potential(system, x)
        lam = (-system.alpha * u0 / (omega**2 * i0)) ** (1 / (system.alpha + 2))
        x = x * lam * (1 + rng.uniform(0, 0.5))
    else:
        x = x * (1 + rng.uniform(0, 0.5))
    spin = omega * (1 + rng.exponential(0.5))
    v = spin * np.column_stack([-x[:, 1], x[:, 0], np.zeros(system.n)])
    v = v + rng.normal(scale=0.3, size=v.shape)
    state = core.align_angular_momentum(system, core.to_com_frame(system, PhaseState(x, v)))
    a = np.linalg.norm(core.angular_momentum(system, state))
    i = core.inertia(system, state.positions)
    if a < omega * i:
        # with A along z, a rigid spin about z adds its z-inertia times the rate
        xy = state.positions[:, :2]
        i_z = float(system.m @ np.einsum("ij,ij->i", xy, xy))
        state.velocities += (omega * i - a) / i_z * 1.01 * np.column_stack(
            [-state.positions[:, 1], state.positions[:, 0], np.zeros(system.n)]
        )
    return state


def twobody_sample(rng, alpha: float = 4.0, omega: float = 2.0, c_spread: float = 0.5,
                   side: str | None = None, margin: float = 1e-3):
    """Reduced state below the two-body excited energy with ``c >= c(omega)``.

    Returns ``(r, rdot, c)``.  ``side`` forces ``"-"`` (inside the threshold
    radius) or ``"+"`` (outside); otherwise it is drawn at random.
    """
    c_w = kepler.omega_c_map(alpha, omega)
    v_w = kepler.critical_point(kepler.KeplerParams(alpha, c_w)).v_star
    r_k = kepler.threshold_radius(alpha, omega)
    side = side or ("-" if rng.random() < 0.5 else "+")
    while True:
        c = c_w * (1 + c_spread * rng.random())
        params = kepler.KeplerParams(alpha, c)
        if side == "-":
            r = r_k * rng.uniform(0.2, 0.98)
        else:
            r = r_k * math.exp(rng.uniform(math.log(1.02), math.log(4.0)))
        room = v_w - margin - kepler.effective_potential(params, r)
        if room <= 0:
            continue
        rdot = math.sqrt(2 * room) * rng.uniform(-0.999, 0.999)
        return r, rdot, c

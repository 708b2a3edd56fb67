"""Physical model: the alpha-homogeneous N-body potential and its integrals.

Positions and velocities are ``(N, 3)`` float arrays.  The gravitational
constant is absorbed into the masses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionConfiguration, ZeroAngularMomentum

# relative to the configuration scale sqrt(I/M)
COLLISION_FLOOR = 1e-12


@dataclass(frozen=True)
class AlphaSystem:
    """Masses and potential exponent of an N-body system.

    Parameters
    ----------
    masses : sequence of float
        Strictly positive masses, at least two of them.
    alpha : float
        Exponent of the pairwise potential ``-m_i m_j / r**alpha``.
    """

    masses: tuple
    alpha: float
    _m: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).ravel()
        if m.size < 2:
            raise ValueError("need at least two bodies")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValueError("masses must be finite and strictly positive")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "masses", tuple(float(v) for v in m))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "_m", m)

    @property
    def m(self) -> np.ndarray:
        return self._m

    @property
    def n(self) -> int:
        return self._m.size

    @property
    def total_mass(self) -> float:
        return float(self._m.sum())

    @property
    def min_mass(self) -> float:
        return float(self._m.min())


@dataclass
class PhaseState:
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.array(self.velocities, dtype=float).reshape(-1, 3)
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have the same shape")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("non-finite entries in phase state")
        self.time = float(self.time)

    def copy(self) -> "PhaseState":
        return PhaseState(self.positions.copy(), self.velocities.copy(), self.time)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.positions.ravel(), self.velocities.ravel()])

    @classmethod
    def from_flat(cls, y, time=0.0) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        half = y.size // 2
        return cls(y[:half].reshape(-1, 3), y[half:].reshape(-1, 3), time)


@dataclass(frozen=True)
class InvariantRecord:
    energy: float
    angular_momentum: np.ndarray
    linear_momentum: np.ndarray
    inertia: float
    inertia_rate: float
    inertia_accel: float
    potential: float
    virial: float

    @property
    def angular_momentum_norm(self) -> float:
        return float(np.linalg.norm(self.angular_momentum))


def _pairs(n):
    return np.triu_indices(n, k=1)


def pairwise_distances(positions) -> np.ndarray:
    """Distances ``r_ij`` for ``i < j`` in ``np.triu_indices`` order."""
    x = np.asarray(positions, dtype=float)
    i, j = _pairs(x.shape[0])
    return np.linalg.norm(x[i] - x[j], axis=1)


def centered_inertia(system: AlphaSystem, positions) -> float:
    """Moment of inertia about the center of mass, from mutual distances."""
    i, j = _pairs(system.n)
    r = pairwise_distances(positions)
    m = system.m
    return float(np.sum(m[i] * m[j] * r**2) / system.total_mass)


def _checked_distances(system, positions):
    r = pairwise_distances(positions)
    scale = np.sqrt(centered_inertia(system, positions) / system.total_mass)
    if not np.all(r > COLLISION_FLOOR * scale):
        raise CollisionConfiguration(
            f"pairwise distance {r.min():.3e} below floor "
            f"{COLLISION_FLOOR:.0e} x scale {scale:.3e}"
        )
    return r


def potential(system: AlphaSystem, positions) -> float:
    r"""U(x) = -sum_{i<j} m_i m_j / r_ij**alpha."""
    r = _checked_distances(system, positions)
    i, j = _pairs(system.n)
    m = system.m
    return float(-np.sum(m[i] * m[j] / r**system.alpha))


def potential_gradient(system: AlphaSystem, positions) -> np.ndarray:
    """Gradient of U with respect to every body position, shape ``(N, 3)``."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    _checked_distances(system, x)
    d = x[:, None, :] - x[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    w = np.outer(system.m, system.m) * r2 ** (-(system.alpha + 2) / 2)
    np.fill_diagonal(w, 0.0)
    return system.alpha * np.einsum("ij,ijk->ik", w, d)


def accelerations(system: AlphaSystem, positions) -> np.ndarray:
    """Right-hand side of ``m_i x_i'' = -grad_i U``."""
    return -potential_gradient(system, positions) / system.m[:, None]


def inertia(system: AlphaSystem, positions) -> float:
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    return float(np.sum(system.m * np.einsum("ij,ij->i", x, x)))


def kinetic_energy(system: AlphaSystem, velocities) -> float:
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    return 0.5 * float(np.sum(system.m * np.einsum("ij,ij->i", v, v)))


def angular_momentum(system: AlphaSystem, state: PhaseState) -> np.ndarray:
    return np.sum(system.m[:, None] * np.cross(state.positions, state.velocities), axis=0)


def energy(system: AlphaSystem, state: PhaseState) -> float:
    return kinetic_energy(system, state.velocities) + potential(system, state.positions)


def invariants(system: AlphaSystem, state: PhaseState) -> InvariantRecord:
    x, v, m = state.positions, state.velocities, system.m
    u = potential(system, x)
    e = kinetic_energy(system, v) + u
    virial = e + (system.alpha / 2 - 1) * u
    return InvariantRecord(
        energy=e,
        angular_momentum=angular_momentum(system, state),
        linear_momentum=np.sum(m[:, None] * v, axis=0),
        inertia=inertia(system, x),
        inertia_rate=2.0 * float(np.sum(m * np.einsum("ij,ij->i", x, v))),
        inertia_accel=4.0 * virial,
        potential=u,
        virial=virial,
    )


def center_of_mass(system: AlphaSystem, positions) -> np.ndarray:
    return system.m @ np.asarray(positions, dtype=float).reshape(-1, 3) / system.total_mass


def to_com_frame(system: AlphaSystem, state: PhaseState) -> PhaseState:
    """Translate and boost so that the center of mass sits at rest at the origin."""
    x = state.positions - center_of_mass(system, state.positions)
    v = state.velocities - center_of_mass(system, state.velocities)
    return PhaseState(x, v, state.time)


def rotation_to_z(vector) -> np.ndarray:
    """Proper rotation matrix taking ``vector`` onto the positive z-axis."""
    a = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise ZeroAngularMomentum("cannot align a zero vector")
    a = a / norm
    z = np.array([0.0, 0.0, 1.0])
    c = float(a @ z)
    axis = np.cross(a, z)
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * kx @ kx


def align_angular_momentum(system: AlphaSystem, state: PhaseState) -> PhaseState:
    """Rotate the state so that its angular momentum points along +z."""
    a = angular_momentum(system, state)
    if np.linalg.norm(a) == 0:
        raise ZeroAngularMomentum("angular momentum vanishes; alignment undefined")
    rot = rotation_to_z(a)
    return PhaseState(state.positions @ rot.T, state.velocities @ rot.T, state.time)

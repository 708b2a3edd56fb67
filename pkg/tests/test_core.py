import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strongforce import core
from strongforce.core import AlphaSystem, PhaseState
from strongforce.errors import CollisionConfiguration, ZeroAngularMomentum


def brute_potential(masses, alpha, x):
    u = 0.0
    for i, j in itertools.combinations(range(len(masses)), 2):
        u -= masses[i] * masses[j] / np.linalg.norm(x[i] - x[j]) ** alpha
    return u


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


configs = st.integers(min_value=0, max_value=2**32 - 1).map(
    lambda s: np.random.default_rng(s).normal(size=(4, 3))
)


def test_system_validation():
    with pytest.raises(ValueError):
        AlphaSystem((1.0,), 3.0)
    with pytest.raises(ValueError):
        AlphaSystem((1.0, -1.0), 3.0)
    with pytest.raises(ValueError):
        AlphaSystem((1.0, 1.0), 0.0)
    s = AlphaSystem([1, 2, 3], 4)
    assert s.total_mass == 6 and s.min_mass == 1 and s.n == 3


def test_two_body_potential_by_hand():
    s = AlphaSystem((2.0, 3.0), 4.0)
    x = np.array([[0, 0, 0], [2.0, 0, 0]])
    assert core.potential(s, x) == pytest.approx(-6 / 16, rel=1e-15)


@given(configs, st.sampled_from([1.0, 2.5, 3.0, 4.0, 6.0]))
@settings(max_examples=40, deadline=None)
def test_potential_matches_pairwise_sum(x, alpha):
    m = (1.0, 0.5, 2.0, 1.5)
    s = AlphaSystem(m, alpha)
    assert core.potential(s, x) == pytest.approx(brute_potential(m, alpha, x), rel=1e-12)


@given(configs)
@settings(max_examples=25, deadline=None)
def test_gradient_matches_finite_differences(x):
    s = AlphaSystem((1.0, 0.5, 2.0, 1.5), 3.0)
    g = core.potential_gradient(s, x)
    fd = fd_gradient(lambda y: core.potential(s, y), x)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-6 * np.abs(g).max())


def test_gradient_sums_to_zero():
    rng = np.random.default_rng(3)
    s = AlphaSystem((1.0, 2.0, 3.0), 4.0)
    g = core.potential_gradient(s, rng.normal(size=(3, 3)))
    assert np.allclose(g.sum(axis=0), 0, atol=1e-12 * np.abs(g).max())


def test_collision_floor_raises():
    s = AlphaSystem((1.0, 1.0, 1.0), 4.0)
    x = np.array([[0, 0, 0], [0, 0, 0], [1.0, 0, 0]])
    with pytest.raises(CollisionConfiguration):
        core.potential(s, x)


def test_invariants_of_circular_two_body():
    # unit masses at separation 2 rotating at angular speed w
    s = AlphaSystem((1.0, 1.0), 4.0)
    w = 0.5
    x = np.array([[-1.0, 0, 0], [1.0, 0, 0]])
    v = np.array([[0, -w, 0], [0, w, 0]])
    inv = core.invariants(s, PhaseState(x, v))
    assert inv.inertia == 2.0
    assert inv.inertia_rate == 0.0
    assert inv.energy == pytest.approx(w**2 - 1 / 16)
    assert np.allclose(inv.angular_momentum, [0, 0, 2 * w])
    assert np.allclose(inv.linear_momentum, 0)
    assert inv.inertia_accel == pytest.approx(4 * (inv.energy + (2 - 1) * inv.potential))


def test_centered_inertia_matches_com_frame():
    rng = np.random.default_rng(5)
    s = AlphaSystem((1.0, 2.0, 0.5), 3.0)
    x = rng.normal(size=(3, 3)) + 4.0
    xc = x - core.center_of_mass(s, x)
    assert core.centered_inertia(s, x) == pytest.approx(core.inertia(s, xc), rel=1e-12)


def test_com_frame_zeroes_momentum():
    rng = np.random.default_rng(6)
    s = AlphaSystem((1.0, 2.0, 0.5), 3.0)
    st0 = core.to_com_frame(s, PhaseState(rng.normal(size=(3, 3)), rng.normal(size=(3, 3))))
    assert np.allclose(s.m @ st0.positions, 0, atol=1e-14)
    assert np.allclose(s.m @ st0.velocities, 0, atol=1e-14)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_alignment_puts_angular_momentum_on_z(seed):
    rng = np.random.default_rng(seed)
    s = AlphaSystem((1.0, 2.0, 0.5), 3.0)
    state = PhaseState(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
    a = core.angular_momentum(s, state)
    aligned = core.align_angular_momentum(s, state)
    b = core.angular_momentum(s, aligned)
    assert np.allclose(b[:2], 0, atol=1e-12 * np.linalg.norm(a))
    assert b[2] == pytest.approx(np.linalg.norm(a), rel=1e-12)
    assert core.energy(s, aligned) == pytest.approx(core.energy(s, state), rel=1e-12)


def test_alignment_rejects_zero_angular_momentum():
    s = AlphaSystem((1.0, 1.0), 3.0)
    state = PhaseState([[1, 0, 0], [-1, 0, 0]], [[1, 0, 0], [-1, 0, 0]])
    with pytest.raises(ZeroAngularMomentum):
        core.align_angular_momentum(s, state)


def test_rotation_to_z_antiparallel():
    r = core.rotation_to_z([0, 0, -2.0])
    assert np.allclose(r @ [0, 0, -1.0], [0, 0, 1.0])
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_phase_state_flat_roundtrip():
    rng = np.random.default_rng(1)
    state = PhaseState(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), 2.5)
    back = PhaseState.from_flat(state.flat(), 2.5)
    assert np.array_equal(back.positions, state.positions)
    assert np.array_equal(back.velocities, state.velocities)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from strongforce import core, kepler, sampling
from strongforce.core import AlphaSystem
from strongforce.errors import AlphaOutOfRange, InconsistentEnergy, MassNormalization, ZeroAngularMomentum
from strongforce.experiments import twobody_trial
from strongforce.integrate import IntegratorConfig
from strongforce.kepler import KeplerOutcome, KeplerParams


def vc(alpha, c, r):
    return c**2 / (2 * r**2) - r ** (-alpha)


def classify(alpha, c, r, rdot):
    p = KeplerParams(alpha, c)
    return kepler.classify_kepler_state(p, r, rdot, 0.5 * rdot**2 + vc(alpha, c, r))


def test_critical_point_examples():
    crit = kepler.critical_point(KeplerParams(4.0, 2.0))
    assert crit.r0 == pytest.approx(1.0, abs=1e-12)
    assert crit.v_star == pytest.approx(1.0, abs=1e-12)
    crit = kepler.critical_point(KeplerParams(1.0, 1.0))
    assert crit.r0 == pytest.approx(1.0, abs=1e-12)
    assert crit.v_star == pytest.approx(-0.5, abs=1e-12)


# near alpha = 2 the critical radius underflows and V_c cancels catastrophically
@given(st.floats(0.3, 12.0).filter(lambda a: abs(a - 2) > 0.3), st.floats(0.5, 5.0))
@settings(max_examples=100, deadline=None)
def test_critical_point_is_stationary(alpha, c):
    p = KeplerParams(alpha, c)
    crit = kepler.critical_point(p)
    # independent root of V_c' = -c^2/r^3 + alpha / r^(alpha+1), bracketed around r0
    root = brentq(lambda r: -(c**2) / r**3 + alpha * r ** (-alpha - 1), crit.r0 / 3, crit.r0 * 3, xtol=1e-15)
    assert crit.r0 == pytest.approx(root, rel=1e-10)
    assert crit.v_star == pytest.approx(vc(alpha, c, root), rel=1e-10, abs=1e-300)
    assert kepler.effective_force(p, crit.r0) == pytest.approx(0.0, abs=1e-9 * c**2 / crit.r0**3)


@given(st.floats(0.5, 8.0), st.floats(0.0, 3.0), st.floats(0.01, 3.0), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_effective_potential_increases_with_c(alpha, c1, dc, r):
    if alpha == 2:
        return
    assert kepler.effective_potential(KeplerParams(alpha, c1 + dc), r) > kepler.effective_potential(
        KeplerParams(alpha, c1), r
    )


def test_parameter_errors():
    with pytest.raises(AlphaOutOfRange):
        KeplerParams(2.0, 1.0)
    with pytest.raises(ZeroAngularMomentum):
        kepler.critical_point(KeplerParams(4.0, 0.0))
    with pytest.raises(ValueError):
        kepler.effective_potential(KeplerParams(4.0, 1.0), 0.0)
    with pytest.raises(AlphaOutOfRange):
        kepler.omega_c_map(2.0, 1.0)


def test_frequency_map_examples():
    assert kepler.omega_c_map(4.0, 2.0) == pytest.approx(2.0, rel=1e-14)
    assert kepler.c_omega_map(4.0, 2.0) == pytest.approx(2.0, rel=1e-14)
    assert kepler.omega_c_map(4.0, 1.0) == pytest.approx(4 ** (1 / 3), rel=1e-14)


def test_frequency_map_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(100):
        alpha = rng.uniform(2.2, 12.0) if rng.random() < 0.7 else rng.uniform(0.3, 1.8)
        omega = math.exp(rng.uniform(-3, 3))
        c = kepler.omega_c_map(alpha, omega)
        assert kepler.c_omega_map(alpha, c) == pytest.approx(omega, rel=1e-12)


@given(st.floats(2.2, 10.0), st.floats(0.1, 5.0))
@settings(max_examples=60, deadline=None)
def test_circular_orbit_frequency_matches_map(alpha, omega):
    # on the circular orbit of angular momentum c(omega) the angular speed c / r0^2 is omega
    c = kepler.omega_c_map(alpha, omega)
    r0 = kepler.critical_point(KeplerParams(alpha, c)).r0
    assert c / r0**2 == pytest.approx(omega, rel=1e-10)
    assert r0 == pytest.approx(kepler.threshold_radius(alpha, omega), rel=1e-10)


def test_classification_examples():
    assert classify(4.0, 2.0, 0.5, 0.0) is KeplerOutcome.Collision
    assert classify(4.0, 2.0, 2.0, 0.0) is KeplerOutcome.Escape
    p = KeplerParams(1.0, 1.0)
    # r solving 1/(2 r^2) - 1/r = -0.3, the inner turning point
    r = (1 - math.sqrt(1 - 0.6)) / 0.6
    assert kepler.classify_kepler_state(p, r, 0.0, -0.3) is KeplerOutcome.BoundedOscillation
    assert classify(1.0, 1.0, 1.0, 0.0) is KeplerOutcome.Circular
    assert classify(1.0, 1.0, 0.3, 0.0) is KeplerOutcome.Escape
    assert classify(4.0, 2.0, 1.0, 0.0) is KeplerOutcome.Circular


def test_above_barrier_follows_radial_direction():
    assert classify(4.0, 2.0, 1.5, -1.0) is KeplerOutcome.Collision
    assert classify(4.0, 2.0, 0.6, 5.0) is KeplerOutcome.Escape


def test_zero_angular_momentum():
    assert classify(4.0, 0.0, 1.0, 0.0) is KeplerOutcome.Collision
    assert classify(4.0, 0.0, 1.0, 3.0) is KeplerOutcome.Escape


def test_separatrix_band_is_undecided():
    # on the stable manifold of the circular orbit: E = V* but r != r0
    r = 1.4
    rdot = -math.sqrt(2 * (1.0 - vc(4.0, 2.0, r)))
    assert classify(4.0, 2.0, r, rdot) is KeplerOutcome.Undecided
    r = 0.8
    rdot = math.sqrt(2 * (1.0 - vc(4.0, 2.0, r)))
    assert classify(4.0, 2.0, r, rdot) is KeplerOutcome.Undecided


def test_inconsistent_energy():
    with pytest.raises(InconsistentEnergy):
        kepler.classify_kepler_state(KeplerParams(4.0, 2.0), 0.5, 0.0, -7.0)


def integrate_radial(alpha, c, r, rdot, t_end):
    def rhs(t, y):
        return [y[1], c**2 / y[0] ** 3 - alpha * y[0] ** (-alpha - 1)]

    def hit(t, y):
        return y[0] - 1e-2

    hit.terminal = True

    def far(t, y):
        return y[0] - 1e3

    far.terminal = True
    return solve_ivp(rhs, (0, t_end), [r, rdot], method="DOP853", rtol=1e-11, atol=1e-13,
                     events=[hit, far])


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_classification_agrees_with_radial_integration(seed):
    rng = np.random.default_rng(seed)
    alpha, c = 4.0, 2.0
    r = math.exp(rng.uniform(-1.5, 1.5))
    rdot = rng.normal(scale=1.5)
    e = 0.5 * rdot**2 + vc(alpha, c, r)
    if abs(e - 1.0) < 1e-2:
        return
    outcome = classify(alpha, c, r, rdot)
    sol = integrate_radial(alpha, c, r, rdot, 500.0)
    if outcome is KeplerOutcome.Collision:
        assert sol.t_events[0].size == 1
    else:
        assert outcome is KeplerOutcome.Escape
        assert sol.t_events[0].size == 0
        assert sol.y[0, -1] > r


def test_invariant_sides_of_threshold_radius():
    # 1000 reduced states below the barrier with c >= c(omega) never cross r0(c(omega))
    rng = np.random.default_rng(7)
    alpha, omega = 4.0, 2.0
    r_k = kepler.threshold_radius(alpha, omega)
    horizon = 50 * 2 * math.pi / omega
    for _ in range(1000):
        side = "-" if rng.random() < 0.5 else "+"
        r, rdot, c = sampling.twobody_sample(rng, alpha, omega, side=side)
        sol = integrate_radial(alpha, c, r, rdot, horizon)
        gap = sol.y[0] - r_k
        if side == "-":
            assert gap.max() < 0
        else:
            assert gap.min() > 0


def test_twobody_thresholds_example():
    th = kepler.twobody_thresholds(0.5, 0.5, 4.0, 2.0)
    assert th.e_star == pytest.approx(0.25, rel=1e-14)
    assert th.a_star == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(MassNormalization):
        kepler.twobody_thresholds(0.5, 0.6, 4.0, 2.0)
    with pytest.raises(AlphaOutOfRange):
        kepler.twobody_thresholds(0.5, 0.5, 1.5, 2.0)


@given(st.floats(0.05, 0.95), st.floats(2.2, 10.0), st.floats(0.1, 5.0))
@settings(max_examples=80, deadline=None)
def test_twobody_thresholds_chain(m1, alpha, omega):
    th = kepler.twobody_thresholds(m1, 1 - m1, alpha, omega)
    mu = m1 * (1 - m1)
    crit = kepler.critical_point(KeplerParams(alpha, kepler.omega_c_map(alpha, omega)))
    assert th.e_star == pytest.approx(mu * crit.v_star, rel=1e-12)
    twice = kepler.twobody_thresholds(m1, 1 - m1, alpha, 2 * omega)
    assert twice.e_star / th.e_star == pytest.approx(2 ** (2 * alpha / (alpha + 2)), rel=1e-12)


def test_twobody_threshold_matches_excited_energy_of_circular_state():
    m1, m2, alpha, omega = 0.3, 0.7, 4.0, 2.0
    th = kepler.twobody_thresholds(m1, m2, alpha, omega)
    c = kepler.omega_c_map(alpha, omega)
    state = kepler.twobody_state(m1, m2, th.r0, 0.0, c)
    system = AlphaSystem((m1, m2), alpha)
    inv = core.invariants(system, state)
    assert inv.energy == pytest.approx(th.e_star, rel=1e-12)
    assert inv.angular_momentum_norm == pytest.approx(th.a_star, rel=1e-12)
    assert inv.angular_momentum_norm == pytest.approx(omega * inv.inertia, rel=1e-12)


def test_collision_time_bound_root():
    t = kepler.collision_time_bound(2.0, -1.0, 0.5)
    assert 2.0 - 1.0 * t - 2 * 0.5 * t**2 == pytest.approx(0.0, abs=1e-12)
    assert t > 0
    with pytest.raises(ValueError):
        kepler.collision_time_bound(1.0, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(6))
def test_dichotomy_trials(seed):
    rng = np.random.default_rng(seed)
    for side in "-+":
        r, rdot, c = sampling.twobody_sample(rng, side=side)
        trial = twobody_trial(r, rdot, c, config=IntegratorConfig(t_max=30))
        assert trial.side == side
        assert trial.agrees


@given(st.floats(0.3, 3.0), st.floats(-2.0, 2.0), st.floats(1.0, 4.0))
@settings(max_examples=100, deadline=None)
def test_union_scan_is_consistent(r, rdot, c):
    omegas = np.geomspace(0.1, 10.0, 40)
    labels, consistent = kepler.union_scan(4.0, r, rdot, c, omegas)
    assert consistent
    assert len(labels) == len(omegas)
    for lab, w in zip(labels, omegas):
        if lab is not None:
            assert (lab == "-") == (r < kepler.threshold_radius(4.0, w))

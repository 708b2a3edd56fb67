import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strongforce import core, threshold
from strongforce.core import AlphaSystem, PhaseState
from strongforce.errors import PreconditionViolated
from strongforce.threshold import SetLabel

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def closed_form_dilation(system, omega, x):
    # K(lam x) = omega^2 lam^2 I + alpha lam^-alpha U vanishes at this lam
    i0, u0 = core.inertia(system, x), core.potential(system, x)
    return (-system.alpha * u0 / (omega**2 * i0)) ** (1 / (system.alpha + 2))


@given(seeds, st.sampled_from([2.5, 3.0, 4.0, 6.0]), st.floats(0.2, 3.0))
@settings(max_examples=50, deadline=None)
def test_dilation_onto_null_set_matches_closed_form(seed, alpha, omega):
    s = AlphaSystem((1.0, 2.0, 0.7), alpha)
    x = np.random.default_rng(seed).normal(size=(3, 3))
    lam_exact = closed_form_dilation(s, omega, x)
    k = threshold.k_omega(s, omega, x)
    if k < 0:
        lam = threshold.scale_to_null_up(s, omega, x)
        assert lam > 1
    elif k > 0:
        lam = threshold.scale_to_null_down(s, omega, x)
        assert lam < 1
    else:
        return
    assert lam == pytest.approx(lam_exact, rel=1e-10)
    assert abs(threshold.k_omega(s, omega, lam * x)) < 1e-9 * (
        omega**2 * core.inertia(s, lam * x) + alpha * abs(core.potential(s, lam * x))
    )


def test_dilation_preconditions():
    s = AlphaSystem((1.0, 1.0), 4.0)
    x = np.array([[0.05, 0, 0], [-0.05, 0, 0]])
    with pytest.raises(PreconditionViolated):
        threshold.scale_to_null_down(s, 1.0, x)
    with pytest.raises(PreconditionViolated):
        threshold.scale_to_null_up(s, 1.0, 100 * x)


def test_e_omega_equals_scaled_potential_on_null_set():
    s = AlphaSystem((1.0, 2.0, 3.0), 4.0)
    x = np.random.default_rng(2).normal(size=(3, 3))
    lam = threshold.scale_to_null_up(s, 1.3, 0.1 * x) * 0.1
    y = lam * x
    assert threshold.e_omega(s, 1.3, y) == pytest.approx(-(4 / 2 - 1) * core.potential(s, y), rel=1e-9)


@given(seeds, st.floats(-3.0, 3.0))
@settings(max_examples=50, deadline=None)
def test_rotating_frame_identity(seed, omega):
    rng = np.random.default_rng(seed)
    s = AlphaSystem((1.0, 0.5, 2.0), 3.0)
    state = PhaseState(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
    terms = threshold.rotating_energy_decomposition(s, omega, state)
    scale = 1 + abs(core.energy(s, state)) + abs(terms.potential) + abs(terms.centrifugal_term)
    assert abs(terms.residual) < 1e-12 * scale


def test_rotating_kinetic_vanishes_for_rigid_rotation():
    s = AlphaSystem((1.0, 1.0), 4.0)
    w = 0.7
    x = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    v = w * np.array([[0, 1.0, 0], [0, -1.0, 0]])
    terms = threshold.rotating_energy_decomposition(s, w, PhaseState(x, v))
    assert terms.rotating_kinetic == pytest.approx(0.0, abs=1e-15)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_sundman_gap_nonnegative(seed):
    rng = np.random.default_rng(seed)
    s = AlphaSystem((1.0, 0.5, 2.0, 1.2), 4.0)
    state = core.to_com_frame(s, PhaseState(rng.normal(size=(4, 3)), rng.normal(size=(4, 3))))
    assert threshold.sundman_gap(s, state) >= -1e-12


def test_classify_state_labels():
    s = AlphaSystem((0.5, 0.5), 4.0)
    w = 2.0
    # circular orbit at separation 1 has K = 0 and |A| = w I
    x = np.array([[-0.5, 0, 0], [0.5, 0, 0]])
    v = np.array([[0, -0.5 * w, 0], [0, 0.5 * w, 0]])
    circ = PhaseState(x, v)
    assert threshold.classify_state(s, w, circ, e_star=10.0) is SetLabel.K1Plus
    assert threshold.classify_state(s, w, circ, e_star=0.0) is SetLabel.OutOfK
    inner = PhaseState(0.8 * x, v / 0.8)
    assert threshold.classify_state(s, w, inner, e_star=10.0) is SetLabel.K1Minus
    slow = PhaseState(1.2 * x, 0.2 * v)
    assert threshold.classify_state(s, w, slow, e_star=10.0) is SetLabel.K2Plus
    slow_inner = PhaseState(0.8 * x, 0.2 * v)
    assert threshold.classify_state(s, w, slow_inner, e_star=10.0) is SetLabel.K2Minus
    still = PhaseState(x, np.zeros_like(v))
    assert threshold.classify_state(s, w, still, e_star=10.0) is SetLabel.OutOfK


def test_fixed_angular_momentum_threshold_is_zero():
    assert threshold.FIXED_ANGULAR_MOMENTUM_EXCITED_ENERGY == 0.0


EQUAL3 = AlphaSystem((1.0, 1.0, 1.0), 4.0)
# excited energy of three unit masses at alpha = 4, omega = 1 from the triangle closed form
E_STAR_EQUAL3 = (4 / 2 - 1) * 3 ** (2 / 6) * 4 ** (-4 / 6)
U_STAR_EQUAL3 = E_STAR_EQUAL3 / (4 / 2 - 1)


@given(seeds)
@settings(max_examples=80, deadline=None)
def test_contracted_configurations_lose_potential_when_dilated(seed):
    x = np.random.default_rng(seed).normal(size=(3, 3))
    if threshold.k_omega(EQUAL3, 1.0, x) >= 0:
        x = 0.2 * x
    if threshold.k_omega(EQUAL3, 1.0, x) >= 0:
        return
    lam = threshold.scale_to_null_up(EQUAL3, 1.0, x)
    u_x, u_lam = -core.potential(EQUAL3, x), -core.potential(EQUAL3, lam * x)
    assert u_x > u_lam
    assert u_lam >= U_STAR_EQUAL3 * (1 - 1e-10)


@given(seeds)
@settings(max_examples=80, deadline=None)
def test_spread_configurations_lose_rotating_energy_when_contracted(seed):
    x = 3.0 * np.random.default_rng(seed).normal(size=(3, 3))
    if threshold.k_omega(EQUAL3, 1.0, x) <= 0:
        return
    lam = threshold.scale_to_null_down(EQUAL3, 1.0, x)
    e_x, e_lam = threshold.e_omega(EQUAL3, 1.0, x), threshold.e_omega(EQUAL3, 1.0, lam * x)
    assert e_x > e_lam
    assert e_lam >= E_STAR_EQUAL3 * (1 - 1e-10)


def test_sundman_equality_for_rigid_rotation():
    s = AlphaSystem((0.5, 0.5), 4.0)
    x = np.array([[-0.5, 0, 0], [0.5, 0, 0]])
    v = np.array([[0, -1.0, 0], [0, 1.0, 0]])
    assert threshold.sundman_gap(s, PhaseState(x, v)) == pytest.approx(0.0, abs=1e-14)


def test_sundman_gap_is_kinetic_for_radial_motion():
    s = AlphaSystem((1.0, 2.0), 3.0)
    x = np.array([[-2.0, 0, 0], [1.0, 0, 0]])
    v = np.array([[-0.4, 0, 0], [0.2, 0, 0]])
    state = PhaseState(x, v)
    assert threshold.sundman_gap(s, state) == pytest.approx(core.kinetic_energy(s, state.velocities), rel=1e-12)


def test_rotating_frame_identity_on_many_states():
    rng = np.random.default_rng(2024)
    s = AlphaSystem((1.0, 0.5, 2.0), 4.0)
    worst = 0.0
    for _ in range(100_000):
        state = PhaseState(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
        omega = rng.uniform(0.1, 3.0)
        terms = threshold.rotating_energy_decomposition(s, omega, state)
        worst = max(worst, abs(terms.residual) / (1 + abs(core.energy(s, state))))
    assert worst < 1e-10


@given(seeds)
@settings(max_examples=200, deadline=None)
def test_no_sampled_state_in_k1_plus(seed):
    rng = np.random.default_rng(seed)
    state = sampling_k1_plus(rng)
    inv = core.invariants(EQUAL3, state)
    assert inv.angular_momentum_norm >= inv.inertia
    assert threshold.k_omega(EQUAL3, 1.0, state.positions) >= 0
    assert inv.energy >= E_STAR_EQUAL3


def sampling_k1_plus(rng):
    from strongforce.sampling import k1_plus_candidate

    return k1_plus_candidate(EQUAL3, rng, 1.0)


@given(seeds, st.permutations(range(3)))
@settings(max_examples=60, deadline=None)
def test_label_invariant_under_relabeling_equal_masses(seed, perm):
    rng = np.random.default_rng(seed)
    state = PhaseState(rng.normal(size=(3, 3)), 0.5 * rng.normal(size=(3, 3)))
    perm = list(perm)
    swapped = PhaseState(state.positions[perm], state.velocities[perm])
    for e_star in (E_STAR_EQUAL3, 10.0):
        assert threshold.classify_state(EQUAL3, 1.0, state, e_star) is threshold.classify_state(
            EQUAL3, 1.0, swapped, e_star
        )

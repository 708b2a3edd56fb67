import numpy as np
import pytest

from strongforce.ode import DormandPrince, bisect_event


def run_to(solver, t_end):
    denses = []
    while t_end - solver.t > 1e-14:
        solver.h_max = t_end - solver.t
        denses.append(solver.step())
    return denses


@pytest.mark.parametrize("rtol", [1e-6, 1e-9, 1e-12])
def test_exponential_decay(rtol):
    solver = DormandPrince(lambda t, y: -y, 0.0, [1.0], rtol=rtol, atol=rtol * 1e-3)
    run_to(solver, 5.0)
    assert solver.y[0] == pytest.approx(np.exp(-5.0), rel=200 * rtol)


def test_harmonic_oscillator_over_many_periods():
    solver = DormandPrince(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], rtol=1e-12, atol=1e-14)
    run_to(solver, 20 * np.pi)
    assert np.allclose(solver.y, [1.0, 0.0], atol=1e-9)
    assert solver.nreject < solver.naccept


def test_dense_output_between_steps():
    solver = DormandPrince(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0], rtol=1e-10, atol=1e-12)
    for dense in run_to(solver, 6.0):
        for t in np.linspace(dense.t0, dense.t1, 7):
            assert np.allclose(dense(t), [np.sin(t), np.cos(t)], atol=1e-8)


def test_time_dependent_rhs():
    # y' = 2t has exact solution t^2
    solver = DormandPrince(lambda t, y: np.array([2 * t]), 1.0, [1.0], rtol=1e-12, atol=1e-14)
    run_to(solver, 3.0)
    assert solver.y[0] == pytest.approx(9.0, rel=1e-12)


def test_step_floor_returns_none():
    solver = DormandPrince(lambda t, y: -y, 0.0, [1.0], h_init=1e-3)
    assert solver.step(h_floor=1.0) is None
    assert solver.t == 0.0


def test_bisect_event_finds_zero_of_cosine():
    solver = DormandPrince(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], rtol=1e-12, atol=1e-14)
    found = None
    prev = solver.y[0]
    while found is None:
        dense = solver.step()
        if (solver.y[0] < 0) != (prev < 0):
            found = bisect_event(lambda t, y: y[0], dense, dense.t0, dense.t1, prev, tol=1e-13)
        prev = solver.y[0]
    assert found == pytest.approx(np.pi / 2, abs=1e-10)

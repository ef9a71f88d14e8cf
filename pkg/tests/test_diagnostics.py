import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collot import SolverConfig, collision_solve, collision_sweep, init_coupling, isa_solve
from collot.diagnostics import (check_marginal_preservation, fit_exponential_decay, measure_sweep_scaling,
                                verify_monotone)
from collot.errors import DegenerateTrace
from collot.ingest import SyntheticSpec

from conftest import gaussian_problem


def test_marginal_preservation_fresh_and_long_run():
    problem = gaussian_problem(3, 64, 2, seed=0)
    state = init_coupling(problem, SolverConfig(init="random-shuffle"))
    assert check_marginal_preservation(problem, state)
    points_before = problem.points.copy()
    for _ in range(10**4):
        collision_sweep(problem, state)
    assert check_marginal_preservation(problem, state)
    np.testing.assert_array_equal(problem.points, points_before)


def test_marginal_preservation_detects_duplicate():
    problem = gaussian_problem(2, 10, 1, seed=0)
    state = init_coupling(problem, SolverConfig())
    state.perms[1, 3] = state.perms[1, 4]
    assert not check_marginal_preservation(problem, state)


def test_decay_exact_exponential():
    trace = np.exp(-0.5 * np.arange(40))
    alpha, r2 = fit_exponential_decay(trace, stationary=0.0)
    assert alpha == pytest.approx(0.5, rel=1e-10)
    assert r2 == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(0.1, 100.0), st.floats(-5.0, 5.0))
def test_decay_recovers_rate(rate, scale, offset):
    trace = offset + scale * np.exp(-rate * np.arange(60))
    fit = fit_exponential_decay(trace, stationary=offset)
    assert fit.alpha_hat == pytest.approx(rate, rel=1e-10)


def test_decay_constant_trace():
    alpha, r2 = fit_exponential_decay([2.0] * 10, stationary=1.0)
    assert alpha == pytest.approx(0.0, abs=1e-14)


def test_decay_degenerate():
    with pytest.raises(DegenerateTrace):
        fit_exponential_decay([2.0, 1.0, 1.0], stationary=1.0)
    with pytest.raises(DegenerateTrace):
        fit_exponential_decay([1.0, 0.5], stationary=0.0)


def test_decay_stops_at_cutoff():
    trace = np.concatenate([np.exp(-np.arange(10.0)), [1e-6, 1e-7, 5.0]])
    fit = fit_exponential_decay(trace, stationary=0.0)
    assert fit.points_used == 7  # e^-7 < 1e-3 <= e^-6
    assert fit.alpha_hat == pytest.approx(1.0)


def test_verify_monotone_examples():
    assert verify_monotone([3, 2, 2, 1])
    assert not verify_monotone([1, 2])
    assert verify_monotone([1.0, 1.0 + 1e-13])
    assert verify_monotone([])


def test_solver_traces_monotone():
    problem = gaussian_problem(4, 50, 3, p=1.0, seed=1)
    for solve in (collision_solve, isa_solve):
        _, report = solve(problem, SolverConfig(max_sweeps=50, init="random-shuffle"))
        assert verify_monotone(report.costs)


def test_scaling_single_size():
    rows = measure_sweep_scaling(SyntheticSpec("normal", 10), [256], sweeps=2, repeats=2)
    assert len(rows) == 1 and rows[0][0] == 256 and rows[0][1] > 0

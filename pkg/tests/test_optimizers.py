import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqebench.core import build_ry_cnot_ansatz, exact_ground_energy
from vqebench.optimizers import (
    CostEvaluator,
    OptimizerConfigError,
    SPSAGains,
    nelder_mead_minimize,
    nft_minimize,
    run_optimizer,
    sinusoid_minimum,
    spsa_minimize,
)
from vqebench.simulator import expectation, run_statevector


@pytest.fixture(scope="module")
def h2_cost(h2):
    ansatz = build_ry_cnot_ansatz(4)
    return lambda x: expectation(run_statevector(ansatz.bind(x)), h2)


def test_evaluator_counts_calls():
    ev = CostEvaluator(lambda x: float(np.sum(x)))
    for _ in range(3):
        ev([1.0])
    assert ev.count == 3


def test_nft_cosine_one_update():
    ev = CostEvaluator(lambda x: math.cos(x[0]))
    trace = nft_minimize(ev, [0.3], 1)
    assert abs(trace.final_params[0]) == pytest.approx(math.pi)
    assert trace.final_cost == pytest.approx(-1.0)


def test_nft_zero_iterations_is_empty():
    ev = CostEvaluator(lambda x: 0.0)
    assert len(nft_minimize(ev, [0.0, 1.0], 0)) == 0
    assert ev.count == 0


def test_nft_evaluations_per_sweep(h2_cost):
    ev = CostEvaluator(h2_cost)
    trace = nft_minimize(ev, [0.1, 0.2, 0.3, 0.4], 5, reset_interval=None)
    diffs = np.diff([0] + trace.evaluations)
    # the first sweep also measures the starting point
    assert list(diffs) == [9, 8, 8, 8, 8]


def test_nft_reset_adds_one_evaluation(h2_cost):
    ev = CostEvaluator(h2_cost)
    trace = nft_minimize(ev, [0.1, 0.2, 0.3, 0.4], 4, reset_interval=4)
    assert list(np.diff([0] + trace.evaluations)) == [9, 9, 9, 9]


def test_nft_h2_median_convergence(h2, h2_cost):
    e0 = exact_ground_energy(h2)
    needed = []
    for seed in range(9):
        x0 = np.random.default_rng(seed).uniform(-math.pi, math.pi, 4)
        trace = nft_minimize(CostEvaluator(h2_cost), x0, 15)
        hit = [i + 1 for i, c in enumerate(trace.costs) if abs(c - e0) < 1e-2]
        needed.append(hit[0] if hit else math.inf)
    assert np.median(needed) <= 5


@given(st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4), st.integers(0, 3), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_sinusoid_fit_residual(h2_cost, theta, j, probe):
    theta = np.array(theta)

    def at(shift):
        x = theta.copy()
        x[j] += shift
        return h2_cost(x)

    z0, zp, zm = at(0.0), at(math.pi / 2), at(-math.pi / 2)
    a = 0.5 * (zp + zm)
    b = z0 - a
    c = 0.5 * (zp - zm)
    predicted = a + b * math.cos(probe) + c * math.sin(probe)
    assert abs(predicted - at(probe)) < 1e-9
    shift, value = sinusoid_minimum(z0, zp, zm)
    assert at(shift) == pytest.approx(value, abs=1e-9)
    assert value <= z0 + 1e-9


@given(st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4))
@settings(max_examples=30, deadline=None)
def test_nft_monotone_on_exact_cost(h2_cost, x0):
    trace = nft_minimize(CostEvaluator(h2_cost), x0, 3)
    start = h2_cost(np.array(x0))
    costs = [start] + trace.costs
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))
    for p, c in zip(trace.params, trace.costs):
        assert h2_cost(p) == pytest.approx(c, abs=1e-9)


def test_spsa_quadratic_bowl():
    f = lambda x: float(np.sum(x**2))
    x0 = np.array([1.0, -0.5, 0.8])
    trace = spsa_minimize(CostEvaluator(f), x0, 200, rng_seed=3)
    assert f(trace.final_params) < 1e-2 * f(x0)


def test_spsa_deterministic_and_counted():
    f = lambda x: float(np.sum(np.cos(x)))
    ev1, ev2 = CostEvaluator(f), CostEvaluator(f)
    t1 = spsa_minimize(ev1, [0.1, 0.2], 10, rng_seed=7)
    t2 = spsa_minimize(ev2, [0.1, 0.2], 10, rng_seed=7)
    assert t1.costs == t2.costs
    assert all(np.array_equal(a, b) for a, b in zip(t1.params, t2.params))
    assert t1.evaluations[-1] == ev1.count == 20


@pytest.mark.parametrize("field", ["a", "c", "alpha", "gamma"])
def test_spsa_rejects_non_positive_gains(field):
    with pytest.raises(OptimizerConfigError):
        SPSAGains(**{field: 0.0})


def test_nelder_mead_cosine():
    trace = nelder_mead_minimize(CostEvaluator(lambda x: math.cos(x[0])), [0.3], 50)
    assert trace.final_params[0] == pytest.approx(math.pi, abs=1e-3)


def test_nelder_mead_constant_function():
    ev = CostEvaluator(lambda x: 2.5)
    trace = nelder_mead_minimize(ev, [0.0, 0.0], 10)
    assert set(trace.costs) == {2.5}
    assert trace.evaluations[-1] == ev.count


@pytest.mark.parametrize("name", ["nft", "spsa", "nelder-mead"])
def test_counts_match_evaluator_and_increase(name, h2_cost):
    ev = CostEvaluator(h2_cost)
    trace = run_optimizer(name, ev, [0.5, -0.5, 1.0, 2.0], 6, rng=np.random.default_rng(1))
    assert len(trace) == 6
    assert trace.evaluations[-1] == ev.count
    assert all(b > a for a, b in zip(trace.evaluations, trace.evaluations[1:]))


@pytest.mark.parametrize("name", ["spsa", "nelder-mead"])
def test_nft_beats_alternatives_on_h2(name, h2, h2_cost):
    e0 = exact_ground_energy(h2)
    errors = {"nft": [], name: []}
    for seed in range(9):
        x0 = np.random.default_rng(100 + seed).uniform(-math.pi, math.pi, 4)
        for opt in errors:
            tr = run_optimizer(opt, CostEvaluator(h2_cost), x0, 15, rng=np.random.default_rng(seed))
            errors[opt].append(abs(h2_cost(tr.final_params) - e0))
    assert np.mean(errors["nft"]) < np.mean(errors[name])


def test_unknown_optimizer():
    with pytest.raises(OptimizerConfigError):
        run_optimizer("adam", CostEvaluator(lambda x: 0.0), [0.0], 1)

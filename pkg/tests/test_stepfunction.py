import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crforest.stepfunction import (StepFunction, average, average_bundles, evaluate,
                                   integrate, integrated_squared_difference)


def step_functions(max_jumps=6):
    @st.composite
    def build(draw):
        k = draw(st.integers(0, max_jumps))
        times = sorted(draw(st.sets(st.floats(0.01, 30, allow_nan=False), min_size=k, max_size=k)))
        values = draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=len(times),
                               max_size=len(times)))
        init = draw(st.floats(-5, 5, allow_nan=False))
        return StepFunction(times, values, init)
    return build()


def test_evaluate_is_right_continuous():
    f = StepFunction([1.0], [0.5], 1.0)
    assert f(0.5) == 1.0
    assert f(1.0) == 0.5
    assert f(100.0) == 0.5
    np.testing.assert_array_equal(f(np.array([0.0, 1.0, 2.0])), [1.0, 0.5, 0.5])


def test_rejects_unsorted_jumps():
    with pytest.raises(ValueError):
        StepFunction([2.0, 1.0], [0.0, 1.0])


def test_average_identical_and_constant():
    f = StepFunction([1.0, 3.0], [0.2, 0.7], 0.0)
    g = average([f, f])
    assert all(g(t) == f(t) for t in [0, 1, 2, 3, 4])
    c = average([StepFunction.constant(0.0), StepFunction.constant(1.0)])
    assert c(0.0) == 0.5 and c(50.0) == 0.5


def test_average_of_shifted_drops():
    f1 = StepFunction([1.0], [0.0], 1.0)
    f2 = StepFunction([2.0], [0.0], 1.0)
    g = average([f1, f2])
    grid = np.linspace(0, 3, 301)
    np.testing.assert_allclose(g(grid), 0.5 * (f1(grid) + f2(grid)))
    assert g(0.5) == 1.0 and g(1.5) == 0.5 and g(2.5) == 0.0


def test_average_empty_raises():
    with pytest.raises(ValueError):
        average([])


def test_integrate_examples():
    f = StepFunction([1.0], [0.5], 0.0)
    assert integrate(f, 0, 2) == pytest.approx(0.5, abs=1e-15)
    assert integrate(StepFunction.constant(1.0), 0, 20) == 20.0
    assert integrate(f, 1.7, 1.7) == 0.0
    with pytest.raises(ValueError):
        integrate(f, 2, 1)


def test_integrated_squared_difference_examples():
    f = StepFunction([10.0], [1.0], 0.0)
    zero = StepFunction.constant(0.0)
    assert integrated_squared_difference(f, f, 0, 20) == 0.0
    assert integrated_squared_difference(StepFunction.constant(1.0), zero, 0, 20) == 20.0
    assert integrated_squared_difference(f, zero, 0, 20) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        integrated_squared_difference(f, zero, 3, 1)


def test_text_roundtrip():
    f = StepFunction([0.5, 2.0], [0.25, 0.75], 0.0)
    text = f.to_text()
    assert text.splitlines()[0] == "time\tvalue"
    assert text.splitlines()[1] == "0\t0.0"
    assert StepFunction.from_text(text) == f


def test_average_bundles_shares_grid():
    times = [np.array([1.0, 2.0]), np.array([1.5])]
    surv = [np.array([0.5, 0.0]), np.array([0.0])]
    cif = [np.array([[0.5, 1.0]]), np.array([[1.0]])]
    chf = [np.array([[0.5, 1.5]]), np.array([[1.0]])]
    b = average_bundles(times, surv, cif, chf)
    np.testing.assert_allclose(b.survival(np.array([0.5, 1.0, 1.5, 2.0])), [1, 0.75, 0.25, 0])
    np.testing.assert_allclose(b.cif(1)(np.array([1.0, 1.5, 2.0])), [0.25, 0.75, 1.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(step_functions(), min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_average_permutation_invariant_and_bounded(fs, rnd):
    g = average(fs)
    shuffled = list(fs)
    rnd.shuffle(shuffled)
    h = average(shuffled)
    grid = np.linspace(0, 35, 211)
    vals = np.array([f(grid) for f in fs])
    np.testing.assert_allclose(g(grid), h(grid), atol=1e-12)
    assert np.all(g(grid) >= vals.min(axis=0) - 1e-12)
    assert np.all(g(grid) <= vals.max(axis=0) + 1e-12)


@settings(max_examples=80, deadline=None)
@given(step_functions(), st.floats(0, 10), st.floats(0, 10), st.floats(0, 15))
def test_integrate_additive(f, a, ab, bc):
    b, c = a + ab, a + ab + bc
    assert integrate(f, a, b) + integrate(f, b, c) == pytest.approx(integrate(f, a, c),
                                                                     abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(step_functions(), step_functions())
def test_squared_difference_symmetric_nonnegative(f, g):
    d1 = integrated_squared_difference(f, g, 0, 35)
    d2 = integrated_squared_difference(g, f, 0, 35)
    assert d1 >= 0
    assert d1 == pytest.approx(d2, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(step_functions())
def test_integrate_matches_riemann_sum(f):
    step = 1e-3
    grid = np.arange(0, 30, step) + step / 2
    riemann = np.sum(evaluate(f, grid)) * step
    exact = integrate(f, 0, 30)
    # each jump shifts the midpoint sum by at most half a step times its size
    slack = step * (np.abs(np.diff(np.r_[f.initial_value, f.values])).sum() + 1e-9)
    assert abs(riemann - exact) <= max(1e-6 * abs(exact), slack)

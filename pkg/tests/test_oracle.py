import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critmetrics.errors import SizeCapError
from critmetrics.model import MetricId
from critmetrics.oracle import (
    MAX_METRICS,
    OracleProblem,
    check_feasible,
    naive_coverage,
    objective,
    solve_exact,
)

from conftest import ds


def problem(cols, eps, chi=None, order=None):
    items = [(MetricId("s", k), ds(v, 2)) for k, v in cols.items()]
    if order:
        items = [items[i] for i in order]
    return OracleProblem(tuple(items), eps, chi or len(items))


def names(ids):
    return sorted(i.name for i in ids)


def test_single_metric():
    chosen, obj = solve_exact(problem({"x": [0, 1, 0, 1]}, 0.1))
    assert names(chosen) == ["x"]
    assert obj == 0.0


def test_identical_pair_infeasible_together():
    chosen, obj = solve_exact(problem({"x": [0, 0, 1, 1], "y": [0, 0, 1, 1]}, 0.5))
    assert names(chosen) == ["x"]
    assert obj == 0.0


def test_independent_pair_both_selected():
    chosen, obj = solve_exact(problem({"x": [0, 0, 1, 1], "y": [0, 1, 0, 1]}, 0.1))
    assert names(chosen) == ["x", "y"]
    assert obj == 0.0


def test_objective_prefers_larger_feasible_mi():
    # MI(x,y) = 1 bit is feasible at eps = 1
    chosen, obj = solve_exact(problem({"x": [0, 0, 1, 1], "y": [0, 0, 1, 1], "z": [0, 1, 0, 1]}, 1.0))
    assert names(chosen) == ["x", "y", "z"]
    assert obj == pytest.approx(1.0)


def test_chi_bounds_size():
    chosen, _ = solve_exact(problem({"x": [0, 0, 1, 1], "y": [0, 1, 0, 1], "z": [0, 1, 1, 0]}, 0.1, chi=2))
    assert len(chosen) == 2


def test_size_cap():
    cols = {f"m{i}": [0, 1] for i in range(MAX_METRICS + 1)}
    with pytest.raises(SizeCapError):
        problem(cols, 0.1)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        problem({"x": [0, 1]}, 0.0)
    with pytest.raises(ValueError):
        problem({"x": [0, 1]}, 0.1, chi=-1)


def test_check_feasible_cases():
    series = {MetricId("s", "x"): ds([0, 0, 1, 1]), MetricId("s", "y"): ds([0, 0, 1, 1])}
    both = set(series)
    assert not check_feasible(both, series, 0.5, 2)
    assert check_feasible(both, series, 1.0, 2)
    assert not check_feasible(both, series, 1.0, 1)
    assert check_feasible(set(), series, 0.01, 1)


def test_naive_coverage():
    a, b, c = (MetricId("s", n) for n in "abc")
    theta = {(a, b): 0.9, (b, a): 0.9}
    assert naive_coverage({a}, [a, b, c], lambda x, y: theta.get((x, y), 0.0), 0.5) == 2 / 3


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_exact_invariant_to_input_order(data):
    k = data.draw(st.integers(1, 7))
    n = data.draw(st.integers(4, 24))
    cols = {f"m{i}": data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)) for i in range(k)}
    eps = data.draw(st.floats(0.01, 1.0))
    order = data.draw(st.permutations(range(k)))
    a = solve_exact(problem(cols, eps))
    b = solve_exact(problem(cols, eps, order=order))
    assert a == b
    series = {MetricId("s", name): ds(v, 2) for name, v in cols.items()}
    assert check_feasible(a[0], series, eps, k)
    assert a[1] == objective(a[0], series)

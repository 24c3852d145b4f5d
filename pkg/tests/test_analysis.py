from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackchain.analysis import (
    PathFunction,
    confidence_region,
    discrete_frechet,
    frechet_matrix,
    kde,
    median_index,
    median_path,
    order_statistic_ranks,
    silverman_bandwidth,
    tortuosity,
    tortuosity_stats,
)
from crackchain.oracles import frechet_by_enumeration, monotone_couplings, n_couplings
from crackchain.prediction import CrackPath, Ensemble


def ens(paths):
    return Ensemble("t", [CrackPath.from_points(p) for p in paths])


def test_frechet_frozen():
    # frozen from exhaustive coupling enumeration
    a = [[0, 0], [1, 0], [2, 1.0]]
    b = [[0, 1], [1, 1.5], [2, 0], [3, 0.0]]
    assert discrete_frechet(a, b) == 1.4142135623730951


def test_frechet_simple_cases():
    a = np.array([[0, 0], [1, 0.0]])
    assert discrete_frechet(a, a) == 0.0
    assert discrete_frechet(a, a + [0, 2]) == 2.0
    assert discrete_frechet([[0, 0]], [[3, 4]]) == 5.0
    with pytest.raises(ValueError):
        discrete_frechet(np.zeros((0, 2)), a)


def test_coupling_enumeration_counts():
    for n, m in [(1, 1), (2, 3), (4, 4), (3, 6)]:
        assert sum(1 for _ in monotone_couplings(n, m)) == n_couplings(n, m)


paths = st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=6) \
    .map(lambda v: np.array(v, dtype=float) / 4)


@settings(max_examples=150, deadline=None)
@given(paths, paths)
def test_frechet_matches_enumeration(a, b):
    assert abs(discrete_frechet(a, b) - frechet_by_enumeration(a, b)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(paths, paths, paths)
def test_frechet_metric_properties(a, b, c):
    ab, ba = discrete_frechet(a, b), discrete_frechet(b, a)
    assert ab == ba
    assert ab >= 0
    assert discrete_frechet(a, c) <= ab + discrete_frechet(b, c) + 1e-12
    # never below the endpoint distances
    assert ab >= max(np.hypot(*(a[0] - b[0])), np.hypot(*(a[-1] - b[-1]))) - 1e-12


def test_median_is_central():
    base = np.array([[0, 0], [1, 0], [2, 0.0]])
    e = ens([base + [0, 3], base, base + [0, 1], base - [0, 1]])
    assert median_index(e.paths) == 1
    assert median_path(e) is e.paths[1]
    assert frechet_matrix(e.paths).shape == (4, 4)


def test_median_tie_takes_lowest_index():
    base = np.array([[0, 0], [1, 0.0]])
    assert median_index([CrackPath.from_points(base)] * 3) == 0


def test_path_function_last_traversal():
    # goes right, steps back and goes up over the same abscissa, then right
    f = PathFunction([[0, 0], [2, 0], [1, 1], [3, 1]])
    assert f(0.5) == 0.0
    assert f(1.5) == 1.0        # later segment (1,1)-(3,1) wins
    assert f(-1) == 0.0 and f(4) == 1.0
    v = PathFunction([[0, 0], [1, 0], [1, 2], [2, 2]])
    assert v(1.0) == 2.0        # vertical segment evaluates to its end
    np.testing.assert_allclose(v(np.array([0.5, 1.5])), [0.0, 2.0])


@pytest.mark.parametrize("M,ranks", [(100, (5, 95)), (20, (1, 19)), (1, (1, 1)), (2, (1, 2)), (101, (5, 96))])
def test_order_statistic_ranks(M, ranks):
    assert order_statistic_ranks(M) == ranks


def test_region_identical_paths_zero_diameter():
    p = [[0, 0.1], [0.2, 0.12], [0.4, 0.08], [0.6, 0.1]]
    r = confidence_region(ens([p] * 100), grid_size=50, width=0.6)
    assert r.diameter == 0.0
    assert r.ranks == (5, 95)
    np.testing.assert_array_equal(r.lower, r.upper)


def test_region_uses_order_statistics():
    # 100 horizontal lines at heights 1..100
    e = ens([[[0, k], [1, k]] for k in range(100, 0, -1)])
    r = confidence_region(e, grid_size=11, width=1.0)
    assert np.all(r.lower == 5) and np.all(r.upper == 95)
    assert r.diameter == 90.0
    assert r.lower_curve.shape == (11, 2)
    with pytest.raises(ValueError):
        confidence_region(ens([[[0, 0], [1, 0]]]))


def test_tortuosity():
    assert tortuosity([[0, 0], [1, 0]]) == 1.0
    assert tortuosity([[0, 0], [1, 1], [2, 0]]) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        tortuosity([[0, 0], [1, 0], [0, 0]])
    with pytest.raises(ValueError):
        tortuosity([[0, 0]])


@settings(max_examples=100, deadline=None)
@given(paths.filter(lambda p: len(p) >= 2 and np.any(p[0] != p[-1])))
def test_tortuosity_at_least_one(p):
    assert tortuosity(p) >= 1 - 1e-12


def test_tortuosity_stats_interval_contains_median(rng):
    e = ens([np.column_stack([np.linspace(0, 1, 6), rng.normal(0, 0.05, 6)]) for _ in range(50)])
    s = tortuosity_stats(e)
    assert s.interval[0] <= s.median <= s.interval[1]
    assert s.counts.sum() == 50


def test_kde_integrates_to_one(rng):
    x = rng.normal(1.2, 0.1, 200)
    g, dens = kde(x)
    assert np.trapezoid(dens, g) == pytest.approx(1.0, abs=1e-3)
    assert silverman_bandwidth(x) > 0


def test_kde_degenerate():
    with pytest.raises(ValueError):
        kde([1.0, 1.0, 1.0])
    g, dens = kde([1.0, 1.0], bandwidth=0.1)
    assert g[np.argmax(dens)] == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        kde([1.0, 2.0], bandwidth=0)

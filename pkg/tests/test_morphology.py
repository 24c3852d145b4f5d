from __future__ import annotations

import numpy as np
import pytest

from crackchain.geometry import Microstructure, polygons_separated
from crackchain.morphology import (
    MorphologyConfig,
    PlacementError,
    covariogram,
    generate,
    in_aggregates,
    regular_polygon,
    volume_fraction,
)

from conftest import square


def test_default_generation_hits_target(concrete):
    assert 0.24 <= volume_fraction(concrete) <= 0.26
    assert all(a.n_sides == 4 for a in concrete.aggregates)
    concrete.validate(min_gap=0.002 - 1e-12)


def test_generation_deterministic():
    a = generate(MorphologyConfig(seed=3, target_volume_fraction=0.1))
    b = generate(MorphologyConfig(seed=3, target_volume_fraction=0.1))
    assert len(a.aggregates) == len(b.aggregates)
    for x, y in zip(a.aggregates, b.aggregates):
        np.testing.assert_array_equal(x.vertices, y.vertices)
    c = generate(MorphologyConfig(seed=4, target_volume_fraction=0.1))
    assert not np.array_equal(a.aggregates[0].vertices, c.aggregates[0].vertices)


def test_zero_fraction_is_empty():
    m = generate(MorphologyConfig(target_volume_fraction=0.0))
    assert m.aggregates == () and volume_fraction(m) == 0.0


def test_mixed_shapes_and_radius_range():
    m = generate(MorphologyConfig(seed=1, shape_family="mixed", circumradius=(0.01, 0.02),
                                  target_volume_fraction=0.15))
    assert len({a.n_sides for a in m.aggregates}) > 1
    m.validate(min_gap=0.002 - 1e-12)
    for a in m.aggregates:
        r = np.hypot(*(a.vertices - a.vertices.mean(axis=0)).T)
        assert 0.01 - 1e-12 <= r.max() <= 0.02 + 1e-12


@pytest.mark.parametrize("kw", [
    {"target_volume_fraction": 0.7},
    {"target_volume_fraction": -0.1},
    {"shape_family": "circle"},
    {"shape_family": 2},
    {"circumradius": 0.0},
    {"min_gap": -1.0},
    {"circumradius": 0.2},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MorphologyConfig(**kw)


def test_placement_budget_exhausted():
    with pytest.raises(PlacementError) as info:
        generate(MorphologyConfig(seed=0, target_volume_fraction=0.45, max_attempts=50))
    assert 0 <= info.value.achieved < 0.45


def test_regular_polygon_circumradius():
    v = regular_polygon(6, (1.0, 2.0), 0.5, 0.3)
    np.testing.assert_allclose(np.hypot(*(v - (1.0, 2.0)).T), 0.5)


def test_in_aggregates():
    from crackchain.geometry import Aggregate
    m = Microstructure(1, 1, (Aggregate(0, square(0.5, 0.5, 0.1)),))
    assert in_aggregates(m, [[0.5, 0.5], [0.1, 0.1]]).tolist() == [True, False]


def test_covariogram_lag_zero_is_volume_fraction(concrete):
    est = covariogram(concrete, [0.0], n_samples=40_000, seed=1)
    assert abs(est.values[0] - volume_fraction(concrete)) <= 4 * est.stderr[0]


def test_covariogram_deterministic(concrete):
    a = covariogram(concrete, [0.0, 0.01, 0.05], n_samples=5000, seed=9)
    b = covariogram(concrete, [0.0, 0.01, 0.05], n_samples=5000, seed=9)
    assert a.values.tolist() == b.values.tolist()


def test_covariogram_short_lag_decreases(concrete):
    est = covariogram(concrete, [0.0, 0.005, 0.01], n_samples=40_000, seed=2)
    assert est.values[0] > est.values[1] > est.values[2]


def test_covariogram_two_samples_agree():
    # two placements with the same descriptors: curves agree to Monte Carlo noise
    lags = [0.0, 0.01, 0.02, 0.04]
    ests = [covariogram(generate(MorphologyConfig(seed=s)), lags, n_samples=40_000, seed=s) for s in (11, 12)]
    diff = np.abs(ests[0].values - ests[1].values)
    sigma = np.hypot(ests[0].stderr, ests[1].stderr)
    # the Monte Carlo error alone ignores sample-to-sample variation; allow that too
    assert np.all(diff <= 3 * sigma + 0.01)


def test_covariogram_empty_and_bad_input():
    m = Microstructure(1, 1)
    assert covariogram(m, [0.0, 0.1], n_samples=100).values.tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        covariogram(m, [-0.1])
    with pytest.raises(ValueError):
        covariogram(m, [0.1], n_samples=0)


def test_generated_polygons_separated(concrete):
    aggs = concrete.aggregates
    for i in range(len(aggs)):
        for j in range(i + 1, len(aggs)):
            assert polygons_separated(aggs[i].vertices, aggs[j].vertices, 0.002 - 1e-12)

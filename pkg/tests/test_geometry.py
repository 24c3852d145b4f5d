from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackchain.geometry import (
    F1,
    F2,
    Aggregate,
    GeometryError,
    Microstructure,
    NoCandidateError,
    build_candidate_set,
    discretize,
    field_of_view,
    indicators,
    normalize,
    polygons_separated,
    shadow_filter,
)
from crackchain.oracles import segment_hits_interior, visible_points
from crackchain.selftest import random_scene, random_tip, shadow_instance

from conftest import square


def test_aggregate_reorients_clockwise_input():
    a = Aggregate(0, square(0, 0, 1)[::-1])
    assert a.area == pytest.approx(4.0)


@pytest.mark.parametrize("verts", [
    [(0, 0), (1, 0)],
    [(0, 0), (1, 0), (2, 0)],
    [(0, 0), (2, 0), (1, 1), (2, 2), (0, 2)],
    [(0, 0), (1, 0), (1, 0), (0, 1)],
    [(0, 0), (1, np.nan), (0, 1)],
])
def test_aggregate_rejects_bad_polygons(verts):
    with pytest.raises(GeometryError):
        Aggregate(0, verts)


def test_aggregate_rejects_self_intersecting_star():
    ang = np.arange(5) * 4 * np.pi / 5
    with pytest.raises(GeometryError):
        Aggregate(0, np.column_stack([np.cos(ang), np.sin(ang)]))


def test_validate_detects_overlap_and_domain_exit():
    m = Microstructure(1, 1, (Aggregate(0, square(0.3, 0.3, 0.1)), Aggregate(1, square(0.35, 0.3, 0.1))))
    with pytest.raises(GeometryError, match="overlap"):
        m.validate()
    m = Microstructure(1, 1, (Aggregate(0, square(0.05, 0.3, 0.1)),))
    with pytest.raises(GeometryError, match="leaves"):
        m.validate()


def test_polygons_separated_gap():
    a, b = np.array(square(0, 0, 1)), np.array(square(2.5, 0, 1))
    assert polygons_separated(a, b, 0.4)
    assert not polygons_separated(a, b, 0.6)


def test_discretization_counts(scene):
    # P points per side, corners shared: n_sides * (P - 1) per aggregate
    for p in (2, 3, 5, 9):
        dm = discretize(scene, p)
        assert len(dm) == sum(a.n_sides * (p - 1) for a in scene.aggregates)
        assert len(np.unique(np.round(dm.coords, 12), axis=0)) == len(dm)


def test_discretization_points_on_boundary(scene):
    dm = discretize(scene, 5)
    for pt in dm.points:
        agg = scene.aggregates[[a.id for a in scene.aggregates].index(pt.aggregate_id)]
        assert agg.contains(pt.position, strict=False, tol=1e-12)
        assert not agg.contains(pt.position, strict=True, tol=1e-12)


def test_discretize_rejects_single_point():
    with pytest.raises(ValueError):
        discretize(Microstructure(1, 1), 1)


def test_field_of_view_half_plane(scene):
    dm = discretize(scene, 5)
    tip, u = np.array([0.5, 0.5]), np.array([math.cos(0.7), math.sin(0.7)])
    fov = set(field_of_view(tip, u, dm).tolist())
    for i, y in enumerate(dm.coords):
        assert (i in fov) == ((y - tip) @ u >= 0)


def test_field_of_view_drops_visited_and_tip(scene):
    dm = discretize(scene, 5)
    tip_index = 3
    fov = field_of_view(dm.coords[tip_index], (1.0, 0.0), dm, visited=[0, 5], tip_index=tip_index)
    assert not {0, 3, 5} & set(fov.tolist())


# frozen oracle results on the fixed scene (brute-force visibility, P = 3)
FROZEN_MATRIX_TIP = [0, 6, 7, 20, 21]
FROZEN_CORNER_TIP = [3, 4, 8, 14, 15, 16, 17, 18]


def test_candidates_from_matrix_tip_frozen(scene):
    dm = discretize(scene, 3)
    cs = build_candidate_set((0.05, 0.5), (1.0, 0.0), dm)
    assert sorted(cs.indices.tolist()) == FROZEN_MATRIX_TIP
    assert cs.configuration == F2
    assert not cs.same_aggregate.any()


def test_candidates_from_corner_tip_frozen(scene):
    dm = discretize(scene, 3)
    ti = dm.find_point((0.4, 0.4))
    assert ti == 2
    cs = build_candidate_set(dm.coords[ti], (1.0, 0.0), dm, tip_index=ti)
    assert sorted(cs.indices.tolist()) == FROZEN_CORNER_TIP
    assert cs.configuration == F1
    assert sorted(cs.indices[cs.same_aggregate].tolist()) == [3, 4]


def test_oracle_segment_hits_interior():
    sq = np.array(square(0, 0, 1))
    assert segment_hits_interior((-2, 0), (2, 0), sq)
    assert not segment_hits_interior((-2, 1), (2, 1), sq)       # grazes an edge
    assert not segment_hits_interior((-1, -1), (1, -1), sq)     # runs along an edge
    assert not segment_hits_interior((-2, 2), (2, 2.5), sq)
    assert segment_hits_interior((-1, -1), (1, 1), sq)          # diagonal
    assert not segment_hits_interior((-2, 0), (-1, 0), sq)      # stops on the boundary


def test_shadow_matches_oracle_many(rng):
    assert all(shadow_instance(rng) for _ in range(100))


def test_shadow_on_generated_microstructure(concrete, concrete_dm, rng):
    polys = [a.vertices for a in concrete.aggregates]
    for _ in range(40):
        tip, ti, u = random_tip(rng, concrete, concrete_dm)
        fov = field_of_view(tip, u, concrete_dm, (), ti)
        got = sorted(shadow_filter(tip, fov, concrete_dm, ti).tolist())
        assert got == sorted(visible_points(tip, fov, concrete_dm.coords, polys))


def test_no_candidate_raises():
    m = Microstructure(1, 1, (Aggregate(0, square(0.3, 0.5, 0.1)),))
    dm = discretize(m, 3)
    with pytest.raises(NoCandidateError):
        build_candidate_set((0.6, 0.5), (1.0, 0.0), dm)


def test_tip_must_match_index(scene):
    dm = discretize(scene, 3)
    with pytest.raises(ValueError):
        build_candidate_set((0.5, 0.5), (1.0, 0.0), dm, tip_index=0)


def test_direction_must_be_unit(scene):
    dm = discretize(scene, 3)
    with pytest.raises(ValueError):
        build_candidate_set((0.05, 0.5), (2.0, 0.0), dm)


def test_indicators_values():
    d, t = indicators((0, 0), (1, 0), (1, 1))
    assert d == pytest.approx(math.sqrt(2))
    assert t == pytest.approx(math.pi / 4)
    # backward-pointing line counts like forward: angle is to the line
    assert indicators((0, 0), (1, 0), (-1, 0))[1] == 0.0
    assert indicators((0, 0), (1, 0), (0, 3))[1] == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        indicators((1, 1), (1, 0), (1, 1))


def test_normalize_bounds_and_constant():
    dn, tn = normalize([2.0, 4.0, 3.0], [0.5, 0.5, 0.5])
    assert dn.tolist() == [0.0, 1.0, 0.5]
    assert tn.tolist() == [0.0, 0.0, 0.0]
    dn, tn = normalize([1.5], [0.3])
    assert dn.tolist() == [0.0] and tn.tolist() == [0.0]
    with pytest.raises(ValueError):
        normalize([], [])


# grid values: near-equal floats would turn rounding noise into full range
floats = st.integers(0, 1000).map(lambda k: k / 100)


@given(st.lists(st.tuples(floats, floats), min_size=1, max_size=30),
       st.floats(1e-3, 1e3), st.floats(-5, 5))
def test_normalize_affine_invariant(pairs, scale, shift):
    d = np.array([p[0] for p in pairs])
    t = np.array([p[1] for p in pairs])
    dn, tn = normalize(d, t)
    assert np.all((dn >= 0) & (dn <= 1)) and np.all((tn >= 0) & (tn <= 1))
    dn2, tn2 = normalize(d * scale + shift, t * scale)
    np.testing.assert_allclose(dn2, dn, atol=1e-9)
    np.testing.assert_allclose(tn2, tn, atol=1e-9)


def _rotated(m, angle, c=(0.5, 0.5)):
    r = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    aggs = tuple(Aggregate(a.id, (a.vertices - c) @ r.T + c) for a in m.aggregates)
    return Microstructure(m.width, m.height, aggs, m.id), r


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 2 * math.pi))
def test_candidate_set_rotation_equivariant(seed, angle):
    rng = np.random.default_rng(seed)
    m = random_scene(rng, size=1.0)
    dm = discretize(m, 3)
    tip, ti, u = random_tip(rng, m, dm)
    try:
        cs = build_candidate_set(tip, u, dm, (), ti)
    except NoCandidateError:
        return
    m2, r = _rotated(m, angle)
    dm2 = discretize(m2, 3)
    tip2 = (tip - 0.5) @ r.T + 0.5
    cs2 = build_candidate_set(tip2, u @ r.T, dm2, (), ti)
    # indices agree except where a point sits numerically on a decision boundary
    a, b = set(cs.indices.tolist()), set(cs2.indices.tolist())
    assert len(a ^ b) <= 1
    common = sorted(a & b)
    if common:
        da = dict(zip(cs.indices.tolist(), cs.d))
        db = dict(zip(cs2.indices.tolist(), cs2.d))
        np.testing.assert_allclose([da[i] for i in common], [db[i] for i in common], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_candidates_visible_and_ahead(seed):
    rng = np.random.default_rng(seed)
    m = random_scene(rng)
    dm = discretize(m, int(rng.integers(2, 6)))
    tip, ti, u = random_tip(rng, m, dm)
    try:
        cs = build_candidate_set(tip, u, dm, (), ti)
    except NoCandidateError:
        return
    polys = [a.vertices for a in m.aggregates]
    for i in cs.indices:
        y = dm.coords[i]
        assert (y - tip) @ u >= 0
        assert not any(segment_hits_interior(tip, y, p) for p in polys)
    assert np.all((cs.d_norm >= 0) & (cs.d_norm <= 1))
    assert np.all((cs.theta_norm >= 0) & (cs.theta_norm <= 1))
    assert cs.configuration == (F1 if cs.same_aggregate.any() else F2)


def test_configuration_examples():
    m = Microstructure(1, 1, (Aggregate(0, square(0.3, 0.5, 0.1)), Aggregate(1, square(0.7, 0.5, 0.1))))
    dm = discretize(m, 5)
    # mid-side of the left square's top edge, heading right: the rest of the side is ahead
    mid = dm.find_point((0.3, 0.6))
    cs = build_candidate_set(dm.coords[mid], (1.0, 0.0), dm, tip_index=mid)
    assert cs.configuration == F1
    np.testing.assert_allclose(sorted(dm.coords[cs.indices[cs.same_aggregate]][:, 0]), [0.35, 0.4], atol=1e-15)
    # trailing corner of a diamond: both of its sides run backwards
    d = Microstructure(1, 1, (Aggregate(0, [(0.2, 0.5), (0.3, 0.4), (0.4, 0.5), (0.3, 0.6)]),
                              Aggregate(1, square(0.7, 0.5, 0.1))))
    dm = discretize(d, 5)
    corner = dm.find_point((0.4, 0.5))
    cs = build_candidate_set(dm.coords[corner], (1.0, 0.0), dm, tip_index=corner)
    assert cs.configuration == F2
    assert set(dm.aggregate_pos[cs.indices].tolist()) == {1}


def test_empty_microstructure_has_no_candidates():
    dm = discretize(Microstructure(1, 1))
    with pytest.raises(NoCandidateError):
        build_candidate_set((0.0, 0.5), (1.0, 0.0), dm)

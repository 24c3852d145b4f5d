"""Boundary discretization, field of view, shadow deletion and crack indicators.

Geometry conventions
--------------------
* The domain is the rectangle ``[0, width] x [0, height]``; the crack runs
  along +x and the load acts along y.
* Aggregates are convex polygons stored counter-clockwise, so the interior
  lies to the left of every edge.
* Point sets are handled as integer index arrays into
  ``DiscretizedMicrostructure.coords``; ``DiscretizedMicrostructure.points``
  gives the record view of the same data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

#: Absolute tolerance on 2x2 determinants used by every strict sidedness test.
DET_TOL = 1e-12

F1 = "F1"
F2 = "F2"


class GeometryError(ValueError):
    """Invalid polygon or microstructure."""


class NoCandidateError(RuntimeError):
    """The filtered field of view of a crack tip is empty."""


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def polygon_area(vertices) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Aggregate:
    """Convex polygonal inclusion. Clockwise input is reoriented."""

    id: int
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError(f"aggregate {self.id}: need at least 3 vertices of shape (n, 2)")
        if not np.all(np.isfinite(v)):
            raise GeometryError(f"aggregate {self.id}: non-finite coordinates")
        area = polygon_area(v)
        if area < 0:
            v = v[::-1].copy()
            area = -area
        if area <= 0:
            raise GeometryError(f"aggregate {self.id}: degenerate polygon (zero area)")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(edges[:, 0], edges[:, 1]) <= 0):
            raise GeometryError(f"aggregate {self.id}: repeated vertex")
        turns = _cross(edges, np.roll(edges, -1, axis=0))
        if np.any(turns <= DET_TOL * 1e-3):
            raise GeometryError(f"aggregate {self.id}: polygon is not strictly convex")
        # a convex turn sequence can still wind more than once
        angles = np.arctan2(turns, np.einsum("ij,ij->i", edges, np.roll(edges, -1, axis=0)))
        if abs(angles.sum() - 2 * np.pi) > 1e-6:
            raise GeometryError(f"aggregate {self.id}: polygon is self-intersecting")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    def contains(self, point, strict: bool = True, tol: float = DET_TOL) -> bool:
        """Point-in-polygon test; ``strict`` excludes the boundary band ``tol``."""
        p = np.asarray(point, dtype=float)
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        c = _cross(e, p - v)
        return bool(np.all(c > tol)) if strict else bool(np.all(c >= -tol))


@dataclass(frozen=True, eq=False)
class Microstructure:
    width: float
    height: float
    aggregates: tuple[Aggregate, ...] = ()
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "aggregates", tuple(self.aggregates))
        if not (self.width > 0 and self.height > 0):
            raise GeometryError("domain width and height must be positive")

    def validate(self, min_gap: float = 0.0) -> None:
        """Check containment in the domain and pairwise disjointness."""
        ids = [a.id for a in self.aggregates]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate aggregate ids")
        for a in self.aggregates:
            v = a.vertices
            if v[:, 0].min() < 0 or v[:, 1].min() < 0 or v[:, 0].max() > self.width or v[:, 1].max() > self.height:
                raise GeometryError(f"aggregate {a.id} leaves the domain")
        for i, a in enumerate(self.aggregates):
            for b in self.aggregates[i + 1:]:
                if not polygons_separated(a.vertices, b.vertices, min_gap):
                    raise GeometryError(f"aggregates {a.id} and {b.id} overlap")


def polygons_separated(p, q, gap: float = 0.0) -> bool:
    """Separating-axis test for two convex polygons.

    Returns True when some edge normal of either polygon separates their
    projections by at least ``gap`` (strictly more than zero when ``gap`` is
    zero). With ``gap > 0`` this is a conservative test for "distance >= gap".
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for poly in (p, q):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        normals /= np.hypot(normals[:, 0], normals[:, 1])[:, None]
        pp = p @ normals.T
        qq = q @ normals.T
        sep = np.maximum(qq.min(axis=0) - pp.max(axis=0), pp.min(axis=0) - qq.max(axis=0))
        if gap > 0:
            if np.any(sep >= gap):
                return True
        elif np.any(sep > 0):
            return True
    return False


@dataclass(frozen=True)
class DiscretizationPoint:
    index: int
    position: tuple[float, float]
    aggregate_id: int
    side_id: int
    side_slot: int
    side_ids: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DiscretizedMicrostructure:
    """Boundary points of every aggregate with their provenance.

    ``coords[i]`` is point ``i``; ``aggregate_pos[i]`` is the position of its
    aggregate in ``source.aggregates``; ``sides[i]`` holds the (one or two)
    side ids the point lies on, stored as a pair where a mid-side point
    repeats its single side.
    """

    source: Microstructure
    points_per_side: int
    coords: np.ndarray
    aggregate_pos: np.ndarray
    sides: np.ndarray
    slots: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.coords)

    @cached_property
    def points(self) -> list[DiscretizationPoint]:
        out = []
        aggs = self.source.aggregates
        for i, (xy, a, s, slot) in enumerate(zip(self.coords, self.aggregate_pos, self.sides, self.slots)):
            s0, s1 = int(s[0]), int(s[1])
            side_ids = (s0,) if s0 == s1 else (s0, s1)
            out.append(DiscretizationPoint(i, (float(xy[0]), float(xy[1])), aggs[a].id,
                                           s1, int(slot), side_ids))
        return out

    @cached_property
    def padded_vertices(self) -> np.ndarray:
        """``(n_aggregates, max_sides, 2)`` vertices, short polygons padded
        by repeating their last vertex."""
        aggs = self.source.aggregates
        if not aggs:
            return np.zeros((0, 3, 2))
        n = max(a.n_sides for a in aggs)
        out = np.empty((len(aggs), n, 2))
        for k, a in enumerate(aggs):
            out[k, : a.n_sides] = a.vertices
            out[k, a.n_sides:] = a.vertices[-1]
        return out

    @cached_property
    def padded_edges(self) -> np.ndarray:
        """Edge vectors ``v[k+1] - v[k]`` (with wrap-around), zero-padded
        like :attr:`padded_vertices`."""
        aggs = self.source.aggregates
        out = np.zeros_like(self.padded_vertices)
        for k, a in enumerate(aggs):
            out[k, : a.n_sides] = np.roll(a.vertices, -1, axis=0) - a.vertices
        return out

    @cached_property
    def centroids(self) -> np.ndarray:
        return np.array([a.vertices.mean(axis=0) for a in self.source.aggregates]).reshape(-1, 2)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([np.hypot(*(a.vertices - a.vertices.mean(axis=0)).T).max()
                         for a in self.source.aggregates])

    def aggregate_points(self, pos: int) -> np.ndarray:
        return np.arange(self.offsets[pos], self.offsets[pos + 1])

    def find_point(self, xy, tol: float = 1e-9) -> int | None:
        """Index of the discretization point at ``xy`` (within ``tol``), else None."""
        if len(self.coords) == 0:
            return None
        d = np.hypot(*(self.coords - np.asarray(xy, dtype=float)).T)
        i = int(np.argmin(d))
        return i if d[i] <= tol else None


def discretize(m: Microstructure, points_per_side: int = 5) -> DiscretizedMicrostructure:
    """Place ``points_per_side`` equally spaced points on every side,
    endpoints included; corners shared by two sides are stored once."""
    if points_per_side < 2:
        raise ValueError("points_per_side must be >= 2")
    p = points_per_side
    t = np.arange(p - 1) / (p - 1)
    coords, agg_pos, sides, slots = [], [], [], []
    offsets = [0]
    for k, a in enumerate(m.aggregates):
        v = a.vertices
        n = len(v)
        for s in range(n):
            seg = v[(s + 1) % n] - v[s]
            pts = v[s] + t[:, None] * seg
            pts[0] = v[s]
            coords.append(pts)
            agg_pos.append(np.full(p - 1, k))
            sd = np.full((p - 1, 2), s)
            sd[0, 0] = (s - 1) % n
            sides.append(sd)
            slots.append(np.arange(p - 1))
        offsets.append(offsets[-1] + n * (p - 1))
    if coords:
        c = np.concatenate(coords)
        ap = np.concatenate(agg_pos)
        sd = np.concatenate(sides)
        sl = np.concatenate(slots)
    else:
        c, ap, sd, sl = np.zeros((0, 2)), np.zeros(0, int), np.zeros((0, 2), int), np.zeros(0, int)
    for arr in (c, ap, sd, sl):
        arr.setflags(write=False)
    return DiscretizedMicrostructure(m, p, c, ap.astype(np.intp), sd.astype(np.intp),
                                     sl.astype(np.intp), np.asarray(offsets, dtype=np.intp))


def _unit(direction) -> np.ndarray:
    u = np.asarray(direction, dtype=float)
    if u.shape != (2,) or abs(np.hypot(u[0], u[1]) - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit 2-vector, got {direction!r}")
    return u


def field_of_view(tip, direction, dm: DiscretizedMicrostructure, visited: Iterable[int] = (),
                  tip_index: int | None = None) -> np.ndarray:
    """Indices of unvisited points ``y != tip`` with ``<tip->y, direction> >= 0``."""
    u = _unit(direction)
    tip = np.asarray(tip, dtype=float)
    w = dm.coords - tip
    mask = (w @ u) >= 0.0
    mask &= (w[:, 0] != 0.0) | (w[:, 1] != 0.0)
    if tip_index is not None:
        mask[tip_index] = False
    visited = np.fromiter(visited, dtype=np.intp)
    if visited.size:
        mask[visited] = False
    return np.flatnonzero(mask)


def shadow_filter(tip, fov, dm: DiscretizedMicrostructure, tip_index: int | None = None) -> np.ndarray:
    """Delete field-of-view points hidden behind an aggregate.

    For every aggregate not carrying the tip, the two boundary points seen
    under the widest angle from ``tip`` bound a search cone; a point strictly
    inside the cone and strictly beyond the chord joining them is deleted, as
    is a point of that aggregate inside the cone on an edge facing away from
    the tip.
    For the aggregate carrying the tip (``tip_index`` given), a point is
    deleted when the ray towards it enters the polygon interior right at the
    tip, which leaves exactly the points on the tip's own side(s).
    """
    fov = np.asarray(fov, dtype=np.intp)
    if fov.size == 0 or len(dm.source.aggregates) == 0:
        return fov
    tip = np.asarray(tip, dtype=float)
    w = dm.coords[fov] - tip
    own = int(dm.aggregate_pos[tip_index]) if tip_index is not None else -1

    keep = np.ones(len(fov), dtype=bool)
    if own >= 0:
        keep &= ~_enters_own_interior(w, dm, tip_index)

    # only aggregates that can reach a segment from tip to the farthest point
    reach = np.hypot(w[:, 0], w[:, 1]).max()
    gap = np.hypot(*(dm.centroids - tip).T) - dm.radii
    cand = np.flatnonzero(gap < reach)
    cand = cand[cand != own]
    if cand.size == 0:
        return fov[keep]

    rel = dm.padded_vertices[cand] - tip                       # (A, n, 2)
    axis = dm.centroids[cand] - tip                            # (A, 2)
    ang = np.arctan2(_cross(axis[:, None, :], rel), np.einsum("ak,ank->an", axis, rel))
    rows = np.arange(len(cand))
    v1 = rel[rows, np.argmin(ang, axis=1)]                     # (A, 2)
    v2 = rel[rows, np.argmax(ang, axis=1)]

    d1 = _cross(v1[:, None, :], w[None, :, :])                 # (A, K)
    d2 = _cross(v2[:, None, :], w[None, :, :])
    in_cone = (d1 * d2 < 0) & (np.abs(d1) > DET_TOL) & (np.abs(d2) > DET_TOL)

    chord = v2 - v1
    side_z = _cross(chord[:, None, :], w[None, :, :] - v1[:, None, :])
    side_tip = _cross(chord, -v1)[:, None]
    beyond = (side_z * side_tip < 0) & (np.abs(side_z) > DET_TOL)
    hidden = np.any(in_cone & beyond, axis=0)

    # the chord can itself be the far edge (a triangle showing two sides):
    # an aggregate's own points in its cone are hidden on back-facing edges
    back = _cross(dm.padded_edges[cand], -rel) > DET_TOL           # (A, n)
    row_of = np.full(len(dm.source.aggregates), -1)
    row_of[cand] = rows
    r = row_of[dm.aggregate_pos[fov]]
    mine = np.flatnonzero(r >= 0)
    if mine.size:
        rr = r[mine]
        s = dm.sides[fov[mine]]
        on_back = back[rr, s[:, 0]] & back[rr, s[:, 1]]
        hidden[mine] |= in_cone[rr, mine] & on_back

    keep &= ~hidden
    return fov[keep]


def _enters_own_interior(w, dm, tip_index) -> np.ndarray:
    a = int(dm.aggregate_pos[tip_index])
    v = dm.source.aggregates[a].vertices
    n = len(v)
    s_in, s_out = (int(s) for s in dm.sides[tip_index])
    e_out = v[(s_out + 1) % n] - v[s_out]
    inside = _cross(e_out, w) > DET_TOL
    if s_in != s_out:
        e_in = v[(s_in + 1) % n] - v[s_in]
        inside &= _cross(e_in, w) > DET_TOL
    return inside


def indicators(tip, direction, y) -> tuple[float, float]:
    """Distance ``d = |tip->y|`` and angle ``theta`` in [0, pi/2] between
    ``tip->y`` and the propagation line."""
    u = np.asarray(direction, dtype=float)
    w = np.asarray(y, dtype=float) - np.asarray(tip, dtype=float)
    d = float(np.hypot(w[0], w[1]))
    if d == 0.0:
        raise ValueError("indicators undefined for y == tip")
    c = abs(float(w @ u)) / (d * float(np.hypot(u[0], u[1])))
    return d, float(np.arccos(min(c, 1.0)))


def _indicators(w, u):
    d = np.hypot(w[:, 0], w[:, 1])
    c = np.minimum(np.abs(w @ u) / (d * np.hypot(u[0], u[1])), 1.0)
    return d, np.arccos(c)


def _minmax_scale(x):
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def normalize(d, theta) -> tuple[np.ndarray, np.ndarray]:
    """Min-max scale both indicators over one tip's candidate set.

    A constant indicator maps to 0 for every candidate.
    """
    d = np.asarray(d, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if d.size == 0:
        raise ValueError("cannot normalize an empty candidate set")
    if d.shape != theta.shape:
        raise ValueError("d and theta must have the same shape")
    return _minmax_scale(d), _minmax_scale(theta)


@dataclass(frozen=True)
class Candidate:
    point: DiscretizationPoint
    d: float
    theta: float
    d_norm: float
    theta_norm: float
    same_aggregate: bool


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Filtered field of view of one crack tip, as parallel arrays."""

    tip: np.ndarray
    direction: np.ndarray
    configuration: str
    indices: np.ndarray
    d: np.ndarray
    theta: np.ndarray
    d_norm: np.ndarray
    theta_norm: np.ndarray
    same_aggregate: np.ndarray
    dm: DiscretizedMicrostructure | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def candidates(self) -> list[Candidate]:
        pts = self.dm.points
        return [Candidate(pts[i], float(a), float(b), float(c), float(e), bool(s))
                for i, a, b, c, e, s in zip(self.indices, self.d, self.theta, self.d_norm,
                                            self.theta_norm, self.same_aggregate)]

    def position(self, k: int) -> np.ndarray:
        return self.dm.coords[self.indices[k]]


def build_candidate_set(tip, direction, dm: DiscretizedMicrostructure, visited: Iterable[int] = (),
                        tip_index: int | None = None) -> CandidateSet:
    """Field of view, shadow deletion, indicators and normalization for one tip.

    ``tip_index`` names the discretization point the tip sits on; leave it
    None for a tip in the matrix (e.g. the start point). Raises
    :class:`NoCandidateError` when nothing survives the filters.
    """
    u = _unit(direction)
    tip = np.asarray(tip, dtype=float)
    if tip_index is not None and not np.allclose(dm.coords[tip_index], tip, rtol=0, atol=1e-9):
        raise ValueError(f"tip does not coincide with discretization point {tip_index}")
    idx = field_of_view(tip, u, dm, visited, tip_index)
    idx = shadow_filter(tip, idx, dm, tip_index)
    if idx.size == 0:
        raise NoCandidateError(f"no candidate point ahead of tip {tip.tolist()}")
    d, theta = _indicators(dm.coords[idx] - tip, u)
    d_norm, theta_norm = normalize(d, theta)
    if tip_index is None:
        same = np.zeros(idx.size, dtype=bool)
    else:
        same = dm.aggregate_pos[idx] == dm.aggregate_pos[tip_index]
    config = F1 if same.any() else F2
    return CandidateSet(tip, u, config, idx, d, theta, d_norm, theta_norm, same, dm)

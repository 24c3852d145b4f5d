"""Random microstructures by hard-core sequential placement, and their
morphological descriptors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from crackchain.geometry import Aggregate, Microstructure, polygons_separated
from crackchain.rng import STREAM_COVARIOGRAM, STREAM_GENERATE, generator

log = logging.getLogger(__name__)

#: Above this target the sequential placement approaches jamming.
MAX_VOLUME_FRACTION = 0.5


class PlacementError(RuntimeError):
    def __init__(self, message, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class MorphologyConfig:
    """Parameters of the hard-core placement.

    ``shape_family`` is ``"square"``, ``"mixed"`` (regular n-gons with
    n drawn uniformly in 3..8) or an integer number of sides.
    ``circumradius`` is a single value or a ``(low, high)`` range drawn
    uniformly per aggregate.
    """

    width: float = 0.600
    height: float = 0.225
    target_volume_fraction: float = 0.25
    shape_family: str | int = "square"
    circumradius: float | tuple[float, float] = 0.015
    min_gap: float = 0.002
    seed: int = 0
    max_attempts: int = 200_000
    tolerance: float = 0.01

    def __post_init__(self):
        if not 0 <= self.target_volume_fraction < 1:
            raise ValueError("target_volume_fraction must be in [0, 1)")
        if self.target_volume_fraction > MAX_VOLUME_FRACTION:
            raise ValueError(f"target volume fraction {self.target_volume_fraction} is above the "
                             f"practical jamming bound {MAX_VOLUME_FRACTION}")
        if self.min_gap < 0:
            raise ValueError("min_gap must be >= 0")
        if isinstance(self.shape_family, str) and self.shape_family not in ("square", "mixed"):
            raise ValueError(f"unknown shape family {self.shape_family!r}")
        if isinstance(self.shape_family, int) and not 3 <= self.shape_family <= 64:
            raise ValueError("polygon side count must be in [3, 64]")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("circumradius must be positive")
        if 2 * (hi + self.min_gap) >= min(self.width, self.height):
            raise ValueError("aggregates do not fit in the domain")

    @property
    def radius_range(self) -> tuple[float, float]:
        r = self.circumradius
        if isinstance(r, (tuple, list)):
            return float(r[0]), float(r[1])
        return float(r), float(r)


def regular_polygon(n: int, center, radius: float, angle: float) -> np.ndarray:
    k = np.arange(n)
    a = angle + 2 * np.pi * k / n
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


def _n_sides(cfg: MorphologyConfig, rng) -> int:
    if cfg.shape_family == "square":
        return 4
    if cfg.shape_family == "mixed":
        return int(rng.integers(3, 9))
    return int(cfg.shape_family)


def generate(config: MorphologyConfig, id: str | None = None) -> Microstructure:
    """Sequential random placement of regular polygons.

    Each trial draws a side count, radius, centre and orientation; the
    polygon is kept when it stays ``min_gap`` away from the domain edges and
    from every accepted polygon. Placement stops once the covered fraction
    reaches the target.
    """
    cfg = config
    mid = id if id is not None else f"hcpp-{cfg.seed}"
    domain = cfg.width * cfg.height
    if cfg.target_volume_fraction == 0:
        return Microstructure(cfg.width, cfg.height, (), mid)
    rng = generator(cfg.seed, STREAM_GENERATE)
    lo, hi = cfg.radius_range
    gap = cfg.min_gap
    accepted: list[np.ndarray] = []
    centers: list[np.ndarray] = []
    radii: list[float] = []
    area = 0.0
    for attempt in range(cfg.max_attempts):
        n = _n_sides(cfg, rng)
        r = lo if lo == hi else float(rng.uniform(lo, hi))
        c = np.array([rng.uniform(r + gap, cfg.width - r - gap), rng.uniform(r + gap, cfg.height - r - gap)])
        poly = regular_polygon(n, c, r, float(rng.uniform(0, 2 * np.pi / n)))
        if poly[:, 0].min() < gap or poly[:, 1].min() < gap or \
                poly[:, 0].max() > cfg.width - gap or poly[:, 1].max() > cfg.height - gap:
            continue
        ok = True
        for cq, rq, q in zip(centers, radii, accepted):
            if math.dist(c, cq) < r + rq + gap and not polygons_separated(poly, q, gap):
                ok = False
                break
        if not ok:
            continue
        accepted.append(poly)
        centers.append(c)
        radii.append(r)
        area += 0.5 * n * r * r * math.sin(2 * math.pi / n)
        if area / domain >= cfg.target_volume_fraction:
            break
    achieved = area / domain
    if achieved < cfg.target_volume_fraction - cfg.tolerance:
        raise PlacementError(f"max_attempts={cfg.max_attempts} exhausted at volume fraction "
                             f"{achieved:.4f} (target {cfg.target_volume_fraction})", achieved)
    log.debug("placed %d aggregates in %d attempts, vf=%.4f", len(accepted), attempt + 1, achieved)
    return Microstructure(cfg.width, cfg.height,
                          tuple(Aggregate(i, p) for i, p in enumerate(accepted)), mid)


def volume_fraction(m: Microstructure) -> float:
    return sum(a.area for a in m.aggregates) / (m.width * m.height)


def _union(m: Microstructure):
    geom = shapely.MultiPolygon([shapely.Polygon(a.vertices) for a in m.aggregates])
    shapely.prepare(geom)
    return geom


def in_aggregates(m: Microstructure, xy) -> np.ndarray:
    """Boolean mask of points (n, 2) lying in an aggregate (boundary included)."""
    xy = np.asarray(xy, dtype=float)
    if not m.aggregates:
        return np.zeros(len(xy), dtype=bool)
    geom = _union(m)
    return shapely.intersects_xy(geom, xy[:, 0], xy[:, 1])


@dataclass(frozen=True)
class CovariogramEstimate:
    lags: np.ndarray
    values: np.ndarray
    n_samples: int
    n_valid: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)


def covariogram(m: Microstructure, lags, n_samples: int = 100_000, seed: int = 0) -> CovariogramEstimate:
    """Monte Carlo estimate of the isotropic covariogram.

    For each lag ``h``: draw ``x`` uniformly in the domain and an angle
    uniformly, keep the pairs with ``x + h`` still in the domain, and record
    the fraction with both ends in the aggregate phase. Each lag uses its own
    random stream.
    """
    lags = np.asarray(lags, dtype=float)
    if np.any(lags < 0):
        raise ValueError("lags must be >= 0")
    if n_samples <= 0:
        raise ValueError("n_samples must be > 0")
    geom = _union(m) if m.aggregates else None
    values, n_valid, stderr = [], [], []
    for k, h in enumerate(lags):
        rng = generator(seed, STREAM_COVARIOGRAM, k)
        x = rng.uniform((0, 0), (m.width, m.height), size=(n_samples, 2))
        phi = rng.uniform(0, 2 * np.pi, size=n_samples)
        y = x + h * np.column_stack([np.cos(phi), np.sin(phi)])
        ok = (y[:, 0] >= 0) & (y[:, 0] <= m.width) & (y[:, 1] >= 0) & (y[:, 1] <= m.height)
        x, y = x[ok], y[ok]
        if geom is None or len(x) == 0:
            hit = np.zeros(len(x), dtype=bool)
        else:
            hit = shapely.intersects_xy(geom, x[:, 0], x[:, 1]) & shapely.intersects_xy(geom, y[:, 0], y[:, 1])
        nv = len(x)
        c = hit.mean() if nv else float("nan")
        values.append(c)
        n_valid.append(nv)
        stderr.append(math.sqrt(c * (1 - c) / nv) if nv else float("nan"))
    return CovariogramEstimate(lags, np.array(values), n_samples, np.array(n_valid), np.array(stderr))

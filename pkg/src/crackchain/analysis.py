"""Ensemble statistics: Fréchet distance, median path, confidence region,
tortuosity and kernel density estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from crackchain.prediction import CrackPath, Ensemble


def _vertices(p) -> np.ndarray:
    pts = p.points if isinstance(p, CrackPath) else p
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("empty path")
    return pts


@njit(cache=True)
def _dfd(a, b):
    n, m = a.shape[0], b.shape[0]
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = math.hypot(a[i, 0] - b[j, 0], a[i, 1] - b[j, 1])
            if i == 0 and j == 0:
                ca[i, j] = d
            elif i == 0:
                ca[i, j] = max(ca[i, j - 1], d)
            elif j == 0:
                ca[i, j] = max(ca[i - 1, j], d)
            else:
                ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]), d)
    return ca[n - 1, m - 1]


def discrete_frechet(a, b) -> float:
    """Discrete Fréchet distance between two vertex sequences.

    Accepts :class:`CrackPath` objects or ``(n, 2)`` arrays.
    """
    return float(_dfd(_vertices(a), _vertices(b)))


def frechet_matrix(paths) -> np.ndarray:
    verts = [_vertices(p) for p in paths]
    n = len(verts)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = _dfd(verts[i], verts[j])
    return out


def median_index(paths) -> int:
    dist = frechet_matrix(paths)
    sums = [math.fsum(row) for row in dist]
    return int(np.argmin(sums))


def median_path(e: Ensemble) -> CrackPath:
    """Member minimizing the summed Fréchet distance to all others
    (lowest index on ties)."""
    if len(e.paths) == 0:
        raise ValueError("empty ensemble")
    return e.paths[median_index(e.paths)]


class PathFunction:
    """Piecewise-linear ``y(x)`` through the crack vertices.

    Where several segments cover the same abscissa (vertical runs, back
    steps) the last segment in traversal order wins; a vertical segment
    evaluates to its end point. Outside the covered range the nearest end
    value is used.
    """

    def __init__(self, breakpoints):
        self.breakpoints = _vertices(breakpoints)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        bp = self.breakpoints
        out = np.full(x.shape, np.nan)
        first, last = bp[0], bp[-1]
        lo, hi = (first, last) if first[0] <= last[0] else (last, first)
        out[x <= lo[0]] = lo[1]
        out[x >= hi[0]] = hi[1]
        for (x0, y0), (x1, y1) in zip(bp[:-1], bp[1:]):
            a, b = min(x0, x1), max(x0, x1)
            sel = (x >= a) & (x <= b)
            if not sel.any():
                continue
            if x1 == x0:
                out[sel] = y1
            else:
                out[sel] = y0 + (y1 - y0) * (x[sel] - x0) / (x1 - x0)
        if len(bp) == 1:
            out[:] = bp[0, 1]
        return float(out[0]) if scalar else out


def path_function(p) -> PathFunction:
    return PathFunction(p)


def order_statistic_ranks(M: int) -> tuple[int, int]:
    """1-based ranks ``floor(0.05 M)`` and ``ceil(0.95 M)``, clamped to [1, M]."""
    lo = (5 * M) // 100
    hi = -((-95 * M) // 100)
    return max(lo, 1), min(max(hi, 1), M)


@dataclass(frozen=True)
class ConfidenceRegion:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    diameter: float
    ranks: tuple[int, int]

    @property
    def lower_curve(self) -> np.ndarray:
        return np.column_stack([self.grid, self.lower])

    @property
    def upper_curve(self) -> np.ndarray:
        return np.column_stack([self.grid, self.upper])


def path_values(paths, grid) -> np.ndarray:
    """``(M, len(grid))`` matrix of path-function evaluations."""
    return np.array([PathFunction(p)(grid) for p in paths])


def _width(e: Ensemble, width):
    if width is not None:
        return float(width)
    return max(float(_vertices(p)[:, 0].max()) for p in e.paths)


def confidence_region(e: Ensemble, grid_size: int = 200, width: float | None = None) -> ConfidenceRegion:
    """Pointwise 5%/95% order statistics of the path functions on a uniform
    grid over ``[0, width]``; the diameter is the Fréchet distance between
    the lower and upper curves."""
    M = len(e.paths)
    if M < 2:
        raise ValueError("confidence region needs at least 2 paths")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    grid = np.linspace(0.0, _width(e, width), grid_size)
    vals = np.sort(path_values(e.paths, grid), axis=0)
    lo, hi = order_statistic_ranks(M)
    lower, upper = vals[lo - 1], vals[hi - 1]
    diameter = discrete_frechet(np.column_stack([grid, lower]), np.column_stack([grid, upper]))
    return ConfidenceRegion(grid, lower, upper, diameter, (lo, hi))


def tortuosity(p) -> float:
    """Crack length over end-to-end distance."""
    pts = _vertices(p)
    if len(pts) < 2:
        raise ValueError("tortuosity needs at least 2 points")
    chord = float(np.hypot(*(pts[-1] - pts[0])))
    if chord == 0.0:
        raise ValueError("coincident path endpoints")
    seg = np.diff(pts, axis=0)
    return math.fsum(np.hypot(seg[:, 0], seg[:, 1])) / chord


@dataclass(frozen=True)
class TortuosityStats:
    values: np.ndarray
    median: float
    interval: tuple[float, float]
    bin_edges: np.ndarray
    counts: np.ndarray


def tortuosity_stats(e: Ensemble, bins: int = 20) -> TortuosityStats:
    if len(e.paths) == 0:
        raise ValueError("empty ensemble")
    tau = np.array([tortuosity(p) for p in e.paths])
    s = np.sort(tau)
    lo, hi = order_statistic_ranks(len(s))
    counts, edges = np.histogram(tau, bins=bins)
    return TortuosityStats(tau, float(np.median(tau)), (float(s[lo - 1]), float(s[hi - 1])), edges, counts)


def silverman_bandwidth(values) -> float:
    x = np.asarray(values, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    return 0.9 * spread * len(x) ** (-0.2)


def kde(values, bandwidth: float | str = "auto", n_grid: int = 512, cut: float = 4.0):
    """Gaussian kernel density on a uniform grid spanning ``cut`` bandwidths
    past the data. Returns ``(grid, density)``."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("kde needs at least 2 values")
    if bandwidth == "auto":
        if np.all(x == x[0]):
            raise ValueError("all values are equal; pass an explicit bandwidth")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError("bandwidth must be > 0")
    grid = np.linspace(x.min() - cut * h, x.max() + cut * h, n_grid)
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
    return grid, dens

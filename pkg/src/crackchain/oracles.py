"""Brute-force reference computations.

These deliberately share no code path with the fast routines they check:
visibility by explicit segment clipping against every polygon, Fréchet
distance by enumerating every monotone coupling.
"""

from __future__ import annotations

import math

import numpy as np


def segment_hits_interior(p, q, vertices, tol: float = 1e-9) -> bool:
    """True when the open segment ``p``-``q`` passes through the interior of
    the convex polygon ``vertices`` (counter-clockwise) deeper than ``tol``."""
    px, py = float(p[0]), float(p[1])
    dx, dy = float(q[0]) - px, float(q[1]) - py
    v = [(float(a), float(b)) for a, b in vertices]
    edges = []
    for i, (ax, ay) in enumerate(v):
        bx, by = v[(i + 1) % len(v)]
        ex, ey = bx - ax, by - ay
        n = math.hypot(ex, ey)
        edges.append((ax, ay, ex / n, ey / n))
    t0, t1 = 0.0, 1.0
    for ax, ay, ex, ey in edges:
        # signed distance to the edge line, positive inside
        num = ex * (py - ay) - ey * (px - ax)
        den = ex * dy - ey * dx
        if den == 0.0:
            if num <= tol:
                return False
            continue
        t = -num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
    if t1 <= t0:
        return False
    tm = 0.5 * (t0 + t1)
    mx, my = px + tm * dx, py + tm * dy
    depth = min(ex * (my - ay) - ey * (mx - ax) for ax, ay, ex, ey in edges)
    return depth > tol


def visible_points(tip, candidates, coords, polygons, tol: float = 1e-9) -> list[int]:
    """Subset of ``candidates`` whose open segment from ``tip`` misses every
    polygon interior."""
    out = []
    for i in candidates:
        z = coords[i]
        if not any(segment_hits_interior(tip, z, poly, tol) for poly in polygons):
            out.append(int(i))
    return out


def monotone_couplings(n: int, m: int):
    """Yield every monotone coupling of index sequences ``0..n-1`` and
    ``0..m-1`` as a list of index pairs (unit steps in i, j, or both)."""

    def rec(i, j, acc):
        acc.append((i, j))
        if i == n - 1 and j == m - 1:
            yield list(acc)
        else:
            if i + 1 < n:
                yield from rec(i + 1, j, acc)
            if j + 1 < m:
                yield from rec(i, j + 1, acc)
            if i + 1 < n and j + 1 < m:
                yield from rec(i + 1, j + 1, acc)
        acc.pop()

    yield from rec(0, 0, [])


def frechet_by_enumeration(a, b) -> float:
    """Minimum over all monotone couplings of the largest coupled distance.

    Walks every coupling explicitly (no memoization), carrying the running
    maximum along each branch.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty path")
    n, m = len(a), len(b)
    dist = [[math.dist(a[i], b[j]) for j in range(m)] for i in range(n)]

    def walk(i, j, worst):
        worst = max(worst, dist[i][j])
        if i == n - 1 and j == m - 1:
            return worst
        best = math.inf
        if i + 1 < n:
            best = min(best, walk(i + 1, j, worst))
        if j + 1 < m:
            best = min(best, walk(i, j + 1, worst))
        if i + 1 < n and j + 1 < m:
            best = min(best, walk(i + 1, j + 1, worst))
        return best

    return walk(0, 0, 0.0)


def transition_probabilities_naive(d_norm, theta_norm, same, config, f1, f2) -> list[float]:
    """Kernel weights written out term by term, divided by their sum."""
    w = []
    for d, t, s in zip(d_norm, theta_norm, same):
        if config == "F1":
            mu1, mu2, mu3, mu4, mu5, mu6 = f1
            if s:
                w.append(math.exp(-mu1 * t ** mu2))
            else:
                w.append(math.exp(-mu3 * (d * t) ** mu6 - mu4 * d ** mu5))
        else:
            l1, l2, l3, l4, l5, l6 = f2
            w.append(math.exp(-l1 * (d * t) ** l5 - l2 * d ** l6 - l3 * t ** l4))
    total = math.fsum(w)
    return [x / total for x in w]


def n_couplings(n: int, m: int) -> int:
    """Delannoy number D(n-1, m-1)."""
    a, b = n - 1, m - 1
    return sum(math.comb(a, k) * math.comb(b, k) * 2 ** k for k in range(min(a, b) + 1))


__all__ = [
    "segment_hits_interior",
    "visible_points",
    "monotone_couplings",
    "frechet_by_enumeration",
    "transition_probabilities_naive",
    "n_couplings",
]


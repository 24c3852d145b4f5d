"""Crack-path simulation with the fitted Markov chain."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from crackchain.geometry import (
    CandidateSet,
    DiscretizedMicrostructure,
    NoCandidateError,
    build_candidate_set,
)
from crackchain.model import DEFAULT_PARAMS, ModelParams, transition_probabilities
from crackchain.rng import STREAM_ENSEMBLE, child_seed, generator

DIRECTION = (1.0, 0.0)


class SimulationError(RuntimeError):
    def __init__(self, message, path: "CrackPath"):
        super().__init__(message)
        self.path = path


@dataclass
class CrackPath:
    """Ordered crack points.

    ``indices[i]`` is the discretization index of ``points[i]``, or -1 for
    the start point and a final straight projection to the domain edge.
    """

    points: np.ndarray
    indices: list[int]
    seed: int | None = None
    termination: str = ""
    microstructure_id: str = ""
    params_digest: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(self.indices) != len(self.points):
            raise ValueError("indices and points must have the same length")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1

    @classmethod
    def from_points(cls, points, **kw) -> "CrackPath":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts, [-1] * len(pts), **kw)


@dataclass
class Ensemble:
    microstructure_id: str
    paths: list[CrackPath]
    master_seed: int | None = None
    params_digest: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class StepResult:
    index: int
    position: np.ndarray
    candidates: CandidateSet
    probabilities: np.ndarray


def draw(probabilities, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a discrete law."""
    cdf = np.cumsum(probabilities)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, len(cdf) - 1)


def local_step(tip, direction, dm: DiscretizedMicrostructure, params: ModelParams,
               rng: np.random.Generator, visited=(), tip_index: int | None = None) -> StepResult:
    """Build the candidate set at ``tip`` and draw the next crack point.

    Raises :class:`NoCandidateError` when the candidate set is empty.
    """
    cs = build_candidate_set(tip, direction, dm, visited, tip_index)
    p = transition_probabilities(cs, params)
    k = draw(p, rng)
    return StepResult(int(cs.indices[k]), cs.position(k), cs, p)


def default_start(dm: DiscretizedMicrostructure) -> np.ndarray:
    return np.array([0.0, dm.source.height / 2])


def _projection(tip, u, width, height):
    ts = []
    for c, lo, hi in ((0, 0.0, width), (1, 0.0, height)):
        if u[c] > 0:
            ts.append((hi - tip[c]) / u[c])
        elif u[c] < 0:
            ts.append((lo - tip[c]) / u[c])
    t = min(ts)
    return tip + t * u if t > 1e-15 else None


def simulate_crack(dm: DiscretizedMicrostructure, start=None, direction=DIRECTION,
                   params: ModelParams = DEFAULT_PARAMS, seed: int = 0,
                   max_steps: int | None = None) -> CrackPath:
    """One crack realization from ``start`` (default: middle of the left edge).

    Iterates :func:`local_step` until the tip reaches ``x >= width``. When no
    candidate is left the tip is extended straight along ``direction`` to the
    domain edge. Visited points are never revisited.
    """
    m = dm.source
    u = np.asarray(direction, dtype=float)
    tip = default_start(dm) if start is None else np.asarray(start, dtype=float)
    if not (0 <= tip[0] <= m.width and 0 <= tip[1] <= m.height):
        raise ValueError("start point outside the domain")
    tip_index = dm.find_point(tip, tol=0.0)
    rng = generator(seed)
    if max_steps is None:
        max_steps = 10 * max(len(dm), 1)
    pts = [tip]
    idx = [-1 if tip_index is None else tip_index]
    visited = [] if tip_index is None else [tip_index]
    termination = ""
    while True:
        if tip[0] >= m.width:
            termination = "boundary"
            break
        if len(pts) - 1 >= max_steps:
            partial = CrackPath(np.array(pts), idx, seed, "max_steps", m.id, params.digest())
            raise SimulationError(f"max_steps={max_steps} reached", partial)
        try:
            step = local_step(tip, u, dm, params, rng, visited, tip_index)
        except NoCandidateError:
            end = _projection(tip, u, m.width, m.height)
            if end is not None:
                pts.append(end)
                idx.append(-1)
            termination = "projection"
            break
        tip, tip_index = step.position, step.index
        visited.append(tip_index)
        pts.append(tip)
        idx.append(tip_index)
    return CrackPath(np.array(pts), idx, seed, termination, m.id, params.digest())


def path_seed(master_seed: int, k: int) -> int:
    return child_seed(master_seed, STREAM_ENSEMBLE, k)


def ensemble(dm: DiscretizedMicrostructure, start=None, direction=DIRECTION,
             params: ModelParams = DEFAULT_PARAMS, M: int = 100, master_seed: int = 0,
             threads: int = 1) -> Ensemble:
    """``M`` independent cracks; path ``k`` uses seed ``path_seed(master_seed, k)``."""
    if M < 1:
        raise ValueError("M must be >= 1")

    def run(k):
        return simulate_crack(dm, start, direction, params, path_seed(master_seed, k))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            paths = list(pool.map(run, range(M)))
    else:
        paths = [run(k) for k in range(M)]
    return Ensemble(dm.source.id, paths, master_seed, params.digest())

"""Training records and maximum-likelihood fitting of the kernel parameters.

The F1 and F2 parameter vectors are fitted independently, each by
maximizing the summed log transition probability of the observed choices.
Optimization runs in log-parameter space (which keeps every parameter
positive) with L-BFGS-B, an analytic gradient and several random starts.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from crackchain.geometry import F1, F2, DiscretizedMicrostructure, NoCandidateError, build_candidate_set, discretize
from crackchain.model import DEFAULT_PARAMS, KernelParamsF1, KernelParamsF2, ModelParams
from crackchain.morphology import MorphologyConfig, generate
from crackchain.prediction import CrackPath, simulate_crack
from crackchain.rng import STREAM_FIT, STREAM_TRAINING, child_seed, generator

log = logging.getLogger(__name__)

#: positions of the multiplicative factors in each 6-vector; the rest are exponents
FACTORS = {F1: (0, 2, 3), F2: (0, 1, 2)}
START_RANGE_FACTOR = (0.1, 50.0)
START_RANGE_EXPONENT = (0.1, 5.0)
BOUNDS_FACTOR = (1e-4, 1e4)
BOUNDS_EXPONENT = (1e-3, 50.0)


class TrainingDataError(ValueError):
    pass


@dataclass
class StepRecord:
    """One observed transition: normalized indicators of every candidate and
    the position of the point the crack actually took."""

    configuration: str
    d_norm: np.ndarray
    theta_norm: np.ndarray
    same_aggregate: np.ndarray
    chosen_index: int
    microstructure_id: str = ""

    def __post_init__(self):
        self.d_norm = np.asarray(self.d_norm, dtype=float)
        self.theta_norm = np.asarray(self.theta_norm, dtype=float)
        self.same_aggregate = np.asarray(self.same_aggregate, dtype=bool)
        n = len(self.d_norm)
        if n == 0 or len(self.theta_norm) != n or len(self.same_aggregate) != n:
            raise TrainingDataError("record needs matching, nonempty candidate arrays")
        if not 0 <= self.chosen_index < n:
            raise TrainingDataError(f"chosen_index {self.chosen_index} out of range for {n} candidates")
        if self.configuration not in (F1, F2):
            raise TrainingDataError(f"unknown configuration {self.configuration!r}")
        if (self.configuration == F1) != bool(self.same_aggregate.any()):
            raise TrainingDataError("configuration inconsistent with same_aggregate flags")

    def __len__(self) -> int:
        return len(self.d_norm)


@dataclass
class TrainingSet:
    records_f1: list[StepRecord] = field(default_factory=list)
    records_f2: list[StepRecord] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    @classmethod
    def from_records(cls, records: Sequence[StepRecord], provenance=None) -> "TrainingSet":
        if provenance is None:
            provenance = list(dict.fromkeys(r.microstructure_id for r in records))
        return cls([r for r in records if r.configuration == F1],
                   [r for r in records if r.configuration == F2], list(provenance))

    def records(self, which: str = "both") -> list[StepRecord]:
        if which == F1:
            return self.records_f1
        if which == F2:
            return self.records_f2
        if which == "both":
            return self.records_f1 + self.records_f2
        raise ValueError(f"which must be F1, F2 or both, got {which!r}")

    def subset(self, microstructure_ids) -> "TrainingSet":
        keep = set(microstructure_ids)
        return TrainingSet([r for r in self.records_f1 if r.microstructure_id in keep],
                           [r for r in self.records_f2 if r.microstructure_id in keep],
                           [p for p in self.provenance if p in keep])


def extract_steps(dm: DiscretizedMicrostructure, path: CrackPath, direction=(1.0, 0.0),
                  microstructure_id: str | None = None) -> list[StepRecord]:
    """Replay a crack over the discretized microstructure and record, for
    every transition, the candidate indicators and the chosen candidate.

    A final point off the discretization lying on the domain edge is taken
    as the straight exit segment and is not a Markov transition.
    """
    mid = microstructure_id if microstructure_id is not None else dm.source.id
    m = dm.source
    pts = path.points
    known = path.indices if path.indices is not None else [-1] * len(pts)
    tip = pts[0]
    tip_index = known[0] if known[0] >= 0 else dm.find_point(tip)
    visited = [] if tip_index is None else [tip_index]
    out = []
    for step in range(1, len(pts)):
        nxt = known[step] if known[step] >= 0 else dm.find_point(pts[step])
        if nxt is None:
            on_edge = np.isclose(pts[step][0], m.width) or np.isclose(pts[step][1], m.height) \
                or np.isclose(pts[step][1], 0.0)
            if step == len(pts) - 1 and on_edge:
                break
            inside = [a.id for a in m.aggregates if a.contains(pts[step], strict=True, tol=1e-12)]
            if inside:
                raise TrainingDataError(f"step {step}: point {pts[step].tolist()} lies inside aggregate {inside[0]}")
            raise TrainingDataError(f"step {step}: point {pts[step].tolist()} is not a discretization point")
        try:
            cs = build_candidate_set(tip, direction, dm, visited, tip_index)
        except NoCandidateError:
            raise TrainingDataError(f"step {step}: empty candidate set before a recorded move") from None
        hit = np.flatnonzero(cs.indices == nxt)
        if hit.size == 0:
            raise TrainingDataError(f"step {step}: chosen point {nxt} is not a candidate of the previous tip")
        out.append(StepRecord(cs.configuration, cs.d_norm, cs.theta_norm, cs.same_aggregate,
                              int(hit[0]), mid))
        tip, tip_index = dm.coords[nxt], nxt
        visited.append(nxt)
    return out


class _Packed:
    """Candidate arrays of many records laid end to end."""

    def __init__(self, records: Sequence[StepRecord]):
        sizes = np.array([len(r) for r in records], dtype=np.intp)
        self.n_records = len(records)
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp) if len(sizes) else sizes
        self.sizes = sizes
        if records:
            self.d = np.concatenate([r.d_norm for r in records])
            self.t = np.concatenate([r.theta_norm for r in records])
            self.same = np.concatenate([r.same_aggregate for r in records])
        else:
            self.d = self.t = np.zeros(0)
            self.same = np.zeros(0, dtype=bool)
        self.chosen = self.starts + np.array([r.chosen_index for r in records], dtype=np.intp)
        self.record_of = np.repeat(np.arange(self.n_records), sizes)
        self.dt = self.d * self.t
        self.log_d = _safe_log(self.d)
        self.log_t = _safe_log(self.t)
        self.log_dt = _safe_log(self.dt)


def _safe_log(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.log(x[pos])
    return out


def _terms(pk: _Packed, config: str, p: np.ndarray):
    """Log-weights and their Jacobian with respect to log-parameters."""
    a1, a2, a3, a4, a5, a6 = p
    n = len(pk.d)
    jac = np.zeros((n, 6))
    if config == F1:
        along = a1 * np.power(pk.t, a2)
        inter = a3 * np.power(pk.dt, a6)
        dist = a4 * np.power(pk.d, a5)
        s, o = pk.same, ~pk.same
        lw = np.where(s, -along, -inter - dist)
        jac[s, 0] = -along[s]
        jac[s, 1] = -along[s] * a2 * pk.log_t[s]
        jac[o, 2] = -inter[o]
        jac[o, 3] = -dist[o]
        jac[o, 4] = -dist[o] * a5 * pk.log_d[o]
        jac[o, 5] = -inter[o] * a6 * pk.log_dt[o]
    else:
        inter = a1 * np.power(pk.dt, a5)
        dist = a2 * np.power(pk.d, a6)
        ang = a3 * np.power(pk.t, a4)
        lw = -inter - dist - ang
        jac[:, 0] = -inter
        jac[:, 1] = -dist
        jac[:, 2] = -ang
        jac[:, 3] = -ang * a4 * pk.log_t
        jac[:, 4] = -inter * a5 * pk.log_dt
        jac[:, 5] = -dist * a6 * pk.log_d
    return lw, jac


def _record_lse(pk: _Packed, lw):
    mx = np.maximum.reduceat(lw, pk.starts)
    ex = np.exp(lw - mx[pk.record_of])
    return mx + np.log(np.add.reduceat(ex, pk.starts)), ex


def _loglik(pk: _Packed, config: str, p: np.ndarray, grad: bool = False):
    if pk.n_records == 0:
        return (0.0, np.zeros(6)) if grad else 0.0
    lw, jac = _terms(pk, config, p)
    lse, ex = _record_lse(pk, lw)
    per_record = lw[pk.chosen] - lse
    ll = math.fsum(per_record)
    if not grad:
        return ll
    prob = ex / np.add.reduceat(ex, pk.starts)[pk.record_of]
    g = jac[pk.chosen].sum(axis=0) - (prob[:, None] * jac).sum(axis=0)
    return ll, g


def _vector(params: ModelParams, config: str) -> np.ndarray:
    return (params.f1 if config == F1 else params.f2).as_array()


def log_likelihood(params: ModelParams, ts: TrainingSet, which: str = "both") -> float:
    """Sum over records of the log-probability of the chosen candidate."""
    if which == "both":
        return log_likelihood(params, ts, F1) + log_likelihood(params, ts, F2)
    return _loglik(_Packed(ts.records(which)), which, _vector(params, which))


def log_likelihood_gradient(params: ModelParams, ts: TrainingSet, which: str) -> np.ndarray:
    """Gradient of the ``which`` log-likelihood with respect to the
    logarithms of its six parameters."""
    return _loglik(_Packed(ts.records(which)), which, _vector(params, which), grad=True)[1]


@dataclass
class ConfigFit:
    configuration: str
    params: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    n_starts: int
    n_records: int
    identifiable: bool = True
    at_bound: list[int] = field(default_factory=list)
    best_start_log_likelihood: float = -math.inf


@dataclass
class FitResult:
    params: ModelParams
    log_likelihood: float
    iterations: int
    converged: bool
    n_starts: int
    details: dict[str, ConfigFit] = field(default_factory=dict)


def _bounds(config):
    b = []
    for k in range(6):
        lo, hi = BOUNDS_FACTOR if k in FACTORS[config] else BOUNDS_EXPONENT
        b.append((math.log(lo), math.log(hi)))
    return b


def _random_start(config, rng) -> np.ndarray:
    x = np.empty(6)
    for k in range(6):
        lo, hi = START_RANGE_FACTOR if k in FACTORS[config] else START_RANGE_EXPONENT
        x[k] = rng.uniform(math.log(lo), math.log(hi))
    return x


def fit_configuration(records: Sequence[StepRecord], config: str, n_starts: int = 10, seed: int = 0,
                      initial: Sequence[np.ndarray] = (), tol: float = 1e-9,
                      max_iter: int = 2000) -> ConfigFit:
    """Maximize the ``config`` log-likelihood from ``n_starts`` random
    log-uniform starts plus any ``initial`` parameter vectors."""
    if not records:
        raise TrainingDataError(f"no {config} records to fit")
    pk = _Packed(records)
    rng = generator(seed, STREAM_FIT, 1 if config == F1 else 2)
    starts = [_random_start(config, rng) for _ in range(n_starts)]
    starts += [np.log(np.asarray(p, dtype=float)) for p in initial]
    if not starts:
        raise ValueError("need at least one start")
    bounds = _bounds(config)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def objective(x):
        ll, g = _loglik(pk, config, np.exp(x), grad=True)
        if not math.isfinite(ll):
            return 1e300, np.zeros(6)
        # chain rule through p = exp(x) is already folded into the Jacobian
        return -ll, -g

    start_ll = [_loglik(pk, config, np.exp(np.clip(x, lo, hi))) for x in starts]
    finite = [v for v in start_ll if math.isfinite(v)]
    if not finite:
        raise TrainingDataError(f"{config}: log-likelihood is not finite at any start")
    best = None
    total_iter = 0
    for x0 in starts:
        x0 = np.clip(x0, lo, hi)
        # scipy stops on a relative decrease; scale it so |dLL| < tol
        f0 = abs(objective(x0)[0])
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": max_iter, "ftol": tol / max(1.0, f0), "gtol": 1e-8,
                                "maxcor": 20})
        total_iter += res.nit
        ll = -res.fun
        if best is None or ll > best[1]:
            best = (res.x, ll, bool(res.success))
    x, ll, ok = best
    best_start = max(finite)
    if ll < best_start:
        k = int(np.nanargmax(start_ll))
        x, ll = np.clip(starts[k], lo, hi), start_ll[k]
    g = _loglik(pk, config, np.exp(x), grad=True)[1]
    identifiable = bool(np.any(pk.sizes > 1))
    at_bound = [k for k in range(6) if x[k] <= lo[k] + 1e-8 or x[k] >= hi[k] - 1e-8]
    if at_bound:
        warnings.warn(f"{config}: parameters {[k + 1 for k in at_bound]} ended at their bounds", RuntimeWarning)
    if not identifiable:
        ok = bool(np.all(g == 0))
    log.debug("%s: ll %.6f from %d starts, %d iterations", config, ll, len(starts), total_iter)
    return ConfigFit(config, np.exp(x), ll, total_iter, bool(ok), len(starts), pk.n_records,
                     identifiable, at_bound, best_start)


def fit(ts: TrainingSet, n_starts: int = 10, seed: int = 0, which: str = "both",
        base: ModelParams = DEFAULT_PARAMS, initial: ModelParams | None = None,
        tol: float = 1e-9) -> FitResult:
    """Maximum-likelihood estimate of the kernel parameters.

    ``which`` selects F1, F2 or both; a configuration that is not fitted
    keeps its values from ``base``. ``initial`` adds one extra start per
    configuration.
    """
    configs = (F1, F2) if which == "both" else (which,)
    params = base
    details = {}
    for cfg in configs:
        extra = [_vector(initial, cfg)] if initial is not None else []
        r = fit_configuration(ts.records(cfg), cfg, n_starts, seed, extra, tol)
        details[cfg] = r
        if cfg == F1:
            params = params.with_f1(KernelParamsF1(*r.params))
        else:
            params = params.with_f2(KernelParamsF2(*r.params))
    return FitResult(params, sum(r.log_likelihood for r in details.values()),
                     sum(r.iterations for r in details.values()),
                     all(r.converged for r in details.values()), n_starts, details)


@dataclass
class StabilityRow:
    size: int
    result: FitResult


def stability_curve(ts: TrainingSet, sizes: Sequence[int], n_starts: int = 10, seed: int = 0,
                    which: str = "both", warm_start: bool = True) -> list[StabilityRow]:
    """Refit on nested prefixes of the microstructure list.

    With ``warm_start`` each size also starts from the previous size's
    estimate.
    """
    groups = list(ts.provenance)
    rows = []
    prev = None
    for size in sizes:
        if not 1 <= size <= len(groups):
            raise ValueError(f"training size {size} outside [1, {len(groups)}]")
        sub = ts.subset(groups[:size])
        res = fit(sub, n_starts, seed, which, initial=prev if warm_start else None)
        rows.append(StabilityRow(size, res))
        prev = res.params
    return rows


def synthesize_training_set(n: int, params: ModelParams = DEFAULT_PARAMS, seed: int = 0,
                            morphology=None, points_per_side: int = 5, direction=(1.0, 0.0)):
    """Stand-in for simulated training cracks: ``n`` random microstructures,
    one crack each drawn from the model with ``params``.

    Returns ``(training_set, microstructures, paths)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    base = morphology or MorphologyConfig()
    records, micro, paths = [], [], []
    for i in range(n):
        cfg = MorphologyConfig(**{**base.__dict__, "seed": child_seed(seed, STREAM_TRAINING, i, 0)})
        m = generate(cfg, id=f"train-{i:03d}")
        dm = discretize(m, points_per_side)
        p = simulate_crack(dm, None, direction, params, child_seed(seed, STREAM_TRAINING, i, 1))
        records += extract_steps(dm, p, direction)
        micro.append(m)
        paths.append(p)
    return TrainingSet.from_records(records, [m.id for m in micro]), micro, paths

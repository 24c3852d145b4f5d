"""Oracle suites run by ``crackchain selftest``."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from crackchain import model
from crackchain.analysis import discrete_frechet
from crackchain.estimation import fit, log_likelihood, synthesize_training_set
from crackchain.geometry import (
    F1,
    F2,
    Aggregate,
    CandidateSet,
    Microstructure,
    discretize,
    field_of_view,
    polygons_separated,
    shadow_filter,
)
from crackchain.model import DEFAULT_PARAMS, transition_probabilities
from crackchain.morphology import MorphologyConfig, regular_polygon
from crackchain.oracles import frechet_by_enumeration, transition_probabilities_naive, visible_points
from crackchain.rng import STREAM_SELFTEST, generator


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<24} {self.seconds:7.2f}s  {self.detail}"


# random instances

def random_candidate_set(rng: np.random.Generator, max_size: int = 60) -> CandidateSet:
    k = int(rng.integers(1, max_size + 1))
    d = rng.random(k)
    t = rng.random(k)
    # exercise the exact end points too
    d[rng.random(k) < 0.1] = 0.0
    t[rng.random(k) < 0.1] = 1.0
    same = rng.random(k) < rng.random()
    config = F1 if same.any() else F2
    return CandidateSet(np.zeros(2), np.array([1.0, 0.0]), config, np.arange(k),
                        d, t, d, t, same, None)


def random_params(rng: np.random.Generator) -> model.ModelParams:
    v = np.exp(rng.uniform(np.log(0.05), np.log(60.0), 12))
    return model.ModelParams(model.KernelParamsF1(*v[:6]), model.KernelParamsF2(*v[6:]))


def random_scene(rng: np.random.Generator, n_polygons: int | None = None, size: float = 1.0) -> Microstructure:
    """Disjoint random convex polygons in a square domain."""
    n_target = int(rng.integers(1, 9)) if n_polygons is None else n_polygons
    polys = []
    for _ in range(400):
        if len(polys) == n_target:
            break
        r = rng.uniform(0.04, 0.15) * size
        c = rng.uniform(r, size - r, 2)
        n = int(rng.integers(3, 9))
        if rng.random() < 0.5:
            p = regular_polygon(n, c, r, rng.uniform(0, 2 * np.pi))
        else:
            ang = np.sort(rng.uniform(0, 2 * np.pi, n))
            p = np.column_stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)])
            try:
                Aggregate(0, p)
            except ValueError:
                continue
        if all(polygons_separated(p, q, 1e-3 * size) for q in polys):
            polys.append(p)
    return Microstructure(size, size, tuple(Aggregate(i, p) for i, p in enumerate(polys)), "scene")


def random_tip(rng, m: Microstructure, dm):
    """A matrix point or a boundary discretization point, with a random direction."""
    if len(dm) and rng.random() < 0.5:
        i = int(rng.integers(len(dm)))
        tip, tip_index = dm.coords[i], i
    else:
        while True:
            tip = rng.uniform(0, m.width, 2)
            if not any(a.contains(tip, strict=False, tol=1e-9) for a in m.aggregates):
                break
        tip_index = None
    a = rng.uniform(0, 2 * np.pi)
    return tip, tip_index, np.array([np.cos(a), np.sin(a)])


def shadow_instance(rng):
    m = random_scene(rng)
    dm = discretize(m, int(rng.integers(2, 7)))
    tip, ti, u = random_tip(rng, m, dm)
    fov = field_of_view(tip, u, dm, (), ti)
    got = shadow_filter(tip, fov, dm, ti).tolist()
    want = visible_points(tip, fov, dm.coords, [a.vertices for a in m.aggregates])
    return sorted(got) == sorted(want)


def random_path(rng, max_vertices: int = 8) -> np.ndarray:
    return rng.normal(size=(int(rng.integers(1, max_vertices + 1)), 2))


# suites

def suite_kernel_reference(seed: int) -> tuple[bool, str]:
    p = DEFAULT_PARAMS
    checks = [
        (model.kernel_f1(1.0, 1.0, False, p.f1), math.exp(-30.2 - 8.9)),
        (model.kernel_f2(1.0, 1.0, p.f2), math.exp(-(34.2 + 9.2 + 13.16))),
        (model.kernel_f1(0.3, 0.0, True, p.f1), 1.0),
        (model.kernel_f1(0.5, 0.5, True, p.f1), math.exp(-7.06 * 0.5 ** 4.1)),
        (model.kernel_f2(0.0, 0.0, p.f2), 1.0),
    ]
    bad = [(a, b) for a, b in checks if not math.isclose(a, b, rel_tol=1e-12, abs_tol=0)]
    rng = generator(seed, STREAM_SELFTEST, 1)
    worst = 0.0
    for _ in range(300):
        cs = random_candidate_set(rng)
        prm = random_params(rng)
        got = transition_probabilities(cs, prm)
        want = transition_probabilities_naive(cs.d_norm, cs.theta_norm, cs.same_aggregate, cs.configuration,
                                              prm.f1.as_array(), prm.f2.as_array())
        if not np.all(np.isfinite(want)):
            continue
        worst = max(worst, float(np.max(np.abs(got - np.asarray(want)))))
    ok = not bad and worst < 1e-9
    return ok, f"{len(checks) - len(bad)}/{len(checks)} closed forms, max |p - naive| = {worst:.1e}"


def suite_normalization(seed: int, n: int = 2000) -> tuple[bool, str]:
    rng = generator(seed, STREAM_SELFTEST, 2)
    worst, nonpos = 0.0, 0
    for _ in range(n):
        p = transition_probabilities(random_candidate_set(rng), random_params(rng))
        worst = max(worst, abs(math.fsum(p) - 1.0))
        nonpos += int(np.any(p <= 0))
    return worst <= 1e-12 and nonpos == 0, f"{n} sets, max |sum - 1| = {worst:.1e}, non-positive = {nonpos}"


def suite_shadow(seed: int, n: int = 150) -> tuple[bool, str]:
    rng = generator(seed, STREAM_SELFTEST, 3)
    ok = sum(shadow_instance(rng) for _ in range(n))
    return ok == n, f"{ok}/{n} instances match the visibility oracle"


def suite_frechet(seed: int, n: int = 150) -> tuple[bool, str]:
    rng = generator(seed, STREAM_SELFTEST, 4)
    worst = 0.0
    for _ in range(n):
        a, b = random_path(rng), random_path(rng)
        worst = max(worst, abs(discrete_frechet(a, b) - frechet_by_enumeration(a, b)))
    return worst <= 1e-12, f"{n} pairs, max |dp - enumeration| = {worst:.1e}"


def suite_recovery(seed: int, n_micro: int = 6, n_starts: int = 4) -> tuple[bool, str]:
    cfg = MorphologyConfig(width=0.3, height=0.225)
    ts, _, _ = synthesize_training_set(n_micro, DEFAULT_PARAMS, seed, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = fit(ts, n_starts=n_starts, seed=seed)
    ll_true = log_likelihood(DEFAULT_PARAMS, ts)
    ok = res.log_likelihood >= ll_true - 1e-6
    return ok, (f"{len(ts.records_f1)}+{len(ts.records_f2)} records, "
                f"ll fit {res.log_likelihood:.3f} vs generating {ll_true:.3f}")


SUITES = {
    "kernel-reference": suite_kernel_reference,
    "normalization": suite_normalization,
    "shadow-visibility": suite_shadow,
    "frechet-enumeration": suite_frechet,
    "parameter-recovery": suite_recovery,
}


def run(seed: int = 0, names=None) -> list[SuiteResult]:
    out = []
    for name, fn in SUITES.items():
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out

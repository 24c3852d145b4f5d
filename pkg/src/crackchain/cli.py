"""Command-line interface.

Every command writes its outputs plus ``<output>.manifest.json``. Failures
exit nonzero and print ``{"error": <category>, "message": ...}`` on stderr:
2 = usage, 3 = input (missing or malformed files, invalid geometry),
4 = numerical (placement, simulation or fitting failed), 1 = selftest failure.

Environment:
  CRACKCHAIN_OUT_DIR   directory for default output paths (default: .)
  CRACKCHAIN_PARAMS    default parameter file (default: shipped defaults)
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from crackchain import __version__, formats
from crackchain.analysis import confidence_region, kde, median_index, tortuosity_stats
from crackchain.estimation import (
    TrainingDataError,
    fit,
    log_likelihood,
    stability_curve,
    synthesize_training_set,
)
from crackchain.geometry import GeometryError, discretize
from crackchain.model import DEFAULT_PARAMS, load_params
from crackchain.morphology import MorphologyConfig, PlacementError, covariogram, generate, volume_fraction
from crackchain.prediction import SimulationError, ensemble

log = logging.getLogger("crackchain")

SUITE_NAMES = ("kernel-reference", "normalization", "shadow-visibility", "frechet-enumeration",
               "parameter-recovery")

EXIT_SELFTEST, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category, self.code = category, code


def _out(path, default_name):
    if path:
        return Path(path)
    return Path(os.environ.get("CRACKCHAIN_OUT_DIR", ".")) / default_name


def _params(path):
    path = path or os.environ.get("CRACKCHAIN_PARAMS")
    if not path:
        return DEFAULT_PARAMS, None
    return load_params(path), Path(path)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _shape(text):
    if text in ("square", "mixed"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("shape must be 'square', 'mixed' or a side count") from None


def _morph_config(args, seed) -> MorphologyConfig:
    base = {}
    if getattr(args, "config", None):
        base = formats.read_json(args.config)
    radius = base.get("circumradius", 0.015)
    if args.radius is not None:
        radius = args.radius if args.radius_max is None else (args.radius, args.radius_max)
    if isinstance(radius, list):
        radius = tuple(radius)
    fields = {
        "width": args.width if args.width is not None else base.get("width", 0.600),
        "height": args.height if args.height is not None else base.get("height", 0.225),
        "target_volume_fraction": args.vf if args.vf is not None else base.get("target_volume_fraction", 0.25),
        "shape_family": args.shape if args.shape is not None else base.get("shape_family", "square"),
        "circumradius": radius,
        "min_gap": args.gap if args.gap is not None else base.get("min_gap", 0.002),
        "seed": seed,
        "max_attempts": args.max_attempts if args.max_attempts is not None else base.get("max_attempts", 200_000),
    }
    return MorphologyConfig(**fields)


def _add_morph_flags(p):
    p.add_argument("--config", help="JSON file with morphology settings (flags override)")
    p.add_argument("--vf", type=float, help="target aggregate volume fraction (default 0.25)")
    p.add_argument("--shape", type=_shape, help="square | mixed | <n sides> (default square)")
    p.add_argument("--radius", type=float, help="aggregate circumradius in m (default 0.015)")
    p.add_argument("--radius-max", type=float, help="upper circumradius for a uniform range")
    p.add_argument("--gap", type=float, help="minimum matrix gap in m (default 0.002)")
    p.add_argument("--width", type=float, help="domain width in m (default 0.600)")
    p.add_argument("--height", type=float, help="domain height in m (default 0.225)")
    p.add_argument("--max-attempts", type=int)


# commands

def cmd_generate(args):
    cfg = _morph_config(args, args.seed)
    m = generate(cfg)
    out = _out(args.out, "microstructure.json")
    formats.write_json(out, formats.microstructure_to_dict(m))
    man = formats.RunManifest.start("generate", seed=args.seed,
                                    options={"volume_fraction": volume_fraction(m), "n_aggregates": len(m.aggregates)})
    man.add_output(out)
    man.write(formats.manifest_path(out))
    log.info("%d aggregates, volume fraction %.4f -> %s", len(m.aggregates), volume_fraction(m), out)


def cmd_discretize(args):
    m = formats.load_microstructure(args.microstructure)
    dm = discretize(m, args.points_per_side)
    out = _out(args.out, "discretized.json")
    formats.write_json(out, formats.discretized_to_dict(dm))
    man = formats.RunManifest.start("discretize", options={"points_per_side": args.points_per_side})
    man.add_input(args.microstructure)
    man.add_output(out)
    man.write(formats.manifest_path(out))


def cmd_synthesize_training(args):
    params, ppath = _params(args.params)
    cfg = _morph_config(args, 0)
    ts, _, _ = synthesize_training_set(args.n, params, args.seed, cfg, args.points_per_side)
    out = _out(args.out, "training.json")
    formats.write_json(out, formats.training_to_dict(ts))
    man = formats.RunManifest.start("synthesize-training", seed=args.seed, params_hash=params.digest(),
                                    options={"n": args.n, "records_f1": len(ts.records_f1),
                                             "records_f2": len(ts.records_f2)})
    if ppath:
        man.add_input(ppath)
    man.add_output(out)
    man.write(formats.manifest_path(out))
    log.info("%d F1 + %d F2 records -> %s", len(ts.records_f1), len(ts.records_f2), out)


def cmd_fit(args):
    ts = formats.training_from_dict(formats.read_json(args.training))
    if not ts.records_f1 and not ts.records_f2:
        raise TrainingDataError(f"{args.training}: no records")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = fit(ts, args.starts, args.seed, args.which)
        rows = stability_curve(ts, args.sizes, args.starts, args.seed, args.which) if args.sizes else []
    out = _out(args.out, "params.json")
    out.write_text(res.params.to_json())
    report = {
        "log_likelihood": res.log_likelihood,
        "log_likelihood_default_params": log_likelihood(DEFAULT_PARAMS, ts) if args.which == "both" else None,
        "iterations": res.iterations, "converged": res.converged, "n_starts": res.n_starts,
        "configurations": {k: {"log_likelihood": v.log_likelihood, "n_records": v.n_records,
                               "converged": v.converged, "identifiable": v.identifiable,
                               "at_bound": [i + 1 for i in v.at_bound]} for k, v in res.details.items()},
        "warnings": sorted({str(w.message) for w in caught}),
    }
    rep = out.with_name(out.stem + "_report.json")
    formats.write_json(rep, report)
    man = formats.RunManifest.start("fit", seed=args.seed, params_hash=res.params.digest(),
                                    options={"starts": args.starts, "which": args.which, "sizes": args.sizes})
    man.add_input(args.training)
    man.add_output(out)
    man.add_output(rep)
    if rows:
        stab = Path(args.stability_out) if args.stability_out else out.with_name(out.stem + "_stability.csv")
        names = list(res.params.to_dict()["f1"]) + list(res.params.to_dict()["f2"])
        formats.write_csv(stab, ["size", *names, "log_likelihood"],
                          [[r.size, *r.result.params.f1.as_array(), *r.result.params.f2.as_array(),
                            r.result.log_likelihood] for r in rows])
        man.add_output(stab)
    man.write(formats.manifest_path(out))


def _analyze(e, m, grid, bins):
    k = median_index(e.paths)
    region = confidence_region(e, grid, m.width) if len(e.paths) >= 2 else None
    tort = tortuosity_stats(e, bins)
    return k, region, tort


def _write_analysis(e, m, k, region, tort, out_json, out_csv, out_svg, man):
    formats.write_json(out_json, formats.stats_to_dict(e.paths[k], k, region, tort))
    man.add_output(out_json)
    if region is not None and out_csv:
        formats.write_csv(out_csv, ["x", "lower", "upper"], zip(region.grid, region.lower, region.upper))
        man.add_output(out_csv)
    if out_svg:
        Path(out_svg).write_text(formats.svg_overlay(m, e.paths, e.paths[k], region))
        man.add_output(out_svg)


def cmd_predict(args):
    m = formats.load_microstructure(args.microstructure)
    params, ppath = _params(args.params)
    dm = discretize(m, args.points_per_side)
    start = None if args.start_y is None else (0.0, args.start_y)
    e = ensemble(dm, start, (1.0, 0.0), params, args.M, args.seed, args.threads)
    out = _out(args.out, "ensemble.json")
    formats.write_json(out, formats.ensemble_to_dict(e))
    man = formats.RunManifest.start("predict", seed=args.seed, params_hash=params.digest(),
                                    options={"M": args.M, "points_per_side": args.points_per_side})
    man.add_input(args.microstructure)
    if ppath:
        man.add_input(ppath)
    man.add_output(out)
    if not args.no_analysis:
        k, region, tort = _analyze(e, m, args.grid, args.bins)
        stem = out.with_name(out.stem)
        _write_analysis(e, m, k, region, tort, Path(f"{stem}_stats.json"), Path(f"{stem}_region.csv"),
                        Path(f"{stem}.svg"), man)
    man.write(formats.manifest_path(out))


def cmd_analyze(args):
    e = formats.ensemble_from_dict(formats.read_json(args.ensemble))
    m = formats.load_microstructure(args.microstructure)
    k, region, tort = _analyze(e, m, args.grid, args.bins)
    out = _out(args.out, "stats.json")
    man = formats.RunManifest.start("analyze", seed=e.master_seed, params_hash=e.params_digest,
                                    options={"grid": args.grid, "bins": args.bins})
    man.add_input(args.ensemble)
    man.add_input(args.microstructure)
    _write_analysis(e, m, k, region, tort, out, args.csv, args.svg, man)
    if args.kde_out:
        if len(set(tort.values.tolist())) > 1:
            g, dens = kde(tort.values, args.bandwidth if args.bandwidth else "auto")
        elif args.bandwidth:
            g, dens = kde(tort.values, args.bandwidth)
        else:
            raise ValueError("all tortuosities are equal; pass --bandwidth for the density")
        formats.write_csv(args.kde_out, ["tortuosity", "density"], zip(g, dens))
        man.add_output(args.kde_out)
    man.write(formats.manifest_path(out))


def cmd_covariogram(args):
    m = formats.load_microstructure(args.microstructure)
    lags = args.lags if args.lags else list(np.linspace(0.0, args.max_lag, args.n_lags))
    est = covariogram(m, lags, args.samples, args.seed)
    out = _out(args.out, "covariogram.csv")
    formats.write_csv(out, ["lag", "value", "stderr", "n_valid"],
                      zip(est.lags, est.values, est.stderr, est.n_valid.tolist()))
    man = formats.RunManifest.start("covariogram", seed=args.seed, options={"samples": args.samples})
    man.add_input(args.microstructure)
    man.add_output(out)
    man.write(formats.manifest_path(out))


def cmd_selftest(args):
    from crackchain import selftest

    results = selftest.run(args.seed, args.suite)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    if args.out:
        # timings stay on stdout so the report file is reproducible
        formats.write_json(args.out, {"schema": "crackchain.selftest/1", "seed": args.seed,
                                      "suites": [{"name": r.name, "passed": r.passed, "detail": r.detail}
                                                 for r in results]})
        man = formats.RunManifest.start("selftest", seed=args.seed)
        man.add_output(args.out)
        man.write(formats.manifest_path(args.out))
    if failed:
        raise CliError("selftest", f"failed suites: {', '.join(failed)}", EXIT_SELFTEST)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crackchain", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"crackchain {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=1, help="worker threads for ensembles (results do not depend on it)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="random hard-core microstructure")
    _add_morph_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("discretize", parents=[common], help="boundary discretization points")
    d.add_argument("microstructure")
    d.add_argument("--points-per-side", type=int, default=5)
    d.add_argument("--out")
    d.set_defaults(func=cmd_discretize)

    s = sub.add_parser("synthesize-training", parents=[common], help="simulated training cracks -> step records")
    s.add_argument("--n", type=int, default=35)
    s.add_argument("--params")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--points-per-side", type=int, default=5)
    _add_morph_flags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synthesize_training)

    f = sub.add_parser("fit", parents=[common], help="maximum-likelihood kernel parameters")
    f.add_argument("training")
    f.add_argument("--starts", type=int, default=10)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--which", choices=["both", "F1", "F2"], default="both")
    f.add_argument("--sizes", type=_int_list, help="training sizes for the stability table, e.g. 5,10,35")
    f.add_argument("--stability-out")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", parents=[common], help="crack ensemble and statistics")
    pr.add_argument("microstructure")
    pr.add_argument("--params")
    pr.add_argument("--M", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--points-per-side", type=int, default=5)
    pr.add_argument("--start-y", type=float, help="start height on the left edge (default: mid-height)")
    pr.add_argument("--grid", type=int, default=200)
    pr.add_argument("--bins", type=int, default=20)
    pr.add_argument("--no-analysis", action="store_true")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("analyze", parents=[common], help="statistics of an ensemble file")
    a.add_argument("ensemble")
    a.add_argument("microstructure")
    a.add_argument("--grid", type=int, default=200)
    a.add_argument("--bins", type=int, default=20)
    a.add_argument("--csv")
    a.add_argument("--svg")
    a.add_argument("--kde-out")
    a.add_argument("--bandwidth", type=float)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("covariogram", parents=[common], help="Monte Carlo covariogram")
    c.add_argument("microstructure")
    c.add_argument("--lags", type=_float_list)
    c.add_argument("--max-lag", type=float, default=0.1)
    c.add_argument("--n-lags", type=int, default=21)
    c.add_argument("--samples", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_covariogram)

    t = sub.add_parser("selftest", parents=[common], help="run the oracle suites")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--suite", action="append", choices=list(SUITE_NAMES), help="run only this suite (repeatable)")
    t.add_argument("--out", help="also write the results as JSON")
    t.set_defaults(func=cmd_selftest)
    return p


def _fail(category, message, code):
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        return _fail("usage", "--threads must be >= 1", EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.category, str(exc), exc.code)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail("input", str(exc), EXIT_INPUT)
    except (PlacementError, SimulationError) as exc:
        return _fail("numerical", str(exc), EXIT_NUMERICAL)
    except (GeometryError, TrainingDataError, formats.FormatError, ValueError) as exc:
        return _fail("input", str(exc), EXIT_INPUT)
    except (RuntimeError, FloatingPointError) as exc:
        return _fail("numerical", str(exc), EXIT_NUMERICAL)
    return 0


if __name__ == "__main__":
    sys.exit(main())

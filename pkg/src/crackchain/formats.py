"""Plain-text file formats (JSON, CSV, SVG) and run manifests.

All writers are deterministic: fixed key order, ``repr``-exact floats and a
trailing newline, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from crackchain.analysis import ConfidenceRegion, TortuosityStats
from crackchain.estimation import StepRecord, TrainingSet
from crackchain.geometry import Aggregate, DiscretizedMicrostructure, Microstructure
from crackchain.prediction import CrackPath, Ensemble

MANIFEST_SCHEMA = "crackchain.manifest/1"


class FormatError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _pairs(a) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in np.asarray(a, dtype=float)]


# microstructure

def microstructure_to_dict(m: Microstructure) -> dict:
    return {"id": m.id, "width": float(m.width), "height": float(m.height),
            "aggregates": [{"id": int(a.id), "vertices": _pairs(a.vertices)} for a in m.aggregates]}


def microstructure_from_dict(d: dict) -> Microstructure:
    try:
        aggs = tuple(Aggregate(int(a["id"]), a["vertices"]) for a in d["aggregates"])
        return Microstructure(float(d["width"]), float(d["height"]), aggs, str(d.get("id", "")))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed microstructure: {exc}") from None


def load_microstructure(path) -> Microstructure:
    m = microstructure_from_dict(read_json(path))
    if not m.id:
        m = Microstructure(m.width, m.height, m.aggregates, Path(path).stem)
    return m


def discretized_to_dict(dm: DiscretizedMicrostructure) -> dict:
    return {"microstructure_id": dm.source.id, "points_per_side": dm.points_per_side,
            "points": [{"index": p.index, "x": p.position[0], "y": p.position[1],
                        "aggregate_id": p.aggregate_id, "side_ids": list(p.side_ids),
                        "side_slot": p.side_slot} for p in dm.points]}


# training set

def training_to_dict(ts: TrainingSet) -> dict:
    def rec(r: StepRecord):
        return {"microstructure": r.microstructure_id, "configuration": r.configuration,
                "chosen": int(r.chosen_index),
                "candidates": [[float(a), float(b), bool(c)]
                               for a, b, c in zip(r.d_norm, r.theta_norm, r.same_aggregate)]}

    return {"schema": "crackchain.training/1", "provenance": list(ts.provenance),
            "records": [rec(r) for r in ts.records_f1 + ts.records_f2]}


def training_from_dict(d: dict) -> TrainingSet:
    try:
        recs = []
        for r in d["records"]:
            c = r["candidates"]
            recs.append(StepRecord(r["configuration"], [x[0] for x in c], [x[1] for x in c],
                                   [bool(x[2]) for x in c], int(r["chosen"]), str(r.get("microstructure", ""))))
        return TrainingSet.from_records(recs, d.get("provenance"))
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"malformed training set: {exc}") from None


# paths and ensembles

def path_to_dict(p: CrackPath) -> dict:
    return {"seed": p.seed, "termination": p.termination, "n_steps": p.n_steps,
            "points": _pairs(p.points), "indices": [int(i) for i in p.indices]}


def path_from_dict(d: dict, microstructure_id: str = "", params_digest: str = "") -> CrackPath:
    pts = d["points"]
    return CrackPath(np.array(pts, dtype=float), [int(i) for i in d.get("indices", [-1] * len(pts))],
                     d.get("seed"), d.get("termination", ""), microstructure_id, params_digest)


def ensemble_to_dict(e: Ensemble) -> dict:
    return {"schema": "crackchain.ensemble/1", "microstructure_id": e.microstructure_id,
            "master_seed": e.master_seed, "params_digest": e.params_digest, "M": len(e.paths),
            "paths": [path_to_dict(p) for p in e.paths]}


def ensemble_from_dict(d: dict) -> Ensemble:
    try:
        mid, dig = d.get("microstructure_id", ""), d.get("params_digest", "")
        return Ensemble(mid, [path_from_dict(p, mid, dig) for p in d["paths"]], d.get("master_seed"), dig)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed ensemble: {exc}") from None


def stats_to_dict(median: CrackPath, median_index: int, region: ConfidenceRegion | None,
                  tort: TortuosityStats) -> dict:
    out = {"schema": "crackchain.stats/1", "median_index": median_index,
           "median_path": _pairs(median.points)}
    if region is not None:
        out["confidence_region"] = {"ranks": list(region.ranks), "diameter": region.diameter,
                                    "grid": region.grid.tolist(), "lower": region.lower.tolist(),
                                    "upper": region.upper.tolist()}
    out["tortuosity"] = {"values": tort.values.tolist(), "median": tort.median,
                         "interval": list(tort.interval), "bin_edges": tort.bin_edges.tolist(),
                         "counts": tort.counts.tolist()}
    return out


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    Path(path).write_text(csv_text(header, rows))


def svg_overlay(m: Microstructure, paths=(), median=None, region: ConfidenceRegion | None = None,
                px_per_m: float = 2000.0) -> str:
    """Microstructure with ensemble paths, median path and region curves."""
    W, H = m.width * px_per_m, m.height * px_per_m

    def pts(a):
        return " ".join(f"{x * px_per_m:.2f},{H - y * px_per_m:.2f}" for x, y in np.asarray(a))

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.2f} {H:.2f}">',
             f'<rect x="0" y="0" width="{W:.2f}" height="{H:.2f}" fill="#f4f1ea" stroke="black"/>']
    for a in m.aggregates:
        lines.append(f'<polygon points="{pts(a.vertices)}" fill="#8c8c8c" stroke="#555" stroke-width="0.5"/>')
    for p in paths:
        lines.append(f'<polyline points="{pts(p.points)}" fill="none" stroke="#3b6fb6" '
                     f'stroke-opacity="0.25" stroke-width="1"/>')
    if region is not None:
        for curve in (region.lower_curve, region.upper_curve):
            lines.append(f'<polyline points="{pts(curve)}" fill="none" stroke="#c0392b" '
                         f'stroke-width="1.5" stroke-dasharray="4 3"/>')
    if median is not None:
        lines.append(f'<polyline points="{pts(median.points)}" fill="none" stroke="#1e8449" stroke-width="2"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    params_hash: str | None = None
    tool_version: str = ""
    wall_time: float = 0.0
    schema: str = MANIFEST_SCHEMA
    options: dict = field(default_factory=dict)

    @classmethod
    def start(cls, command: str, **kw) -> "RunManifest":
        from crackchain import __version__

        m = cls(command, tool_version=__version__, **kw)
        m._t0 = time.perf_counter()
        return m

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        self.wall_time = round(time.perf_counter() - getattr(self, "_t0", time.perf_counter()), 6)
        d = asdict(self)
        Path(path).write_text(json.dumps(d, indent=1) + "\n")


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".manifest.json")

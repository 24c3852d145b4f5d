"""Transition kernel of the crack Markov chain.

Two configurations:

* F1, the tip can follow its own aggregate. Same-aggregate candidates get
  ``exp(-mu1 * t**mu2)``; the others
  ``exp(-mu3 * (d*t)**mu6 - mu4 * d**mu5)``.
* F2, only matrix crossings are possible:
  ``exp(-l1 * (d*t)**l5 - l2 * d**l6 - l3 * t**l4)``.

``d`` and ``t`` are the min-max normalized distance and angle of a candidate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import astuple, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from crackchain.geometry import F1, CandidateSet


def _check_positive(obj):
    for f in fields(obj):
        v = float(getattr(obj, f.name))
        # canonical floats keep the JSON text and digest independent of input type
        object.__setattr__(obj, f.name, v)
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{type(obj).__name__}.{f.name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class KernelParamsF1:
    mu1: float
    mu2: float
    mu3: float
    mu4: float
    mu5: float
    mu6: float

    def __post_init__(self):
        _check_positive(self)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class KernelParamsF2:
    lambda1: float
    lambda2: float
    lambda3: float
    lambda4: float
    lambda5: float
    lambda6: float

    def __post_init__(self):
        _check_positive(self)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class ModelParams:
    f1: KernelParamsF1
    f2: KernelParamsF2

    def to_dict(self) -> dict:
        return {"f1": {f.name: getattr(self.f1, f.name) for f in fields(self.f1)},
                "f2": {f.name: getattr(self.f2, f.name) for f in fields(self.f2)}}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        try:
            f1 = {f.name: float(data["f1"][f.name]) for f in fields(KernelParamsF1)}
            f2 = {f.name: float(data["f2"][f.name]) for f in fields(KernelParamsF2)}
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed parameter data: missing {exc}") from None
        return cls(KernelParamsF1(**f1), KernelParamsF2(**f2))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def with_f1(self, f1: KernelParamsF1) -> "ModelParams":
        return ModelParams(f1, self.f2)

    def with_f2(self, f2: KernelParamsF2) -> "ModelParams":
        return ModelParams(self.f1, f2)


def load_params(path) -> ModelParams:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return ModelParams.from_dict(data)


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(params.to_json())


def default_params_text() -> str:
    """Contents of the shipped default parameter file."""
    return resources.files("crackchain").joinpath("data/default_params.json").read_text()


DEFAULT_PARAMS = ModelParams.from_dict(json.loads(default_params_text()))


def _pow(base, expo):
    # 0**e = 0 for e > 0; exponents are validated positive
    return np.power(base, expo)


def log_kernel_f1(d_norm, theta_norm, same_aggregate, p) -> np.ndarray:
    """Log of the F1 kernel. ``p`` is a KernelParamsF1 or a length-6 array."""
    mu1, mu2, mu3, mu4, mu5, mu6 = p.as_array() if hasattr(p, "as_array") else p
    d = np.asarray(d_norm, dtype=float)
    t = np.asarray(theta_norm, dtype=float)
    along = -mu1 * _pow(t, mu2)
    cross = -mu3 * _pow(d * t, mu6) - mu4 * _pow(d, mu5)
    return np.where(same_aggregate, along, cross)


def log_kernel_f2(d_norm, theta_norm, p) -> np.ndarray:
    l1, l2, l3, l4, l5, l6 = p.as_array() if hasattr(p, "as_array") else p
    d = np.asarray(d_norm, dtype=float)
    t = np.asarray(theta_norm, dtype=float)
    return -l1 * _pow(d * t, l5) - l2 * _pow(d, l6) - l3 * _pow(t, l4)


def kernel_f1(d_norm: float, theta_norm: float, same_aggregate: bool, p: KernelParamsF1) -> float:
    return float(np.exp(log_kernel_f1(d_norm, theta_norm, same_aggregate, p)))


def kernel_f2(d_norm: float, theta_norm: float, p: KernelParamsF2) -> float:
    return float(np.exp(log_kernel_f2(d_norm, theta_norm, p)))


def log_weights(cs: CandidateSet, p: ModelParams) -> np.ndarray:
    if cs.configuration == F1:
        return log_kernel_f1(cs.d_norm, cs.theta_norm, cs.same_aggregate, p.f1)
    return log_kernel_f2(cs.d_norm, cs.theta_norm, p.f2)


def softmax(logw) -> np.ndarray:
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0:
        raise ValueError("empty candidate set")
    w = np.exp(logw - logw.max())
    return w / w.sum()


def transition_probabilities(cs: CandidateSet, p: ModelParams) -> np.ndarray:
    """Probability of each candidate being the next crack point."""
    if len(cs) == 0:
        raise ValueError("empty candidate set")
    return softmax(log_weights(cs, p))

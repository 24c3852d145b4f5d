"""Stochastic crack-path surrogate for two-phase granular microstructures.

A crack is a Markov chain over the discretization points of polygonal
aggregate boundaries. The transition kernel depends on two local geometric
indicators (distance and angle to the propagation direction) and is fitted
to training cracks by maximum likelihood.
"""

from crackchain.geometry import (
    Aggregate,
    Candidate,
    CandidateSet,
    DiscretizationPoint,
    DiscretizedMicrostructure,
    Microstructure,
    build_candidate_set,
    discretize,
    field_of_view,
    indicators,
    normalize,
    shadow_filter,
)
from crackchain.model import (
    DEFAULT_PARAMS,
    KernelParamsF1,
    KernelParamsF2,
    ModelParams,
    kernel_f1,
    kernel_f2,
    transition_probabilities,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregate",
    "Candidate",
    "CandidateSet",
    "DiscretizationPoint",
    "DiscretizedMicrostructure",
    "Microstructure",
    "build_candidate_set",
    "discretize",
    "field_of_view",
    "indicators",
    "normalize",
    "shadow_filter",
    "DEFAULT_PARAMS",
    "KernelParamsF1",
    "KernelParamsF2",
    "ModelParams",
    "kernel_f1",
    "kernel_f2",
    "transition_probabilities",
    "__version__",
]

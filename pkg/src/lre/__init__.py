"""Online and offline relative likelihood-ratio estimation with Gaussian kernels."""

from .errors import InvalidInputError, NumericalError, RatioUndefinedError
from .kernel import Dictionary, KernelSpec, WeightedExpansion, evaluate, evaluate_batch, kernel_eval
from .olre import (
    EstimatorState,
    ObservationPair,
    OLREConfig,
    init_state,
    instantaneous_loss,
    run_stream,
    schedule,
    step,
)
from .rulsif import CVPlan, RulsifModel, cross_validate, fit, random_dictionary
from .synthetic import ScenarioSpec, density_p, density_q, sample_pair, sample_pairs, scenario, to_pairs, true_ratio

__version__ = "0.1.0"

__all__ = [
    "CVPlan",
    "Dictionary",
    "EstimatorState",
    "InvalidInputError",
    "KernelSpec",
    "NumericalError",
    "OLREConfig",
    "ObservationPair",
    "RatioUndefinedError",
    "RulsifModel",
    "ScenarioSpec",
    "WeightedExpansion",
    "cross_validate",
    "density_p",
    "density_q",
    "evaluate",
    "evaluate_batch",
    "fit",
    "init_state",
    "instantaneous_loss",
    "kernel_eval",
    "random_dictionary",
    "run_stream",
    "sample_pair",
    "sample_pairs",
    "scenario",
    "schedule",
    "step",
    "to_pairs",
    "true_ratio",
]

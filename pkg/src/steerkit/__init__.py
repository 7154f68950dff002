"""Collective EPR steering of a mechanical oscillator in pulsed optomechanics.

Closed-form output-mode covariances, an independent moment-propagation
oracle (deterministic and Monte Carlo), steering witnesses with threshold
solvers, and a scenario-driven CLI.
"""

from .cli import __version__
from .closedform import (
    MomentSet,
    collective_steering_value,
    cross_correlation,
    moment_set,
    single_steering_value,
    steering_collective,
    steering_single,
    threshold_r,
)
from .dynamics import (
    LinearModel,
    OutputCovariance,
    TemporalKernel,
    build_full_model,
    build_reduced_model,
    collective_transform,
    monte_carlo_output_covariance,
    output_covariance,
    propagate_output_covariance,
    symplectic_eigenvalues,
)
from .model import (
    DerivedQuantities,
    PhysicalParams,
    ReducedParams,
    WorkingPoint,
    derive_working_point,
    derived_from_ratios,
    derived_quantities,
    reduce,
    reduced_from_ratios,
)
from .steering import (
    SteeringReport,
    ThresholdResult,
    inferred_variance,
    monogamy_check,
    noise_threshold,
    r_crossing,
    steering_product,
    steering_region,
)

__all__ = [
    "__version__",
    "MomentSet", "collective_steering_value", "cross_correlation",
    "moment_set", "single_steering_value", "steering_collective",
    "steering_single", "threshold_r",
    "LinearModel", "OutputCovariance", "TemporalKernel", "build_full_model",
    "build_reduced_model", "collective_transform",
    "monte_carlo_output_covariance", "output_covariance",
    "propagate_output_covariance", "symplectic_eigenvalues",
    "DerivedQuantities", "PhysicalParams", "ReducedParams", "WorkingPoint",
    "derive_working_point", "derived_from_ratios", "derived_quantities",
    "reduce", "reduced_from_ratios",
    "SteeringReport", "ThresholdResult", "inferred_variance",
    "monogamy_check", "noise_threshold", "r_crossing", "steering_product",
    "steering_region",
]

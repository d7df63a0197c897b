"""Sojourn measures of Student and Fisher-Snedecor random fields.

Simulation of stationary Gaussian vector fields, pointwise Student and
Fisher-Snedecor transforms, excursion areas over growing windows, and the
normalizations of their short- and long-range limit theorems.
"""

__version__ = "0.1.0"

from .covariance import Dependence, GaussianExp, GeneralizedCauchy, classify_dependence, evaluate, model_from_config
from .derived import chi_square_field, fisher_field, student_field
from .field_sim import (
    EmbeddingError,
    FieldSample,
    GridSpec,
    MixingMatrix,
    VectorFieldSample,
    centered_grid,
    child_seed,
    mix,
    simulate_gaussian_field,
    simulate_vector_field,
)
from .geometry import Window, WindowKind, c1, c3_spectral, kernel_K, pairwise_integral, psi_ball_density
from .sojourn import LevelSchedule, excursion_area, expected_area, validate_moving_level

__all__ = [
    "__version__",
    "Dependence",
    "GaussianExp",
    "GeneralizedCauchy",
    "classify_dependence",
    "evaluate",
    "model_from_config",
    "chi_square_field",
    "fisher_field",
    "student_field",
    "EmbeddingError",
    "FieldSample",
    "GridSpec",
    "MixingMatrix",
    "VectorFieldSample",
    "centered_grid",
    "child_seed",
    "mix",
    "simulate_gaussian_field",
    "simulate_vector_field",
    "Window",
    "WindowKind",
    "c1",
    "c3_spectral",
    "kernel_K",
    "pairwise_integral",
    "psi_ball_density",
    "LevelSchedule",
    "excursion_area",
    "expected_area",
    "validate_moving_level",
]

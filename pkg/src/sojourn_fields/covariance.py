"""Isotropic correlation models and their dependence class."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

__all__ = [
    "CovarianceModel",
    "GaussianExp",
    "GeneralizedCauchy",
    "Dependence",
    "evaluate",
    "classify_dependence",
    "model_from_config",
]


class Dependence(enum.Enum):
    SHORT_RANGE = "ShortRange"
    LONG_RANGE = "LongRange"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class CovarianceModel:
    """Base class for unit-variance isotropic correlation functions."""

    family = "abstract"

    @property
    def alpha(self) -> float | None:
        """Long-range decay exponent, or ``None`` for integrable families."""
        return None

    def L(self, r):
        """Exact slowly varying factor in ``B(r) = r^-alpha L(r)``."""
        raise NotImplementedError(f"{self.family} has no long-range decomposition")

    def evaluate(self, r):
        raise NotImplementedError

    def to_config(self) -> dict[str, Any]:
        return {"family": self.family}


@dataclass(frozen=True)
class GaussianExp(CovarianceModel):
    """``B(r) = exp(-r^2)``."""

    family = "gaussian"

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-(r * r))


@dataclass(frozen=True)
class GeneralizedCauchy(CovarianceModel):
    """Generalized Linnik correlation ``B(r) = (1 + r^sigma)^-theta``.

    With ``sigma = 2`` this is the Cauchy model. The long-range exponent is
    ``alpha = sigma * theta`` and the slowly varying factor
    ``L(r) = (1 + r^-sigma)^-theta`` is carried exactly.
    """

    sigma: float = 2.0
    theta: float = 0.25

    family = "generalized_cauchy"

    def __post_init__(self):
        if not (0 < self.sigma <= 2):
            raise ValueError(f"GeneralizedCauchy requires sigma in (0, 2], got {self.sigma}")
        if not self.theta > 0:
            raise ValueError(f"GeneralizedCauchy requires theta > 0, got {self.theta}")

    @property
    def alpha(self) -> float:
        return self.sigma * self.theta

    def L(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("L(r) is defined for r > 0")
        out = (1.0 + r ** (-self.sigma)) ** (-self.theta)
        return float(out) if out.ndim == 0 else out

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return (1.0 + r**self.sigma) ** (-self.theta)

    def to_config(self) -> dict[str, Any]:
        return {"family": self.family, "sigma": self.sigma, "theta": self.theta}


def evaluate(model: CovarianceModel, r):
    """Correlation at lag ``r >= 0``; scalar in, float out."""
    if np.any(np.asarray(r) < 0):
        raise ValueError("lag must be nonnegative")
    out = model.evaluate(r)
    return float(out) if np.ndim(out) == 0 else out


def classify_dependence(model: CovarianceModel, d: int, kappa: int) -> Dependence:
    """Short/long range classification for a Hermite rank ``kappa`` functional.

    ShortRange iff ``alpha * kappa > d`` (covariance to the power kappa is
    integrable); LongRange iff ``alpha * kappa < d``.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    alpha = model.alpha
    if alpha is None:
        return Dependence.SHORT_RANGE
    prod = alpha * kappa
    if math.isclose(prod, d, rel_tol=0.0, abs_tol=1e-12):
        return Dependence.BOUNDARY
    return Dependence.SHORT_RANGE if prod > d else Dependence.LONG_RANGE


_FAMILY_ALIASES = {
    "gaussian": "gaussian",
    "gaussianexp": "gaussian",
    "gaussian_exp": "gaussian",
    "generalized_cauchy": "generalized_cauchy",
    "generalizedcauchy": "generalized_cauchy",
    "cauchy": "generalized_cauchy",
    "linnik": "generalized_cauchy",
}


def model_from_config(spec: Mapping[str, Any]) -> CovarianceModel:
    """Build a model from ``{family, sigma, theta}``."""
    family = str(spec.get("family", "")).lower()
    key = _FAMILY_ALIASES.get(family)
    if key is None:
        raise ValueError(f"unknown covariance family {spec.get('family')!r}; expected 'gaussian' or 'generalized_cauchy'")
    if key == "gaussian":
        extra = set(spec) - {"family"}
        if extra:
            raise ValueError(f"gaussian covariance takes no parameters, got {sorted(extra)}")
        return GaussianExp()
    extra = set(spec) - {"family", "sigma", "theta"}
    if extra:
        raise ValueError(f"unknown covariance keys {sorted(extra)}")
    return GeneralizedCauchy(float(spec.get("sigma", 2.0)), float(spec.get("theta", 0.25)))

"""Excursion areas and the normalizations that turn them into limit statistics.

The sojourn measure ``M_r{S}`` is the volume of ``{x in Delta(r): S(x) > a(r)}``.
On a grid it is estimated by counting cells whose centers lie in the window
and whose value exceeds the level strictly, times the cell volume.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .covariance import CovarianceModel
from .field_sim import FieldSample
from .geometry import Window, c3_spectral
from .special import c2, c4, fisher_tail, student_tail

__all__ = [
    "LevelSchedule",
    "LevelCheck",
    "THEOREM_TAGS",
    "NormalizedStatistic",
    "ExcursionCount",
    "excursion_counts",
    "area_from_mask",
    "excursion_area",
    "expected_area",
    "normalize_short_range",
    "normalize_student_lrd",
    "normalize_fisher_lrd",
    "validate_moving_level",
]

THEOREM_TAGS = ("Th3", "ThS", "Th6", "Th7", "Th8", "Th9", "Th10", "Th11")


@dataclass(frozen=True)
class LevelSchedule:
    """Level ``a(r)``: constant ``a`` or power law ``c * r**beta``."""

    kind: str = "constant"
    a: float = 1.0
    c: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower().replace("-", "_")
        if kind in ("powerlaw", "power"):
            kind = "power_law"
        if kind not in ("constant", "power_law"):
            raise ValueError(f"unknown level schedule {self.kind!r}; expected 'constant' or 'power_law'")
        object.__setattr__(self, "kind", kind)
        if kind == "power_law":
            if not self.c > 0:
                raise ValueError(f"power-law level needs c > 0, got {self.c}")
            if self.beta < 0:
                raise ValueError(f"power-law level needs beta >= 0, got {self.beta}")

    @classmethod
    def constant(cls, a: float) -> "LevelSchedule":
        return cls("constant", a=float(a))

    @classmethod
    def power_law(cls, c: float, beta: float) -> "LevelSchedule":
        return cls("power_law", c=float(c), beta=float(beta))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def __call__(self, r: float) -> float:
        if self.is_constant:
            return self.a
        return self.c * r**self.beta

    def to_config(self) -> dict[str, Any]:
        if self.is_constant:
            return {"kind": "constant", "a": self.a}
        return {"kind": "power_law", "c": self.c, "beta": self.beta}


class LevelCheck(enum.Enum):
    OK = "OK"
    VIOLATES = "Violates"


@dataclass(frozen=True)
class NormalizedStatistic:
    raw_area: float
    statistic: float
    theorem_tag: str
    r: float
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.theorem_tag not in THEOREM_TAGS:
            raise ValueError(f"unknown theorem tag {self.theorem_tag!r}")


@dataclass(frozen=True)
class ExcursionCount:
    area: float
    exceed: int
    cells: int
    nan_cells: int
    at_level: int


def area_from_mask(values: np.ndarray, mask: np.ndarray, level: float, cell_volume: float) -> ExcursionCount:
    """Excursion count of ``values`` restricted to ``mask``; NaN cells are excluded."""
    sub = values[mask]
    nan = np.isnan(sub)
    exceed = int(np.count_nonzero(sub > level))
    at_level = int(np.count_nonzero(sub == level))
    return ExcursionCount(exceed * cell_volume, exceed, int(sub.size), int(nan.sum()), at_level)


def excursion_counts(f: FieldSample, w: Window, level: float) -> ExcursionCount:
    """Excursion area together with the cell-count diagnostics."""
    return area_from_mask(f.values, w.mask(f.grid), level, f.grid.cell_volume)


def excursion_area(f: FieldSample, w: Window, level: float) -> float:
    """``|{x in window: f(x) > level}|`` by the cell-center rule."""
    return excursion_counts(f, w, level).area


def expected_area(w: Window, r: float, d: int, tail_prob: float) -> float:
    """``|Delta| r^d (1 - H(a))`` with ``tail_prob = 1 - H(a)``."""
    if not (0.0 <= tail_prob <= 1.0):
        raise ValueError(f"tail probability must lie in [0, 1], got {tail_prob}")
    return w.base_area * r**d * tail_prob


def normalize_short_range(
    area: float, r: float, d: int, w: Window, tail_prob: float, *, tag: str = "Th3", params: dict | None = None
) -> NormalizedStatistic:
    """``r^(-d/2) M_r - |Delta| r^(d/2) (1 - H(a))``."""
    if not r > 0:
        raise ValueError("r must be positive")
    stat = r ** (-d / 2.0) * area - w.base_area * r ** (d / 2.0) * tail_prob
    return NormalizedStatistic(area, stat, tag, r, dict(params or {}))


@functools.lru_cache(maxsize=32)
def _c3_cached(d: int, alpha: float, kind, dim: int) -> float:
    return c3_spectral(d, alpha, Window(kind, 1.0, dim))


def _check_alpha(alpha: float, d: int, upper: float):
    if not (0 < alpha < upper):
        raise ValueError(f"alpha={alpha} outside (0, {upper:g}) for d={d}")


def normalize_student_lrd(
    area: float,
    r: float,
    d: int,
    alpha: float,
    model: CovarianceModel,
    a: float,
    n: int,
    w: Window,
    *,
    tag: str = "Th6",
    params: dict | None = None,
) -> NormalizedStatistic:
    """Long-range Student normalization, centered at ``|Delta| r^d P(T_n > a)``.

    Used with a constant level (Th6/Th10) and with a moving level ``a = a(r)``
    (Th8), where the same formula is evaluated at the current level.
    """
    _check_alpha(alpha, d, d)
    centre = w.base_area * r**d * student_tail(a, n)
    scale = r ** (d - alpha / 2.0) * math.sqrt(float(model.L(r)) * c2(d, alpha) * _c3_cached(d, alpha, w.kind, w.d))
    pref = math.sqrt(2.0 * math.pi) * (1.0 + a * a / n) ** (n / 2.0)
    stat = pref * (area - centre) / scale
    return NormalizedStatistic(area, stat, tag, r, dict(params or {}))


def normalize_fisher_lrd(
    area: float,
    r: float,
    d: int,
    alpha: float,
    model: CovarianceModel,
    a: float,
    m: int,
    n: int,
    w: Window,
    *,
    tag: str = "Th7",
    params: dict | None = None,
) -> NormalizedStatistic:
    """``(M_r - |Delta| r^d P(F_{m,n} > a)) / (c4(a, n, m) r^(d - alpha) L(r))``."""
    _check_alpha(alpha, d, d / 2.0)
    centre = w.base_area * r**d * fisher_tail(a, m, n)
    scale = c4(a, n, m) * r ** (d - alpha) * float(model.L(r))
    return NormalizedStatistic(area, (area - centre) / scale, tag, r, dict(params or {}))


def validate_moving_level(
    s: LevelSchedule, n: int, gamma_budget: tuple[float, float], field: str = "student"
) -> LevelCheck:
    """Growth condition on ``a(r)`` for the moving-level theorems.

    A power law ``c r^beta`` is ``o(r^(gamma/2n))`` (Student) or
    ``o(r^(gamma/n))`` (Fisher) for some admissible ``gamma < min(alpha, d - alpha)``
    exactly when ``beta`` is strictly below the bound with ``gamma = min(alpha, d - alpha)``.
    """
    if s.is_constant:
        return LevelCheck.OK
    alpha, d = gamma_budget
    if not (0 < alpha < d):
        raise ValueError(f"alpha must lie in (0, d), got alpha={alpha}, d={d}")
    gamma_star = min(alpha, d - alpha)
    kind = field.lower()
    if kind == "student":
        bound = gamma_star / (2.0 * n)
    elif kind == "fisher":
        bound = gamma_star / n
    else:
        raise ValueError(f"field must be 'student' or 'fisher', got {field!r}")
    return LevelCheck.OK if s.beta < bound else LevelCheck.VIOLATES

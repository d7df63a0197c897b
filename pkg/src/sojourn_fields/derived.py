"""Pointwise Student, Fisher-Snedecor and chi-square transforms of Gaussian vector fields.

Zero denominators have probability zero but can occur in floating point.
A Student cell with zero denominator becomes ``+-inf`` following the sign of
the numerator, and ``nan`` when the numerator is zero as well. Fisher cells
behave the same way with a nonnegative numerator. Excursion code counts
``nan`` cells separately and leaves them out of the area.
"""

from __future__ import annotations

import numpy as np

from .field_sim import FieldSample, VectorFieldSample

__all__ = ["student_field", "fisher_field", "chi_square_field"]


def _mean_square_root(comps: list[np.ndarray]) -> np.ndarray:
    k = len(comps)
    if k == 1:
        return np.abs(comps[0])
    acc = np.zeros_like(comps[0])
    for c in comps:
        acc += c * c
    return np.sqrt(acc / k)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def student_field(v: VectorFieldSample, n: int) -> FieldSample:
    """``T_n = eta_1 / sqrt((eta_2^2 + ... + eta_{n+1}^2) / n)`` cellwise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if v.p != n + 1:
        raise ValueError(f"Student field T_{n} needs {n + 1} components, got {v.p}")
    den = _mean_square_root(v.components[1:])
    values = _ratio(v.components[0], den)
    return FieldSample(v.grid, values, v.model, v.seed)


def fisher_field(v: VectorFieldSample, m: int, n: int) -> FieldSample:
    """``F_{m,n} = (sum_{j<=m} eta_j^2 / m) / (sum_{j>m} eta_j^2 / n)`` cellwise.

    Evaluated as the square of a ratio of root mean squares, which makes
    ``fisher_field(v, 1, n)`` identical bit for bit to ``student_field(v, n)**2``.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if v.p != m + n:
        raise ValueError(f"Fisher field F_{m},{n} needs {m + n} components, got {v.p}")
    num = _mean_square_root(v.components[:m])
    den = _mean_square_root(v.components[m:])
    q = _ratio(num, den)
    return FieldSample(v.grid, q * q, v.model, v.seed)


def chi_square_field(v: VectorFieldSample, k: int) -> FieldSample:
    """Sum of squares of the first ``k`` components."""
    if not (1 <= k <= v.p):
        raise ValueError(f"k must be in [1, {v.p}], got {k}")
    acc = np.zeros_like(v.components[0])
    for c in v.components[:k]:
        acc += c * c
    return FieldSample(v.grid, acc, v.model, v.seed)

"""Normality diagnostics and Q-Q export for replicated statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .special import normal_cdf, normal_quantile

__all__ = [
    "KSResult",
    "SampleSummary",
    "ks_test_normal",
    "ks_test_fitted",
    "qq_points",
    "qq_fit",
    "QQFit",
    "moments",
    "skewness_stderr",
]

MIN_KS_SAMPLE = 8


@dataclass(frozen=True)
class KSResult:
    D: float
    p: float
    n: int
    fitted: bool = False

    def rejects(self, level: float = 0.01) -> bool:
        return self.p < level


def _clean(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def _ks_statistic(x: np.ndarray, mu: float, sigma: float) -> float:
    x = np.sort(x)
    n = x.size
    cdf = normal_cdf((x - mu) / sigma)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_test_normal(sample, mu: float = 0.0, sigma: float = 1.0) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against ``N(mu, sigma^2)``.

    The p-value is the Kolmogorov limiting distribution evaluated at the
    Stephens-corrected statistic ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) D``.
    """
    x = _clean(sample)
    if x.size < MIN_KS_SAMPLE:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLE} observations, got {x.size}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values are equal")
    D = _ks_statistic(x, mu, sigma)
    rn = math.sqrt(x.size)
    p = float(special.kolmogorov((rn + 0.12 + 0.11 / rn) * D))
    return KSResult(D, min(1.0, max(0.0, p)), int(x.size))


def ks_test_fitted(sample) -> KSResult:
    """KS distance to the best-fit normal, calibrated for estimated parameters.

    Mean and standard deviation come from the sample, so the Kolmogorov
    reference distribution no longer applies. The p-value uses the
    Lilliefors null distribution (tabulated, reported within [0.001, 0.2];
    values outside are clipped).
    """
    from statsmodels.stats.diagnostic import lilliefors

    x = _clean(sample)
    if x.size < MIN_KS_SAMPLE:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLE} observations, got {x.size}")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values are equal")
    D, p = lilliefors(x, dist="norm", pvalmethod="table")
    return KSResult(float(D), float(p), int(x.size), fitted=True)


def qq_points(sample) -> np.ndarray:
    """``n x 2`` array of ``(normal_quantile((i - 0.5)/n), sorted sample)``."""
    x = _clean(sample)
    n = x.size
    if n < 2:
        raise ValueError("Q-Q points need at least 2 observations")
    theo = normal_quantile((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, np.sort(x)])


@dataclass(frozen=True)
class QQFit:
    slope: float
    intercept: float
    r_squared: float


def qq_fit(sample) -> QQFit:
    """Least-squares line through the Q-Q points and its coefficient of determination."""
    pts = qq_points(sample)
    t, s = pts[:, 0], pts[:, 1]
    slope, intercept = np.polyfit(t, s, 1)
    ss_res = float(np.sum((s - (slope * t + intercept)) ** 2))
    ss_tot = float(np.sum((s - s.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return QQFit(float(slope), float(intercept), r2)


def skewness_stderr(n: int) -> float:
    """Standard error of the sample skewness under normality."""
    if n < 3:
        raise ValueError("need n >= 3")
    return math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))


@dataclass(frozen=True)
class SampleSummary:
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_D: float
    ks_p: float
    ks_fitted: bool = True

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if not (0.0 <= self.ks_p <= 1.0) and not math.isnan(self.ks_p):
            raise ValueError("p-value outside [0, 1]")

    @property
    def mean_stderr(self) -> float:
        return math.sqrt(self.variance / self.n)


def moments(sample) -> SampleSummary:
    """Mean, unbiased variance, standardized third and fourth moments, and a fitted KS test.

    Raises on a constant sample, whose standardized moments are undefined.
    The KS entry is left as NaN for samples too small to test.
    """
    x = _clean(sample)
    n = x.size
    if n < 2:
        raise ValueError("moments need at least 2 observations")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    dev = x - mean
    m2 = float(np.mean(dev**2))
    if m2 == 0.0:
        raise ValueError("degenerate sample: zero variance, standardized moments undefined")
    skew = float(np.mean(dev**3)) / m2**1.5
    kurt = float(np.mean(dev**4)) / m2**2 - 3.0
    if n >= MIN_KS_SAMPLE:
        ks = ks_test_fitted(x)
        D, p = ks.D, ks.p
    else:
        D = p = float("nan")
    return SampleSummary(n, mean, var, skew, kurt, D, p)

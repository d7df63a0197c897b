"""Scalar special functions and closed-form constants.

Everything here is double precision and pure. The regularized incomplete
beta function is the workhorse: the Student and Fisher-Snedecor marginal
CDFs, the ball distance densities and all centering terms go through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

__all__ = [
    "BetaParams",
    "log_gamma",
    "reg_inc_beta",
    "student_cdf",
    "fisher_cdf",
    "student_tail",
    "fisher_tail",
    "c2",
    "c4",
    "student_hermite_c1",
    "normal_cdf",
    "normal_quantile",
]

_STD_NORMAL = NormalDist()

# continued fraction / series controls
_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 10_000
_SERIES_CUTOFF = 1e-3


@dataclass(frozen=True)
class BetaParams:
    """Arguments of the regularized incomplete beta function ``I_mu(p, q)``."""

    p: float
    q: float
    mu: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError(f"shape parameters must be positive, got p={self.p}, q={self.q}")
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def _log_beta(p: float, q: float) -> float:
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(p + q)


def _beta_cf(p: float, q: float, x: float) -> float:
    # modified Lentz evaluation of the standard continued fraction
    qab = p + q
    qap = p + 1.0
    qam = p - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (q - m) * x / ((qam + m2) * (p + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(p + m) * (qab + m) * x / ((p + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (p={p}, q={q}, x={x})")


def _beta_series(p: float, q: float, x: float) -> float:
    # I_x(p,q) = x^p / (p B(p,q)) * sum_k (1-q)_k x^k / (k! (p+k)) * p, valid for small x
    term = 1.0
    total = 1.0 / p
    k = 0
    while True:
        k += 1
        term *= (k - q) * x / k
        contrib = term / (p + k)
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
        if k > _MAX_ITER:
            raise ArithmeticError("incomplete beta series did not converge")
    return math.exp(p * math.log(x) - _log_beta(p, q)) * total


def _inc_beta_lower(p: float, q: float, x: float) -> float:
    """I_x(p, q) for x strictly inside (0, 1), assuming x is the 'small' side."""
    if x < _SERIES_CUTOFF:
        return _beta_series(p, q, x)
    front = math.exp(p * math.log(x) + q * math.log1p(-x) - _log_beta(p, q)) / p
    return front * _beta_cf(p, q, x)


def _reg_inc_beta(p: float, q: float, mu: float) -> float:
    if mu <= 0.0:
        return 0.0
    if mu >= 1.0:
        return 1.0
    if mu < (p + 1.0) / (p + q + 2.0):
        val = _inc_beta_lower(p, q, mu)
    else:
        val = 1.0 - _inc_beta_lower(q, p, 1.0 - mu)
    return min(1.0, max(0.0, val))


def reg_inc_beta(b: BetaParams | float, q: float | None = None, mu: float | None = None):
    """Regularized incomplete beta function ``I_mu(p, q)``.

    Accepts either a :class:`BetaParams` or ``(p, q, mu)`` positionally; ``mu``
    may be an array, in which case the result is an array of the same shape.
    ``I_0 = 0`` by continuity.
    """
    if isinstance(b, BetaParams):
        return _reg_inc_beta(b.p, b.q, b.mu)
    p = float(b)
    if q is None or mu is None:
        raise TypeError("reg_inc_beta expects BetaParams or (p, q, mu)")
    if np.ndim(mu) == 0:
        return reg_inc_beta(BetaParams(p, float(q), float(mu)))
    mu_arr = np.asarray(mu, dtype=float)
    if np.any((mu_arr < 0) | (mu_arr > 1)) or not (p > 0 and q > 0):
        raise ValueError("invalid incomplete beta arguments")
    flat = [_reg_inc_beta(p, float(q), float(m)) for m in mu_arr.ravel()]
    return np.asarray(flat).reshape(mu_arr.shape)


def _sgn(u: float) -> float:
    return float(u > 0) - float(u < 0)


def student_tail(u: float, n: int) -> float:
    """Upper tail ``P(T_n > u)`` of the Student t distribution."""
    if n < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if u == 0:
        return 0.5
    half = 0.5 * _reg_inc_beta(n / 2.0, 0.5, n / (n + u * u))
    return half if u > 0 else 1.0 - half


def student_cdf(u: float, n: int) -> float:
    """Student t_n CDF, written through the incomplete beta function.

    Negative arguments are evaluated as ``1 - H(-u)`` so that
    ``H(u) + H(-u) == 1`` holds exactly in floating point.
    """
    if n < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if u < 0:
        return 1.0 - student_cdf(-u, n)
    s = _sgn(u)
    return 0.5 + 0.5 * (1.0 - _reg_inc_beta(n / 2.0, 0.5, n / (n + u * u))) * s


def fisher_cdf(u: float, m: int, n: int) -> float:
    """Fisher-Snedecor F_{m,n} CDF ``I_{mu/(n+mu)}(m/2, n/2)``."""
    if u < 0:
        raise ValueError(f"fisher_cdf requires u >= 0, got {u}")
    if m < 1 or n < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if math.isinf(u):
        return 1.0
    return _reg_inc_beta(m / 2.0, n / 2.0, m * u / (n + m * u))


def fisher_tail(u: float, m: int, n: int) -> float:
    """Upper tail ``P(F_{m,n} > u)`` computed without cancellation."""
    if u < 0:
        raise ValueError(f"fisher_tail requires u >= 0, got {u}")
    if math.isinf(u):
        return 0.0
    return _reg_inc_beta(n / 2.0, m / 2.0, n / (n + m * u))


def c2(d: int, alpha: float) -> float:
    """Spectral-density constant ``Gamma((d-a)/2) / (2^a pi^(d/2) Gamma(a/2))``.

    It is the normalization for which ``c2 * |lambda|^(alpha-d)`` is the
    Fourier transform of ``|x|^(-alpha)`` in ``R^d``.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not (0 < alpha < d):
        raise ValueError(f"c2 requires 0 < alpha < d, got alpha={alpha}, d={d}")
    log_val = (
        math.lgamma((d - alpha) / 2.0)
        - alpha * math.log(2.0)
        - (d / 2.0) * math.log(math.pi)
        - math.lgamma(alpha / 2.0)
    )
    return math.exp(log_val)


def c4(a: float, n: int, m: int) -> float:
    """Second-order Hermite constant of the Fisher-Snedecor indicator.

    ``(ma/n)^(m/2) Gamma((m+n)/2) / ((1+ma/n)^((m+n)/2) Gamma(n/2) Gamma(m/2))``.
    Note the argument order ``(a, n, m)``.
    """
    if not a > 0:
        raise ValueError(f"c4 requires a > 0, got {a}")
    if m < 1 or n < 1:
        raise ValueError("degrees of freedom must be >= 1")
    t = m * a / n
    log_val = (
        (m / 2.0) * math.log(t)
        + math.lgamma((m + n) / 2.0)
        - ((m + n) / 2.0) * math.log1p(t)
        - math.lgamma(n / 2.0)
        - math.lgamma(m / 2.0)
    )
    return math.exp(log_val)


def student_hermite_c1(a: float, n: int) -> float:
    """First Hermite coefficient ``1 / (sqrt(2 pi) (1 + a^2/n)^(n/2))`` of the Student indicator."""
    if n < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return 1.0 / (math.sqrt(2.0 * math.pi) * (1.0 + a * a / n) ** (n / 2.0))


def normal_cdf(x):
    """Standard normal CDF (scalar or array)."""
    if np.ndim(x) == 0:
        return _STD_NORMAL.cdf(float(x))
    from scipy.special import ndtr

    return ndtr(np.asarray(x, dtype=float))


def normal_quantile(p):
    """Standard normal quantile for ``p`` in (0, 1) (scalar or array)."""
    if np.ndim(p) == 0:
        p = float(p)
        if not (0.0 < p < 1.0):
            raise ValueError(f"normal_quantile requires p in (0, 1), got {p}")
        return _STD_NORMAL.inv_cdf(p)
    from scipy.special import ndtri

    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)):
        raise ValueError("normal_quantile requires p in (0, 1)")
    return ndtri(arr)

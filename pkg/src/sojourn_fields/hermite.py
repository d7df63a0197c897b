"""Probabilists' Hermite polynomials and multivariate Hermite expansions.

Coefficients ``C_nu = E[G(W) e_nu(W)]`` for standard normal ``W`` in
``R^p`` are estimated by plain Monte Carlo with explicit standard errors.
The rank test and Parseval bookkeeping build on those estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .field_sim import VectorFieldSample
from .geometry import Window
from .special import reg_inc_beta

__all__ = [
    "MultiIndex",
    "multi_indices",
    "hermite_poly",
    "eval_e_nu",
    "CoefficientEstimate",
    "estimate_coefficient",
    "estimate_coefficients",
    "RankResult",
    "hermite_rank",
    "HermiteExpansion",
    "expand",
    "reduced_functional",
    "lemma1_product_moment",
    "summation_lhs",
    "summation_rhs",
    "student_indicator_G",
    "fisher_indicator_G",
]

MAX_POLY_ORDER = 30
MAX_RANK_ORDER = 6
_CHUNK = 250_000


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Tuple ``nu = (k_1, ..., k_p)`` of nonnegative integers."""

    k: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        if not k:
            raise ValueError("a multi-index needs at least one entry")
        if any(x < 0 for x in k):
            raise ValueError(f"multi-index entries must be nonnegative, got {k}")
        object.__setattr__(self, "k", k)

    @classmethod
    def unit(cls, p: int, j: int, power: int = 1) -> "MultiIndex":
        k = [0] * p
        k[j] = power
        return cls(tuple(k))

    @property
    def p(self) -> int:
        return len(self.k)

    @property
    def order(self) -> int:
        return sum(self.k)

    @property
    def factorial(self) -> int:
        """``nu! = k_1! ... k_p!`` (exact integer)."""
        return math.prod(math.factorial(x) for x in self.k)

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.k)) + ")"


def _as_index(nu) -> MultiIndex:
    return nu if isinstance(nu, MultiIndex) else MultiIndex(tuple(nu))


def multi_indices(p: int, order: int) -> Iterator[MultiIndex]:
    """All ``nu`` in ``N_order`` for dimension ``p``, in lexicographic order (descending first entry)."""
    if p < 1 or order < 0:
        raise ValueError("need p >= 1 and order >= 0")
    # stars and bars
    for bars in itertools.combinations(range(order + p - 1), p - 1):
        prev = -1
        ks = []
        for b in bars:
            ks.append(b - prev - 1)
            prev = b
        ks.append(order + p - 1 - prev - 1)
        yield MultiIndex(tuple(ks))


def hermite_poly(k: int, u):
    """``H_k(u)`` with ``H_{k+1} = u H_k - k H_{k-1}``; scalar or array ``u``."""
    if not (0 <= k <= MAX_POLY_ORDER):
        raise ValueError(f"Hermite order must be in [0, {MAX_POLY_ORDER}], got {k}")
    u_arr = np.asarray(u, dtype=float)
    prev = np.ones_like(u_arr)
    if k == 0:
        out = prev
    else:
        cur = u_arr.copy()
        for j in range(1, k):
            prev, cur = cur, u_arr * cur - j * prev
        out = cur
    return float(out) if out.ndim == 0 else out


def _hermite_table(w: np.ndarray, max_k: int) -> np.ndarray:
    # table[k, ..., j] = H_k(w[..., j])
    table = np.empty((max_k + 1,) + w.shape)
    table[0] = 1.0
    if max_k >= 1:
        table[1] = w
    for k in range(1, max_k):
        table[k + 1] = w * table[k] - k * table[k - 1]
    return table


def eval_e_nu(nu, w) -> np.ndarray | float:
    """``e_nu(w) = prod_j H_{k_j}(w_j)``; ``w`` has shape ``(..., p)``."""
    nu = _as_index(nu)
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != nu.p:
        raise ValueError(f"multi-index has {nu.p} entries but w has {w.shape[-1]} coordinates")
    out = np.ones(w.shape[:-1])
    for j, kj in enumerate(nu.k):
        if kj:
            out = out * hermite_poly(kj, w[..., j])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoefficientEstimate:
    value: float
    stderr: float
    n_samples: int

    def z(self) -> float:
        return self.value / self.stderr if self.stderr > 0 else (math.inf if self.value else 0.0)


class _Welford:
    """Chunked mean/variance accumulation with a fixed reduction order."""

    def __init__(self, size: int):
        self.n = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def update(self, x: np.ndarray):
        # x: (size, chunk)
        nb = x.shape[1]
        mb = x.mean(axis=1)
        m2b = ((x - mb[:, None]) ** 2).sum(axis=1)
        delta = mb - self.mean
        tot = self.n + nb
        self.mean = self.mean + delta * nb / tot
        self.m2 = self.m2 + m2b + delta**2 * self.n * nb / tot
        self.n = tot

    def stderr(self) -> np.ndarray:
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _check_finite(g: np.ndarray, w: np.ndarray):
    bad = ~np.isfinite(g)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FloatingPointError(f"G returned {g[i]} at sample w={w[i].tolist()}")


def estimate_coefficients(
    G: Callable[[np.ndarray], np.ndarray],
    nus: Sequence,
    n_samples: int,
    seed: int,
) -> dict[MultiIndex, CoefficientEstimate]:
    """Monte Carlo estimates of several ``C_nu`` from one common sample of ``W``.

    ``G`` maps an ``(N, p)`` array of points to ``N`` values.
    """
    idx = [_as_index(nu) for nu in nus]
    if not idx:
        return {}
    p = idx[0].p
    if any(nu.p != p for nu in idx):
        raise ValueError("all multi-indices must have the same length")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    max_k = max(max(nu.k) for nu in idx)
    rng = np.random.default_rng(seed)
    acc = _Welford(len(idx))
    done = 0
    while done < n_samples:
        nb = min(_CHUNK, n_samples - done)
        w = rng.standard_normal((nb, p))
        g = np.asarray(G(w), dtype=float)
        if g.shape != (nb,):
            raise ValueError(f"G must return one value per sample, got shape {g.shape}")
        _check_finite(g, w)
        table = _hermite_table(w, max_k)
        prods = np.empty((len(idx), nb))
        for i, nu in enumerate(idx):
            e = g.copy()
            for j, kj in enumerate(nu.k):
                if kj:
                    e *= table[kj, :, j]
            prods[i] = e
        acc.update(prods)
        done += nb
    se = acc.stderr()
    return {nu: CoefficientEstimate(float(acc.mean[i]), float(se[i]), n_samples) for i, nu in enumerate(idx)}


def estimate_coefficient(G, nu, n_samples: int, seed: int) -> CoefficientEstimate:
    """Monte Carlo estimate of ``C_nu`` with its standard error."""
    nu = _as_index(nu)
    return estimate_coefficients(G, [nu], n_samples, seed)[nu]


@dataclass
class RankResult:
    """Outcome of a Hermite rank search.

    ``kappa`` is ``None`` when every coefficient up to ``max_order`` is
    within noise (``inconclusive``). ``kappa == 0`` flags a function that
    is not centered.
    """

    kappa: int | None
    max_order: int
    threshold: float
    coefficients: dict[MultiIndex, CoefficientEstimate] = field(repr=False)

    @property
    def inconclusive(self) -> bool:
        return self.kappa is None

    def significant(self, order: int) -> list[MultiIndex]:
        return [nu for nu, c in self.coefficients.items() if nu.order == order and abs(c.value) > self.threshold * c.stderr]


def hermite_rank(
    G, p: int, max_order: int, n_samples: int, seed: int, *, threshold: float = 4.0
) -> RankResult:
    """Smallest order with a coefficient beyond ``threshold`` standard errors."""
    if not (0 <= max_order <= MAX_RANK_ORDER):
        raise ValueError(f"max_order must be in [0, {MAX_RANK_ORDER}]")
    nus = [nu for k in range(max_order + 1) for nu in multi_indices(p, k)]
    coeffs = estimate_coefficients(G, nus, n_samples, seed)
    res = RankResult(None, max_order, threshold, coeffs)
    for k in range(max_order + 1):
        if res.significant(k):
            res.kappa = k
            break
    return res


@dataclass
class HermiteExpansion:
    p: int
    max_order: int
    coefficients: dict[MultiIndex, CoefficientEstimate]
    g_square_mean: CoefficientEstimate

    def parseval_partial_sum(self, max_order: int | None = None) -> tuple[float, float]:
        """``sum C_nu^2 / nu!`` over orders ``<= max_order`` and its propagated standard error."""
        top = self.max_order if max_order is None else max_order
        total = 0.0
        var = 0.0
        for nu, c in self.coefficients.items():
            if nu.order <= top:
                f = nu.factorial
                total += c.value**2 / f
                var += (2.0 * c.value * c.stderr / f) ** 2
        return total, math.sqrt(var)


def expand(G, p: int, max_order: int, n_samples: int, seed: int) -> HermiteExpansion:
    """Coefficients of all orders ``<= max_order`` together with ``E G(W)^2``."""
    nus = [nu for k in range(max_order + 1) for nu in multi_indices(p, k)]
    coeffs = estimate_coefficients(G, nus, n_samples, seed)
    sq = estimate_coefficient(lambda w: np.asarray(G(w)) ** 2, MultiIndex((0,) * p), n_samples, seed)
    return HermiteExpansion(p, max_order, coeffs, sq)


def reduced_functional(v: VectorFieldSample, coeffs: Mapping, w: Window) -> float:
    """``sum_nu (C_nu / nu!) int_{Delta(r)} e_nu(eta(x)) dx`` as a Riemann sum over window cells."""
    mask = w.mask(v.grid)
    comps = [c[mask] for c in v.components]
    cell = v.grid.cell_volume
    total = 0.0
    cache: dict[tuple[int, int], np.ndarray] = {}
    for nu, c in coeffs.items():
        nu = _as_index(nu)
        value = c.value if isinstance(c, CoefficientEstimate) else float(c)
        if nu.p != v.p:
            raise ValueError(f"multi-index {nu} does not match a {v.p}-component field")
        if value == 0.0:
            continue
        e = np.ones(comps[0].shape)
        for j, kj in enumerate(nu.k):
            if kj:
                key = (j, kj)
                if key not in cache:
                    cache[key] = hermite_poly(kj, comps[j])
                e = e * cache[key]
        total += value / nu.factorial * float(e.sum()) * cell
    return total


def lemma1_product_moment(
    k: Sequence[int], m: Sequence[int], r: Sequence[float] | float, n_samples: int, seed: int
) -> CoefficientEstimate:
    """MC estimate of ``E prod_j H_{k_j}(xi_j) H_{m_j}(xi_{j+p})``.

    Pairs ``(xi_j, xi_{j+p})`` are standard normal with correlation ``r_j``
    and independent across ``j``.
    """
    k = list(k)
    m = list(m)
    if len(k) != len(m):
        raise ValueError("k and m must have the same length")
    r_arr = np.broadcast_to(np.asarray(r, dtype=float), (len(k),))
    if np.any(np.abs(r_arr) > 1):
        raise ValueError(f"correlations must lie in [-1, 1], got {r_arr.tolist()}")
    rng = np.random.default_rng(seed)
    acc = _Welford(1)
    done = 0
    while done < n_samples:
        nb = min(_CHUNK, n_samples - done)
        prod = np.ones(nb)
        for kj, mj, rj in zip(k, m, r_arr):
            x = rng.standard_normal(nb)
            z = rng.standard_normal(nb)
            y = rj * x + math.sqrt(max(0.0, 1.0 - rj * rj)) * z
            prod *= hermite_poly(kj, x) * hermite_poly(mj, y)
        acc.update(prod[None, :])
        done += nb
    return CoefficientEstimate(float(acc.mean[0]), float(acc.stderr()[0]), n_samples)


def summation_lhs(a: Sequence[float], w, k: int):
    """``H_k(sum a_j w_j / sqrt(sum a_j^2))``."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    return hermite_poly(k, (w @ a) / math.sqrt(float(a @ a)))


def summation_rhs(a: Sequence[float], w, k: int):
    """``k! / (sum a^2)^(k/2) * sum_{nu in N_k} prod_j a_j^{k_j} H_{k_j}(w_j) / k_j!``."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    total = np.zeros(w.shape[:-1])
    for nu in multi_indices(len(a), k):
        coef = math.prod(aj**kj / math.factorial(kj) for aj, kj in zip(a, nu.k))
        total = total + coef * eval_e_nu(nu, w)
    out = math.factorial(k) / float(a @ a) ** (k / 2.0) * total
    return float(out) if np.ndim(out) == 0 else out


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def student_indicator_G(a: float, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Centered indicator ``chi(T_n > a) - P(T_n > a)`` as a function of ``w in R^(n+1)``."""
    sgn = float(a > 0) - float(a < 0)
    tail = 0.5 - 0.5 * (1.0 - reg_inc_beta(n / 2.0, 0.5, n / (n + a * a))) * sgn

    def G(w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        t = _ratio(w[..., 0], np.sqrt(np.sum(w[..., 1:] ** 2, axis=-1) / n))
        return (t > a).astype(float) - tail

    return G


def fisher_indicator_G(a: float, m: int, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Centered indicator ``chi(F_{m,n} > a) - P(F_{m,n} > a)`` on ``R^(m+n)``."""
    cdf = reg_inc_beta(m / 2.0, n / 2.0, m * a / (n + m * a)) if a > 0 else 0.0

    def G(w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        f = _ratio(np.sum(w[..., :m] ** 2, axis=-1) / m, np.sum(w[..., m:] ** 2, axis=-1) / n)
        return (f > a).astype(float) + cdf - 1.0

    return G


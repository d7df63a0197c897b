"""Observation windows, distance densities and the window constants c1, c3.

Two window shapes are supported: the ball ``v(r)`` of radius ``r`` and the
cube of side ``r`` centered at the origin. Ball distance densities have
closed forms; the cube is handled through its set covariogram or by Monte
Carlo sampling of point pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .field_sim import GridSpec
from .special import reg_inc_beta

__all__ = [
    "WindowKind",
    "Window",
    "QuadratureError",
    "DistanceHistogram",
    "SpectralConstant",
    "psi_ball_density",
    "psi_ball_density_beta",
    "psi_ball_cdf",
    "mc_distance_samples",
    "mc_distance_density",
    "pairwise_integral",
    "c1",
    "kernel_K",
    "c3_spectral",
]


class QuadratureError(ArithmeticError):
    """Numerical integration failed to reach the requested tolerance."""


class WindowKind(enum.Enum):
    DISK = "disk"
    SQUARE = "square"


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class Window:
    """Window ``Delta(r)``: a ball of radius ``r`` or a cube of side ``r``."""

    kind: WindowKind
    r: float = 1.0
    d: int = 2

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, WindowKind) else WindowKind(str(self.kind).lower())
        object.__setattr__(self, "kind", kind)
        if not self.r > 0:
            raise ValueError(f"window scale must be positive, got {self.r}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"window dimension must be 1, 2 or 3, got {self.d}")

    @classmethod
    def disk(cls, r: float = 1.0, d: int = 2) -> "Window":
        return cls(WindowKind.DISK, r, d)

    @classmethod
    def square(cls, r: float = 1.0, d: int = 2) -> "Window":
        return cls(WindowKind.SQUARE, r, d)

    def scaled(self, r: float) -> "Window":
        return Window(self.kind, r, self.d)

    @property
    def base(self) -> "Window":
        return self.scaled(1.0)

    @property
    def base_area(self) -> float:
        """``|Delta|``, the volume of the window at scale 1."""
        if self.kind is WindowKind.DISK:
            return _unit_ball_volume(self.d)
        return 1.0

    @property
    def area(self) -> float:
        return self.base_area * self.r**self.d

    @property
    def diameter(self) -> float:
        if self.kind is WindowKind.DISK:
            return 2.0 * self.r
        return self.r * math.sqrt(self.d)

    @property
    def half_width(self) -> float:
        """Half side of the bounding box."""
        return self.r if self.kind is WindowKind.DISK else self.r / 2.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points given as an array of shape ``(..., d)`` (open window)."""
        pts = np.asarray(points, dtype=float)
        if self.kind is WindowKind.DISK:
            return np.sum(pts * pts, axis=-1) < self.r * self.r
        return np.all(np.abs(pts) < self.r / 2.0, axis=-1)

    def fits(self, grid: GridSpec) -> bool:
        if grid.d != self.d:
            return False
        tol = 1e-9 * max(1.0, self.r)
        return all(lo <= -self.half_width + tol and hi >= self.half_width - tol for lo, hi in grid.extent())

    def mask(self, grid: GridSpec) -> np.ndarray:
        """Cells of ``grid`` whose centers lie inside the window."""
        if not self.fits(grid):
            raise ValueError(f"{self} does not fit inside grid extent {grid.extent()}")
        axes = grid.axes()
        if grid.d == 1:
            pts = axes[0][:, None]
        else:
            xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.stack([xx, yy], axis=-1)
        return self.contains(pts)


# -- distance densities ------------------------------------------------------


def psi_ball_density(d: int, r: float, rho):
    """Density of ``|U - V|`` for independent uniform points in the ball ``v(r)``."""
    if d not in (1, 2, 3):
        raise ValueError(f"closed-form ball densities exist for d in (1, 2, 3), got {d}")
    if not r > 0:
        raise ValueError("radius must be positive")
    rho = np.asarray(rho, dtype=float)
    t = np.clip(rho / (2.0 * r), 0.0, 1.0)
    if d == 1:
        out = (1.0 - t) / r
    elif d == 2:
        out = 4.0 * rho / (math.pi * r * r) * (np.arccos(t) - t * np.sqrt(1.0 - t * t))
    else:
        out = 3.0 * rho**2 / r**3 * (1.0 - t) ** 2 * (1.0 + t / 2.0)
    out = np.where((rho >= 0) & (rho <= 2.0 * r), out, 0.0)
    return float(out) if out.ndim == 0 else out


def psi_ball_density_beta(d: int, r: float, rho):
    """General incomplete-beta form ``d rho^(d-1) r^-d I_{1-(rho/2r)^2}((d+1)/2, 1/2)``."""
    rho = np.asarray(rho, dtype=float)
    inside = (rho >= 0) & (rho <= 2.0 * r)
    mu = np.where(inside, 1.0 - (np.clip(rho, 0, 2 * r) / (2.0 * r)) ** 2, 0.0)
    ib = reg_inc_beta((d + 1) / 2.0, 0.5, mu)
    with np.errstate(invalid="ignore"):
        out = np.where(inside, d * np.abs(rho) ** (d - 1) * r ** (-d) * ib, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def psi_ball_cdf(d: int, r: float, rho) -> np.ndarray:
    """CDF of the ball distance density, by quadrature on each requested point."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(rho)
    for i, x in enumerate(rho):
        x = min(max(x, 0.0), 2.0 * r)
        out[i] = integrate.quad(lambda z: psi_ball_density(d, r, z), 0.0, x, epsabs=1e-12, limit=200)[0]
    return out


def _sample_window(w: Window, n: int, rng: np.random.Generator) -> np.ndarray:
    if w.kind is WindowKind.SQUARE:
        return rng.uniform(-w.r / 2.0, w.r / 2.0, size=(n, w.d))
    # uniform in the ball: isotropic direction times radius ~ r U^(1/d)
    g = rng.standard_normal((n, w.d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = w.r * rng.uniform(size=(n, 1)) ** (1.0 / w.d)
    return g * rad


def mc_distance_samples(w: Window, n_samples: int, seed: int) -> np.ndarray:
    """Distances between ``n_samples`` independent uniform pairs in ``w``."""
    rng = np.random.default_rng(seed)
    u = _sample_window(w, n_samples, rng)
    v = _sample_window(w, n_samples, rng)
    return np.linalg.norm(u - v, axis=1)


@dataclass
class DistanceHistogram:
    edges: np.ndarray
    density: np.ndarray
    n_samples: int

    def cdf_at_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.density * np.diff(self.edges))])


def mc_distance_density(w: Window, n_samples: int, seed: int, bins: int = 200) -> DistanceHistogram:
    """Histogram estimate of the pairwise-distance density on ``[0, diam]``."""
    if n_samples < 10_000:
        raise ValueError("mc_distance_density needs at least 1e4 samples")
    dist = mc_distance_samples(w, n_samples, seed)
    density, edges = np.histogram(dist, bins=bins, range=(0.0, w.diameter), density=True)
    return DistanceHistogram(edges, density, n_samples)


# -- pairwise integrals and c1 ------------------------------------------------


def pairwise_integral(
    G: Callable[[np.ndarray], np.ndarray],
    w: Window,
    r: float | None = None,
    *,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """``int_{Delta(r)} int_{Delta(r)} G(|x - y|) dx dy``.

    Balls use adaptive quadrature against the distance density; cubes use
    Monte Carlo over uniform point pairs.
    """
    win = w if r is None else w.scaled(r)
    scale = win.area**2
    if win.kind is WindowKind.SQUARE:
        dist = mc_distance_samples(win, n_samples, seed)
        return float(scale * np.mean(G(dist)))

    def integrand(z):
        return float(G(win.r * z)) * psi_ball_density(win.d, 1.0, z)

    val, err, info = integrate.quad(integrand, 0.0, 2.0, epsabs=1e-12, epsrel=1e-10, limit=500, full_output=1)[:3]
    if err > 1e-6 * max(1.0, abs(val)):
        raise QuadratureError(f"pairwise integral did not converge: value {val}, error estimate {err}, {info['last']} subintervals")
    return float(scale * val)


def _square_power_moment(beta: float) -> float:
    # E |U - V|^-beta for the unit square, via the covariogram (1-|u|)(1-|v|) in polar form
    def inner(theta):
        c, s = math.cos(theta), math.sin(theta)
        R = 1.0 / c
        return (
            R ** (2 - beta) / (2 - beta)
            - (c + s) * R ** (3 - beta) / (3 - beta)
            + c * s * R ** (4 - beta) / (4 - beta)
        )

    val, err = integrate.quad(inner, 0.0, math.pi / 4, epsabs=1e-13, epsrel=1e-12)
    return 8.0 * val


def c1(kappa: int, alpha: float, w: Window) -> float:
    """``c1 = int_0^diam z^(-alpha kappa) psi_Delta(z) dz`` for the base window ``Delta``."""
    beta = alpha * kappa
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if not (0 <= beta < w.d):
        raise ValueError(f"c1 requires 0 <= alpha*kappa < d, got {beta} with d={w.d}")
    if w.kind is WindowKind.DISK:
        # psi(z) ~ z^(d-1) at the origin: algebraic weight on [0, 1]; plain quad on [1, 2]
        d = w.d
        head, err_head = integrate.quad(
            lambda z: psi_ball_density(d, 1.0, z) / z ** (d - 1) if z > 0 else float(d),
            0.0,
            1.0,
            weight="alg",
            wvar=(d - 1 - beta, 0.0),
            epsabs=1e-13,
            limit=200,
        )
        tail, err_tail = integrate.quad(
            lambda z: z**-beta * psi_ball_density(d, 1.0, z), 1.0, 2.0, epsabs=1e-13, epsrel=1e-12, limit=200
        )
        val, err = head + tail, err_head + err_tail
        if err > 1e-8 * max(1.0, val):
            raise QuadratureError(f"c1 quadrature error estimate {err}")
        return float(val)
    if w.d == 1:
        return 2.0 / ((1.0 - beta) * (2.0 - beta))
    if w.d == 2:
        return _square_power_moment(beta)
    raise ValueError("cube windows are supported for d <= 2")


# -- spectral side ------------------------------------------------------------


def _ball_kernel_radial(d: int, rho: np.ndarray) -> np.ndarray:
    nu = d / 2.0
    out = np.empty_like(rho)
    small = rho < 1e-8
    out[small] = _unit_ball_volume(d)
    x = rho[~small]
    out[~small] = (2 * math.pi) ** nu * special.jv(nu, x) / x**nu
    return out


def kernel_K(w: Window, x) -> np.ndarray:
    """Fourier transform ``int_{Delta(r)} exp(i <x, u>) du`` of the window indicator."""
    x = np.asarray(x, dtype=float)
    if w.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != w.d:
        raise ValueError(f"frequency vectors must have {w.d} coordinates")
    xr = x * w.r
    if w.kind is WindowKind.DISK:
        rho = np.linalg.norm(xr, axis=-1)
        base = _ball_kernel_radial(w.d, np.atleast_1d(rho)).reshape(rho.shape)
    else:
        # np.sinc(t) = sin(pi t)/(pi t); side-1 factor is 2 sin(x/2)/x = sinc(x/(2 pi))
        base = np.prod(np.sinc(xr / (2 * math.pi)), axis=-1)
    out = (w.r**w.d * base).astype(complex)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralConstant:
    value: float
    truncation: float
    tail_estimate: float
    tail_bound: float

    def __float__(self) -> float:
        return self.value


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_LOW_NODES, _GL_LOW_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gl_panels(f, edges, nodes=_GL_NODES, weights=_GL_WEIGHTS) -> float:
    a = edges[:-1, None]
    b = edges[1:, None]
    half = (b - a) / 2.0
    x = a + half * (nodes[None, :] + 1.0)
    return float(np.sum(half * weights[None, :] * f(x)))


def _bessel_zeros(nu: float, count: int) -> np.ndarray:
    if float(nu).is_integer():
        return special.jn_zeros(int(nu), count)
    from scipy.optimize import brentq

    k = np.arange(1, count + 1)
    beta = (k + nu / 2.0 - 0.25) * math.pi
    guess = beta - (4 * nu * nu - 1) / (8 * beta)
    zeros = np.empty(count)
    for i, g in enumerate(guess):
        lo, hi = max(g - 0.5, 1e-6), g + 0.5
        zeros[i] = brentq(lambda t: special.jv(nu, t), lo, hi, xtol=1e-14)
    return zeros


def _c3_ball(d: int, alpha: float, n_zeros: int) -> SpectralConstant:
    nu = d / 2.0
    pref = 2 * math.pi ** (d / 2.0) / math.gamma(d / 2.0) * (2 * math.pi) ** d
    zeros = _bessel_zeros(nu, n_zeros)

    def smooth(rho):
        # J_nu(rho)^2 rho^-d, finite at the origin
        out = np.empty_like(rho)
        small = rho < 1e-6
        out[small] = 1.0 / (4.0**nu * math.gamma(nu + 1.0) ** 2)
        out[~small] = special.jv(nu, rho[~small]) ** 2 / rho[~small] ** d
        return out

    # first panel [0, j_1]: substitute s = rho^alpha to absorb rho^(alpha-1)
    s_edges = np.linspace(0.0, zeros[0] ** alpha, 9)
    head = _gl_panels(lambda s: smooth(s ** (1.0 / alpha)), s_edges) / alpha

    def body_f(rho):
        return special.jv(nu, rho) ** 2 * rho ** (alpha - d - 1.0)

    body = _gl_panels(body_f, zeros)
    check = _gl_panels(body_f, zeros, _GL_LOW_NODES, _GL_LOW_WEIGHTS)
    if abs(body - check) > 1e-9 * max(1.0, abs(body)):
        raise QuadratureError(f"c3 radial quadrature unstable: {body} vs {check}")
    R = float(zeros[-1])
    # mean of J_nu^2 over a period is ~ 1/(pi rho)
    tail = R ** (alpha - d - 1.0) / (math.pi * (d + 1.0 - alpha))
    value = pref * (head + body + tail)
    return SpectralConstant(value, R, pref * tail, 2.0 * pref * tail)


def _c3_square(alpha: float, rmax: float) -> SpectralConstant:
    def S(x):
        return np.sinc(x / (2 * math.pi)) ** 2

    def angular(rho: np.ndarray) -> np.ndarray:
        # int_0^{pi/4} S(rho cos t) S(rho sin t) dt for each rho (flattened)
        rho = np.asarray(rho)
        flat = rho.ravel()
        top = float(flat.max())
        n_panels = max(4, int(math.ceil(top / math.pi)))
        edges = np.linspace(0.0, math.pi / 4, n_panels + 1)
        half = (edges[1:] - edges[:-1]) / 2.0
        th = (edges[:-1, None] + half[:, None] * (_GL_LOW_NODES[None, :] + 1.0)).ravel()
        wt = (half[:, None] * _GL_LOW_WEIGHTS[None, :]).ravel()
        c, s = np.cos(th), np.sin(th)
        out = np.empty(flat.shape)
        chunk = max(1, 2_000_000 // th.size)
        for i in range(0, flat.size, chunk):
            r = flat[i : i + chunk, None]
            out[i : i + chunk] = (S(r * c[None, :]) * S(r * s[None, :])) @ wt
        return out.reshape(rho.shape)

    def panel_sum(edges, transform=None):
        total = 0.0
        # group panels so that angular resolution follows the radius
        for start in range(0, len(edges) - 1, 16):
            e = edges[start : start + 17]
            if transform is None:
                total += _gl_panels(lambda x: angular(x) * x ** (alpha - 1.0), e, _GL_LOW_NODES, _GL_LOW_WEIGHTS)
            else:
                total += _gl_panels(transform, e, _GL_LOW_NODES, _GL_LOW_WEIGHTS)
        return total

    s_edges = np.linspace(0.0, math.pi**alpha, 9)
    head = panel_sum(s_edges, lambda s: angular(s ** (1.0 / alpha))) / alpha
    edges = np.arange(1, int(math.ceil(rmax / math.pi)) + 1) * math.pi
    body = panel_sum(edges)
    R = float(edges[-1])
    # near each axis the angular integral behaves like 2 pi / rho^3
    tail = 2 * math.pi * R ** (alpha - 3.0) / (3.0 - alpha)
    value = 8.0 * (head + body + tail)
    return SpectralConstant(value, R, 8.0 * tail, 16.0 * tail)


def c3_spectral(d: int, alpha: float, w: Window, *, detail: bool = False, resolution: float | None = None):
    """``int |K(lambda)|^2 |lambda|^(alpha - d) d lambda`` for the base window (rank one).

    Returns a float, or a :class:`SpectralConstant` with the truncation radius
    and the tail correction when ``detail`` is true.
    """
    if d != w.d:
        raise ValueError(f"window dimension {w.d} does not match d={d}")
    if not (0 < alpha < d):
        raise ValueError(f"c3 diverges unless 0 < alpha < d, got alpha={alpha}, d={d}")
    if d - alpha < 1e-3:
        raise ValueError(f"alpha={alpha} too close to d={d}: the spectral integral diverges at the origin")
    if w.kind is WindowKind.DISK:
        res = _c3_ball(d, alpha, int(resolution or 4000))
    elif d == 2:
        res = _c3_square(alpha, float(resolution or 200 * math.pi))
    else:
        raise ValueError("spectral constant for cube windows is implemented for d = 2")
    return res if detail else res.value

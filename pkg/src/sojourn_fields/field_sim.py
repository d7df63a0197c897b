"""Stationary Gaussian field synthesis by circulant embedding.

A field on an ``n_1 x ... x n_d`` lattice is obtained by embedding the
covariance into a periodic torus of ``pad * n_i`` cells per axis. The torus
covariance matrix is block circulant, so its eigenvalues are the real FFT of
the base covariance block, and ``X = irfft(sqrt(lambda) * rfft(eps))`` with
white noise ``eps`` has exactly that covariance. Restricting ``X`` to the
original lattice gives the sample.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .covariance import CovarianceModel

__all__ = [
    "EmbeddingError",
    "GridSpec",
    "FieldSample",
    "VectorFieldSample",
    "MixingMatrix",
    "child_seed",
    "centered_grid",
    "embedding_spectrum",
    "simulate_gaussian_field",
    "simulate_vector_field",
    "mix",
]

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
DEFAULT_PAD = 2
MAX_PAD = 8
DEFAULT_CLIP_TOL = 1e-6


class EmbeddingError(RuntimeError):
    """Circulant embedding has significant negative eigenvalues."""


def child_seed(seed: int, j: int) -> int:
    """SplitMix64 avalanche of ``(seed, j)``; independent 64-bit child streams."""
    z = (int(seed) + (int(j) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class GridSpec:
    """Regular lattice: ``d`` axes, cell counts, cell size and the center of cell 0."""

    d: int
    shape: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"grids are 1- or 2-dimensional, got d={self.d}")
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != self.d:
            raise ValueError(f"shape {shape} does not match d={self.d}")
        if any(s < 2 for s in shape):
            raise ValueError(f"every axis needs at least 2 cells, got {shape}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "shape", shape)
        if self.origin is None:
            origin = tuple(-(s - 1) * self.spacing / 2.0 for s in shape)
        else:
            origin = tuple(float(o) for o in self.origin)
            if len(origin) != self.d:
                raise ValueError("origin length must equal d")
        object.__setattr__(self, "origin", origin)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    def axes(self) -> list[np.ndarray]:
        """Cell-center coordinates along each axis."""
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def extent(self) -> list[tuple[float, float]]:
        """Per-axis interval covered by the cells (outer cell faces)."""
        h = self.spacing
        return [(o - h / 2, o + (n - 1) * h + h / 2) for o, n in zip(self.origin, self.shape)]


def centered_grid(d: int, half_width: float, spacing: float) -> GridSpec:
    """Smallest centered grid whose cells cover ``[-half_width, half_width]^d``."""
    n = max(2, int(math.ceil(2.0 * half_width / spacing - 1e-9)))
    return GridSpec(d, (n,) * d, spacing)


@dataclass
class FieldSample:
    grid: GridSpec
    values: np.ndarray
    model: CovarianceModel | None = None
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")


@dataclass
class VectorFieldSample:
    grid: GridSpec
    components: list[np.ndarray]
    model: CovarianceModel | None = None
    seed: int | None = None

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("a vector field needs at least one component")
        comps = [np.asarray(c, dtype=float) for c in self.components]
        for c in comps:
            if c.shape != self.grid.shape:
                raise ValueError(f"component shape {c.shape} != grid shape {self.grid.shape}")
        self.components = comps

    @property
    def p(self) -> int:
        return len(self.components)

    def stacked(self) -> np.ndarray:
        """Components as an array of shape ``(p, *grid.shape)``."""
        return np.stack(self.components)


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric ``p x p`` matrix with unit-norm rows applied pointwise to a vector field."""

    entries: np.ndarray = field(compare=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {a.shape}")
        if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
            raise ValueError("mixing matrix must be symmetric")
        norms = np.sqrt((a * a).sum(axis=1))
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-10)
        if bad.size:
            raise ValueError(f"mixing matrix rows {bad.tolist()} do not have unit norm: {norms[bad].tolist()}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def is_orthogonal(self) -> bool:
        return bool(np.allclose(self.entries @ self.entries.T, np.eye(self.p), atol=1e-10))

    def is_block_diagonal(self, sizes: Sequence[int]) -> bool:
        """True when all entries outside the given diagonal blocks vanish."""
        if sum(sizes) != self.p:
            return False
        mask = np.ones((self.p, self.p), dtype=bool)
        start = 0
        for s in sizes:
            mask[start : start + s, start : start + s] = False
            start += s
        return bool(np.all(np.abs(self.entries[mask]) <= 1e-12))


@dataclass(frozen=True)
class _Spectrum:
    sqrt_eig: np.ndarray
    torus_shape: tuple[int, ...]
    pad: int
    clipped_fraction: float


def _torus_eigenvalues(model: CovarianceModel, shape, spacing, pad):
    torus = tuple(sfft.next_fast_len(pad * n, real=True) for n in shape)
    lags = []
    for m in torus:
        k = np.arange(m)
        lags.append(np.minimum(k, m - k) * spacing)
    if len(torus) == 1:
        dist = lags[0]
    else:
        dist = np.sqrt(lags[0][:, None] ** 2 + lags[1][None, :] ** 2)
    base = model.evaluate(dist)
    eig = sfft.rfftn(base).real
    return torus, eig


@functools.lru_cache(maxsize=8)
def _cached_spectrum(model, shape, spacing, pad, max_pad, clip_tol) -> _Spectrum:
    while True:
        torus, eig = _torus_eigenvalues(model, shape, spacing, pad)
        top = float(eig.max())
        low = float(eig.min())
        if low >= -clip_tol * top:
            break
        if pad * 2 > max_pad:
            raise EmbeddingError(
                f"circulant embedding of {model} on grid {shape} (spacing {spacing}) has negative eigenvalue "
                f"{low:.3e} (relative {low / top:.3e}) beyond clip_tol={clip_tol:g} at padding {pad}x; "
                f"increase the padding beyond {max_pad}x or relax clip_tol"
            )
        log.info("embedding failed at padding %dx (min eigenvalue %.3e); doubling", pad, low / top)
        pad *= 2
    neg = np.clip(eig, None, 0.0)
    total = math.prod(torus)
    # rfft stores half the spectrum; weight interior frequencies twice for the mass estimate
    weights = np.full(eig.shape[-1], 2.0)
    weights[0] = 1.0
    if torus[-1] % 2 == 0:
        weights[-1] = 1.0
    clipped_mass = float(-(neg * weights).sum()) / total
    if clipped_mass > 0:
        log.info(
            "clipped negative eigenvalues of %s on %s: variance bias %.3e", model, shape, clipped_mass
        )
    sqrt_eig = np.sqrt(np.clip(eig, 0.0, None))
    sqrt_eig.setflags(write=False)
    return _Spectrum(sqrt_eig, torus, pad, clipped_mass)


def embedding_spectrum(
    model: CovarianceModel,
    grid: GridSpec,
    pad: int = DEFAULT_PAD,
    max_pad: int = MAX_PAD,
    clip_tol: float = DEFAULT_CLIP_TOL,
) -> _Spectrum:
    """Square-root eigenvalues of the torus covariance (cached per process)."""
    return _cached_spectrum(model, grid.shape, float(grid.spacing), int(pad), int(max_pad), float(clip_tol))


def _synthesize(spec: _Spectrum, shape, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(spec.torus_shape)
    coef = sfft.rfftn(noise)
    coef *= spec.sqrt_eig
    full = sfft.irfftn(coef, s=spec.torus_shape)
    return np.ascontiguousarray(full[tuple(slice(0, n) for n in shape)])


def simulate_gaussian_field(
    model: CovarianceModel,
    grid: GridSpec,
    seed: int,
    *,
    pad: int = DEFAULT_PAD,
    max_pad: int = MAX_PAD,
    clip_tol: float = DEFAULT_CLIP_TOL,
) -> FieldSample:
    """One zero-mean, unit-variance sample with correlation ``model`` on ``grid``.

    Raises :class:`EmbeddingError` when negative eigenvalues exceed
    ``clip_tol`` relative to the largest one even at ``max_pad``.
    """
    spec = embedding_spectrum(model, grid, pad, max_pad, clip_tol)
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
    values = _synthesize(spec, grid.shape, rng)
    return FieldSample(grid, values, model, int(seed))


def simulate_vector_field(
    model: CovarianceModel,
    p: int,
    grid: GridSpec,
    seed: int,
    **embedding,
) -> VectorFieldSample:
    """``p`` independent copies, component ``j`` seeded with ``child_seed(seed, j)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    comps = [simulate_gaussian_field(model, grid, child_seed(seed, j), **embedding).values for j in range(p)]
    return VectorFieldSample(grid, comps, model, int(seed))


def mix(v: VectorFieldSample, M: MixingMatrix) -> VectorFieldSample:
    """Pointwise linear map ``out_j(x) = sum_i M[j, i] v_i(x)``."""
    if M.p != v.p:
        raise ValueError(f"mixing matrix is {M.p}x{M.p} but the field has {v.p} components")
    stacked = v.stacked()
    out = np.tensordot(M.entries, stacked, axes=(1, 0))
    return VectorFieldSample(v.grid, list(out), v.model, v.seed)

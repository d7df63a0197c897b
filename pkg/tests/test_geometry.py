"""Windows, distance densities and the constants c1, c3."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sojourn_fields.field_sim import GridSpec, centered_grid
from sojourn_fields.geometry import (
    Window,
    WindowKind,
    c1,
    c3_spectral,
    kernel_K,
    mc_distance_density,
    mc_distance_samples,
    pairwise_integral,
    psi_ball_cdf,
    psi_ball_density,
    psi_ball_density_beta,
)
from sojourn_fields.special import c2

# -- oracles ---------------------------------------------------------------


def bessel_j1_series(x, terms=30):
    return sum((-1) ** k * (x / 2) ** (2 * k + 1) / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))


def rejection_pairs(kind, n, seed):
    """Independent uniform pairs in the unit disk or unit-side square, by rejection from a box."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        if kind == "disk":
            pts = rng.uniform(-1, 1, size=(int(n * 1.4) + 100, 2))
            pts = pts[np.sum(pts**2, axis=1) < 1][:n]
        else:
            pts = rng.uniform(-0.5, 0.5, size=(n, 2))
        out.append(pts)
    return out


def mc_mean(values):
    return values.mean(), values.std(ddof=1) / math.sqrt(values.size)


DISK_UNIT_INV_DIST = 16.0 / (3.0 * math.pi)


class TestWindow:
    """Areas, membership and grid masks."""

    def test_areas(self):
        assert Window.disk(3.0).area == pytest.approx(9 * math.pi)
        assert Window.square(3.0).area == 9.0
        assert Window.disk(1.0, d=3).base_area == pytest.approx(4 * math.pi / 3)

    def test_diameter(self):
        assert Window.disk(2.0).diameter == 4.0
        assert Window.square(2.0).diameter == pytest.approx(2 * math.sqrt(2))

    def test_kind_from_string(self):
        assert Window("square", 1.0).kind is WindowKind.SQUARE

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            Window.disk(0.0)

    def test_mask_counts_square(self):
        g = centered_grid(2, 4.0, 0.25)
        assert Window.square(8.0).mask(g).sum() == 32 * 32

    def test_mask_disk_area(self):
        g = centered_grid(2, 10.0, 0.1)
        area = Window.disk(10.0).mask(g).sum() * g.cell_volume
        assert area == pytest.approx(100 * math.pi, rel=0.01)

    def test_window_too_large(self):
        g = centered_grid(2, 4.0, 0.25)
        assert not Window.disk(5.0).fits(g)
        with pytest.raises(ValueError, match="does not fit"):
            Window.disk(5.0).mask(g)

    def test_dimension_mismatch(self):
        assert not Window.disk(1.0, d=1).fits(GridSpec(2, (8, 8), 1.0))


class TestPsiBall:
    """Closed-form ball distance densities."""

    def test_d1_origin(self):
        assert psi_ball_density(1, 1.0, 0.0) == 1.0

    def test_d3_boundary(self):
        assert psi_ball_density(3, 1.0, 2.0) == 0.0

    def test_d2_midpoint(self):
        expected = 4 / math.pi * (math.acos(0.5) - 0.5 * math.sqrt(3) / 2)
        assert psi_ball_density(2, 1.0, 1.0) == pytest.approx(expected, abs=1e-14)
        assert psi_ball_density(2, 1.0, 1.0) == pytest.approx(0.7820044, abs=1e-7)

    def test_outside_support(self):
        assert psi_ball_density(2, 1.0, 2.5) == 0.0
        assert psi_ball_density(2, 1.0, -0.1) == 0.0

    def test_unsupported_dimension(self):
        with pytest.raises(ValueError):
            psi_ball_density(4, 1.0, 0.5)

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("r", [0.5, 1.0, 7.0])
    def test_integrates_to_one(self, d, r):
        val = integrate.quad(lambda z: psi_ball_density(d, r, z), 0, 2 * r, epsabs=1e-13, limit=200)[0]
        assert val == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_beta_form_matches(self, d):
        rho = np.linspace(0, 2.0, 401)
        np.testing.assert_allclose(psi_ball_density_beta(d, 1.0, rho), psi_ball_density(d, 1.0, rho), atol=1e-10, rtol=0)

    @given(d=st.sampled_from([1, 2, 3]), r=st.floats(0.1, 50), t=st.floats(0, 1))
    @settings(max_examples=150, deadline=None)
    def test_beta_form_property(self, d, r, t):
        rho = 2 * r * t
        assert psi_ball_density_beta(d, r, rho) == pytest.approx(psi_ball_density(d, r, rho), abs=1e-10 / r)

    @given(r=st.floats(0.1, 20), t=st.floats(0, 1))
    @settings(max_examples=100, deadline=None)
    def test_scaling(self, r, t):
        # psi_{v(r)}(rho) = psi_{v(1)}(rho / r) / r
        assert psi_ball_density(2, r, 2 * r * t) == pytest.approx(psi_ball_density(2, 1.0, 2 * t) / r, rel=1e-12, abs=1e-15)


class TestMCDistance:
    """Monte Carlo pair distances as an oracle for window densities."""

    def test_disk_ks_distance(self):
        h = mc_distance_density(Window.disk(1.0), 100_000, seed=3)
        exact = psi_ball_cdf(2, 1.0, h.edges)
        assert np.max(np.abs(h.cdf_at_edges() - exact)) < 0.01

    def test_mass_inside_diameter(self):
        w = Window.square(1.0)
        dist = mc_distance_samples(w, 100_000, seed=1)
        assert dist.min() >= 0 and dist.max() <= w.diameter

    def test_integrates_to_one(self):
        h = mc_distance_density(Window.square(2.0), 50_000, seed=2)
        assert np.sum(h.density * np.diff(h.edges)) == pytest.approx(1.0, abs=1e-12)

    def test_sample_size_floor(self):
        with pytest.raises(ValueError):
            mc_distance_density(Window.disk(1.0), 1000, seed=0)


class TestPairwiseIntegral:
    """Double window integrals through the distance density."""

    def test_constant(self):
        assert pairwise_integral(lambda z: np.ones_like(np.asarray(z, float)), Window.disk(1.0), 3.0) == pytest.approx(
            (9 * math.pi) ** 2, rel=1e-10
        )

    def test_inverse_distance_disk(self):
        val = pairwise_integral(lambda z: 1.0 / z, Window.disk(1.0))
        assert val == pytest.approx(16 * math.pi / 3, rel=1e-8)
        assert val == pytest.approx(16.755, abs=1e-3)

    @pytest.mark.parametrize("kind", ["disk", "square"])
    def test_against_double_integral_mc(self, kind):
        G = lambda z: np.exp(-3.0 * z)
        w = Window(kind, 1.0)
        x, y = rejection_pairs(kind, 400_000, seed=11)
        m, se = mc_mean(G(np.linalg.norm(x - y, axis=1)))
        area2 = w.area**2
        val = pairwise_integral(G, w, n_samples=400_000, seed=5)
        # square is MC on both sides: combine the two errors
        tol = 3 * area2 * se * (math.sqrt(2) if kind == "square" else 1.0)
        assert abs(val - area2 * m) < tol


class TestC1:
    """Spatial constant ``int z^(-alpha kappa) psi(z) dz``."""

    def test_disk_alpha_one(self):
        assert c1(1, 1.0, Window.disk()) == pytest.approx(DISK_UNIT_INV_DIST, rel=1e-10)
        assert c1(1, 1.0, Window.disk()) == pytest.approx(1.6976527, abs=1e-7)

    def test_kappa_two_against_mc(self):
        x, y = rejection_pairs("disk", 1_000_000, seed=21)
        m, se = mc_mean(np.linalg.norm(x - y, axis=1) ** -1.0)
        assert abs(c1(2, 0.5, Window.disk()) - m) < 3 * se

    @pytest.mark.parametrize("beta", [0.3, 0.8, 1.4])
    def test_square_against_mc(self, beta):
        x, y = rejection_pairs("square", 1_000_000, seed=31)
        m, se = mc_mean(np.linalg.norm(x - y, axis=1) ** -beta)
        assert abs(c1(1, beta, Window.square()) - m) < 3 * se

    def test_square_one_dimensional(self):
        # E|U - V|^-b on [0, 1]: 2 int_0^1 z^-b (1 - z) dz
        b = 0.4
        exact = 2 * integrate.quad(lambda z: z**-b * (1 - z), 0, 1)[0]
        assert c1(1, b, Window.square(d=1)) == pytest.approx(exact, rel=1e-9)

    @pytest.mark.parametrize("w", [Window.disk(), Window.square(), Window.disk(d=3)])
    def test_alpha_to_zero(self, w):
        assert c1(1, 1e-9, w) == pytest.approx(1.0, abs=1e-7)

    def test_disk_three_dimensional(self):
        val = integrate.quad(lambda z: z**-1.5 * psi_ball_density(3, 1.0, z), 0, 2, limit=200)[0]
        assert c1(1, 1.5, Window.disk(d=3)) == pytest.approx(val, rel=1e-8)

    def test_nonintegrable(self):
        with pytest.raises(ValueError):
            c1(2, 1.0, Window.disk())


class TestKernel:
    """Fourier transform of the window indicator."""

    def test_origin(self):
        assert kernel_K(Window.disk(2.0), [0.0, 0.0]) == pytest.approx(4 * math.pi)
        assert kernel_K(Window.square(3.0), [0.0, 0.0]) == pytest.approx(9.0)

    def test_square_sinc_zero(self):
        assert abs(kernel_K(Window.square(1.0), [2 * math.pi, 0.0])) < 1e-15

    def test_disk_bessel(self):
        val = kernel_K(Window.disk(), [0.6, 0.8])
        assert val.real == pytest.approx(2 * math.pi * bessel_j1_series(1.0), abs=1e-13)
        assert val.real == pytest.approx(2.7649194, abs=1e-7)
        assert val.imag == 0.0

    @pytest.mark.parametrize("kind", ["disk", "square"])
    @pytest.mark.parametrize("x", [(0.7, -1.9), (4.0, 2.5)])
    def test_direct_quadrature(self, kind, x):
        # real part of int exp(i<x,u>) du; the imaginary part vanishes by symmetry
        w = Window(kind, 1.3)
        if kind == "disk":
            R = w.r
            lo, hi = lambda u: -math.sqrt(max(R * R - u * u, 0)), lambda u: math.sqrt(max(R * R - u * u, 0))
            ref = integrate.dblquad(lambda v, u: math.cos(x[0] * u + x[1] * v), -R, R, lo, hi, epsabs=1e-11)[0]
        else:
            h = w.r / 2
            ref = integrate.dblquad(lambda v, u: math.cos(x[0] * u + x[1] * v), -h, h, -h, h, epsabs=1e-11)[0]
        assert kernel_K(w, x).real == pytest.approx(ref, abs=1e-8)

    def test_homothety(self):
        w = Window.disk()
        x = np.array([0.3, 1.1])
        assert kernel_K(w.scaled(2.5), x) == pytest.approx(2.5**2 * kernel_K(w, 2.5 * x))

    def test_vectorized_shape(self):
        x = np.random.default_rng(0).normal(size=(5, 7, 2))
        assert kernel_K(Window.square(), x).shape == (5, 7)


class TestC3:
    """Spectral constant and its spatial counterpart."""

    def test_disk_alpha_one(self):
        assert c3_spectral(2, 1.0, Window.disk()) == pytest.approx(32 * math.pi**2 / 3, rel=1e-6)

    def test_disk_value_rounded(self):
        assert c3_spectral(2, 1.0, Window.disk()) == pytest.approx(105.2758, abs=1e-3)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_spatial_spectral_identity_disk(self, alpha):
        w = Window.disk()
        lhs = c2(2, alpha) * c3_spectral(2, alpha, w)
        rhs = w.base_area**2 * c1(1, alpha, w)
        assert lhs == pytest.approx(rhs, rel=0.01)

    @pytest.mark.parametrize("alpha", [0.5, 1.5])
    def test_spatial_spectral_identity_square(self, alpha):
        w = Window.square()
        lhs = c2(2, alpha) * c3_spectral(2, alpha, w)
        assert lhs == pytest.approx(c1(1, alpha, w), rel=0.01)

    def test_disk_one_dimensional(self):
        w = Window.disk(d=1)
        assert c2(1, 0.5) * c3_spectral(1, 0.5, w) == pytest.approx(4 * c1(1, 0.5, w), rel=0.01)

    def test_detail(self):
        res = c3_spectral(2, 1.0, Window.disk(), detail=True)
        assert res.truncation > 0
        assert abs(res.tail_estimate) <= res.tail_bound

    @pytest.mark.parametrize("alpha", [0.0, 2.0, 2.5, 1.9999])
    def test_divergence_guard(self, alpha):
        with pytest.raises(ValueError):
            c3_spectral(2, alpha, Window.disk())

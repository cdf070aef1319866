import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab import fields as F
from mhdlab import spectral as sp
from mhdlab.errors import GridError

from _util import random_real_field


class TestGrid:
    def test_points_are_uniform(self):
        g = sp.Grid.square(16)
        x1, _ = g.points
        assert np.allclose(x1[:, 0], 2 * np.pi * np.arange(16) / 16)

    @pytest.mark.parametrize("n", [6, 9, 0, -2])
    def test_rejects_small_or_odd(self, n):
        with pytest.raises(GridError):
            sp.Grid.square(n)

    def test_nyquist_and_dealias_masks(self):
        g = sp.Grid.square(12)
        k1, k2 = g.wavenumbers
        assert not np.any(g.nyquist_mask & ((np.abs(k1) == 6) | (np.abs(k2) == 6)))
        assert g.max_wavenumber() == 5
        assert np.all(np.abs(np.broadcast_to(k1, g.shape)[g.dealias_mask]) <= 3)


class TestTransforms:
    def test_v1_samples(self, grid32):
        v1 = F.stable_taylor_v1(grid32)
        vals = sp.to_physical(v1)
        i = 8  # x = pi/2
        assert vals[:, i, i] == pytest.approx([1.0, 0.5], abs=1e-14)

    def test_zero_round_trip(self, grid32):
        assert not np.any(sp.to_physical(sp.zeros(grid32)))

    def test_random_round_trip(self, grid32):
        f = random_real_field(grid32, 3)
        back = sp.to_spectral(sp.to_physical(f), grid32)
        assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-13 * f.max_abs()

    def test_shape_mismatch(self, grid32):
        with pytest.raises(GridError):
            sp.to_spectral(np.zeros((2, 16, 16)), grid32)

    def test_resample_preserves_band_limited_field(self, grid32):
        f = F.taylor_field(F.TaylorSpec(2, 3), grid32)
        up = sp.resample(f, sp.Grid.square(64))
        assert np.max(np.abs(sp.resample(up, grid32).coeffs - f.coeffs)) == 0.0


class TestOperators:
    def test_derivative_of_sine(self, grid32):
        f = sp.from_function(lambda x1, x2: np.sin(x2), grid32)
        d = sp.differentiate(f, 1)
        expected = sp.from_function(lambda x1, x2: np.cos(x2), grid32)
        assert np.max(np.abs(d.coeffs - expected.coeffs)) <= 1e-15

    @pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (4, 1)])
    def test_taylor_is_laplace_eigenfield(self, grid32, n, m):
        V = F.taylor_field(F.TaylorSpec(n, m), grid32)
        err = sp.laplacian(V) + V * (n * n + m * m)
        assert err.max_abs() <= 1e-13 * V.max_abs()

    def test_beltrami_laplacian_and_curl(self, grid3d):
        B = F.beltrami_field(F.BeltramiSpec.b0(2), grid3d)
        assert (sp.laplacian(B) + B * 4).max_abs() <= 1e-14
        assert (sp.curl(B) - B * 2).max_abs() <= 1e-12 * B.max_abs()

    def test_invert_laplacian(self, grid32):
        V = F.taylor_field(F.TaylorSpec(2, 1), grid32)
        back = sp.invert_laplacian(V * -5.0)
        assert (back - V).max_abs() <= 1e-15
        f = random_real_field(grid32, 5)
        f = f.with_coeffs(f.coeffs * (grid32.k2 > 0), zero_mean=True)
        assert (sp.laplacian(sp.invert_laplacian(f)) - f).max_abs() <= 1e-13 * f.max_abs()

    def test_invert_laplacian_rejects_mean(self, grid32):
        const = sp.to_spectral(np.ones(grid32.shape), grid32)
        with pytest.raises(ValueError):
            sp.invert_laplacian(const)

    def test_leray_fixes_solenoidal_and_kills_gradients(self, grid32):
        V = F.taylor_field(F.TaylorSpec(3, 2), grid32)
        assert (sp.leray_project(V) - V).max_abs() <= 1e-15
        phi = sp.from_function(lambda x1, x2: np.sin(x1) * np.sin(x2), grid32)
        assert sp.leray_project(sp.gradient(phi)).max_abs() <= 1e-15

    def test_curl_identities(self, grid32):
        phi = sp.from_function(lambda x1, x2: np.cos(2 * x1) * np.sin(x2), grid32)
        assert sp.curl(sp.gradient(phi)).max_abs() <= 1e-15
        psi = sp.from_function(lambda x1, x2: np.sin(x1) * np.sin(x2), grid32, zero_mean=True)
        lhs = sp.curl(sp.perp_gradient(psi))
        assert (lhs + sp.laplacian(psi)).max_abs() <= 1e-15

    def test_heat_evolve(self, grid32):
        V = F.taylor_field(F.TaylorSpec(2, 2), grid32)
        out = sp.heat_evolve(V, 0.7, 0.3)
        assert (out - V * math.exp(-0.7 * 8 * 0.3)).max_abs() <= 1e-15
        assert np.array_equal(sp.heat_evolve(V, 1.0, 0.0).coeffs, V.coeffs)

    @pytest.mark.parametrize("t", [0.1, 1.0])
    def test_heat_contracts_h2(self, grid32, t):
        f = random_real_field(grid32, 11)
        f = f.with_coeffs(f.coeffs * (grid32.k2 > 0))
        assert sp.sobolev_norm(sp.heat_evolve(f, 1.0, t), 2) <= math.exp(-t) * sp.sobolev_norm(f, 2)


class TestNorms:
    def test_v11_l2_norm(self, grid32):
        V = F.taylor_field(F.TaylorSpec(1, 1), grid32)
        assert sp.sobolev_norm(V, 0) == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)

    def test_v11_l2_by_quadrature(self):
        g = sp.Grid.square(256)
        x1, x2 = g.points
        vals = np.array([np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2)])
        quad = math.sqrt(np.sum(vals**2) * (2 * np.pi / 256) ** 2)
        assert quad == pytest.approx(math.pi * math.sqrt(2), rel=1e-12)

    @pytest.mark.parametrize("n,m", [(1, 2), (3, 3)])
    def test_h1_of_eigenfield(self, grid32, n, m):
        V = F.taylor_field(F.TaylorSpec(n, m), grid32)
        N2 = n * n + m * m
        assert sp.sobolev_norm(V, 1) ** 2 == pytest.approx((1 + N2) * sp.sobolev_norm(V, 0) ** 2, rel=1e-13)

    def test_zero_norm(self, grid32):
        assert sp.sobolev_norm(sp.zeros(grid32), 3) == 0.0

    def test_negative_index(self, grid32):
        with pytest.raises(ValueError):
            sp.sobolev_norm(sp.zeros(grid32), -1)


class TestEvaluation:
    def test_v1_point(self, grid32):
        v1 = F.stable_taylor_v1(grid32)
        assert sp.evaluate_at(v1, [0.0, np.pi / 2]) == pytest.approx([1.0, 0.0], abs=1e-15)

    def test_b0_at_origin(self, grid3d):
        B = F.beltrami_field(F.BeltramiSpec.b0(2), grid3d)
        expected = (2 * np.pi) ** -1.5 * np.array([0.0, 1.0, 0.0])
        assert np.allclose(sp.evaluate_at(B, [0.0, 0.0, 0.0]), expected, atol=1e-16)

    def test_matches_samples(self, grid32):
        f = random_real_field(grid32, 2, kmax=6)
        pts = np.stack([p.ravel() for p in grid32.points], axis=1)
        vals = sp.Evaluator(f)(pts).T.reshape(f.coeffs.shape)
        assert np.max(np.abs(vals - sp.to_physical(f))) <= 1e-13 * np.abs(vals).max()

    def test_jacobian_matches_derivative(self, grid32):
        f = random_real_field(grid32, 7, kmax=5)
        x = np.array([0.3, 1.7])
        jac = sp.Evaluator(f).jacobian(x)
        d1 = sp.evaluate_at(sp.differentiate(f, 0), x)
        assert jac[:, 0] == pytest.approx(d1, abs=1e-12)


class TestNormSeries:
    def test_rejects_non_increasing_and_negative(self):
        s = sp.NormSeries()
        s.append(0.0, {"a": 1.0})
        with pytest.raises(ValueError):
            s.append(0.0, {"a": 1.0})
        with pytest.raises(ValueError):
            s.append(1.0, {"a": -1.0})

    def test_rows_sorted(self):
        s = sp.NormSeries()
        s.append(0.0, {"b": 2.0, "a": 1.0})
        s.append(1.0, {"a": 0.5, "b": 0.2})
        assert [r[:2] for r in s.rows()] == [(0.0, "a"), (0.0, "b"), (1.0, "a"), (1.0, "b")]


@settings(max_examples=50)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([8, 12, 16]))
def test_differentiation_commutes_with_transform(seed, n):
    g = sp.Grid.square(n)
    f = random_real_field(g, seed, ncomp=1, kmax=n // 3)
    d = sp.to_physical(sp.differentiate(f, 0, 2))
    lap_part = sp.to_physical(sp.laplacian(f)) - sp.to_physical(sp.differentiate(f, 1, 2))
    assert np.max(np.abs(d - lap_part)) <= 1e-11 * max(1.0, np.abs(d).max())

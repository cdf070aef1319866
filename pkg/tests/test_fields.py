import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab import fields as F
from mhdlab import spectral as sp
from mhdlab import topology as T
from mhdlab.errors import ResolutionError


def convective(f: sp.SpectralField) -> np.ndarray:
    """(f . grad) f on the grid of f (exact when f is band-limited to a third of it)."""
    vals = sp.to_physical(f)
    grads = [sp.to_physical(sp.differentiate(f, j)) for j in range(f.dim)]
    return sum(vals[j] * grads[j] for j in range(f.dim))


class TestTaylor:
    def test_point_value(self, grid32):
        V = F.taylor_field(F.TaylorSpec(1, 1), grid32)
        assert sp.evaluate_at(V, [np.pi / 2, 0.0]) == pytest.approx([1.0, 0.0], abs=1e-15)

    def test_l2_norm(self, grid32):
        V = F.taylor_field(F.TaylorSpec(1, 1), grid32)
        assert sp.sobolev_norm(V, 0) == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)

    @pytest.mark.parametrize("family", [1, 2, 3, 4])
    @pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (3, 0)])
    def test_families_are_solenoidal_eigenfields(self, grid32, family, n, m):
        V = F.taylor_field(F.TaylorSpec(n, m, family), grid32)
        assert sp.divergence_error(V) <= 1e-14
        assert (sp.laplacian(V) + V * (n * n + m * m)).max_abs() <= 1e-13

    @pytest.mark.parametrize("family", [1, 2, 3, 4])
    @pytest.mark.parametrize("n,m", [(1, 2), (2, 0)])
    def test_stream_function(self, grid32, family, n, m):
        spec = F.TaylorSpec(n, m, family)
        psi = F.taylor_stream(spec, grid32)
        assert (sp.perp_gradient(psi) - F.taylor_field(spec, grid32)).max_abs() <= 1e-15
        assert sp.mean_value(psi)[0] == 0.0
        assert (sp.laplacian(psi) + psi * spec.eigenvalue).max_abs() <= 1e-14

    def test_family1_stream_formula(self, grid32):
        psi = F.taylor_stream(F.TaylorSpec(2, 3), grid32)
        x1, x2 = grid32.points
        assert np.max(np.abs(sp.to_physical(psi)[0] - np.sin(2 * x1) * np.sin(3 * x2))) <= 1e-15

    def test_under_resolved(self):
        with pytest.raises(ResolutionError):
            F.taylor_field(F.TaylorSpec(5, 1), sp.Grid.square(16))

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            F.TaylorSpec(0, 1)
        with pytest.raises(ValueError):
            F.TaylorSpec(1, 1, family=5)


class TestV1:
    def test_value(self, grid32):
        v1 = F.stable_taylor_v1(grid32)
        assert sp.evaluate_at(v1, [np.pi / 2, np.pi / 2]) == pytest.approx([1.0, 0.5], abs=1e-15)

    def test_stationary_euler_with_pressure(self, grid32):
        v1 = F.stable_taylor_v1(grid32)
        p = sp.from_function(lambda x1, x2: 0.5 * np.cos(x1) * np.cos(x2), grid32)
        # stationary Euler in the form (v.grad)v + grad P = 0
        resid = convective(v1) + sp.to_physical(sp.gradient(p))
        assert np.max(np.abs(resid)) <= 1e-12

    def test_critical_points(self, grid32):
        pts = T.find_critical_points(F.stable_taylor_v1(grid32))
        saddles = sorted(tuple(np.round(c.position, 10)) for c in pts if c.kind == "saddle")
        centers = sorted(tuple(np.round(c.position, 10)) for c in pts if c.kind == "center")
        pi = round(np.pi, 10)
        assert saddles == [(0.0, 0.0), (pi, pi)]
        assert centers == [(0.0, pi), (pi, 0.0)]


class TestBeltrami:
    def test_b0_formula(self, grid3d):
        B = F.beltrami_field(F.BeltramiSpec.b0(2), grid3d)
        _, _, x3 = grid3d.points
        a = (2 * np.pi) ** -1.5
        expected = np.array([a * np.sin(2 * x3), a * np.cos(2 * x3), 0 * x3])
        assert np.max(np.abs(sp.to_physical(B) - expected)) <= 1e-16

    def test_force_free(self, grid3d):
        B = F.beltrami_field(F.BeltramiSpec.b0(2, amplitude=1.0), grid3d)
        mag = sp.to_spectral(0.5 * np.sum(sp.to_physical(B) ** 2, axis=0), grid3d)
        resid = convective(B) - sp.to_physical(sp.gradient(mag))
        assert np.max(np.abs(resid)) <= 1e-12

    def test_general_modes(self, grid3d):
        spec = F.BeltramiSpec(3, (((0, 0, 3), (1.0, 0.0, 0.0)), ((3, 0, 0), (0.0, 1.0, 0.0))))
        B = F.beltrami_field(spec, grid3d)
        assert sp.divergence_error(B) <= 1e-14
        assert (sp.curl(B) - B * 3).max_abs() <= 1e-12

    def test_empty_is_zero(self, grid3d):
        assert F.beltrami_field(F.BeltramiSpec(2, ()), grid3d).max_abs() == 0.0

    def test_rejects_bad_modes(self):
        with pytest.raises(ValueError):
            F.BeltramiSpec(2, (((0, 0, 1), (1.0, 0.0, 0.0)),))
        with pytest.raises(ValueError):
            F.BeltramiSpec(2, (((0, 0, 2), (0.0, 0.0, 1.0)),))


class TestShear:
    def test_identity_at_zero(self, grid64):
        V = F.taylor_field(F.TaylorSpec(1, 1, 4), grid64)
        out = F.shear_pullback(V, F.ShearSpec(0.0))
        assert (out - V).max_abs() <= 1e-15

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
    def test_2d_matches_formula(self, grid64, eps):
        b = F.instant2d_datum(grid64, eps)
        pts = np.stack([p for p in grid64.points], axis=-1)
        expected = np.moveaxis(F.instant2d_formula(pts, eps), -1, 0)
        assert np.max(np.abs(sp.to_physical(b) - expected)) <= 1e-12
        assert sp.divergence_error(b) <= 1e-12

    def test_2d_stream_formula(self, grid64):
        eps = 0.1
        psi = T.stream_function(F.instant2d_datum(grid64, eps))
        pts = np.stack([p for p in grid64.points], axis=-1)
        expected = F.instant2d_stream_formula(pts, eps)
        diff = sp.to_physical(psi)[0] - expected
        assert np.max(np.abs(diff - diff.mean())) <= 1e-12

    def test_linear_profile_requires_integer_eps(self):
        with pytest.raises(ValueError):
            F.ShearSpec(0.1, profile="linear")
        F.ShearSpec(1.0, profile="linear")

    def test_periodic_profile_matches_linear_at_saddles(self):
        x = np.array([0.0, np.pi])
        assert F.periodic_shear_profile(x) == pytest.approx(x, abs=1e-15)
        assert F.periodic_shear_slope(x) == pytest.approx([1.0, 1.0], abs=1e-15)

    @pytest.mark.parametrize("p,q", [(1, 1), (1, 2)])
    def test_3d_matches_formula(self, p, q):
        g = sp.Grid.square(48, 3)
        b = F.instant3d_datum(g, 0.05, 1.0, p, q)
        pts = np.stack([x for x in g.points], axis=-1)
        expected = np.moveaxis(F.instant3d_formula(pts, 0.05, 1.0, p, q), -1, 0)
        assert np.max(np.abs(sp.to_physical(b) - expected)) <= 1e-12
        assert sp.divergence_error(b) <= 1e-12

    def test_3d_needs_coprime(self):
        with pytest.raises(ValueError):
            F.ShearSpec(0.1, dim=3, p=2, q=2)


class TestReconnectionDatum:
    def test_delta(self):
        assert F.reconnection_delta(1.0, 2, 2, 2, 0.1) == pytest.approx(0.1 / 8**1.5, rel=1e-15)
        assert F.reconnection_delta(1.0, 2, 2, 2, 0.1) == pytest.approx(4.4194e-3, abs=1e-7)

    def test_count(self, grid64):
        m0, _ = F.reconnection_datum_2d(1.0, 2, 2, 2, 0.1, grid64)
        pts = T.find_critical_points(m0)
        assert len(pts) == 32
        assert sum(c.kind == "saddle" for c in pts) == 16

    def test_zero_delta(self, grid32):
        m0, delta = F.reconnection_datum_2d(1.0, 2, 3, 2, 0.1, grid32, delta=0.0)
        V = F.taylor_field(F.TaylorSpec(2, 3), grid32)
        assert delta == 0.0
        assert (m0 - V * (1 / math.sqrt(13))).max_abs() <= 1e-16

    def test_parameter_checks(self, grid32):
        with pytest.raises(ValueError):
            F.reconnection_datum_2d(1.0, 2, 2, 1, 0.1, grid32)
        with pytest.raises(ValueError):
            F.reconnection_datum_2d(1.0, 2, 2, 2, 1.5, grid32)


class TestRandomVelocity:
    def test_zero(self, grid32):
        assert F.random_velocity(0.0, 4, 1, grid32).max_abs() == 0.0

    def test_determinism(self, grid32):
        a = F.random_velocity(1.0, 4, 9, grid32)
        b = F.random_velocity(1.0, 4, 9, grid32)
        assert np.array_equal(a.coeffs, b.coeffs)

    @settings(max_examples=25)
    @given(R=st.floats(1e-3, 1e3), r=st.integers(0, 4), seed=st.integers(0, 2**31))
    def test_norm_and_structure(self, R, r, seed):
        g = sp.Grid.square(32)
        u = F.random_velocity(R, r, seed, g)
        assert sp.sobolev_norm(u, r) == pytest.approx(R, rel=1e-10)
        assert sp.divergence_error(u) <= 1e-13
        assert sp.conjugate_symmetry_error(u) <= 1e-13
        assert not sp.check_flags(u)


def test_lattice_points():
    saddles, centers = F.lattice_points(2, 3)
    assert len(saddles) == len(centers) == 24
    V = F.taylor_field(F.TaylorSpec(2, 3), sp.Grid.square(32))
    assert np.max(np.abs(sp.Evaluator(V)(np.vstack([saddles, centers])))) <= 1e-13


def test_sup_norm_scaling():
    pairs = [(1, 1), (2, 2), (3, 1), (1, 4)]
    rows = F.v_n_sup_scaling(pairs, sp.Grid.square(64))
    for (n, m), (N, sup) in zip(pairs, rows):
        assert sup == pytest.approx(max(n, m), rel=1e-12)
        assert N / math.sqrt(2) <= sup * (1 + 1e-12) and sup <= N

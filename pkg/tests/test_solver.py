import math

import numpy as np
import pytest

from mhdlab import fields as F
from mhdlab import solver as S
from mhdlab import spectral as sp
from mhdlab.errors import CflError, NumericalError


def taylor_state(grid, n=2, m=2, amp=1.0):
    return S.MhdState.magnetic_only(F.taylor_field(F.TaylorSpec(n, m, 1, amp), grid))


def random_state(grid, seed=0, R=1.0):
    return S.MhdState(0.0, F.random_velocity(R, 0, seed, grid), F.random_velocity(R, 0, seed + 1, grid))


class TestParams:
    @pytest.mark.parametrize("kw", [dict(nu=-1.0), dict(eta=0.0), dict(dt=0.0), dict(t_end=-1.0),
                                    dict(integrator="Euler")])
    def test_rejects(self, kw):
        base = dict(nu=1.0, eta=1.0, dt=1e-2, t_end=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            S.MhdParams(**base)


class TestExactSolutions:
    @pytest.mark.parametrize("integrator", ["IFRK4", "ETDRK4"])
    def test_taylor_decay(self, grid32, integrator):
        st = taylor_state(grid32, 2, 3)
        params = S.MhdParams(1.0, 0.5, 1e-2, 0.3, integrator=integrator)
        run = S.evolve(st, params)
        exact = st.b * math.exp(-0.5 * 13 * 0.3)
        assert sp.sobolev_norm(run.final.b - exact) <= 1e-12 * sp.sobolev_norm(exact)
        assert run.final.u.max_abs() <= 1e-14

    def test_beltrami_pair(self):
        g = sp.Grid.square(16, 3)
        B = F.beltrami_field(F.BeltramiSpec.b0(2, 1.0), g)
        params = S.MhdParams(0.5, 1.0, 1e-2, 0.1)
        run = S.evolve(S.MhdState(0.0, B, B), params)
        for f, coef in ((run.final.u, 0.5), (run.final.b, 1.0)):
            exact = B * math.exp(-coef * 4 * 0.1)
            assert sp.sobolev_norm(f - exact) <= 1e-10 * sp.sobolev_norm(exact)

    def test_zero_state(self, grid32):
        run = S.evolve(S.MhdState.magnetic_only(sp.zeros(grid32)), S.MhdParams(1, 1, 1e-2, 0.1))
        assert run.final.u.max_abs() == 0.0 and run.final.b.max_abs() == 0.0

    def test_stokes_mode_decays_at_nu(self, grid32):
        u = F.taylor_field(F.TaylorSpec(1, 0), grid32)
        run = S.evolve(S.MhdState(0.0, u, sp.zeros(grid32)), S.MhdParams(10.0, 1.0, 1e-3, 0.2))
        assert (run.final.u - u * math.exp(-10 * 0.2)).max_abs() <= 1e-14


class TestEvolve:
    def test_first_snapshot_is_input(self, grid32):
        st = random_state(grid32)
        run = S.evolve(st, S.MhdParams(1, 1, 1e-2, 0.05), [0.02])
        assert run.snapshots[0] is st
        assert [s.t for s in run.snapshots] == pytest.approx([0.0, 0.02, 0.05])

    def test_t_end_zero(self, grid32):
        st = random_state(grid32)
        run = S.evolve(st, S.MhdParams(1, 1, 1e-2, 0.0))
        assert len(run.snapshots) == 1 and run.steps == 0

    def test_deterministic(self, grid32):
        st = random_state(grid32, 4)
        params = S.MhdParams(0.1, 0.1, 1e-2, 0.1)
        a, b = S.evolve(st, params), S.evolve(st, params)
        assert np.array_equal(a.final.u.coeffs, b.final.u.coeffs)
        assert np.array_equal(a.final.b.coeffs, b.final.b.coeffs)
        assert a.ledger.energy == b.ledger.energy

    def test_energy_decreases(self, grid32):
        run = S.evolve(random_state(grid32, 8), S.MhdParams(0.05, 0.05, 1e-2, 1.0))
        assert run.ledger.energy[-1] <= run.ledger.energy[0]
        assert run.ledger.is_monotone()

    def test_norm_series_labels(self, grid32):
        run = S.evolve(random_state(grid32), S.MhdParams(1, 1, 1e-2, 0.05, norm_order=2))
        assert set(run.norms.labels()) == {f"{p}_H{s}" for p in "ub" for s in range(3)}
        assert len(run.norms) == run.steps + 1

    def test_snapshot_times_out_of_range(self, grid32):
        with pytest.raises(ValueError):
            S.evolve(random_state(grid32), S.MhdParams(1, 1, 1e-2, 0.1), [0.2])

    def test_rejects_compressive_data(self, grid32):
        phi = sp.from_function(lambda x1, x2: np.sin(x1 + x2), grid32)
        bad = sp.gradient(phi)
        with pytest.raises(ValueError):
            S.evolve(S.MhdState(0.0, sp.zeros(grid32), bad), S.MhdParams(1, 1, 1e-2, 0.1))

    def test_nan_input_is_numerical_error(self, grid32):
        b = F.taylor_field(F.TaylorSpec(1, 1), grid32)
        c = b.coeffs.copy()
        c[0, 1, 0] = np.nan
        bad = b.with_coeffs(c)
        with pytest.raises(NumericalError) as info:
            S.evolve(S.MhdState(0.0, sp.zeros(grid32), bad), S.MhdParams(1, 1, 1e-2, 0.1))
        assert info.value.last_healthy_time is None

    def test_freeze_velocity_requires_zero_u(self, grid32):
        with pytest.raises(ValueError):
            S.evolve(random_state(grid32), S.MhdParams(1, 1, 1e-2, 0.1, freeze_velocity=True))


class TestStep:
    def test_cfl_violation(self, grid32):
        st = taylor_state(grid32, amp=100.0)
        bound = S.cfl_bound(st)
        with pytest.raises(CflError) as info:
            S.step(st, S.MhdParams(1, 1, 1.0, 1.0), dt=10 * bound)
        assert info.value.required == pytest.approx(bound)

    def test_zero_state_has_infinite_bound(self, grid32):
        assert S.cfl_bound(S.MhdState.magnetic_only(sp.zeros(grid32))) == math.inf

    @pytest.mark.parametrize("integrator", ["IFRK4", "ETDRK4"])
    def test_fourth_order(self, grid32, integrator):
        st = random_state(grid32, 2, R=3.0)
        ref = S.evolve(st, S.MhdParams(0.05, 0.05, 2.5e-4, 0.2, integrator=integrator)).final
        errs = []
        for dt in (0.02, 0.01):
            fin = S.evolve(st, S.MhdParams(0.05, 0.05, dt, 0.2, integrator=integrator)).final
            errs.append(sp.sobolev_norm(fin.b - ref.b) + sp.sobolev_norm(fin.u - ref.u))
        assert errs[0] / errs[1] >= 12.0

    def test_integrators_agree(self, grid32):
        st = random_state(grid32, 5)
        a = S.evolve(st, S.MhdParams(0.1, 0.1, 1e-3, 0.1)).final
        b = S.evolve(st, S.MhdParams(0.1, 0.1, 1e-3, 0.1, integrator="ETDRK4")).final
        assert sp.sobolev_norm(a.b - b.b) <= 1e-9 * sp.sobolev_norm(a.b)


class TestEnergyIdentity:
    def test_zero_run(self, grid32):
        run = S.evolve(S.MhdState.magnetic_only(sp.zeros(grid32)), S.MhdParams(1, 1, 1e-2, 0.05))
        assert S.energy_identity_residual(run.ledger).max == 0.0

    def test_taylor_run(self, grid32):
        st = taylor_state(grid32, 1, 1)
        run = S.evolve(st, S.MhdParams(1, 1, 2e-4, 0.01))
        assert S.energy_identity_residual(run.ledger).max <= 1e-6 * run.ledger.energy[0]

    def test_second_order_in_dt(self, grid32):
        st = random_state(grid32, 3)
        res = []
        for dt in (2e-3, 1e-3):
            run = S.evolve(st, S.MhdParams(0.05, 0.05, dt, 0.02))
            res.append(S.energy_identity_residual(run.ledger).max)
        assert res[0] / res[1] >= 3.5

    def test_needs_three_records(self, grid32):
        with pytest.raises(ValueError):
            S.energy_identity_residual(S.EnergyLedger())


class TestPressure:
    @pytest.mark.parametrize("n,m", [(1, 1), (2, 3)])
    def test_taylor(self, grid32, n, m):
        t, eta = 0.1, 1.0
        N2 = n * n + m * m
        st = S.MhdState(t, sp.zeros(grid32), F.taylor_field(F.TaylorSpec(n, m), grid32) * math.exp(-eta * N2 * t))
        p = sp.to_physical(S.recover_pressure(st))[0]
        x1, x2 = grid32.points
        # half the magnetic pressure sum for the family-1 field
        expected = 0.5 * math.exp(-2 * eta * N2 * t) * (m * m * np.sin(n * x1) ** 2 + n * n * np.sin(m * x2) ** 2)
        diff = p - expected
        assert np.max(np.abs(diff - diff.mean())) <= 1e-10

    def test_beltrami(self, grid3d):
        M = 2.0
        B = F.beltrami_field(F.BeltramiSpec.b0(2, 1.0), grid3d) * M
        p = sp.to_physical(S.recover_pressure(S.MhdState(0.0, sp.zeros(grid3d), B)))[0]
        mag = np.sum(sp.to_physical(B) ** 2, axis=0)
        diff = p + 0.5 * mag
        assert np.max(np.abs(diff - diff.mean())) <= 1e-12

    def test_v1_euler_pressure(self, grid32):
        v1 = F.stable_taylor_v1(grid32)
        p = sp.to_physical(S.recover_pressure(S.MhdState(0.0, v1, sp.zeros(grid32))))[0]
        x1, x2 = grid32.points
        diff = p - 0.5 * np.cos(x1) * np.cos(x2)
        assert np.max(np.abs(diff - diff.mean())) <= 1e-12

    def test_zero(self, grid32):
        assert S.recover_pressure(S.MhdState.magnetic_only(sp.zeros(grid32))).max_abs() == 0.0


class TestDuhamel:
    def _ref(self, V, eta, N2):
        return lambda t: V * math.exp(-eta * N2 * t)

    def test_zero_perturbation(self, grid32):
        V = F.taylor_field(F.TaylorSpec(2, 2), grid32)
        run = S.evolve(S.MhdState.magnetic_only(V), S.MhdParams(1, 1, 1e-2, 0.2), [0.1])
        rep = S.duhamel_decompose(run, sp.zeros(grid32), self._ref(V, 1.0, 8))
        assert rep.remainder() <= 1e-12 * sp.sobolev_norm(V, 3)

    def test_frozen_velocity_is_linear(self, grid32):
        V = F.taylor_field(F.TaylorSpec(2, 2), grid32)
        h0 = F.stable_taylor_v1(grid32, 0.1)
        params = S.MhdParams(1, 1, 1e-2, 0.5, freeze_velocity=True)
        run = S.evolve(S.MhdState.magnetic_only(V + h0), params, [0.25])
        rep = S.duhamel_decompose(run, h0, self._ref(V, 1.0, 8))
        assert np.max(rep.remainder()) <= 1e-12

    def test_nonlinear_remainder_is_small(self, grid32):
        V = F.taylor_field(F.TaylorSpec(2, 2), grid32) * (1 / math.sqrt(8))
        h0 = F.stable_taylor_v1(grid32, 4.4e-3)
        run = S.evolve(S.MhdState.magnetic_only(V + h0), S.MhdParams(1, 1, 1e-2, 1.0), [0.5])
        rep = S.duhamel_decompose(run, h0, self._ref(V, 1.0, 8))
        D = rep.series.array("D_H3")
        lin = rep.series.array("lin_H3")
        assert D[-1] <= 0.1 * lin[-1]


class TestDifferenceNorms:
    def test_identical_and_symmetric(self, grid32):
        st = random_state(grid32, 1)
        params = S.MhdParams(1, 1, 1e-2, 0.05)
        a = S.evolve(st, params, [0.02])
        b = S.evolve(S.MhdState(0.0, st.u * 1.001, st.b), params, [0.02])
        zero = S.difference_norms(a, a, r=2)
        assert all(np.all(zero.array(l) == 0.0) for l in zero.labels())
        ab, ba = S.difference_norms(a, b, r=2), S.difference_norms(b, a, r=2)
        for label in ab.labels():
            assert np.array_equal(ab.array(label), ba.array(label))

    def test_mismatched_times(self, grid32):
        st = random_state(grid32, 1)
        a = S.evolve(st, S.MhdParams(1, 1, 1e-2, 0.05), [0.02])
        b = S.evolve(st, S.MhdParams(1, 1, 1e-2, 0.05), [0.03])
        with pytest.raises(ValueError):
            S.difference_norms(a, b)


class TestGauge:
    def test_taylor(self, grid32):
        st = taylor_state(grid32, 2, 1)
        assert S.induction_gauge_residual(st, S.MhdParams(1, 1, 1e-2, 1)) <= 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_pair(self, grid32, seed):
        st = random_state(grid32, seed, R=2.0)
        psi = sp.invert_laplacian(-sp.curl(st.b))
        assert S.induction_gauge_residual(st, S.MhdParams(0.3, 0.2, 1e-2, 1)) <= 1e-9 * sp.sobolev_norm(psi)

    def test_3d_rejected(self, grid3d):
        with pytest.raises(ValueError):
            S.induction_gauge_residual(S.MhdState.magnetic_only(sp.zeros(grid3d)), S.MhdParams(1, 1, 1e-2, 1))


def test_exact_rhs_matches_linear_part_for_eigenfield(grid32):
    st = taylor_state(grid32, 1, 2)
    du, db = S.exact_rhs(st, S.MhdParams(1.0, 0.7, 1e-2, 1.0))
    du, db = sp.resample(du, grid32), sp.resample(db, grid32)
    assert (db + st.b * (0.7 * 5)).max_abs() <= 1e-13
    assert du.max_abs() <= 1e-13


def test_gamma_tilde(grid32):
    z = sp.zeros(grid32)
    assert S.gamma_tilde(z, z, z, z) == 1.0

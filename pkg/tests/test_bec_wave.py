import numpy as np
import pytest

from wavefront import bec_wave as bw
from wavefront.ensemble import parse_ensemble, regular
from wavefront.errors import (
    ApproximationBreakdown,
    RegimeError,
    SolverError,
)
from wavefront.profiles import SolverGrid


ENS36 = regular(3, 6)
ENS34 = regular(3, 4)


def fixed_point_oracle(eps, ens, tol=1e-13):
    """Plain fixed-point iteration from full erasure, independent of the library path."""
    x = 1.0
    for _ in range(10**6):
        x_next = eps * ens.lam(1.0 - ens.rho(1.0 - x))
        if abs(x_next - x) < tol:
            return x_next
        x = x_next
    raise AssertionError("oracle did not converge")


class TestSingleSystem:
    def test_de_step_values(self):
        ch = bw.BecChannel(0.5)
        # direct arithmetic: 0.5 * (1 - 0.5^5)^2
        assert bw.de_step(0.5, ch, ENS36) == pytest.approx(0.5 * (1 - 0.5**5) ** 2, abs=1e-15)
        assert bw.de_step(0.0, ch, ENS36) == 0.0
        assert bw.de_step(1.0, bw.BecChannel(1.0), ENS36) == pytest.approx(1.0)

    def test_de_step_range_and_monotone(self):
        ch = bw.BecChannel(0.7)
        x = np.linspace(0, 1, 1001)
        out = bw.de_step(x, ch, ENS36)
        assert np.all(out >= 0) and np.all(out <= ch.epsilon + 1e-15)
        assert np.all(np.diff(out) >= -1e-15)

    def test_fixed_point_above_threshold(self):
        rep = bw.bp_fixed_point(bw.BecChannel(0.46), ENS36)
        assert rep.converged
        assert rep.x_bp == pytest.approx(fixed_point_oracle(0.46, ENS36), abs=1e-10)
        assert rep.x_bp == pytest.approx(0.3789, abs=5e-4)
        # residual invariant
        resid = rep.x_bp - bw.de_step(rep.x_bp, bw.BecChannel(0.46), ENS36)
        assert abs(resid) < 1e-12

    def test_fixed_point_below_threshold(self):
        rep = bw.bp_fixed_point(bw.BecChannel(0.40), ENS36)
        assert rep.x_bp == 0.0

    def test_fixed_point_zero_channel(self):
        rep = bw.bp_fixed_point(bw.BecChannel(0.0), ENS36)
        assert rep.x_bp == 0.0 and rep.converged

    def test_bp_threshold_values(self):
        assert bw.bp_threshold(ENS34) == pytest.approx(0.6473, abs=5e-4)
        assert bw.bp_threshold(ENS36) == pytest.approx(0.4294, abs=5e-4)

    def test_bp_threshold_degenerate_cycle_code(self):
        # lambda'(0) rho'(1) eps = eps: stability boundary sits at eps = 1
        assert bw.bp_threshold(regular(2, 2)) == pytest.approx(1.0, abs=1e-3)

    def test_potential_zero_at_origin(self):
        for ens in (ENS36, ENS34, regular(5, 10)):
            for eps in (0.1, 0.45, 0.9):
                assert bw.potential(0.0, bw.BecChannel(eps), ens) == 0.0

    def test_potential_vanishes_at_map(self):
        for ens in (ENS36, ENS34):
            eps_map = bw.map_threshold(ens)
            ch = bw.BecChannel(eps_map)
            x_bp = bw.bp_fixed_point(ch, ens).x_bp
            assert bw.potential(x_bp, ch, ens) == pytest.approx(0.0, abs=1e-4)

    def test_map_threshold_values(self):
        assert bw.map_threshold(ENS34) == pytest.approx(0.7456, abs=5e-4)
        assert bw.map_threshold(ENS36) == pytest.approx(0.4881, abs=5e-4)

    def test_energy_gap_positive_between_thresholds(self):
        gap = bw.energy_gap(bw.BecChannel(0.465), ENS36)
        assert gap > 0
        assert gap == pytest.approx(
            bw.potential(fixed_point_oracle(0.465, ENS36), bw.BecChannel(0.465), ENS36),
            abs=1e-10,
        )

    def test_energy_gap_vanishes_at_map_for_many_ensembles(self):
        for ens in (ENS34, ENS36, regular(5, 10), regular(4, 12)):
            eps_map = bw.map_threshold(ens)
            assert bw.energy_gap(bw.BecChannel(eps_map), ens) == pytest.approx(0.0, abs=1e-4)

    def test_energy_gap_below_bp_raises(self):
        with pytest.raises(RegimeError):
            bw.energy_gap(bw.BecChannel(0.40), ENS36)


class TestCoupledChain:
    def test_all_zero_is_fixed(self):
        state = bw.CoupledState(w=3, L=20, values=np.zeros(23))
        out = bw.coupled_step(state, bw.BecChannel(0.46), ENS36)
        assert np.all(out.values == 0.0)

    def test_w1_reduces_to_single_system(self):
        rng = np.random.default_rng(0)
        vals = rng.random(31)
        state = bw.CoupledState(w=1, L=30, values=vals)
        ch = bw.BecChannel(0.43)
        out = bw.coupled_step(state, ch, ENS36)
        np.testing.assert_allclose(out.values, bw.de_step(vals, ch, ENS36), atol=1e-14)

    def test_boundary_stays_decoded(self):
        traj = bw.run_coupled(bw.BecChannel(0.46), ENS36, L=30, w=3, snapshot_every=5, max_iter=50)
        for _, vals in traj.snapshots:
            assert np.all(vals[:2] == 0.0)
            assert np.all((vals >= 0) & (vals <= 1))

    def test_order_preservation(self):
        # pointwise smaller states stay smaller under one step
        rng = np.random.default_rng(42)
        ch = bw.BecChannel(0.47)
        for _ in range(200):
            w = int(rng.integers(1, 6))
            L = int(rng.integers(8, 40))
            a = rng.random(L + w)
            b = np.clip(a + rng.random(L + w) * (1 - a), 0, 1)
            a[: w - 1] = 0.0
            b[: w - 1] = 0.0
            sa = bw.coupled_step(bw.CoupledState(w=w, L=L, values=a), ch, ENS36)
            sb = bw.coupled_step(bw.CoupledState(w=w, L=L, values=b), ch, ENS36)
            assert np.all(sa.values <= sb.values + 1e-12)

    def test_monotone_profiles_stay_monotone(self):
        rng = np.random.default_rng(7)
        ch = bw.BecChannel(0.46)
        for _ in range(100):
            w = int(rng.integers(2, 6))
            L = int(rng.integers(10, 50))
            raw = np.sort(rng.random(L + w))
            raw[: w - 1] = 0.0
            s = bw.coupled_step(bw.CoupledState(w=w, L=L, values=raw), ch, ENS36)
            assert np.all(np.diff(s.values) >= -1e-12)

    def test_decoding_wave_develops(self):
        # the qualitative picture: after a few hundred iterations with a seeded
        # boundary, the profile is a monotone kink between 0 and the BP value
        ch = bw.BecChannel(0.46)
        traj = bw.run_coupled(ch, ENS36, L=50, w=3, snapshot_every=50, max_iter=250,
                              stop_kink_fraction=2.0)
        it, vals = traj.snapshots[-1]
        assert it == 250
        x_bp = bw.bp_fixed_point(ch, ENS36).x_bp
        assert np.all(np.diff(vals) >= -1e-12)
        assert vals[0] == 0.0
        assert vals[-1] == pytest.approx(x_bp, abs=5e-3)
        assert vals.min() < 1e-6

    def test_empirical_velocity_stationary_trajectory(self):
        vals = np.concatenate([np.zeros(20), np.full(23, 0.3789)])
        traj = bw.Trajectory(w=3, L=40)
        for it in (0, 10, 20, 30):
            traj.append(it, vals)
        assert bw.empirical_velocity(traj, ENS36, bw.BecChannel(0.46)) == 0.0

    def test_empirical_velocity_below_bp_raises(self):
        traj = bw.run_coupled(bw.BecChannel(0.40), ENS36, L=30, w=3, max_iter=100)
        with pytest.raises(RegimeError):
            bw.empirical_velocity(traj, ENS36, bw.BecChannel(0.40))

    def test_empirical_velocity_boundary_error(self):
        # chain too short: decodes before the measurement window is reached
        ch = bw.BecChannel(0.46)
        traj = bw.run_coupled(ch, ENS36, L=12, w=3, snapshot_every=20, stop_kink_fraction=2.0)
        with pytest.raises((SolverError, RegimeError, Exception)):
            bw.empirical_velocity(traj, ENS36, ch)

    def test_empirical_velocity_table_point(self):
        ch = bw.BecChannel(0.465)
        fp = bw.bp_fixed_point(ch, ENS36)
        traj = bw.run_coupled(ch, ENS36, L=256, w=8, snapshot_every=10, stop_level=fp.x_bp / 2)
        ve = bw.empirical_velocity(traj, ENS36, ch)
        assert ve == pytest.approx(0.03750, abs=2e-3)


class TestWaveSolver:
    def test_regime_errors(self):
        with pytest.raises(RegimeError) as e1:
            bw.solve_wave(bw.BecChannel(0.40), ENS36)
        assert e1.value.code == "below-BP"
        with pytest.raises(RegimeError) as e2:
            bw.solve_wave(bw.BecChannel(0.495), ENS36)
        assert e2.value.code == "above-MAP"

    def test_profile_shape_invariants(self):
        sol = bw.solve_wave(bw.BecChannel(0.465), ENS36)
        x_bp = bw.bp_fixed_point(bw.BecChannel(0.465), ENS36).x_bp
        prof = sol.profile
        assert prof.x[0] < 1e-6 * x_bp
        assert abs(prof.x[-1] - x_bp) < 1e-6
        assert np.all(np.diff(prof.x) >= -1e-12)
        # pinned: half level at z = 0
        mid = np.interp(0.0, prof.z, prof.x)
        assert mid == pytest.approx(x_bp / 2, abs=1e-9)

    def test_velocity_values(self):
        sol = bw.solve_wave(bw.BecChannel(0.465), ENS36)
        assert sol.velocity == pytest.approx(0.03741, abs=1e-3)
        sol = bw.solve_wave(bw.BecChannel(0.485), ENS36)
        assert sol.velocity == pytest.approx(0.00456, abs=5e-4)

    def test_velocity_vanishes_toward_map(self):
        eps_map = bw.map_threshold(ENS36)
        v_prev = None
        for eps in [0.480, 0.484, eps_map - 2e-4]:
            v = bw.solve_wave(bw.BecChannel(eps), ENS36).velocity
            if v_prev is not None:
                assert v < v_prev
            v_prev = v
        assert v_prev < 1e-3

    def test_grid_refinement(self):
        v1 = bw.solve_wave(bw.BecChannel(0.475), ENS36, SolverGrid(dz=1 / 64)).velocity
        v2 = bw.solve_wave(bw.BecChannel(0.475), ENS36, SolverGrid(dz=1 / 128)).velocity
        assert abs(v1 - v2) < 1e-4

    def test_formula_translation_invariance(self):
        ch = bw.BecChannel(0.465)
        sol = bw.solve_wave(ch, ENS36)
        v0 = bw.velocity_from_profile(sol.profile, ch, ENS36)
        x_bp = bw.bp_fixed_point(ch, ENS36).x_bp
        for k in (3, 17, 64):
            shifted = np.concatenate([np.zeros(k), sol.profile.x[:-k]])
            shifted[-1] = x_bp
            prof = bw.ErasureProfile(z=sol.profile.z, x=shifted)
            assert abs(bw.velocity_from_profile(prof, ch, ENS36) - v0) < 1e-8

    def test_formula_rejects_constant_profile(self):
        z = np.linspace(-8, 8, 1025)
        prof = bw.ErasureProfile(z=z, x=np.full_like(z, 0.2))
        with pytest.raises(SolverError):
            bw.velocity_from_profile(prof, bw.BecChannel(0.465), ENS36)

    def test_solver_matches_empirical(self):
        ch = bw.BecChannel(0.465)
        sol = bw.solve_wave(ch, ENS36)
        fp = bw.bp_fixed_point(ch, ENS36)
        traj = bw.run_coupled(ch, ENS36, L=256, w=8, snapshot_every=10, stop_level=fp.x_bp / 2)
        ve = bw.empirical_velocity(traj, ENS36, ch)
        assert abs(sol.velocity - ve) < 5e-3


class TestApproximationsAndBound:
    def test_second_order_values(self):
        assert bw.velocity_approximation(bw.BecChannel(0.455), ENS36, order=2) == pytest.approx(
            0.03470, abs=1e-3
        )
        assert bw.velocity_approximation(bw.BecChannel(0.485), ENS36, order=2) == pytest.approx(
            0.00476, abs=1e-3
        )

    def test_vanishes_at_map(self):
        eps_map = bw.map_threshold(ENS36)
        v = bw.velocity_approximation(bw.BecChannel(eps_map - 1e-5), ENS36, order=1)
        assert v < 1e-3

    def test_order_validation(self):
        with pytest.raises(Exception):
            bw.velocity_approximation(bw.BecChannel(0.465), ENS36, order=3)

    def test_breakdown_guard(self):
        # a radicand that is negative before the profile can rise is the
        # genuine failure mode of the scheme
        y = np.linspace(0, 1, 101)
        with pytest.raises(ApproximationBreakdown):
            bw._breakdown_check(-0.1 + y**2, "test")
        with pytest.raises(ApproximationBreakdown):
            bw._breakdown_check(np.full_like(y, -1e-3), "test")
        # benign: positive support starting at the origin, clipped plateau later
        bw._breakdown_check(np.where(y < 0.7, y, 0.7 - y), "test")

    def test_upper_bound_value_and_ordering(self):
        ch = bw.BecChannel(0.465)
        vb = bw.velocity_upper_bound(ch, ENS36, w=8, L=256)
        assert vb == pytest.approx(0.03992, abs=2e-3)
        fp = bw.bp_fixed_point(ch, ENS36)
        traj = bw.run_coupled(ch, ENS36, L=256, w=8, snapshot_every=10, stop_level=fp.x_bp / 2)
        ve = bw.empirical_velocity(traj, ENS36, ch)
        assert vb >= ve


class TestScalingParameter:
    def test_three_six(self):
        val = bw.scaling_parameter(ENS36, 0.04)
        assert val == pytest.approx(1.960, rel=0.10)

    def test_rejects_bad_delta(self):
        with pytest.raises(Exception):
            bw.scaling_parameter(ENS36, -0.01)

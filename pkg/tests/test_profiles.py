import numpy as np
import pytest

from wavefront.errors import ConfigError, SolverError, WaveBoundaryError
from wavefront.profiles import (
    SolverGrid,
    advection_solve,
    double_window,
    kink_position,
    kink_velocity_from_track,
    recenter,
)


class TestSolverGrid:
    def test_defaults(self):
        g = SolverGrid()
        assert g.n == 1025
        assert g.window_len == 65
        assert g.trapezoid_weights().sum() == pytest.approx(1.0, abs=1e-15)
        assert len(g.z()) == g.n

    def test_rejects_bad_spacing(self):
        with pytest.raises(ConfigError):
            SolverGrid(dz=0.013)  # does not divide the unit window
        with pytest.raises(ConfigError):
            SolverGrid(z_min=1.0, z_max=0.0)


class TestAdvectionSolve:
    def test_matches_dense_solve(self):
        rng = np.random.default_rng(0)
        n, v, dz = 40, 0.05, 1 / 8
        rhs = rng.random(n)
        left, right = 0.2, 0.7
        x = advection_solve(rhs, v, dz, left, right)
        a = v / (2 * dz)
        A = np.eye(n)
        for i in range(1, n - 1):
            A[i, i - 1] = a
            A[i, i + 1] = -a
        b = rhs.copy()
        b[0], b[-1] = left, right
        np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-12)

    def test_zero_velocity_is_identity(self):
        rhs = np.linspace(0, 1, 20)
        x = advection_solve(rhs, 0.0, 0.1, rhs[0], rhs[-1])
        np.testing.assert_allclose(x, rhs, atol=1e-14)

    def test_vector_boundaries(self):
        rhs = np.ones((10, 3))
        left = np.array([0.0, 0.1, 0.2])
        right = np.array([1.0, 0.9, 0.8])
        x = advection_solve(rhs, 0.02, 0.25, left, right)
        np.testing.assert_allclose(x[0], left, atol=1e-14)
        np.testing.assert_allclose(x[-1], right, atol=1e-14)


class TestWindows:
    def test_constant_profile_fixed(self):
        g = SolverGrid(z_min=-2, z_max=2, dz=1 / 16)
        x = np.full(g.n, 0.3)
        out = double_window(x, g.trapezoid_weights(), 0.3, 0.3,
                            lambda a: 1 - (1 - a) ** 2, lambda a: a**2)
        want = (1 - 0.7**2) ** 2
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_linear_profile_exact(self):
        # both window integrals of an affine function are exact under the
        # trapezoid rule and the u/s shifts cancel
        g = SolverGrid(z_min=-2, z_max=2, dz=1 / 32)
        z = g.z()
        out = double_window(z.copy(), g.trapezoid_weights(), z[0] - 0, z[-1] + 0,
                            lambda a: a, lambda a: a)
        interior = slice(g.window_len, -g.window_len)
        np.testing.assert_allclose(out[interior], z[interior], atol=1e-10)


class TestKinkTracking:
    def test_interpolated_crossing(self):
        z = np.arange(10.0)
        vals = np.array([0, 0, 0, 0.2, 0.6, 1, 1, 1, 1, 1.0])
        assert kink_position(z, vals, 0.4) == pytest.approx(3.5)

    def test_no_crossing(self):
        assert kink_position(np.arange(5.0), np.zeros(5), 0.5) is None

    def test_recenter_pins_level(self):
        z = np.linspace(-4, 4, 257)
        x = 0.4 / (1 + np.exp(-(z - 1.3) / 0.3))
        out = recenter(z, x, 0.2, 0.0, 0.4)
        assert np.interp(0.0, z, out) == pytest.approx(0.2, abs=1e-9)

    def test_velocity_from_track(self):
        track = [(10 * k, 10.0 + 0.5 * k) for k in range(40)]
        v = kink_velocity_from_track(track, w=2, L=60)
        assert v == pytest.approx(0.5 / (2 * 10), abs=1e-12)

    def test_boundary_error(self):
        with pytest.raises(WaveBoundaryError):
            kink_velocity_from_track([(0, None), (10, None)], w=2, L=60)

    def test_short_track_error(self):
        with pytest.raises(SolverError):
            kink_velocity_from_track([(0, 10.0), (10, 30.0)], w=2, L=40)

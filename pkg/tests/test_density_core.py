import numpy as np
import pytest

from wavefront import density_core as dc
from wavefront import gauss_wave as gw
from wavefront.ensemble import regular
from wavefront.errors import ConfigError

GRID = dc.DEFAULT_GRID
DOUBLED = dc.DensityGrid(llr_max=30.0, half_points=4096, g_points=8192)


def random_symmetric(rng, grid, max_mean=12.0):
    """Deterministic mixture of Gaussian-like and erasure-like components."""
    acc_m, acc_i, w_tot = np.zeros(grid.n), 0.0, 0.0
    for _ in range(int(rng.integers(1, 4))):
        w = float(rng.uniform(0.1, 1.0))
        if rng.random() < 0.5:
            comp = dc.biawgn_density(float(rng.uniform(0.05, max_mean)), grid)
        else:
            comp = dc.bec_density(float(rng.uniform(0.0, 1.0)), grid)
        acc_m = acc_m + w * comp.masses
        acc_i += w * comp.mass_inf
        w_tot += w
    return dc.QuantizedDensity(grid, acc_m / w_tot, acc_i / w_tot)


def assert_two_point(x):
    stray = x.masses.sum() - x.masses[x.grid.center]
    assert abs(stray) < 1e-12


class TestConstructors:
    def test_dirac_entropies(self):
        assert dc.entropy(dc.delta_zero(GRID)) == 1.0
        assert dc.entropy(dc.delta_inf(GRID)) == 0.0

    def test_bec_density(self):
        x = dc.bec_density(0.46, GRID)
        assert dc.entropy(x) == pytest.approx(0.46, abs=1e-15)
        assert x.total() == pytest.approx(1.0, abs=1e-15)
        z = dc.bec_density(1.0, GRID)
        np.testing.assert_array_equal(z.masses, dc.delta_zero(GRID).masses)
        i = dc.bec_density(0.0, GRID)
        assert i.mass_inf == 1.0 and i.masses.sum() == 0.0
        with pytest.raises(ConfigError):
            dc.bec_density(1.2, GRID)

    def test_biawgn_matches_gaussian_entropy(self):
        for mean in (0.5, 1.1, 2.33, 5.0):
            x = dc.biawgn_density(mean, GRID)
            assert x.total() == pytest.approx(1.0, abs=1e-12)
            assert dc.entropy(x) == pytest.approx(gw.gaussian_entropy(mean), abs=1e-4)
            assert dc.symmetry_defect(x) < 1e-6

    def test_biawgn_limits(self):
        assert dc.entropy(dc.biawgn_density(1e-4, GRID)) == pytest.approx(1.0, abs=1e-2)
        assert dc.entropy(dc.biawgn_density(gw.SATURATION_MEAN, GRID)) < 1e-6

    def test_biawgn_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            dc.biawgn_density(0.0, GRID)


class TestVarConv:
    def test_identity_and_absorbing(self):
        x = dc.biawgn_density(2.33, GRID)
        out = dc.var_conv(x, dc.delta_inf(GRID))
        assert out.mass_inf == pytest.approx(1.0, abs=1e-15)
        assert np.abs(out.masses).sum() < 1e-15
        out = dc.var_conv(x, dc.delta_zero(GRID))
        np.testing.assert_allclose(out.masses, x.masses, atol=1e-15)
        assert out.mass_inf == pytest.approx(x.mass_inf, abs=1e-15)

    def test_bec_closure(self):
        out = dc.var_conv(dc.bec_density(0.3, GRID), dc.bec_density(0.6, GRID))
        assert_two_point(out)
        assert dc.entropy(out) == pytest.approx(0.18, abs=1e-14)

    def test_mass_conservation(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            a, b = random_symmetric(rng, GRID), random_symmetric(rng, GRID)
            assert dc.var_conv(a, b).total() == pytest.approx(1.0, abs=1e-9)

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            dc.var_conv(dc.delta_zero(GRID), dc.delta_zero(DOUBLED))


class TestChkConv:
    def test_absorbing_and_neutral(self):
        x = dc.biawgn_density(2.33, GRID)
        out = dc.chk_conv(x, dc.delta_zero(GRID))
        np.testing.assert_allclose(out.masses, dc.delta_zero(GRID).masses, atol=1e-15)
        out = dc.chk_conv(x, dc.delta_inf(GRID))
        # the magnitude-domain round trip re-bins the masses; the physically
        # meaningful functionals are preserved
        assert out.total() == pytest.approx(1.0, abs=1e-12)
        assert dc.entropy(out) == pytest.approx(dc.entropy(x), abs=1e-4)
        assert dc.symmetry_defect(dc.symmetrize(out)) < 1e-9

    def test_bec_closure(self):
        out = dc.chk_conv(dc.bec_density(0.3, GRID), dc.bec_density(0.6, GRID))
        assert_two_point(out)
        assert dc.entropy(out) == pytest.approx(1 - 0.7 * 0.4, abs=1e-14)

    def test_mass_conservation(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            a, b = random_symmetric(rng, GRID), random_symmetric(rng, GRID)
            assert dc.chk_conv(a, b).total() == pytest.approx(1.0, abs=1e-9)

    def test_commutativity(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            a, b = random_symmetric(rng, GRID), random_symmetric(rng, GRID)
            ab, ba = dc.chk_conv(a, b), dc.chk_conv(b, a)
            assert np.abs(ab.masses - ba.masses).max() < 1e-12
            v1, v2 = dc.var_conv(a, b), dc.var_conv(b, a)
            assert np.abs(v1.masses - v2.masses).max() < 1e-12

    def test_var_associativity(self):
        # moderate means keep the triple sums inside the grid, where the
        # edge folds (the documented truncation) cannot reorder
        rng = np.random.default_rng(9)
        for _ in range(10):
            a, b, c = (random_symmetric(rng, GRID, max_mean=4.0) for _ in range(3))
            v1 = dc.var_conv(dc.var_conv(a, b), c)
            v2 = dc.var_conv(a, dc.var_conv(b, c))
            assert np.abs(v1.masses - v2.masses).sum() < 1e-9
            assert abs(v1.mass_inf - v2.mass_inf) < 1e-9

    def test_chk_associativity_in_entropy(self):
        # the magnitude-domain re-binning commutes only approximately at the
        # mass level; the entropy functional agrees far below the duality
        # tolerance that governs accuracy here
        rng = np.random.default_rng(10)
        for _ in range(10):
            a, b, c = (random_symmetric(rng, GRID) for _ in range(3))
            c1 = dc.chk_conv(dc.chk_conv(a, b), c)
            c2 = dc.chk_conv(a, dc.chk_conv(b, c))
            assert abs(dc.entropy(c1) - dc.entropy(c2)) < 1e-5
            assert abs(c1.total() - c2.total()) < 1e-9

    def test_symmetry_preserved(self):
        # quantization lets the pointwise ratio drift at the bin-width level
        # per check combination; the projection restores it exactly, which is
        # why every DE step re-projects
        rng = np.random.default_rng(11)
        for _ in range(10):
            a, b = random_symmetric(rng, GRID), random_symmetric(rng, GRID)
            c = dc.chk_conv(a, b)
            v = dc.var_conv(a, b)
            # the projection changes each pair sum not at all and the
            # entropy only at the quantization level
            cs = dc.symmetrize(c)
            vs = dc.symmetrize(v)
            assert dc.symmetry_defect(cs) < 1e-9
            assert dc.symmetry_defect(vs) < 1e-9
            assert abs(dc.entropy(cs) - dc.entropy(c)) < 2e-3
            assert abs(dc.entropy(vs) - dc.entropy(v)) < 2e-3


class TestDualityRule:
    @pytest.mark.parametrize("grid,tol", [(GRID, 2e-3), (DOUBLED, 5e-4)])
    def test_hundred_random_pairs(self, grid, tol):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            a, b = random_symmetric(rng, grid), random_symmetric(rng, grid)
            lhs = dc.entropy(dc.var_conv(a, b)) + dc.entropy(dc.chk_conv(a, b))
            rhs = dc.entropy(a) + dc.entropy(b)
            assert abs(lhs - rhs) < tol


class TestPolynomialLifts:
    def test_bec_values(self):
        ens = regular(3, 6)
        out = dc.poly_chk(ens.rho, dc.bec_density(0.5, GRID))
        assert_two_point(out)
        assert dc.entropy(out) == pytest.approx(1 - 0.5**5, abs=1e-12)
        out = dc.poly_var(ens.lam, dc.bec_density(0.5, GRID))
        assert_two_point(out)
        assert dc.entropy(out) == pytest.approx(0.25, abs=1e-12)

    def test_perfect_knowledge_preserved(self):
        ens = regular(3, 6)
        i = dc.delta_inf(GRID)
        out = dc.poly_chk(ens.rho, i)
        assert out.mass_inf == pytest.approx(1.0, abs=1e-12)
        assert np.abs(out.masses).sum() < 1e-12
        out = dc.poly_var(ens.lam, i)
        assert out.mass_inf == pytest.approx(1.0, abs=1e-12)
        assert np.abs(out.masses).sum() < 1e-12

    def test_degree_one_mass_gives_uncertainty(self):
        # a degree-1 variable edge contributes the empty product, total
        # uncertainty, even on perfect input
        from wavefront.ensemble import DegreePolynomial

        lam = DegreePolynomial([0.25, 0.75])
        out = dc.poly_var(lam, dc.delta_inf(GRID))
        assert out.masses[GRID.center] == pytest.approx(0.25, abs=1e-12)
        assert out.mass_inf == pytest.approx(0.75, abs=1e-12)

    def test_entropy_bounds_on_random_inputs(self):
        rng = np.random.default_rng(12)
        ens = regular(4, 8)
        for _ in range(5):
            x = random_symmetric(rng, GRID)
            for out in (dc.poly_chk(ens.rho, x), dc.poly_var(ens.lam, x)):
                h = dc.entropy(out)
                assert -1e-9 <= h <= 1.0 + 1e-9


class TestSignedMeasures:
    def test_deriv_lift_zero_and_linearity(self):
        x = dc.biawgn_density(2.0, GRID)
        d = dc.deriv_lift(x, x, 0.5)
        assert np.abs(d.masses).sum() == 0.0 and d.mass_inf == 0.0
        y = dc.biawgn_density(3.0, GRID)
        d1 = dc.deriv_lift(x, y, 0.5)
        assert d1.total() == pytest.approx(0.0, abs=1e-12)

    def test_bec_embedded_derivative(self):
        a = dc.bec_density(0.3, GRID)
        b = dc.bec_density(0.5, GRID)
        d = dc.deriv_lift(a, b, 1.0)
        assert d.masses[GRID.center] == pytest.approx(0.1, abs=1e-15)
        assert d.mass_inf == pytest.approx(-0.1, abs=1e-15)

    def test_entropy_linear_on_signed(self):
        x = dc.biawgn_density(2.0, GRID)
        s = dc.SignedDensity(GRID, x.masses - x.masses, 0.0)
        assert dc.entropy(s) == 0.0

    def test_squared_derivative_two_point(self):
        d = dc.SignedDensity(GRID, dc.bec_density(1.0, GRID).masses * 0.2, -0.2)
        sq = dc.chk_conv(d, d)
        assert sq.masses[GRID.center] == pytest.approx(-0.04, abs=1e-15)
        assert sq.mass_inf == pytest.approx(0.04, abs=1e-15)
        assert dc.entropy(sq) == pytest.approx(-0.04, abs=1e-15)


class TestSerialization:
    def test_bytes_round_trip(self):
        x = dc.biawgn_density(2.33, GRID)
        y = dc.from_bytes(dc.to_bytes(x))
        np.testing.assert_array_equal(x.masses, y.masses)
        assert x.mass_inf == y.mass_inf
        assert y.grid.llr_max == GRID.llr_max and y.grid.n == GRID.n

    def test_csv_round_trip(self, tmp_path):
        x = dc.bec_density(0.37, GRID)
        p = tmp_path / "density.csv"
        dc.to_csv(x, p)
        y = dc.from_csv(p)
        np.testing.assert_allclose(x.masses, y.masses, atol=0)
        assert y.mass_inf == x.mass_inf

    def test_bad_magic_rejected(self):
        with pytest.raises(ConfigError):
            dc.from_bytes(b"nope" + b"\0" * 64)

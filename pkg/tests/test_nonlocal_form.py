"""Pair-weight form: counts, exact identities against double-loop oracles,
energy-convergence tables."""

import numpy as np
import pytest

import anisochill as ac
from anisochill.errors import CapacityError, ConfigError
from anisochill.nonlocal_form import NonlocalForm, assemble, gamma_energy_table


def double_loop_energy(form, u):
    """Exhaustive pair enumeration oracle."""
    vals = u.values.ravel()
    total = 0.0
    for i, j, w in zip(form.pair_i, form.pair_j, form.pair_w):
        total += w * (vals[i] - vals[j]) ** 2
    return 0.5 * total


def double_loop_bilinear(form, u, v):
    uf, vf = u.values.ravel(), v.values.ravel()
    total = 0.0
    for i, j, w in zip(form.pair_i, form.pair_j, form.pair_w):
        total += w * (uf[i] - uf[j]) * (vf[i] - vf[j])
    return total


@pytest.fixture
def small_form():
    grid = ac.Grid.line(8)
    spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.5, dim=1)
    return assemble(spec, grid)


class TestAssemble:
    def test_four_cells_full_cutoff_gives_six_pairs(self):
        grid = ac.Grid.line(4)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=2.0, dim=1)
        form = assemble(spec, grid, cutoff=grid.diameter)
        assert form.n_pairs == 6

    def test_nearest_neighbor_cutoff(self):
        grid = ac.Grid.line(16)
        h = grid.spacing[0]
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.5, dim=1)
        form = assemble(spec, grid, cutoff=1.5 * h)
        assert form.n_pairs == 15

    def test_cutoff_monotonicity(self):
        grid = ac.Grid.line(32)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.9, dim=1)
        counts = [assemble(spec, grid, cutoff=c).n_pairs
                  for c in (0.1, 0.2, 0.4, 0.8)]
        assert all(b >= a for a, b in zip(counts[:-1], counts[1:]))

    def test_capacity_budget_named_in_error(self):
        grid = ac.Grid.line(64)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.5, dim=1)
        with pytest.raises(CapacityError, match="max_pairs"):
            assemble(spec, grid, max_pairs=10)

    def test_weights_positive_and_sorted(self, small_form):
        assert np.all(small_form.pair_w > 0)
        assert np.all(small_form.pair_i < small_form.pair_j)
        order = np.lexsort((small_form.pair_j, small_form.pair_i))
        assert np.array_equal(order, np.arange(small_form.n_pairs))

    def test_2d_assembly_counts(self):
        grid = ac.Grid.rect(4, 4)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=2.0, dim=2)
        form = assemble(spec, grid, cutoff=grid.diameter, subcell_correction=False)
        assert form.n_pairs == 16 * 15 // 2


class TestIdentities:
    def test_constant_energy_zero(self, small_form):
        u = ac.ScalarField.constant(small_form.grid, 0.7)
        assert small_form.energy(u) == 0.0

    def test_shift_invariance_exact(self, small_form):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(8)
        u = ac.ScalarField(small_form.grid, vals)
        shifted = ac.ScalarField(small_form.grid, vals + 3.0)
        assert small_form.energy(u) == small_form.energy(shifted)

    def test_hand_set_weights_match_double_loop_exactly(self):
        grid = ac.Grid.line(4)
        form = NonlocalForm.from_pairs(
            grid, [0, 0, 1, 2], [1, 2, 3, 3], [0.5, 1.25, 2.0, 0.75])
        u = ac.ScalarField(grid, np.array([1.0, -2.0, 0.5, 3.0]))
        assert form.energy(u) == double_loop_energy(form, u)

    def test_random_form_matches_double_loop(self, small_form):
        rng = np.random.default_rng(1)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        v = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        assert small_form.energy(u) == pytest.approx(
            double_loop_energy(small_form, u), rel=1e-13)
        assert small_form.bilinear(u, v) == pytest.approx(
            double_loop_bilinear(small_form, u, v), rel=1e-13)

    def test_bilinear_vanishes_against_constants(self, small_form):
        rng = np.random.default_rng(11)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        const = ac.ScalarField.constant(small_form.grid, 2.4)
        assert small_form.bilinear(u, const) == 0.0

    def test_energy_positive_for_nonconstant(self, small_form):
        rng = np.random.default_rng(12)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        assert small_form.energy(u) > 0.0

    def test_polarization_identity(self, small_form):
        rng = np.random.default_rng(2)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        v = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        upv = ac.ScalarField(small_form.grid, u.values + v.values)
        lhs = small_form.bilinear(u, v)
        rhs = (small_form.energy(upv) - small_form.energy(u)
               - small_form.energy(v))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_bilinear_is_twice_energy(self, small_form):
        rng = np.random.default_rng(3)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        assert small_form.bilinear(u, u) == pytest.approx(
            2.0 * small_form.energy(u), rel=1e-14)

    def test_summation_by_parts(self, small_form):
        rng = np.random.default_rng(4)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        v = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        lhs = np.sum(small_form.apply(u).values * v.values) \
            * small_form.grid.cell_volume
        assert lhs == pytest.approx(small_form.bilinear(u, v), rel=1e-13)

    def test_apply_conserves_and_kills_constants(self, small_form):
        rng = np.random.default_rng(5)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        total = np.sum(small_form.apply(u).values) * small_form.grid.cell_volume
        assert abs(total) <= 1e-13 * np.max(np.abs(small_form.apply(u).values))
        const = ac.ScalarField.constant(small_form.grid, 1.3)
        assert np.all(small_form.apply(const).values == 0.0)

    def test_apply_linearity(self, small_form):
        rng = np.random.default_rng(6)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        v = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        combo = ac.ScalarField(small_form.grid, 2.0 * u.values - 0.3 * v.values)
        lhs = small_form.apply(combo).values
        rhs = 2.0 * small_form.apply(u).values - 0.3 * small_form.apply(v).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_operator_matrix_consistent(self, small_form):
        rng = np.random.default_rng(7)
        u = ac.ScalarField(small_form.grid, rng.standard_normal(8))
        dense = small_form.operator_matrix() @ u.values.ravel()
        assert np.allclose(dense, small_form.apply(u).values.ravel(),
                           rtol=1e-13, atol=1e-13)

    def test_grid_mismatch_rejected(self, small_form):
        other = ac.ScalarField.zeros(ac.Grid.line(16))
        with pytest.raises(ConfigError):
            small_form.energy(other)


class TestGammaTable:
    def test_constant_field_zero_rows(self):
        grid = ac.Grid.line(64)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.4, dim=1)
        u = ac.ScalarField.constant(grid, 0.4)
        rows = gamma_energy_table(spec, [0.4, 0.2], u, np.array([[1.0]]))
        assert all(r[1] == r[2] == r[3] == 0.0 for r in rows)

    def test_cosine_gap_shrinks(self):
        grid = ac.Grid.line(128)
        (x,) = grid.meshgrid()
        u = ac.ScalarField(grid, np.cos(np.pi * x))
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.4, dim=1)
        a_grad = ac.local_anisotropy_from_moments(
            ac.limit_matrix(spec, [0.4, 0.2, 0.1]).matrix)
        rows = gamma_energy_table(spec, [0.4, 0.2, 0.1], u, a_grad)
        gaps = [r[3] for r in rows]
        assert all(b < a for a, b in zip(gaps[:-1], gaps[1:]))

    def test_linear_field_matches_quadratic_form(self):
        # E_eps(x * xi) within 10% of (1/2) xi . A xi |Omega| for eps <= 0.1
        grid = ac.Grid.line(256)
        (x,) = grid.meshgrid()
        u = ac.ScalarField(grid, x)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.1, dim=1)
        a_grad = ac.local_anisotropy_from_moments(
            ac.limit_matrix(spec, [0.4, 0.2, 0.1]).matrix)
        form = assemble(spec, grid)
        want = 0.5 * float(a_grad[0, 0])      # |Omega| = 1, xi = 1
        assert form.energy(u) == pytest.approx(want, rel=0.10)

    def test_degenerate_field_rejected(self):
        grid = ac.Grid.line(64)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.4, dim=1)
        vals = np.zeros(64)
        vals[10] = 1e-300  # nonconstant yet with (numerically) zero energy
        u = ac.ScalarField(grid, vals)
        with pytest.raises(ConfigError):
            gamma_energy_table(spec, [0.4], u, np.array([[1.0]]))

    def test_liminf_side_on_smooth_suite(self):
        grid = ac.Grid.line(128)
        (x,) = grid.meshgrid()
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.1, dim=1)
        a_grad = ac.local_anisotropy_from_moments(
            ac.limit_matrix(spec, [0.4, 0.2, 0.1]).matrix)
        local = ac.LocalForm(grid, a_grad)
        form = assemble(spec, grid)
        rng = np.random.default_rng(21)
        smooth = np.zeros(128)
        for k in range(1, 6):
            smooth += rng.standard_normal() / k**2 * np.cos(k * np.pi * x)
        for vals in (np.cos(np.pi * x), smooth):
            u = ac.ScalarField(grid, vals)
            e0 = local.energy(u)
            assert e0 <= form.energy(u) + 0.05 * e0


class TestSubcellCorrection:
    def test_correction_only_bumps_near_pairs(self):
        grid = ac.Grid.line(32)
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.3, dim=1)
        raw = assemble(spec, grid, subcell_correction=False)
        fixed = assemble(spec, grid, subcell_correction=True)
        assert fixed.subcell_corrected and not raw.subcell_corrected
        assert raw.n_pairs == fixed.n_pairs
        delta = fixed.pair_w - raw.pair_w
        adjacent = fixed.pair_j == fixed.pair_i + 1
        assert np.all(delta[~adjacent] == 0.0)
        assert np.all(delta[adjacent] > 0.0)

    def test_corrected_energy_closer_to_limit(self):
        grid = ac.Grid.line(256)
        (x,) = grid.meshgrid()
        u = ac.ScalarField(grid, np.cos(np.pi * x))
        spec = ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.05, dim=1)
        target = np.pi**2 / 4.0
        e_raw = assemble(spec, grid, subcell_correction=False).energy(u)
        e_fix = assemble(spec, grid, subcell_correction=True).energy(u)
        assert abs(e_fix - target) < abs(e_raw - target)

import io

import numpy as np
import pytest

from hjlab.grid import (
    Cylinder,
    GridSpec,
    ScalarField,
    centered_cylinder,
    gradient_central,
    gradient_godunov,
    laplacian,
    lq_norm,
    make_grid,
    parabolic_distance,
    read_field_csv,
    restrict_field,
    sample_field,
    write_field_csv,
)

from conftest import random_field


class TestMakeGrid:
    def test_box_counts(self):
        g = make_grid(GridSpec(1, 1.0, 0.25, 1.0, 0.5))
        assert g.shape == (9,)
        assert g.n_levels == 3

    def test_ball_active_count(self):
        g = make_grid(GridSpec(2, 1.0, 0.5, 1.0, 0.5, ball_mask=True))
        assert int(g.active.sum()) == 9
        assert g.active.size == 25

    def test_dx_zero_rejected(self):
        with pytest.raises(ValueError, match="dx must be positive"):
            make_grid(GridSpec(1, 1.0, 0.0, 1.0, 0.5))

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(ValueError, match="half_width/dx"):
            make_grid(GridSpec(1, 1.0, 0.3, 1.0, 0.5))
        with pytest.raises(ValueError, match="horizon/dt"):
            make_grid(GridSpec(1, 1.0, 0.25, 1.0, 0.3))

    def test_boundary_normals_box(self):
        g = make_grid(GridSpec(1, 1.0, 0.25, 1.0, 0.5))
        normals = g.boundary_normals()
        assert len(normals) == 2
        nus = sorted(nu[0] for _, _, nu in normals)
        assert nus == [-1.0, 1.0]

    def test_boundary_normals_ball_radial(self):
        g = make_grid(GridSpec(2, 1.0, 0.25, 1.0, 0.5, ball_mask=True))
        for idx, x, nu in g.boundary_normals():
            r = np.linalg.norm(x)
            assert r > 0
            np.testing.assert_allclose(nu, x / r, atol=1e-14)

    def test_interior_disjoint_from_boundary(self):
        for spec in (GridSpec(1, 1.0, 0.25, 1.0, 0.5), GridSpec(2, 1.0, 0.25, 1.0, 0.5, True)):
            g = make_grid(spec)
            assert not np.any(g.interior & g.boundary)
            assert np.all(g.active == (g.interior | g.boundary))


class TestCalculus:
    def test_gradient_affine_exact(self, grid_1d_fine):
        u = ScalarField.from_function(grid_1d_fine, lambda x, t: 3.0 * x[..., 0])
        grad = gradient_central(u, 0)
        np.testing.assert_allclose(grad[:, 0], 3.0, rtol=1e-12)

    def test_gradient_constant_zero(self, grid_1d_fine):
        u = ScalarField.constant(grid_1d_fine, 4.0)
        assert np.all(gradient_central(u, 1) == 0.0)

    def test_gradient_quadratic_interior(self):
        g = make_grid(GridSpec(1, 1.0, 0.1, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: x[..., 0] ** 2)
        i = g.nearest_node([0.5])[0]
        assert abs(gradient_central(u, 0)[i, 0] - 1.0) < 1e-12

    def test_polynomial_exactness_2d(self):
        g = make_grid(GridSpec(2, 1.0, 0.25, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: x[..., 0] ** 2 + x[..., 1] ** 2)
        lap = laplacian(u, 0)
        np.testing.assert_allclose(lap[1:-1, 1:-1], 4.0, rtol=1e-10)
        v = ScalarField.from_function(g, lambda x, t: 2.0 * x[..., 0] - x[..., 1])
        grad = gradient_central(v, 0)
        np.testing.assert_allclose(grad[..., 0], 2.0, rtol=1e-12)
        np.testing.assert_allclose(grad[..., 1], -1.0, rtol=1e-12)

    def test_laplacian_quadratic_1d(self):
        g = make_grid(GridSpec(1, 1.0, 0.125, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: x[..., 0] ** 2)
        np.testing.assert_allclose(laplacian(u, 0)[1:-1], 2.0, rtol=1e-10)

    def test_laplacian_affine_zero(self, grid_1d_fine):
        u = ScalarField.from_function(grid_1d_fine, lambda x, t: 1.0 - 2.0 * x[..., 0])
        np.testing.assert_allclose(laplacian(u, 0)[1:-1], 0.0, atol=1e-11)


class TestGodunov:
    def test_valley_kink_selects_zero(self):
        # both selected branches clip to zero at the bottom kink of |x|
        g = make_grid(GridSpec(1, 1.0, 0.1, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: np.abs(x[..., 0]))
        assert gradient_godunov(u, 0)[g.nearest_node([0.0])[0]] == 0.0

    def test_peak_kink_selects_one(self):
        g = make_grid(GridSpec(1, 1.0, 0.1, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: -np.abs(x[..., 0]))
        assert abs(gradient_godunov(u, 0)[g.nearest_node([0.0])[0]] - 1.0) < 1e-12

    def test_constant_zero(self, grid_1d):
        u = ScalarField.constant(grid_1d, 2.5)
        assert np.all(gradient_godunov(u, 0) == 0.0)

    def test_smooth_monotone_matches_central(self):
        g = make_grid(GridSpec(1, 1.0, 0.05, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: 3.0 * x[..., 0])
        interior = slice(1, -1)
        assert np.allclose(gradient_godunov(u, 0)[interior], 3.0, rtol=1e-12)
        # C^2 monotone profile: agreement within 2*dx
        v = ScalarField.from_function(g, lambda x, t: np.sin(x[..., 0]))
        gm = gradient_godunov(v, 0)[interior]
        gc = np.abs(gradient_central(v, 0)[interior, 0])
        assert np.max(np.abs(gm - gc)) <= 2 * g.dx

    def test_nonnegative_everywhere(self, grid_1d):
        u = random_field(grid_1d, seed=3)
        for k in range(grid_1d.n_levels):
            assert np.all(gradient_godunov(u, k) >= 0.0)


class TestLqNorm:
    def test_constant_any_q(self):
        # volume 2R*T = 1
        g = make_grid(GridSpec(1, 0.5, 0.125, 1.0, 0.25))
        u = ScalarField.constant(g, 2.0)
        for q in (1.0, 2.0, 3.7):
            assert abs(lq_norm(u, q) - 2.0) < 1e-12

    def test_zero_field(self, grid_1d):
        assert lq_norm(ScalarField.constant(grid_1d, 0.0), 2.0) == 0.0

    def test_linear_profile_quadrature(self):
        # int_0^1 x^2 dx = 1/3 over a unit-time slab
        g = make_grid(GridSpec(1, 0.5, 0.01, 1.0, 0.5))
        u = ScalarField.from_function(g, lambda x, t: x[..., 0] + 0.5)
        assert abs(lq_norm(u, 2.0) - (1.0 / 3.0) ** 0.5) < 2e-4

    def test_q_below_one_rejected(self, grid_1d):
        with pytest.raises(ValueError, match="q must be"):
            lq_norm(ScalarField.constant(grid_1d, 1.0), 0.5)

    def test_monotone_in_domain(self, grid_1d_fine):
        u = random_field(grid_1d_fine, seed=11)
        small = Cylinder(xmin=(-0.5,), xmax=(0.25,), t0=0.25, t1=0.75)
        big = Cylinder(xmin=(-0.75,), xmax=(0.5,), t0=0.0, t1=1.0)
        for q in (1.0, 2.0, 4.0):
            assert lq_norm(u, q, small) <= lq_norm(u, q, big) + 1e-14


class TestParabolicDistance:
    def test_center_of_unit_cylinder(self):
        Q = centered_cylinder(1.0, 1.0, dim=1, ball=True)
        assert parabolic_distance(([0.0], 0.0), Q, "d") == 2.0

    def test_backward_boundary_zero(self):
        Q = centered_cylinder(1.0, 1.0, dim=1)
        assert parabolic_distance(([1.0], 1.0), Q, "d") == 0.0
        assert parabolic_distance(([1.0], 1.0), Q, "d_alpha", alpha=0.5, gamma=3.0) == 0.0

    def test_d_alpha_formula(self):
        Q = centered_cylinder(5.0, 9.0, dim=1)
        val = parabolic_distance(([1.0], 1.0), Q, "d_alpha", alpha=0.5, gamma=3.0)
        assert abs(val - (2.0 + 8.0 ** (1.0 / 6.0))) < 1e-12

    def test_outside_rejected(self):
        Q = centered_cylinder(1.0, 1.0, dim=1)
        with pytest.raises(ValueError, match="outside"):
            parabolic_distance(([2.0], 0.5), Q, "d")


class TestSamplingAndIO:
    def test_sample_exact_at_nodes(self, grid_1d):
        u = random_field(grid_1d, seed=5)
        for idx in ((0,), (4,), (8,)):
            for k in (0, 2, 4):
                x = grid_1d.coords[idx]
                t = grid_1d.ts[k]
                assert sample_field(u, x, float(t)) == u.values[k][idx]

    def test_sample_linear_between_nodes(self, grid_1d):
        u = ScalarField.from_function(grid_1d, lambda x, t: 2.0 * x[..., 0] + t)
        assert abs(sample_field(u, [0.1], 0.3) - (0.2 + 0.3)) < 1e-12

    def test_restrict_field_aligns(self, grid_1d_fine):
        u = random_field(grid_1d_fine, seed=9)
        sub = restrict_field(u, 0.5)
        sl = grid_1d_fine.subgrid_slices(0.5)
        assert np.array_equal(sub.values, u.values[(slice(None),) + sl])

    def test_csv_round_trip(self, grid_1d):
        u = random_field(grid_1d, seed=13)
        buf = io.StringIO()
        write_field_csv(u, buf)
        buf.seek(0)
        back = read_field_csv(buf)
        assert back.grid.spec == u.grid.spec
        np.testing.assert_allclose(back.values, u.values, rtol=0, atol=0)

    def test_csv_header(self, grid_1d):
        buf = io.StringIO()
        write_field_csv(ScalarField.constant(grid_1d, 1.0), buf)
        first = buf.getvalue().splitlines()[0]
        assert first.startswith("# grid: 1,1,0.25,1,0.25,0")

    def test_csv_round_trip_2d_ball(self):
        g = make_grid(GridSpec(2, 1.0, 0.25, 1.0, 0.5, ball_mask=True))
        u = random_field(g, seed=19)
        buf = io.StringIO()
        write_field_csv(u, buf)
        buf.seek(0)
        back = read_field_csv(buf)
        assert back.grid.spec == u.grid.spec
        np.testing.assert_array_equal(back.values[:, g.active], u.values[:, g.active])

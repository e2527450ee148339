"""Spectral core: eigenpairs, transforms, operators, norms."""

import math

import numpy as np
import pytest

from sllbar.grid import (
    Grid,
    GridMismatchError,
    PhysField,
    apply_laplacian,
    collocation_points,
    constant_field,
    eigenmode_field,
    eigenvalue_array,
    embed,
    gradient_values,
    l2_inner,
    lp_norm,
    mode_values,
    neumann_eigenpairs,
    project,
    quad_weight,
    random_field,
    sobolev_norm,
    spectral_gradient,
    to_physical,
    to_spectral,
    transform,
    zero_field,
)

RNG = np.random.default_rng(20240817)


def grids_for_dims():
    return [
        Grid(1, (np.pi,), (9,)),
        Grid(2, (np.pi, 2.0), (6, 5)),
        Grid(3, (np.pi, 1.0, 2.5), (4, 3, 5)),
    ]


class TestEigenpairs:
    def test_1d_unit_pi_box(self):
        basis = neumann_eigenpairs(Grid(1, (np.pi,), (4,)))
        assert np.allclose(basis.eigenvalues, [0.0, 1.0, 4.0, 9.0])

    def test_2d_mode_11(self):
        lam = eigenvalue_array(Grid(2, (np.pi, np.pi), (4, 4)))
        assert lam[1, 1] == pytest.approx(2.0, abs=1e-14)

    def test_scaling_with_box_length(self):
        lam = eigenvalue_array(Grid(1, (2 * np.pi,), (4,)))
        assert lam[2] == pytest.approx(1.0, abs=1e-14)

    def test_sorted_map_stable(self):
        g = Grid(2, (1.0, 1.0), (4, 4))
        a = neumann_eigenpairs(g).sorted_flat
        b = neumann_eigenpairs(g).sorted_flat
        assert np.array_equal(a, b)
        lam = eigenvalue_array(g).ravel()
        assert np.all(np.diff(lam[a]) >= -1e-15)

    @pytest.mark.parametrize("grid", grids_for_dims())
    def test_orthonormality(self, grid):
        """Discrete Gram matrix of the basis functions is the identity."""
        n_modes = int(np.prod(grid.modes))
        w = quad_weight(grid)
        flat = [
            mode_values(grid, np.unravel_index(i, grid.modes)).ravel()
            for i in range(n_modes)
        ]
        gram = np.array([[np.dot(a, b) * w for b in flat] for a in flat])
        assert np.abs(gram - np.eye(n_modes)).max() < 1e-12


class TestTransforms:
    def test_single_mode_synthesis(self):
        grid = Grid(1, (np.pi,), (4,))
        f = eigenmode_field(grid, (1,), (1.0, 0.0, 0.0))
        x = collocation_points(grid)[0]
        expected = math.sqrt(2 / np.pi) * np.cos(x)
        assert np.abs(to_physical(f).values[0] - expected).max() < 1e-13
        assert np.abs(to_physical(f).values[1:]).max() == 0.0

    def test_constant_field_everywhere(self):
        grid = Grid(2, (np.pi, 1.0), (4, 4))
        c = to_physical(constant_field(grid, (2.0, -1.0, 0.5)))
        for comp, val in enumerate((2.0, -1.0, 0.5)):
            assert np.abs(c.values[comp] - val).max() < 1e-13

    @pytest.mark.parametrize("grid", grids_for_dims())
    def test_round_trip(self, grid):
        u = random_field(grid, RNG)
        back = to_spectral(to_physical(u))
        assert np.abs(back.coeffs - u.coeffs).max() < 1e-12

    def test_round_trip_large_grid_fft_path(self):
        # padded size 160 exceeds the matrix-path threshold
        grid = Grid(1, (np.pi,), (80,))
        u = random_field(grid, RNG)
        back = to_spectral(to_physical(u))
        assert np.abs(back.coeffs - u.coeffs).max() < 1e-12

    def test_transform_dispatch_and_mismatch(self):
        grid = Grid(1, (np.pi,), (4,))
        u = random_field(grid, RNG)
        phys = transform(u, "to_physical")
        assert isinstance(phys, PhysField)
        back = transform(phys, "to_spectral")
        assert np.abs(back.coeffs - u.coeffs).max() < 1e-12
        with pytest.raises(GridMismatchError):
            transform(u, "to_spectral")
        with pytest.raises(ValueError):
            transform(u, "sideways")

    def test_phys_field_shape_must_be_padded(self):
        grid = Grid(1, (np.pi,), (4,))
        with pytest.raises(ValueError):
            PhysField(grid, np.zeros((3, 4)))  # not the padded size


class TestProjection:
    def test_cutoff_zeroes_high_modes(self):
        grid = Grid(1, (np.pi,), (8,))
        u = random_field(grid, RNG)
        p = project(u, 4)
        assert np.abs(p.coeffs[:, 4:]).max() == 0.0
        assert np.array_equal(p.coeffs[:, :4], u.coeffs[:, :4])

    def test_idempotent(self):
        grid = Grid(2, (1.0, 1.0), (6, 6))
        u = random_field(grid, RNG)
        once = project(u, (3, 4))
        twice = project(once, (3, 4))
        assert np.array_equal(once.coeffs, twice.coeffs)

    def test_norm_nonincreasing(self):
        grid = Grid(1, (np.pi,), (8,))
        u = random_field(grid, RNG)
        assert sobolev_norm(project(u, 5), 0) <= sobolev_norm(u, 0) + 1e-15

    def test_self_adjoint(self):
        grid = Grid(1, (np.pi,), (8,))
        u, v = random_field(grid, RNG), random_field(grid, RNG)
        lhs = l2_inner(project(u, 5), v)
        rhs = l2_inner(u, project(v, 5))
        assert abs(lhs - rhs) < 1e-12

    def test_cutoff_beyond_modes_rejected(self):
        grid = Grid(1, (np.pi,), (8,))
        with pytest.raises(ValueError):
            project(random_field(grid, RNG), 9)


class TestLaplacian:
    def test_single_mode(self):
        grid = Grid(1, (np.pi,), (4,))
        u = eigenmode_field(grid, (1,), (0.7, 0.0, 0.0))  # lambda = 1
        lap = apply_laplacian(u)
        assert lap.coeffs[0, 1] == pytest.approx(-0.7, abs=1e-15)
        lap2 = apply_laplacian(u, power=2)
        assert lap2.coeffs[0, 1] == pytest.approx(0.7, abs=1e-15)

    def test_constant_annihilated(self):
        grid = Grid(2, (1.0, 2.0), (4, 4))
        c = constant_field(grid, (1.0, 2.0, 3.0))
        assert np.abs(apply_laplacian(c).coeffs).max() == 0.0
        assert np.abs(apply_laplacian(c, 2).coeffs).max() == 0.0

    def test_commutes_with_project(self):
        grid = Grid(2, (1.0, 2.0), (6, 6))
        u = random_field(grid, RNG)
        a = apply_laplacian(project(u, (4, 3)))
        b = project(apply_laplacian(u), (4, 3))
        assert np.abs(a.coeffs - b.coeffs).max() < 1e-14


class TestGradient:
    def test_cos_x(self):
        grid = Grid(1, (np.pi,), (6,))
        amp = 1 / math.sqrt(2 / np.pi)
        u = eigenmode_field(grid, (1,), (amp, 0.0, 0.0))  # u_x = cos(x)
        x = collocation_points(grid)[0]
        g = spectral_gradient(u)[0]
        assert np.abs(g.values[0] - (-np.sin(x))).max() < 1e-13

    def test_constant_zero_gradient(self):
        grid = Grid(3, (1.0, 1.0, 1.0), (3, 3, 3))
        c = constant_field(grid, (4.0, 5.0, 6.0))
        for g in spectral_gradient(c):
            assert np.abs(g.values).max() < 1e-13

    @pytest.mark.parametrize("grid", grids_for_dims())
    def test_parseval_gradient(self, grid):
        """Quadrature of |grad u|^2 equals the spectral sum of lambda |c|^2."""
        u = random_field(grid, RNG)
        w = quad_weight(grid)
        quad = sum(float((g * g).sum()) * w for g in gradient_values(grid, u.coeffs))
        spectral = float(
            (eigenvalue_array(grid) * (u.coeffs**2).sum(axis=0)).sum()
        )
        assert quad == pytest.approx(spectral, rel=1e-10)


class TestNorms:
    def test_sobolev_single_mode(self):
        grid = Grid(1, (np.pi,), (4,))
        u = eigenmode_field(grid, (1,), (1.0, 0.0, 0.0))  # lambda = 1, |c| = 1
        assert sobolev_norm(u, 1) == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_l2_of_constant(self):
        grid = Grid(2, (np.pi, 2.0), (4, 4))
        a = 1.3
        u = constant_field(grid, (a, 0.0, 0.0))
        assert sobolev_norm(u, 0) == pytest.approx(a * math.sqrt(grid.volume), rel=1e-14)

    def test_h3_of_sigma_mode(self):
        grid = Grid(1, (np.pi,), (4,))
        sigma = 0.37
        h = eigenmode_field(grid, (1,), (0.0, 0.0, sigma))
        assert sobolev_norm(h, 3) == pytest.approx(sigma * 2 * math.sqrt(2), rel=1e-14)

    def test_seminorm_matches_grad(self):
        grid = Grid(2, (np.pi, 1.0), (5, 4))
        u = random_field(grid, RNG)
        w = quad_weight(grid)
        quad = math.sqrt(
            sum(float((g * g).sum()) * w for g in gradient_values(grid, u.coeffs))
        )
        assert sobolev_norm(u, 1, seminorm=True) == pytest.approx(quad, rel=1e-10)

    def test_negative_order_rejected(self):
        u = random_field(Grid(1, (1.0,), (4,)), RNG)
        with pytest.raises(ValueError):
            sobolev_norm(u, -1.0)

    def test_l4_of_constant(self):
        grid = Grid(1, (2.0,), (4,))
        a = 0.9
        u = constant_field(grid, (a, 0.0, 0.0))
        assert lp_norm(u, 4) == pytest.approx((a**4 * grid.volume) ** 0.25, rel=1e-13)

    def test_l2_quadrature_matches_spectral(self):
        u = random_field(Grid(2, (np.pi, 2.0), (5, 6)), RNG)
        assert lp_norm(u, 2) == pytest.approx(sobolev_norm(u, 0), rel=1e-10)

    def test_linf_of_cos(self):
        grid = Grid(1, (np.pi,), (8,))
        amp = 1 / math.sqrt(2 / np.pi)
        u = eigenmode_field(grid, (1,), (amp, 0.0, 0.0))
        # max over midpoint nodes; the first node sits near but not at x=0
        x = collocation_points(grid)[0]
        assert lp_norm(u, math.inf) == pytest.approx(np.abs(np.cos(x)).max(), rel=1e-13)

    def test_unsupported_p(self):
        with pytest.raises(ValueError):
            lp_norm(random_field(Grid(1, (1.0,), (4,)), RNG), 3)


class TestDealiasing:
    def test_triple_product_exact(self):
        """Coefficients of a pointwise product of three retained-mode fields
        match the closed-form trig expansion on all retained modes."""
        grid = Grid(1, (np.pi,), (8,))
        # f = cos(2x), g = cos(3x), h = cos(6x): product expands into
        # cos(1x), cos(5x), cos(7x), cos(11x) with weight 1/4 each.
        def unit_cos(k):
            return eigenmode_field(grid, (k,), (1 / math.sqrt(2 / np.pi), 0, 0))

        fa = to_physical(unit_cos(2)).values
        fb = to_physical(unit_cos(3)).values
        fc = to_physical(unit_cos(6)).values
        prod = to_spectral(PhysField(grid, fa * fb * fc))
        c = prod.coeffs[0] * math.sqrt(2 / np.pi)  # back to raw cosine amplitudes
        expected = np.zeros(8)
        expected[1] = 0.25  # |2-3+6| would be 5; combinations: 2+3-6=-1 -> cos(1x)
        expected[5] = 0.25  # 2-3+6 = 5
        expected[7] = 0.25  # -2+3+6 = 7
        # 2+3+6 = 11 is beyond the retained range and must not alias back
        assert np.abs(c - expected).max() < 1e-10

    def test_product_of_three_random_fields(self):
        grid = Grid(1, (np.pi,), (6,))
        fine = Grid(1, (np.pi,), (18,))  # holds the full cubic expansion
        ua, ub, uc = (random_field(grid, RNG) for _ in range(3))
        pa, pb, pc = (to_physical(u).values for u in (ua, ub, uc))
        got = to_spectral(PhysField(grid, pa * pb * pc)).coeffs
        fa, fb, fc = (to_physical(embed(u, fine)).values for u in (ua, ub, uc))
        ref = to_spectral(PhysField(fine, fa * fb * fc)).coeffs[:, :6]
        assert np.abs(got - ref).max() < 1e-10


class TestFieldHelpers:
    def test_zero_field(self):
        grid = Grid(1, (1.0,), (4,))
        assert sobolev_norm(zero_field(grid), 0) == 0.0

    def test_embed_preserves_values(self):
        coarse = Grid(1, (np.pi,), (5,))
        fine = Grid(1, (np.pi,), (11,))
        u = random_field(coarse, RNG)
        v = embed(u, fine)
        assert sobolev_norm(v, 0) == pytest.approx(sobolev_norm(u, 0), rel=1e-14)
        with pytest.raises(GridMismatchError):
            embed(u, Grid(1, (2.0,), (11,)))

    def test_field_algebra(self):
        grid = Grid(1, (1.0,), (4,))
        u, v = random_field(grid, RNG), random_field(grid, RNG)
        w = 2.0 * u + v - u
        assert np.abs(w.coeffs - (u.coeffs + v.coeffs)).max() < 1e-15

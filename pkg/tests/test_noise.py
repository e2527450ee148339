"""Noise family construction, diffusion map, Ito correction, increments."""

import math
import warnings

import numpy as np
import pytest

from sllbar.grid import (
    Grid,
    constant_field,
    eigenmode_field,
    gradient_values,
    quad_weight,
    random_field,
    sobolev_norm,
    synthesize,
    to_physical,
    zero_field,
)
from sllbar.noise import (
    NoiseModel,
    NoiseTailWarning,
    build_noise_modes,
    check_noise_condition,
    coupled_increments,
    diffusion_apply,
    ito_correction,
    sample_increments,
)

RNG = np.random.default_rng(99)
G8 = Grid(1, (np.pi,), (8,))


def eigenmode_spec(*modes):
    return {"family": "eigenmode", "modes": list(modes)}


def constant_noise(grid, vector):
    c = np.zeros((3, *grid.modes))
    c[(slice(None),) + (0,) * grid.dim] = np.asarray(vector) * math.sqrt(grid.volume)
    return build_noise_modes({"family": "explicit", "coefficients": [c]}, grid)


class TestBuild:
    def test_single_mode_c_h(self):
        sigma = 0.6
        nm = build_noise_modes(
            eigenmode_spec({"sigma": sigma, "index": (1,), "direction": (0, 0, 1)}),
            G8,
        )
        assert nm.J == 1
        assert nm.C_h == pytest.approx(8 * sigma**2, rel=1e-14)

    def test_empty_family(self):
        nm = NoiseModel.empty(G8)
        assert nm.J == 0
        assert nm.C_h == 0.0
        assert check_noise_condition(nm) == 0.0

    def test_two_mode_c_h(self):
        nm = build_noise_modes(
            eigenmode_spec(
                {"sigma": 1.0, "index": (1,), "direction": (0, 0, 1)},
                {"sigma": 0.5, "index": (2,), "direction": (1, 0, 0)},
            ),
            G8,
        )
        # sigma^2 (1+lambda)^3: 1*8 + 0.25*125
        assert nm.C_h == pytest.approx(39.25, rel=1e-12)

    def test_lap_h_precomputed_exactly(self):
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 1.0, "index": (2,), "direction": (1, 0, 0)}),
            G8,
        )
        from sllbar.grid import apply_laplacian

        assert np.array_equal(nm.lap_h[0].coeffs, apply_laplacian(nm.h[0]).coeffs)

    def test_mode_outside_grid_rejected(self):
        with pytest.raises(ValueError):
            build_noise_modes(
                eigenmode_spec({"sigma": 1.0, "index": (8,), "direction": (0, 0, 1)}),
                G8,
            )

    def test_direction_normalized(self):
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 2.0, "index": (1,), "direction": (0, 0, 5)}),
            G8,
        )
        assert sobolev_norm(nm.h[0], 0) == pytest.approx(2.0, rel=1e-14)

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            build_noise_modes(
                eigenmode_spec({"sigma": 1.0, "index": (1,), "direction": (0, 0, 0)}),
                G8,
            )


class TestPhysicalInput:
    def test_retained_field_zero_loss(self):
        from sllbar.grid import synthesize
        from sllbar.noise import coefficient_from_physical

        u = random_field(G8, RNG)
        field, loss = coefficient_from_physical(G8, synthesize(G8, u.coeffs))
        assert np.abs(field.coeffs - u.coeffs).max() < 1e-12
        assert loss < 1e-7

    def test_out_of_band_content_reported(self):
        from sllbar.grid import collocation_points
        from sllbar.noise import coefficient_from_physical

        x = collocation_points(G8)[0]
        values = np.zeros((3, G8.padded[0]))
        values[0] = np.cos(x) + np.cos(12 * x)  # mode 12 exceeds N=8
        field, loss = coefficient_from_physical(G8, values)
        # equal mass in a retained and a dropped mode: loss = 1/sqrt(2)
        assert loss == pytest.approx(1 / np.sqrt(2), rel=1e-10)
        assert np.abs(field.coeffs[0, 2:]).max() < 1e-12

    def test_shape_mismatch(self):
        from sllbar.noise import coefficient_from_physical

        with pytest.raises(ValueError):
            coefficient_from_physical(G8, np.zeros((3, 8)))


class TestNoiseCondition:
    def test_matches_build(self):
        nm = build_noise_modes(
            eigenmode_spec(
                {"sigma": 0.9, "index": (1,), "direction": (0, 1, 0)},
                {"sigma": 0.1, "index": (4,), "direction": (1, 0, 0)},
            ),
            G8,
        )
        assert check_noise_condition(nm) == nm.C_h

    def test_quadrature_oracle(self):
        """H^3 sum matches |h|^2 + 3 |grad h|^2 + 3 |Lap h|^2 + |grad Lap h|^2
        computed by quadrature."""
        nm = build_noise_modes(
            eigenmode_spec(
                {"sigma": 0.8, "index": (1,), "direction": (0, 0, 1)},
                {"sigma": 0.25, "index": (3,), "direction": (1, 1, 0)},
            ),
            G8,
        )
        from sllbar.grid import apply_laplacian

        w = quad_weight(G8)
        total = 0.0
        for h in nm.h:
            vals = synthesize(G8, h.coeffs)
            lap = apply_laplacian(h)
            lap_vals = synthesize(G8, lap.coeffs)
            g = gradient_values(G8, h.coeffs)
            gl = gradient_values(G8, lap.coeffs)
            total += float((vals * vals).sum()) * w
            total += 3 * sum(float((a * a).sum()) * w for a in g)
            total += 3 * float((lap_vals * lap_vals).sum()) * w
            total += sum(float((a * a).sum()) * w for a in gl)
        assert check_noise_condition(nm) == pytest.approx(total, rel=1e-10)

    def test_bound_warning(self):
        spec = eigenmode_spec({"sigma": 1.0, "index": (1,), "direction": (0, 0, 1)})
        spec["c_h_bound"] = 1.0  # C_h = 8 exceeds it
        nm = build_noise_modes(spec, G8)
        with pytest.warns(NoiseTailWarning):
            check_noise_condition(nm)
        spec["c_h_bound"] = 100.0
        nm = build_noise_modes(spec, G8)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            check_noise_condition(nm)


class TestDiffusionApply:
    def test_zero_state(self):
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 0.5, "index": (2,), "direction": (0, 1, 0)}),
            G8,
        )
        G = diffusion_apply(zero_field(G8), nm, 0)
        expected = nm.h[0].coeffs - nm.lap_h[0].coeffs
        assert np.abs(G.coeffs - expected).max() < 1e-13

    def test_constant_h_and_u(self):
        c = np.array([0.0, 0.0, 0.9])
        a = np.array([0.3, -0.2, 0.5])
        nm = constant_noise(G8, c)
        G = to_physical(diffusion_apply(constant_field(G8, a), nm, 0)).values
        expected = -np.cross(a, c) + c
        for comp in range(3):
            assert np.abs(G[comp] - expected[comp]).max() < 1e-12

    def test_parallel_state_drops_cross(self):
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 0.5, "index": (1,), "direction": (0, 0, 1)}),
            G8,
        )
        u = eigenmode_field(G8, (1,), (0.0, 0.0, 2.0))  # u parallel to h pointwise
        G = diffusion_apply(u, nm, 0)
        expected = nm.h[0].coeffs - nm.lap_h[0].coeffs
        assert np.abs(G.coeffs - expected).max() < 1e-12

    def test_index_out_of_range(self):
        nm = NoiseModel.empty(G8)
        with pytest.raises(IndexError):
            diffusion_apply(zero_field(G8), nm, 0)

    def test_affine_in_u(self):
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 0.4, "index": (2,), "direction": (1, 0, 0)}),
            G8,
        )
        u, v = random_field(G8, RNG), random_field(G8, RNG)
        alpha = 0.3
        mix = alpha * u + (1 - alpha) * v
        lhs = diffusion_apply(mix, nm, 0).coeffs
        rhs = (
            alpha * diffusion_apply(u, nm, 0).coeffs
            + (1 - alpha) * diffusion_apply(v, nm, 0).coeffs
        )
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_cross_orthogonality(self):
        """(u x h_j, u) = 0 for every u, h_j."""
        nm = build_noise_modes(
            eigenmode_spec({"sigma": 1.1, "index": (3,), "direction": (0, 1, 1)}),
            G8,
        )
        for _ in range(10):
            u = random_field(G8, RNG)
            vals = synthesize(G8, u.coeffs)
            cross = np.cross(vals, nm.h_phys[0], axis=0)
            val = float((cross * vals).sum()) * quad_weight(G8)
            assert abs(val) < 1e-12 * max(1.0, sobolev_norm(u, 0) ** 2)


class TestItoCorrection:
    def test_empty_noise(self):
        assert np.abs(ito_correction(random_field(G8, RNG), NoiseModel.empty(G8)).coeffs).max() == 0.0

    def test_constant_oracle(self):
        """u = (1,0,0), h = (0,0,c): G = (0,c,c), correction = -(c^2,0,0)/2."""
        c = 1.2
        nm = constant_noise(G8, (0.0, 0.0, c))
        u = constant_field(G8, (1.0, 0.0, 0.0))
        corr = to_physical(ito_correction(u, nm)).values
        assert np.abs(corr[0] - (-0.5 * c**2)).max() < 1e-12
        assert np.abs(corr[1:]).max() < 1e-12

    def test_zero_state_constant_h(self):
        nm = constant_noise(G8, (0.4, -0.3, 0.8))
        corr = ito_correction(zero_field(G8), nm)
        assert np.abs(corr.coeffs).max() < 1e-13

    def test_affine_in_u(self):
        nm = build_noise_modes(
            eigenmode_spec(
                {"sigma": 0.5, "index": (1,), "direction": (0, 0, 1)},
                {"sigma": 0.3, "index": (2,), "direction": (1, 0, 0)},
            ),
            G8,
        )
        u, v = random_field(G8, RNG), random_field(G8, RNG)
        alpha = 0.25
        lhs = ito_correction(alpha * u + (1 - alpha) * v, nm).coeffs
        rhs = (
            alpha * ito_correction(u, nm).coeffs
            + (1 - alpha) * ito_correction(v, nm).coeffs
        )
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_parallel_state_reduces_to_additive_part(self):
        """u parallel to h_j pointwise: the correction equals
        -1/2 sum Pi((h_j - Lap h_j) x h_j)."""
        from sllbar.grid import PhysField, cross3, to_spectral

        nm = build_noise_modes(
            eigenmode_spec({"sigma": 0.7, "index": (2,), "direction": (0, 1, 0)}),
            G8,
        )
        u = 1.8 * nm.h[0]  # parallel pointwise
        got = ito_correction(u, nm).coeffs
        additive = nm.h[0].coeffs - nm.lap_h[0].coeffs
        from sllbar.grid import synthesize

        expected = -0.5 * to_spectral(
            PhysField(G8, cross3(synthesize(G8, additive), nm.h_phys[0]))
        ).coeffs
        assert np.abs(got - expected).max() < 1e-12


class TestIncrements:
    def test_determinism(self):
        a = sample_increments(11, 2, 345, 5, 0.01)
        b = sample_increments(11, 2, 345, 5, 0.01)
        assert np.array_equal(a.values, b.values)
        assert a.step == 345

    def test_prefix_stability(self):
        """The j-th increment does not depend on how many modes are drawn."""
        big = sample_increments(11, 2, 345, 8, 0.01)
        small = sample_increments(11, 2, 345, 3, 0.01)
        assert np.array_equal(big.values[:3], small.values)

    def test_distinct_keys_differ(self):
        base = sample_increments(1, 0, 0, 4, 0.01).values
        assert not np.array_equal(base, sample_increments(2, 0, 0, 4, 0.01).values)
        assert not np.array_equal(base, sample_increments(1, 1, 0, 4, 0.01).values)
        assert not np.array_equal(base, sample_increments(1, 0, 1, 4, 0.01).values)

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            sample_increments(0, 0, 0, 2, 0.0)

    def test_moment_statistics(self):
        dt = 0.02
        n = 10**6
        # one draw per step over many steps, J=1
        vals = np.concatenate(
            [sample_increments(5, 0, s, 64, dt).values for s in range(n // 64)]
        )
        se = math.sqrt(dt / n)
        assert abs(vals.mean()) < 4 * se
        assert vals.var() == pytest.approx(dt, rel=0.01)

    def test_cross_path_correlation(self):
        n = 10**5
        a = np.concatenate(
            [sample_increments(5, 0, s, 50, 1.0).values for s in range(n // 50)]
        )
        b = np.concatenate(
            [sample_increments(5, 1, s, 50, 1.0).values for s in range(n // 50)]
        )
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho) < 4 / math.sqrt(n)

    def test_coupling_sums_base_increments(self):
        coarse = coupled_increments(3, 1, 7, 2, 0.4, substeps=4)
        fine = sum(
            sample_increments(3, 1, 7 * 4 + i, 2, 0.1).values for i in range(4)
        )
        assert np.allclose(coarse.values, fine, rtol=0, atol=0)

    def test_variance_preserved_under_coupling(self):
        vals = np.array([
            coupled_increments(9, 0, s, 1, 0.1, substeps=8).values[0]
            for s in range(20000)
        ])
        assert vals.var() == pytest.approx(0.1, rel=0.05)

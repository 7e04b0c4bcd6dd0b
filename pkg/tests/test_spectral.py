"""Spectral substrate: transforms, multiplier operators, products, norms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisob.spectral import (
    Grid,
    GridMismatchError,
    SpectralField,
    VectorField,
    biot_savart,
    derivative,
    divergence,
    fractional_d1,
    fractional_d2,
    gradient,
    h_norm,
    inner_l2,
    inv_one_minus_d2sq,
    l2_norm,
    leray_project,
    lp_norm,
    nonlinear_product,
    riesz_r1,
    sharp_truncate,
    vorticity,
)

from conftest import physical_inner, random_field


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            Grid(15, 64)
        with pytest.raises(ValueError):
            Grid(64, 14)
        with pytest.raises(ValueError):
            Grid(63, 64)
        with pytest.raises(ValueError):
            Grid(64, 64, l1=-1.0)

    def test_wavenumbers_integer_modes(self, grid64):
        assert grid64.modes1[0, 0] == 0
        assert grid64.modes1[1, 0] == 1
        assert grid64.modes1[-1, 0] == -1
        assert grid64.modes1[32, 0] == -32  # Nyquist stored negative

    def test_dealias_mask(self, grid64):
        m = grid64.dealias_mask
        assert m[0, 0]
        assert not m[32, 0]
        assert m[21, 0] and not m[22, 0]  # 64/3 = 21.33


class TestTransforms:
    def test_round_trip(self, grid64):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(64, 64))
        f = SpectralField.from_values(grid64, vals)
        assert np.abs(f.values() - vals).max() <= 1e-12 * np.abs(vals).max()

    def test_hermitian_symmetry_of_real_fields(self, rand_field):
        c = rand_field.coeffs
        n1, n2 = c.shape
        i1 = (-np.arange(n1)) % n1
        i2 = (-np.arange(n2)) % n2
        assert np.abs(c - np.conj(c[np.ix_(i1, i2)])).max() < 1e-14

    def test_grid_mismatch_rejected(self, grid64):
        f = SpectralField.zero(grid64)
        g = SpectralField.zero(Grid(32, 32))
        with pytest.raises(GridMismatchError):
            _ = f + g


class TestDerivative:
    def test_constant_derivative_zero(self, grid64):
        f = SpectralField.constant(grid64, 3.7)
        for axis in (1, 2):
            for order in (1, 2, 3):
                assert l2_norm(derivative(f, axis, order)) == 0.0

    def test_sin_second_derivative(self, grid64):
        x1, _ = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(x1))
        d2 = derivative(f, 1, 2)
        assert np.abs(d2.values() + np.sin(x1)).max() < 1e-12

    def test_matches_finite_differences_at_second_order(self):
        # centered-difference oracle on a fixed band-limited function
        errs = []
        for n in (64, 128, 256):
            grid = Grid(n, n)
            f = random_field(grid, seed=5, kmax=10.0)
            vals = f.values()
            h = grid.l1 / n
            fd = (np.roll(vals, -1, axis=0) - np.roll(vals, 1, axis=0)) / (2 * h)
            errs.append(np.abs(derivative(f, 1).values() - fd).max())
        assert errs[0] > errs[1] > errs[2]
        for a, b in zip(errs, errs[1:]):
            assert 3.0 < a / b < 5.0  # O(h^2) oracle convergence

    def test_order_validation(self, rand_field):
        with pytest.raises(ValueError):
            derivative(rand_field, 1, 0)
        with pytest.raises(ValueError):
            derivative(rand_field, 3, 1)


class TestFractional:
    def test_sigma_zero_is_identity(self, rand_field):
        out = fractional_d1(rand_field, 0.0)
        assert np.array_equal(out.coeffs, rand_field.coeffs)

    def test_sigma_two_matches_negative_second_derivative(self, grid64):
        x1, _ = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(3 * x1))
        frac = fractional_d1(f, 2.0)
        assert np.abs(frac.values() - 9 * np.sin(3 * x1)).max() < 1e-11
        viad = derivative(f, 1, 2)
        assert np.abs(frac.coeffs + viad.coeffs).max() < 1e-14

    def test_parseval_oracle_sigma_15(self, rand_field):
        # direct summation of |k1|^3 |fhat|^2 is the independent oracle
        g = rand_field.grid
        direct = math.sqrt(
            g.area * float(np.sum(np.abs(g.k1) ** 3 * np.abs(rand_field.coeffs) ** 2))
        )
        assert abs(l2_norm(fractional_d1(rand_field, 1.5)) - direct) <= 1e-12 * direct

    def test_negative_sigma_rejected(self, rand_field):
        with pytest.raises(ValueError):
            fractional_d1(rand_field, -0.5)


class TestRiesz:
    def test_constant_annihilated(self, grid64):
        f = SpectralField.constant(grid64, 2.0)
        assert l2_norm(riesz_r1(f)) == 0.0

    def test_composition_identity_exact(self, rand_field):
        # d1 o R1 equals i*|d1| coefficient-by-coefficient
        g = rand_field.grid
        lhs = derivative(riesz_r1(rand_field), 1).coeffs
        rhs = 1j * np.abs(g.k1) * rand_field.coeffs * np.ones_like(g.k2)
        assert np.abs(lhs - rhs).max() == 0.0

    def test_l2_contraction(self, rand_field):
        assert l2_norm(riesz_r1(rand_field)) <= l2_norm(rand_field)

    def test_sine_maps_to_cosine_magnitude(self, grid64):
        x1, _ = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(x1))
        out = riesz_r1(f)
        # sign(k1) convention: output is -i*cos(x1); |values| match cos
        assert np.abs(np.abs(out.values_complex()) - np.abs(np.cos(x1))).max() < 1e-12


class TestLeray:
    def test_divergence_free_fixed(self, grid64):
        x1, x2 = grid64.points()
        v = VectorField.from_values(grid64, -np.cos(x1) * np.sin(x2), np.sin(x1) * np.cos(x2))
        pv = leray_project(v)
        assert np.abs(pv.u1.coeffs - v.u1.coeffs).max() < 1e-12
        assert np.abs(pv.u2.coeffs - v.u2.coeffs).max() < 1e-12

    def test_gradients_in_kernel(self, grid64):
        phi = random_field(grid64, seed=9)
        phi.coeffs[0, 0] = 0.0
        v = gradient(phi)
        pv = leray_project(v)
        scale = max(l2_norm(v.u1), l2_norm(v.u2))
        assert l2_norm(pv.u1) < 1e-12 * scale
        assert l2_norm(pv.u2) < 1e-12 * scale

    def test_idempotent_and_divergence_free(self, grid64):
        v = VectorField(random_field(grid64, 1), random_field(grid64, 2))
        p1 = leray_project(v)
        p2 = leray_project(p1)
        scale = l2_norm(v.u1) + l2_norm(v.u2)
        assert np.abs(p2.u1.coeffs - p1.u1.coeffs).max() < 1e-14 * scale
        assert l2_norm(divergence(p1)) < 1e-12 * scale
        assert p1.divergence_free

    def test_self_adjoint_physical_oracle(self, grid64):
        v = VectorField(random_field(grid64, 3), random_field(grid64, 4))
        w = VectorField(random_field(grid64, 5), random_field(grid64, 6))
        pv, pw = leray_project(v), leray_project(w)
        lhs = physical_inner(pv.u1, w.u1) + physical_inner(pv.u2, w.u2)
        rhs = physical_inner(v.u1, pw.u1) + physical_inner(v.u2, pw.u2)
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1)


class TestSharpTruncate:
    def test_full_band_identity(self, rand_field):
        out = sharp_truncate(rand_field, radius=1000.0)
        assert np.array_equal(out.coeffs, rand_field.coeffs)

    def test_indicator(self, grid64):
        f = SpectralField.zero(grid64)  # exact single mode at |m| = 5
        f.coeffs[3, 4] = 0.5
        f.coeffs[-3, -4] = 0.5
        assert l2_norm(sharp_truncate(f, 4.0)) == 0.0
        assert abs(l2_norm(sharp_truncate(f, 5.0)) - l2_norm(f)) < 1e-14

    def test_idempotent_self_adjoint(self, grid64):
        f = random_field(grid64, 7)
        g = random_field(grid64, 8)
        tf = sharp_truncate(f, 9.0)
        assert np.array_equal(sharp_truncate(tf, 9.0).coeffs, tf.coeffs)
        lhs = physical_inner(tf, g)
        rhs = physical_inner(f, sharp_truncate(g, 9.0))
        assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1)


class TestInvOneMinusD2sq:
    def test_constant_unchanged(self, grid64):
        f = SpectralField.constant(grid64, 1.5)
        assert np.array_equal(inv_one_minus_d2sq(f).coeffs, f.coeffs)

    def test_eigenfunction(self, grid64):
        _, x2 = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(2 * x2))
        out = inv_one_minus_d2sq(f)
        assert np.abs(out.values() - np.sin(2 * x2) / 5.0).max() < 1e-13

    def test_round_trip(self, rand_field):
        inv = inv_one_minus_d2sq(rand_field)
        back = inv - derivative(inv, 2, 2)
        assert np.abs(back.coeffs - rand_field.coeffs).max() <= 1e-12 * np.abs(
            rand_field.coeffs
        ).max()


class TestNonlinearProduct:
    def test_identity_element(self, grid64):
        f = random_field(grid64, 11, kmax=grid64.dealias_radius)
        one = SpectralField.constant(grid64, 1.0)
        out = nonlinear_product(f, one)
        assert np.abs(out.coeffs - f.coeffs).max() < 1e-14

    def test_product_to_sum(self, grid64):
        x1, _ = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(x1))
        out = nonlinear_product(f, f)
        assert np.abs(out.values() - (1 - np.cos(2 * x1)) / 2).max() < 1e-13

    def test_convolution_oracle_32(self):
        # O(N^4) wraparound convolution, truncated to the retained band
        grid = Grid(32, 32)
        f = random_field(grid, 21, kmax=grid.dealias_radius)
        g = random_field(grid, 22, kmax=grid.dealias_radius)
        n1, n2 = 32, 32
        conv = np.zeros((n1, n2), dtype=complex)
        fc, gc = f.coeffs, g.coeffs
        for a in range(n1):
            for b in range(n2):
                conv[a, b] = np.sum(
                    fc * gc[(a - np.arange(n1))[:, None] % n1, (b - np.arange(n2))[None, :] % n2]
                )
        conv *= grid.dealias_mask
        out = nonlinear_product(f, g)
        scale = np.abs(conv).max()
        assert np.abs(out.coeffs - conv).max() <= 1e-10 * scale


class TestLpNorm:
    def test_constant(self, grid64):
        f = SpectralField.constant(grid64, -2.5)
        assert abs(lp_norm(f, 2) - 2.5 * math.sqrt(grid64.area)) < 1e-12

    def test_sine_closed_form(self, grid64):
        x1, _ = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(x1))
        assert abs(lp_norm(f, 2) - 4.442882938158366) < 1e-12  # sqrt(2*pi^2)

    def test_parseval(self, rand_field):
        assert abs(lp_norm(rand_field, 2) - l2_norm(rand_field)) <= 1e-12 * l2_norm(rand_field)

    def test_linf_is_grid_max(self, grid64):
        x1, x2 = grid64.points()
        f = SpectralField.from_values(grid64, np.sin(x1) * np.sin(x2))
        assert abs(lp_norm(f, math.inf) - 1.0) < 1e-12

    def test_p_validation(self, rand_field):
        with pytest.raises(ValueError):
            lp_norm(rand_field, 0.5)


class TestVorticityBiotSavart:
    def test_round_trip(self, grid64):
        om = random_field(grid64, 31)
        om.coeffs[0, 0] = 0.0
        u = biot_savart(om)
        back = vorticity(u)
        assert np.abs(back.coeffs - om.coeffs).max() <= 1e-12 * np.abs(om.coeffs).max()

    def test_single_mode(self, grid64):
        _, x2 = grid64.points()
        u = VectorField.from_values(grid64, -np.sin(x2), np.zeros_like(x2))
        om = vorticity(u)
        assert np.abs(om.values() - np.cos(x2)).max() < 1e-12

    def test_gradient_norm_equals_vorticity_norm(self, grid64):
        om = random_field(grid64, 33)
        om.coeffs[0, 0] = 0.0
        u = biot_savart(om)
        grad_sq = sum(
            l2_norm(derivative(c, a)) ** 2 for c in (u.u1, u.u2) for a in (1, 2)
        )
        assert abs(math.sqrt(grad_sq) - l2_norm(om)) <= 1e-12 * l2_norm(om)

    def test_mean_vorticity_rejected(self, grid64):
        om = SpectralField.constant(grid64, 1.0)
        with pytest.raises(ValueError):
            biot_savart(om)

    def test_output_gauge(self, grid64):
        om = random_field(grid64, 35)
        om.coeffs[0, 0] = 0.0
        u = biot_savart(om)
        assert u.divergence_free
        assert u.u1.coeffs[0, 0] == 0.0 and u.u2.coeffs[0, 0] == 0.0
        assert l2_norm(divergence(u)) < 1e-12 * l2_norm(u.u1)


_OPS = {
    "d1": lambda f: derivative(f, 1),
    "d2sq": lambda f: derivative(f, 2, 2),
    "frac07": lambda f: fractional_d1(f, 0.7),
    "frac2_12": lambda f: fractional_d2(f, 1.2),
    "riesz": riesz_r1,
    "inv2": inv_one_minus_d2sq,
    "ball9": lambda f: sharp_truncate(f, 9.0),
}


class TestMultiplierAlgebra:
    @settings(max_examples=20, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        a=st.sampled_from(sorted(_OPS)),
        b=st.sampled_from(sorted(_OPS)),
    )
    def test_multipliers_commute(self, seed, a, b):
        grid = Grid(32, 32)
        f = random_field(grid, seed)
        left = _OPS[a](_OPS[b](f)).coeffs
        right = _OPS[b](_OPS[a](f)).coeffs
        scale = max(np.abs(left).max(), np.abs(right).max(), 1e-300)
        assert np.abs(left - right).max() <= 1e-12 * scale


class TestAdvectionCancellation:
    def test_divfree_advection_orthogonal_to_field(self, grid64):
        # the quadratic cancellation behind every L2 energy identity
        om = random_field(grid64, 51, kmax=grid64.dealias_radius / 2)
        om.coeffs[0, 0] = 0.0
        u = biot_savart(om)
        f = random_field(grid64, 52, kmax=grid64.dealias_radius / 2)
        adv = nonlinear_product(u.u1, derivative(f, 1)) + nonlinear_product(
            u.u2, derivative(f, 2)
        )
        val = inner_l2(adv, f)
        scale = l2_norm(adv) * l2_norm(f)
        assert abs(val) <= 1e-12 * max(scale, 1e-300)


def test_h_norm_reduces_to_l2(rand_field):
    assert abs(h_norm(rand_field, 0.0) - l2_norm(rand_field)) < 1e-12

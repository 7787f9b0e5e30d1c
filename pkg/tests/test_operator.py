import numpy as np
import pytest

import paneitzlab as pl

from _oracles import dense_operator_matrix_1d

TWO_PI = 2.0 * np.pi


def random_field(grid, rng):
    return pl.ScalarField(grid, rng.standard_normal(grid.shape))


class TestApply:
    def test_constant_field(self, ref_op):
        u = pl.ScalarField.constant(ref_op.grid, 1.0)
        out = ref_op.apply(u)
        assert np.abs(out.values - 6.5625).max() < 1e-12

    def test_single_cosine_mode(self, ref_op):
        x = ref_op.grid.meshgrid()[0]
        u = pl.ScalarField(ref_op.grid, np.cos(x))
        out = ref_op.apply(u)
        # sigma(1) + beta = 1 + 5.5 + 6.5625
        assert np.abs(out.values - 13.0625 * np.cos(x)).max() < 1e-9

    def test_constant_potential_shift(self, ref_params, ref_grid):
        v = 0.7
        op0 = pl.build_operator(ref_params, ref_grid)
        opv = pl.build_operator(
            ref_params, ref_grid, potential=pl.ScalarField.constant(ref_grid, v)
        )
        rng = np.random.default_rng(1)
        u = random_field(ref_grid, rng)
        lhs = opv.apply(u).values
        rhs = op0.apply(u).values - ref_params.b_n * v * u.values
        assert np.abs(lhs - rhs).max() < 1e-11 * np.abs(rhs).max()

    def test_linearity(self, ref_op):
        rng = np.random.default_rng(2)
        u, v = random_field(ref_op.grid, rng), random_field(ref_op.grid, rng)
        a, b = 1.37, -2.21
        lhs = ref_op.apply(a * u + b * v).values
        rhs = a * ref_op.apply(u).values + b * ref_op.apply(v).values
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() < 1e-12 * scale

    def test_self_adjoint(self, ref_params, ref_grid):
        x = ref_grid.meshgrid()[0]
        V = pl.ScalarField(ref_grid, 1.0 + np.cos(x) ** 2)
        op = pl.build_operator(ref_params, ref_grid, potential=V)
        rng = np.random.default_rng(3)
        for _ in range(20):
            u, v = random_field(ref_grid, rng), random_field(ref_grid, rng)
            a = ref_grid.inner(op.apply(u).values, v.values)
            b = ref_grid.inner(u.values, op.apply(v).values)
            assert abs(a - b) < 1e-10 * max(abs(a), abs(b), 1.0)

    def test_grid_mismatch(self, ref_op):
        other = pl.ScalarField.constant(pl.SpectralGrid((32,), (TWO_PI,)), 1.0)
        with pytest.raises(pl.GridMismatchError):
            ref_op.apply(other)

    def test_energy_identity(self, ref_params, ref_grid):
        x = ref_grid.meshgrid()[0]
        V = pl.ScalarField(ref_grid, 0.5 * (1.0 + np.sin(x)))
        op = pl.build_operator(ref_params, ref_grid, potential=V)
        rng = np.random.default_rng(4)
        u = random_field(ref_grid, rng)
        lhs = op.form(u)
        uhat = np.fft.fftn(u.values)
        spectral_weight = ref_grid.cell_weight / ref_grid.npoints
        rhs = float(np.sum(op.sigma * np.abs(uhat) ** 2) * spectral_weight)
        rhs += ref_grid.integrate(op.W.values * u.values**2)
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)

    def test_matches_dense_dft_assembly(self, ref_params):
        grid = pl.SpectralGrid((32,), (TWO_PI,))
        x = grid.meshgrid()[0]
        V = pl.ScalarField(grid, 0.3 * (1.0 + np.cos(x)))
        op = pl.build_operator(ref_params, grid, potential=V)
        M = dense_operator_matrix_1d(ref_params.alpha, 32, TWO_PI, op.W.values)
        rng = np.random.default_rng(5)
        u = rng.standard_normal(32)
        lhs = op.apply_values(u)
        rhs = M @ u
        assert np.abs(lhs - rhs).max() < 1e-9 * np.abs(rhs).max()


class TestTwoDimensional:
    def test_apply_and_solve(self, ref_params):
        grid = pl.SpectralGrid((16, 16), (TWO_PI, TWO_PI))
        X, Y = grid.meshgrid()
        V = pl.ScalarField(grid, 0.5 * (1.0 + np.sin(X) * np.cos(Y)))
        op = pl.build_operator(ref_params, grid, potential=V)
        rng = np.random.default_rng(9)
        u = pl.ScalarField(grid, rng.standard_normal(grid.shape))
        v = pl.ScalarField(grid, rng.standard_normal(grid.shape))
        a = grid.inner(op.apply(u).values, v.values)
        b = grid.inner(u.values, op.apply(v).values)
        assert abs(a - b) < 1e-10 * max(abs(a), abs(b))
        rhs = pl.ScalarField(grid, rng.standard_normal(grid.shape))
        sol = op.solve_shifted(0.7, rhs)
        resid = op.apply(sol).values + 0.7 * sol.values - rhs.values
        assert np.abs(resid).max() <= 1e-10 * np.abs(rhs.values).max()

    def test_constant_solution_matches_1d(self, ref_params):
        # the scalar fixed point does not care about the lattice dimension
        grid = pl.SpectralGrid((16, 16), (TWO_PI, TWO_PI))
        op = pl.build_operator(ref_params, grid)
        prob = pl.ProblemSpec(
            A=pl.ScalarField.constant(grid, 1.0),
            B=pl.ScalarField.constant(grid, 1.0),
            p=3.0, q=2.0, mode="absorption",
        )
        rep = pl.monotone_solve(op, prob, pl.find_sub_super(op, prob))
        assert np.abs(rep.u.values - 0.6110358366588059).max() < 1e-8


class TestSolveShifted:
    def test_single_mode_inverse(self, ref_op):
        x = ref_op.grid.meshgrid()[0]
        lam = 0.3
        target = np.cos(2 * x)
        t = 4.0
        factor = t * t + 5.5 * t + 6.5625 + lam
        rhs = pl.ScalarField(ref_op.grid, factor * target)
        u = ref_op.solve_shifted(lam, rhs)
        assert np.abs(u.values - target).max() < 1e-10

    def test_constant_rhs(self, ref_op):
        lam = 2.0
        rhs = pl.ScalarField.constant(ref_op.grid, 3.0)
        u = ref_op.solve_shifted(lam, rhs)
        assert np.abs(u.values - 3.0 / (6.5625 + lam)).max() < 1e-11

    def test_variable_potential_residual(self, ref_params, ref_grid):
        x = ref_grid.meshgrid()[0]
        V = pl.ScalarField(ref_grid, 2.0 + np.sin(3 * x))
        op = pl.build_operator(ref_params, ref_grid, potential=V)
        rng = np.random.default_rng(6)
        rhs = pl.ScalarField(ref_grid, rng.standard_normal(64))
        u = op.solve_shifted(0.5, rhs)
        resid = op.apply(u).values + 0.5 * u.values - rhs.values
        assert np.abs(resid).max() <= 1e-10 * np.abs(rhs.values).max()

    def test_roundtrip_band_limited(self, ref_op):
        rng = np.random.default_rng(7)
        hat = np.zeros(64, dtype=complex)
        hat[:6] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        hat[1:6] = hat[1:6]
        vals = np.fft.ifft(hat + np.conj(np.roll(hat[::-1], 1))).real
        u = pl.ScalarField(ref_op.grid, vals)
        lam = 1.0
        rhs = pl.ScalarField(ref_op.grid, ref_op.apply(u).values + lam * u.values)
        back = ref_op.solve_shifted(lam, rhs)
        assert np.abs(back.values - u.values).max() < 1e-10 * max(np.abs(u.values).max(), 1.0)

    def test_coercivity_refusal(self, ref_params, ref_grid):
        V = pl.ScalarField.constant(ref_grid, ref_params.Qconst + 30.0)
        op = pl.build_operator(ref_params, ref_grid, potential=V)
        with pytest.raises(pl.CoercivityError):
            op.solve_shifted(0.0, pl.ScalarField.constant(ref_grid, 1.0))


class TestConformalQ:
    def test_identity_factor(self, ref_op, ref_params):
        u = pl.ScalarField.constant(ref_op.grid, 1.0)
        out = ref_op.conformal_Q(u)
        assert np.abs(out.values - ref_params.Qconst).max() < 1e-10

    def test_constant_factor(self, ref_op, ref_params):
        c = 1.7
        n = ref_params.n
        out = ref_op.conformal_Q(pl.ScalarField.constant(ref_op.grid, c))
        expected = c ** (-8.0 / (n - 4.0)) * ref_params.Qconst
        assert np.abs(out.values - expected).max() < 1e-10 * abs(expected)

    def test_perturbed_factor_against_dense(self, ref_params):
        grid = pl.SpectralGrid((32,), (TWO_PI,))
        op = pl.build_operator(ref_params, grid)
        x = grid.meshgrid()[0]
        u = 1.0 + 0.1 * np.cos(x)
        out = op.conformal_Q(pl.ScalarField(grid, u))
        M = dense_operator_matrix_1d(ref_params.alpha, 32, TWO_PI,
                                     np.full(32, ref_params.beta))
        n = ref_params.n
        expected = (2.0 / (n - 4.0)) * u ** (-(n + 4.0) / (n - 4.0)) * (M @ u)
        assert np.all(np.isfinite(out.values))
        assert np.abs(out.values - expected).max() < 1e-9 * np.abs(expected).max()

    def test_requires_positive_factor(self, ref_op):
        bad = pl.ScalarField.constant(ref_op.grid, -1.0)
        with pytest.raises(ValueError):
            ref_op.conformal_Q(bad)

import numpy as np
import pytest

from blockmg import (MatrixTrigPolynomial, coarse_symbol, corner_sum,
                     eigenvalue_functions, find_zero, max_coeff_difference,
                     read_symbol, tensor_symbol, write_symbol)
from blockmg.errors import ArgumentError, SymbolZeroError, TrackingError
from blockmg.symbol import tracked_eigenpair

from conftest import random_hermitian_symbol, random_symbol


def scalar(coeffs):
    return MatrixTrigPolynomial.scalar(coeffs)


LAPLACE = {0: 2.0, 1: -1.0, -1: -1.0}          # 2 - 2cos
INTERP = {0: 2.0, 1: 1.0, -1: 1.0}             # 2 + 2cos


class TestEvaluate:
    def test_f_q2_at_zero(self, f_q2):
        want = np.array([[16.0, -16.0], [-16.0, 16.0]]) / 3.0
        np.testing.assert_allclose(f_q2.evaluate(0.0), want, atol=1e-12)

    def test_f_q2_at_pi(self, f_q2):
        want = np.array([[16.0, 0.0], [0.0, 12.0]]) / 3.0
        np.testing.assert_allclose(f_q2.evaluate(np.pi), want, atol=1e-12)

    def test_p_l2_at_pi(self, p_l2):
        want = np.array([[0.0, 0.0], [-2.0, 2.0]])
        np.testing.assert_allclose(p_l2.evaluate(np.pi), want, atol=1e-12)

    def test_hermitian_closure_many_points(self, f_q2):
        rng = np.random.default_rng(0)
        thetas = rng.uniform(0, 2 * np.pi, size=1_000_000)
        vals = f_q2.evaluate_grid(thetas)
        dev = np.max(np.abs(vals - np.conj(np.swapaxes(vals, 1, 2))))
        assert dev == 0.0  # symmetrized exactly

    def test_grid_matches_pointwise(self, p_l2):
        thetas = np.linspace(0, 2 * np.pi, 17)
        grid = p_l2.evaluate_grid(thetas)
        for k, t in enumerate(thetas):
            np.testing.assert_allclose(grid[k], p_l2.evaluate(t), atol=1e-14)

    def test_nonfinite_point_rejected(self, p_l2):
        with pytest.raises(ArgumentError):
            p_l2.evaluate(np.nan)


class TestCoefficients:
    def test_trim_drops_negligible(self):
        f = scalar({0: 1.0, 5: 1e-16})
        assert (5,) not in f.coeffs

    def test_hermitian_detection(self, f_q2, p_l2):
        assert f_q2.hermitian
        assert not p_l2.hermitian

    def test_product_is_pointwise(self, f_q2, p_l2):
        g = p_l2.conj_transpose() @ f_q2 @ p_l2
        for t in (0.3, 1.7, 4.2):
            E = p_l2.evaluate(t)
            np.testing.assert_allclose(
                g.evaluate(t), E.conj().T @ f_q2.evaluate(t) @ E, atol=1e-12)

    def test_shifted(self, p_l2):
        t = 0.9
        np.testing.assert_allclose(p_l2.shifted([1]).evaluate(t),
                                   p_l2.evaluate(t + np.pi), atol=1e-12)


class TestEigenvalueFunctions:
    def test_scalar_laplacian(self):
        curves = eigenvalue_functions(scalar(LAPLACE), [0.0, np.pi / 2, np.pi])
        np.testing.assert_allclose(curves.ascending[:, 0], [0.0, 2.0, 4.0],
                                   atol=1e-12)

    def test_f_q2_values(self, f_q2):
        curves = eigenvalue_functions(f_q2, [0.0, np.pi])
        np.testing.assert_allclose(curves.ascending[0], [0.0, 32.0 / 3.0],
                                   atol=1e-12)
        np.testing.assert_allclose(curves.ascending[1], [4.0, 16.0 / 3.0],
                                   atol=1e-12)

    def test_tracking_through_crossing(self):
        # diagonal symbol with eigenvalue curves 2 -+ cos crossing at pi/2
        f = MatrixTrigPolynomial({
            0: np.diag([2.0, 2.0]),
            1: np.diag([0.5, -0.5]),
            -1: np.diag([0.5, -0.5])})
        grid = np.linspace(0, np.pi, 41)
        curves = eigenvalue_functions(f, grid)
        np.testing.assert_allclose(curves.tracked[:, 0], 2.0 - np.cos(grid),
                                   atol=1e-10)
        np.testing.assert_allclose(curves.tracked[:, 1], 2.0 + np.cos(grid),
                                   atol=1e-10)
        # ascending order swaps after the crossing
        assert curves.ascending[-1, 0] == pytest.approx(1.0)

    def test_empty_grid_rejected(self, f_q2):
        with pytest.raises(ArgumentError):
            eigenvalue_functions(f_q2, [])

    def test_requires_hermitian(self, p_l2):
        with pytest.raises(ArgumentError):
            eigenvalue_functions(p_l2, [0.0])


class TestFindZero:
    def test_scalar_laplacian(self):
        z = find_zero(scalar(LAPLACE))
        assert z.theta0[0] == pytest.approx(0.0, abs=1e-10)
        assert z.order == 2
        np.testing.assert_allclose(np.abs(z.q_jbar), [1.0])

    def test_f_q2(self, f_q2):
        z = find_zero(f_q2)
        assert z.theta0[0] == pytest.approx(0.0, abs=1e-10)
        assert z.jbar == 1
        assert z.order == 2
        np.testing.assert_allclose(z.q_jbar, np.ones(2) / np.sqrt(2), atol=1e-10)
        # the vanishing eigenvalue is unique and the kernel residual is tiny
        v = f_q2.evaluate(z.theta0[0])
        assert np.linalg.norm(v @ z.q_jbar) <= 1e-10 * np.linalg.norm(v, 2)

    def test_fourth_order_zero(self):
        # (2 - 2cos)^2 = 6 - 8cos + 2cos(2.)
        f = scalar({0: 6.0, 1: -4.0, -1: -4.0, 2: 1.0, -2: 1.0})
        z = find_zero(f)
        assert z.order == 4

    def test_not_nonnegative(self):
        with pytest.raises(SymbolZeroError):
            find_zero(scalar({0: 0.0, 1: 0.5, -1: 0.5}))  # cos dips negative

    def test_multiple_zeros(self):
        with pytest.raises(SymbolZeroError):
            find_zero(scalar({0: 2.0, 2: -1.0, -2: -1.0}))  # zeros at 0 and pi

    def test_zero_off_grid_points(self):
        # 2 - 2cos(theta - pi/3) has its zero at pi/3 (a snap candidate)
        shift = np.exp(-1j * np.pi / 3)
        z = find_zero(MatrixTrigPolynomial.scalar(
            {0: 2.0, 1: -shift, -1: -np.conj(shift)}))
        assert z.theta0[0] == pytest.approx(np.pi / 3, abs=1e-8)


class TestCoarseSymbol:
    def test_constant_result(self):
        fhat = coarse_symbol(scalar(LAPLACE), scalar({0: 1.0}))
        assert set(fhat.coeffs) == {(0,)}
        np.testing.assert_allclose(fhat.coeffs[(0,)], [[2.0]])

    def test_laplacian_with_interpolation(self):
        fhat = coarse_symbol(scalar(LAPLACE), scalar(INTERP))
        want = scalar({0: 4.0, 1: -2.0, -1: -2.0})
        assert max_coeff_difference(fhat, want) <= 1e-12

    def test_identity_projector_collapses(self, f_q2):
        p = MatrixTrigPolynomial.constant(np.eye(2))
        fhat = coarse_symbol(f_q2, p)
        for t in (0.0, 0.7, 2.9):
            want = 0.5 * (f_q2.evaluate(t / 2) + f_q2.evaluate(t / 2 + np.pi))
            np.testing.assert_allclose(fhat.evaluate(t), want, atol=1e-12)

    def test_halfangle_consistency_random(self):
        rng = np.random.default_rng(21)
        for _ in range(6):
            d = int(rng.integers(1, 4))
            f = random_hermitian_symbol(rng, d, 2, shift_to_psd=True)
            p = random_symbol(rng, d, 2)
            fhat = coarse_symbol(f, p)
            g = p.conj_transpose() @ f @ p
            for t in rng.uniform(0, 2 * np.pi, size=100):
                want = 0.5 * (g.evaluate(t) + g.evaluate(t + np.pi))
                got = fhat.evaluate(2 * t)
                assert np.max(np.abs(got - want)) <= 1e-10 * (1 + np.abs(want).max())

    def test_dimension_mismatch(self, f_q2):
        with pytest.raises(Exception):
            coarse_symbol(f_q2, scalar({0: 1.0}))


class TestTensorSymbol:
    def test_single_factor_unchanged(self, p_l2):
        assert tensor_symbol([p_l2]) is p_l2

    def test_scalar_product(self):
        p = scalar(INTERP)
        p2 = tensor_symbol([p, p])
        for t1, t2 in [(0.0, 1.0), (2.0, 0.5)]:
            want = (2 + 2 * np.cos(t1)) * (2 + 2 * np.cos(t2))
            assert p2.evaluate([t1, t2])[0, 0] == pytest.approx(want)

    def test_block_tensor_at_origin(self, p_l2):
        p2 = tensor_symbol([p_l2, p_l2])
        np.testing.assert_allclose(p2.evaluate([0.0, 0.0]),
                                   np.full((4, 4), 4.0), atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            tensor_symbol([])


class TestCornerSum:
    def test_p_l2_at_zero(self, p_l2):
        want = np.array([[12.0, 4.0], [4.0, 12.0]])
        np.testing.assert_allclose(corner_sum(p_l2, 0.0), want, atol=1e-12)

    def test_scalar_hat(self):
        p = scalar({0: 1.0, 1: 0.5, -1: 0.5})   # 1 + cos
        for t in np.linspace(0, 2 * np.pi, 9):
            want = (1 + np.cos(t)) ** 2 + (1 - np.cos(t)) ** 2
            assert corner_sum(p, t)[0, 0] == pytest.approx(want)

    @pytest.mark.parametrize("m", [2, 3])
    def test_tensor_factorization(self, m):
        rng = np.random.default_rng(31 + m)
        ps = [random_symbol(rng, int(rng.integers(1, 3)), 1) for _ in range(m)]
        pm = tensor_symbol(ps)
        for _ in range(20):
            t = rng.uniform(0, 2 * np.pi, size=m)
            want = corner_sum(ps[0], t[:1])
            for ell in range(1, m):
                want = np.kron(want, corner_sum(ps[ell], t[ell:ell + 1]))
            got = corner_sum(pm, t)
            assert np.max(np.abs(got - want)) <= 1e-12 * (1 + np.abs(want).max())


class TestTrackedEigenpair:
    def test_ambiguity_raises(self):
        q = np.ones(3) / np.sqrt(3)  # overlap 0.577 with every axis vector
        with pytest.raises(TrackingError):
            tracked_eigenpair(np.diag([1.0, 2.0, 3.0]), q)

    def test_follows_branch(self):
        lam, v, ov = tracked_eigenpair(np.diag([1.0, 5.0]), np.array([0.1, 0.99]))
        assert lam == pytest.approx(5.0)
        assert ov > 0.9


class TestExchangeFormat:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        f = random_symbol(rng, 3, 2)
        path = tmp_path / "sym.txt"
        write_symbol(path, f)
        g = read_symbol(path)
        assert g.d == f.d and g.m == f.m
        assert set(g.coeffs) == set(f.coeffs)
        for j in f.coeffs:
            assert np.array_equal(g.coeffs[j], f.coeffs[j])

    def test_roundtrip_multivariate(self, tmp_path, p_l2):
        f = tensor_symbol([p_l2, p_l2])
        path = tmp_path / "sym2.txt"
        write_symbol(path, f)
        assert max_coeff_difference(read_symbol(path), f) == 0.0

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a symbol\n")
        with pytest.raises(ArgumentError):
            read_symbol(path)

    def test_truncated_block(self, tmp_path):
        path = tmp_path / "trunc.txt"
        path.write_text("symbol v1\nd 2\nm 1\ncoeff 0\n1.0+0.0i 2.0+0.0i\nend\n")
        with pytest.raises(ArgumentError):
            read_symbol(path)

    def test_bad_entry(self, tmp_path):
        path = tmp_path / "entry.txt"
        path.write_text("symbol v1\nd 1\nm 1\ncoeff 0\nbogus\nend\n")
        with pytest.raises(ArgumentError):
            read_symbol(path)


def test_find_zero_q_r_family():
    from blockmg.femgen import stiffness_symbol
    for r in range(1, 6):
        z = find_zero(stiffness_symbol(r))
        assert z.theta0[0] == pytest.approx(0.0, abs=1e-10)
        assert z.order == 2
        np.testing.assert_allclose(z.q_jbar, np.ones(r) / np.sqrt(r), atol=1e-8)

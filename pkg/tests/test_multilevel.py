import numpy as np
import pytest
import scipy.sparse as sp

from blockmg import (MatrixTrigPolynomial, assemble_transfer, build_s,
                     corner_sum, cutting_matrix, tensor_symbol)
from blockmg.errors import ArgumentError
from blockmg.femgen import (build_geometric_symbol, mass_symbol,
                            stiffness_symbol)
from blockmg.multilevel import (assemble_2d_problem, assemble_multilevel_toeplitz,
                                build_2d_hierarchy, check_multilevel_conditions,
                                tensor_cutting, tensor_interleave_permutation,
                                tensor_sum_symbol, tensor_transfer)

LAPLACE = MatrixTrigPolynomial.scalar({0: 2.0, 1: -1.0, -1: -1.0})
INTERP = MatrixTrigPolynomial.scalar({0: 2.0, 1: 1.0, -1: 1.0})


class TestTensorCutting:
    def test_three_by_three(self):
        np.testing.assert_array_equal(tensor_cutting((3, 3)), [4])

    def test_seven_by_three(self):
        got = tensor_cutting((7, 3))
        np.testing.assert_array_equal(got, [4, 10, 16])
        # grid coordinates (1-based): (2,2), (4,2), (6,2)
        coords = [(idx // 3 + 1, idx % 3 + 1) for idx in got]
        assert coords == [(2, 2), (4, 2), (6, 2)]

    def test_single_dimension_reduces_to_1d(self):
        np.testing.assert_array_equal(tensor_cutting((7,)),
                                      cutting_matrix(7, "even"))

    def test_size_form_validated(self):
        with pytest.raises(ArgumentError):
            tensor_cutting((5, 3))   # 5 is odd but not 2^t - 1
        with pytest.raises(ArgumentError):
            tensor_cutting((4, 3))


class TestTensorTransfer:
    def test_bilinear_stencil(self):
        P = tensor_transfer([INTERP, INTERP], (7, 7)).matrix.toarray().real
        assert P.shape == (49, 9)
        stencil = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0])
        col = P[:, 4].reshape(7, 7)      # center coarse node at (3,3) 0-based
        np.testing.assert_allclose(col[2:5, 2:5], stencil, atol=1e-14)
        assert np.count_nonzero(col) == 9

    def test_identity_symbol_injects(self):
        one = MatrixTrigPolynomial.scalar({0: 1.0})
        P = tensor_transfer([one, one], (3, 3)).matrix.toarray().real
        want = np.zeros((9, 1))
        want[4] = 1.0
        np.testing.assert_allclose(P, want)

    def test_kron_equivalence_up_to_permutation(self, p_l2):
        P1 = assemble_transfer(p_l2, 7, "toeplitz").matrix
        P2 = assemble_transfer(p_l2, 3, "toeplitz").matrix
        PK = sp.kron(P1, P2).tocsr()
        PM = tensor_transfer([p_l2, p_l2], (7, 3)).matrix
        rperm = tensor_interleave_permutation((7, 3), (2, 2))
        cperm = tensor_interleave_permutation((3, 1), (2, 2))
        R = sp.csr_matrix((np.ones(len(rperm)), (rperm, np.arange(len(rperm)))))
        C = sp.csr_matrix((np.ones(len(cperm)), (cperm, np.arange(len(cperm)))))
        assert abs(R @ PK @ C.T - PM).max() == 0.0


class TestMultilevelToeplitz:
    def test_center_rows_match_coarse_symbol(self):
        # Galerkin through the 2D tensor transfer of the 2D scalar
        # Laplacian agrees with the coefficient-extracted coarse symbol
        # on rows away from the boundary
        f2d = MatrixTrigPolynomial.scalar(
            {(0, 0): 4.0, (1, 0): -1.0, (-1, 0): -1.0, (0, 1): -1.0, (0, -1): -1.0})
        p2d = tensor_symbol([INTERP, INTERP])
        A = assemble_multilevel_toeplitz(f2d, (15, 15))
        P = tensor_transfer([INTERP, INTERP], (15, 15))
        coarse = (P.matrix.conj().T @ A.matrix @ P.matrix).toarray().real
        g = p2d.conj_transpose() @ f2d @ p2d
        fhat = MatrixTrigPolynomial(
            {(j1 // 2, j2 // 2): c for (j1, j2), c in g.coeffs.items()
             if j1 % 2 == 0 and j2 % 2 == 0}, m=2)
        # center node of the 7x7 coarse grid
        center = 3 * 7 + 3
        for (j1, j2), c in fhat.coeffs.items():
            assert coarse[center, (3 + j1) * 7 + (3 + j2)] == pytest.approx(
                c[0, 0].real, abs=1e-10)
        # second-order zero at the origin, slope 2 per axis
        for axis in range(2):
            hs = 2.0 ** -np.arange(3, 9)
            lams = []
            for h in hs:
                t = np.zeros(2)
                t[axis] = h
                lams.append(np.linalg.eigvalsh(fhat.evaluate(t))[0])
            slope = np.polyfit(np.log(hs), np.log(lams), 1)[0]
            assert slope == pytest.approx(2.0, abs=0.05)


class TestTensorSumSymbol:
    def test_matches_kron_sum_pointwise(self):
        f = stiffness_symbol(2)
        h = mass_symbol(2)
        f2d = tensor_sum_symbol(f, h)
        rng = np.random.default_rng(0)
        for _ in range(20):
            t1, t2 = rng.uniform(0, 2 * np.pi, size=2)
            want = (np.kron(f.evaluate(t1), h.evaluate(t2))
                    + np.kron(h.evaluate(t1), f.evaluate(t2)))
            np.testing.assert_allclose(f2d.evaluate([t1, t2]), want, atol=1e-12)


class TestAssemble2D:
    def test_nine_point_pattern(self):
        problem = assemble_2d_problem(1, 2)
        A = problem.matrix.dense().real
        K = (np.diag([2.0] * 3) + np.diag([-1.0] * 2, 1)
             + np.diag([-1.0] * 2, -1))
        M = (np.diag([4.0] * 3) + np.diag([1.0] * 2, 1)
             + np.diag([1.0] * 2, -1)) / 6.0
        np.testing.assert_allclose(A, np.kron(K, M) + np.kron(M, K), atol=1e-12)

    def test_spd_and_kernel_direction(self):
        problem = assemble_2d_problem(2, 2)
        assert np.linalg.eigvalsh(problem.matrix.dense().real)[0] > 0
        f2d = problem.symbol_2d
        q = np.kron(np.ones(2), np.ones(2)) / 2.0
        v = f2d.evaluate([0.0, 0.0])
        assert np.linalg.norm(v @ q) <= 1e-10
        assert sum(np.linalg.eigvalsh(v) < 1e-10) == 1

    def test_caps(self):
        with pytest.raises(ArgumentError):
            assemble_2d_problem(4, 3)
        with pytest.raises(ArgumentError):
            assemble_2d_problem(1, 8)


class TestHierarchy2D:
    @pytest.mark.parametrize("kind", ["linear", "geometric"])
    def test_vcycle_converges(self, kind):
        from blockmg.mgsolve import SmootherSpec, solve
        problem = assemble_2d_problem(2, 3)
        h = build_2d_hierarchy(problem, kind, SmootherSpec())
        rng = np.random.default_rng(1)
        b = problem.matrix.matrix @ rng.uniform(size=problem.size)
        res = solve(h, b, tol=1e-6)
        assert res.converged and res.iterations <= 12

    def test_coarse_levels_spd(self):
        problem = assemble_2d_problem(1, 4)
        h = build_2d_hierarchy(problem, "linear")
        for lvl in h.levels:
            if lvl.matrix.size <= 512:
                assert np.linalg.eigvalsh(lvl.matrix.dense().real)[0] > 0


class TestMultilevelConditions:
    def test_tensor_factorizations_random_points(self, p_l2):
        pg2 = build_geometric_symbol(2)
        p2d = tensor_symbol([p_l2, pg2])
        rng = np.random.default_rng(3)
        for _ in range(100):
            t = rng.uniform(0, 2 * np.pi, size=2)
            corner = corner_sum(p2d, t)
            kron_corner = np.kron(corner_sum(p_l2, t[:1]), corner_sum(pg2, t[1:]))
            assert np.max(np.abs(corner - kron_corner)) <= 1e-10 * (
                1 + np.abs(kron_corner).max())
            s = build_s(p2d, t)
            kron_s = np.kron(build_s(p_l2, t[:1]), build_s(pg2, t[1:]))
            assert np.max(np.abs(s - kron_s)) <= 1e-10

    def test_tensor_eigenvector_fixed_point(self, p_l2):
        p2d = tensor_symbol([p_l2, p_l2])
        q = np.kron(np.ones(2), np.ones(2)) / 2.0
        s0 = build_s(p2d, np.zeros(2))
        assert np.linalg.norm(s0 @ q - q) <= 1e-9

    def test_full_checker(self, p_l2):
        f = stiffness_symbol(2)
        f2d = tensor_sum_symbol(f, mass_symbol(2))
        report = check_multilevel_conditions([p_l2, p_l2], f2d, fs=[f, f])
        assert report.tgm_certified
        assert report.condition_i.passed
        assert report.fixed_point.passed
        assert report.condition_iii_directional.passed
        assert report.corner_factorization.passed
        assert report.s_factorization.passed
        assert report.tensor_eigenvector.passed
        assert report.vcycle_heuristic["label"] == "heuristic"
        doc = report.to_json()
        assert "heuristic" in doc

    def test_fs_required(self, p_l2):
        f = stiffness_symbol(2)
        f2d = tensor_sum_symbol(f, mass_symbol(2))
        with pytest.raises(ArgumentError):
            check_multilevel_conditions([p_l2, p_l2], f2d)

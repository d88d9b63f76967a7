"""Degree-r Lagrangian finite elements on the unit interval: stiffness
and mass assembly, extraction of the block generating symbols, and the
two projector-symbol families (scalar linear interpolation reblocked,
and coarse-basis evaluation).

Two assembly views coexist deliberately: an analysis view made of full
block-Toeplitz matrices (for the symbol identities) and a solve view of
FEM matrices of size r*n - 1 with both Dirichlet ends removed (for the
iteration experiments).  The solve-path matrices are normalized by the
element count so the constant-coefficient matrix agrees with the
block-Toeplitz matrix of the extracted symbol on interior entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from .errors import ArgumentError, ConstructionError
from .mgsolve import DEFAULT_COARSEST, MultigridHierarchy, SmootherSpec
from .structured import (EVEN_ROWS, GENERAL, BlockStructuredMatrix,
                         GridTransfer, assemble_toeplitz, galerkin,
                         transfer_from_matrix)
from .symbol import MatrixTrigPolynomial
from . import smallmat

COEFFICIENTS = {
    "one": lambda x: np.ones_like(x),
    "xsq_plus_one": lambda x: x ** 2 + 1.0,
    "exp_minus_2x": lambda x: np.exp(x) - 2.0 * x,
}

MAX_DEGREE = 8


@dataclass(frozen=True)
class KnotGrid:
    """Uniform knots xi_i = i/(n r), i = 0..n r, for n elements of degree r."""

    r: int
    n: int

    @property
    def n_knots(self) -> int:
        return self.n * self.r + 1

    def knot(self, i: int) -> float:
        return i / (self.n * self.r)

    def knots(self) -> np.ndarray:
        return np.arange(self.n_knots) / (self.n * self.r)


def lagrange_eval(grid: KnotGrid, j: int, x: float) -> float:
    """Value at x of the degree-r nodal basis function of knot j.

    Piecewise polynomial of degree r per element, globally continuous,
    equal to 1 at knot j and 0 at every other knot.
    """
    r, n = grid.r, grid.n
    if not 0 <= j <= n * r:
        raise ArgumentError(f"basis index {j} out of range 0..{n * r}")
    if not 0.0 <= x <= 1.0:
        raise ArgumentError(f"evaluation point {x} outside [0, 1]")
    e = min(int(x * n), n - 1)
    lo = e * r
    if not lo <= j <= lo + r:
        return 0.0
    nodes = (lo + np.arange(r + 1)) / (n * r)
    ell = j - lo
    val = 1.0
    for k in range(r + 1):
        if k != ell:
            val *= (x - nodes[k]) / (nodes[ell] - nodes[k])
    return val


def _lagrange_deriv(nodes: np.ndarray, ell: int, x: float) -> float:
    total = 0.0
    for mm in range(len(nodes)):
        if mm == ell:
            continue
        prod = 1.0 / (nodes[ell] - nodes[mm])
        for k in range(len(nodes)):
            if k != ell and k != mm:
                prod *= (x - nodes[k]) / (nodes[ell] - nodes[k])
        total += prod
    return total


def _coefficient_function(coefficient):
    if callable(coefficient):
        return coefficient, "custom"
    try:
        return COEFFICIENTS[coefficient], coefficient
    except KeyError:
        raise ArgumentError(
            f"unknown coefficient {coefficient!r}; "
            f"choose one of {sorted(COEFFICIENTS)} or pass a callable") from None


@dataclass
class FemProblem1D:
    """A 1D diffusion problem assembled with degree-r elements.

    ``matrix`` is the Dirichlet-trimmed stiffness matrix of size
    r*n_elements - 1, normalized by the element count.
    """

    r: int
    n_elements: int
    coefficient: str
    matrix: BlockStructuredMatrix

    @property
    def size(self) -> int:
        return self.matrix.size


def _element_quadrature(r: int, n: int):
    gx, gw = leggauss(r + 2)
    h = 1.0 / n
    return 0.5 * h * (gx + 1.0), 0.5 * h * gw


def assemble_stiffness(r: int, n_elements: int, coefficient="one") -> FemProblem1D:
    """Assemble the trimmed, normalized stiffness matrix.

    Element integrals use Gauss-Legendre quadrature with r + 2 points,
    exact for the constant-coefficient integrand.  The coefficient must
    be positive on [0, 1] (checked at the quadrature points).
    """
    if r < 1:
        raise ArgumentError(f"degree must be >= 1, got {r}")
    if n_elements < 2 or n_elements & (n_elements - 1):
        raise ArgumentError(f"n_elements must be a power of two >= 2, got {n_elements}")
    fun, name = _coefficient_function(coefficient)
    n = n_elements
    xq_ref, wq = _element_quadrature(r, n)
    rows, cols, vals = [], [], []
    for e in range(n):
        nodes = (e * r + np.arange(r + 1)) / (n * r)
        xq = e / n + xq_ref
        a = np.asarray(fun(xq), dtype=float)
        if np.any(a <= 0.0):
            raise ArgumentError(
                f"coefficient is not positive at x={xq[np.argmin(a)]:.6f}")
        dphi = np.array([[_lagrange_deriv(nodes, ell, x) for x in xq]
                         for ell in range(r + 1)])
        loc = np.einsum("q,iq,jq->ij", a * wq, dphi, dphi)
        for i in range(r + 1):
            for j in range(r + 1):
                rows.append(e * r + i)
                cols.append(e * r + j)
                vals.append(loc[i, j])
    ndof = n * r + 1
    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()
    K = (K[1:-1, 1:-1] / n).tocsr()
    # boundary trimming breaks exact shift invariance, so always "general"
    mat = BlockStructuredMatrix(GENERAL, r, None, K)
    return FemProblem1D(r=r, n_elements=n, coefficient=name, matrix=mat)


def assemble_mass(r: int, n_elements: int) -> BlockStructuredMatrix:
    """Trimmed mass matrix scaled by the element count (entries O(1))."""
    n = n_elements
    xq_ref, wq = _element_quadrature(r, n)
    grid = KnotGrid(r, n)
    rows, cols, vals = [], [], []
    for e in range(n):
        xq = e / n + xq_ref
        phi = np.array([[lagrange_eval(grid, e * r + ell, x) for x in xq]
                        for ell in range(r + 1)])
        loc = np.einsum("q,iq,jq->ij", wq, phi, phi)
        for i in range(r + 1):
            for j in range(r + 1):
                rows.append(e * r + i)
                cols.append(e * r + j)
                vals.append(loc[i, j])
    ndof = n * r + 1
    M = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()
    return BlockStructuredMatrix(GENERAL, r, None, (M[1:-1, 1:-1] * n).tocsr())


def _interior_blocks(mat: sp.csr_matrix, r: int, i: int, k: int) -> np.ndarray:
    return mat[i * r:(i + 1) * r, k * r:(k + 1) * r].toarray()


def _symbol_from_band(mat: sp.csr_matrix, r: int) -> MatrixTrigPolynomial:
    """Read the three-coefficient block band off an assembled matrix."""
    a0 = _interior_blocks(mat, r, 2, 2)
    a1 = _interior_blocks(mat, r, 3, 2)
    am1 = _interior_blocks(mat, r, 2, 3)
    far = _interior_blocks(mat, r, 2, 4)
    scale = max(np.max(np.abs(a0)), 1.0)
    if np.max(np.abs(far)) > 1e-12 * scale:
        raise ConstructionError(
            "band isolation failed: coupling beyond one block detected")
    if np.max(np.abs(am1 - a1.conj().T)) > 1e-12 * scale:
        raise ConstructionError("band isolation failed: band is not Hermitian")
    return MatrixTrigPolynomial({0: a0, 1: a1, -1: am1})


def stiffness_symbol(r: int, _checks: bool = True) -> MatrixTrigPolynomial:
    """The r-by-r generating symbol of the normalized stiffness matrices.

    Read off the interior blocks of the n=8 assembly; verified to kill
    the all-ones vector at zero and to keep the non-minimal eigenvalues
    bounded away from zero.
    """
    if r > MAX_DEGREE:
        raise ArgumentError(f"degree capped at {MAX_DEGREE}, got {r}")
    problem = assemble_stiffness(r, 8, "one")
    f = _symbol_from_band(problem.matrix.matrix, r)
    if _checks:
        ones = np.ones(r)
        scale = smallmat.spectral_norm(f.evaluate(0.0))
        if np.linalg.norm(f.evaluate(0.0) @ ones) > 1e-10 * max(scale, 1.0):
            raise ConstructionError("stiffness symbol does not vanish on ones at 0")
        thetas = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
        eigs = np.array([np.linalg.eigvalsh(v) for v in f.evaluate_grid(thetas)])
        if r >= 2 and np.min(eigs[:, 1:]) <= 1e-8:
            raise ConstructionError("non-minimal eigenvalues are not bounded away from 0")
    return f


def mass_symbol(r: int) -> MatrixTrigPolynomial:
    """The r-by-r generating symbol of the normalized mass matrices."""
    if r > MAX_DEGREE:
        raise ArgumentError(f"degree capped at {MAX_DEGREE}, got {r}")
    return _symbol_from_band(assemble_mass(r, 8).matrix, r)


_LINTERP = MatrixTrigPolynomial.scalar({0: 2.0, 1: 1.0, -1: 1.0})


def build_linear_interp_symbol(r: int) -> MatrixTrigPolynomial:
    """Block symbol of the scalar linear-interpolation transfer.

    Built generically: assemble the scalar (1,2,1) transfer at a
    reference size and regroup its columns into r-blocks; the row-sum
    signature of the three coefficients (first row 1/2/1, remaining rows
    2/2/0 for offsets -1/0/+1) is verified as a post-check.
    """
    if r < 1:
        raise ArgumentError(f"degree must be >= 1, got {r}")
    n_ref = 5
    M = r * n_ref
    T = assemble_toeplitz(_LINTERP, M).matrix.toarray().real
    kept_scalar = np.arange(1, r * (n_ref - 1), 2)       # first r(n-1)/2 even rows
    S = T[:, kept_scalar]
    jblk = 1                                             # interior kept block column
    col0 = jblk * r
    src = 2 * jblk + 1                                   # block column it selects
    coeffs = {}
    for off in (-1, 0, 1):
        blk = S[(src + off) * r:(src + off + 1) * r, col0:col0 + r]
        coeffs[off] = blk
    p = MatrixTrigPolynomial(coeffs)
    row_sums = {off: coeffs[off].sum(axis=1) for off in (-1, 0, 1)}
    want = {
        -1: np.array([1.0] + [2.0] * (r - 1)),
        0: np.full(r, 2.0) if r > 1 else np.array([2.0]),
        1: np.array([1.0] + [0.0] * (r - 1)),
    }
    for off in (-1, 0, 1):
        if not np.allclose(row_sums[off], want[off], atol=1e-12):
            raise ConstructionError(
                f"reblocked interpolation coefficient {off} has row sums "
                f"{row_sums[off]}, expected {want[off]}")
    return p


def geometric_det_reference(r: int, theta: float) -> complex:
    """Determinant of the coarse-basis projector symbol in closed form."""
    return (np.exp(-1j * r * theta) * (np.exp(1j * theta) + 1.0) ** (r + 1)
            / 2.0 ** (r * (r + 1) / 2.0))


def build_geometric_symbol(r: int) -> MatrixTrigPolynomial:
    """Block symbol of the coarse-basis (finite element) prolongation.

    The five coefficients hold evaluations of the n=2 coarse basis at
    the n=4 fine knots; the far-left coefficient vanishes.  Construction
    is cross-checked against the closed-form determinant at 64 angles.
    """
    if r < 1:
        raise ArgumentError(f"degree must be >= 1, got {r}")
    coarse = KnotGrid(r, 2)
    fine = KnotGrid(r, 4)
    blocks = {}
    for s, off in enumerate((-1, 0, 1, 2)):
        B = np.zeros((r, r))
        for i in range(1, r + 1):
            x = fine.knot(s * r + i)
            for j in range(1, r + 1):
                B[i - 1, j - 1] = lagrange_eval(coarse, j, x)
        blocks[off] = B
    p = MatrixTrigPolynomial(blocks)
    for theta in np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False):
        got = smallmat.det(p.evaluate(theta))
        want = geometric_det_reference(r, theta)
        if abs(got - want) > 1e-10 * max(1.0, abs(want)):
            raise ConstructionError(
                f"determinant mismatch at theta={theta:.4f}: {got} vs {want}")
    ones = np.ones(r)
    if (np.linalg.norm(p.evaluate(0.0) @ ones - 2.0 * ones) > 1e-10
            or np.linalg.norm(p.evaluate(np.pi) @ ones) > 1e-10):
        raise ConstructionError("coarse-basis symbol fails its row-sum identities")
    return p


LINEAR = "linear"
GEOMETRIC = "geometric"


def build_fem_transfer(r: int, n_elements: int, kind: str) -> GridTransfer:
    """Solve-path prolongation at FEM sizes (r*n - 1 by r*n/2 - 1).

    ``linear`` is the scalar (1,2,1) stencil: the tridiagonal matrix of
    2 + 2cos times the even-row selector.  ``geometric`` holds the
    evaluations of the coarse basis functions at the fine knots.
    """
    if n_elements % 2 != 0 or n_elements < 4:
        raise ArgumentError(
            f"n_elements must be even and >= 4 to coarsen, got {n_elements}")
    nf = r * n_elements - 1
    nc = r * (n_elements // 2) - 1
    if kind == LINEAR:
        T = assemble_toeplitz(_LINTERP, nf).matrix
        cols = np.arange(1, nf, 2)
        P = T.tocsc()[:, cols].tocsr().real
        symbol = build_linear_interp_symbol(r)
    elif kind == GEOMETRIC:
        coarse = KnotGrid(r, n_elements // 2)
        rows, cols_idx, vals = [], [], []
        for i in range(1, nf + 1):
            x = i / (nf + 1)
            e = min(int(x * coarse.n), coarse.n - 1)
            lo = e * r
            for j in range(max(lo, 1), min(lo + r, nc) + 1):
                v = lagrange_eval(coarse, j, x)
                if v != 0.0:
                    rows.append(i - 1)
                    cols_idx.append(j - 1)
                    vals.append(v)
        P = sp.coo_matrix((vals, (rows, cols_idx)), shape=(nf, nc)).tocsr()
        symbol = build_geometric_symbol(r)
    else:
        raise ArgumentError(f"unknown transfer kind {kind!r}")
    if P.shape != (nf, nc):
        raise ConstructionError(f"transfer has shape {P.shape}, expected {(nf, nc)}")
    return transfer_from_matrix(P, p=symbol, parity=EVEN_ROWS)


def build_fem_hierarchy(problem: FemProblem1D, kind: str,
                        smoother: SmootherSpec | None = None,
                        coarsest_max_size: int = DEFAULT_COARSEST,
                        two_level: bool = False) -> MultigridHierarchy:
    """Galerkin hierarchy for a 1D problem: the same constant-coefficient
    transfer family at every level, coarse matrices by triple product."""
    smoother = smoother or SmootherSpec()
    mats = [problem.matrix]
    transfers = []
    n = problem.n_elements
    while True:
        P = build_fem_transfer(problem.r, n, kind)
        transfers.append(P)
        mats.append(galerkin(mats[-1], P))
        n //= 2
        if two_level or mats[-1].size <= coarsest_max_size or n < 4:
            break
    return MultigridHierarchy(mats, transfers, smoother,
                              coarsest_max_size=coarsest_max_size)

"""Dense complex kernel for the small d-by-d matrices that appear under
every symbol evaluation: Hermitian eigendecomposition, linear solves and
determinants, all with tolerances relative to a matrix norm.

Backed by LAPACK through numpy/scipy; this module adds the contract
checks (Hermiticity, pivot thresholds, residual bounds) the rest of the
package relies on.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError, SingularMatrixError

HERMITIAN_RTOL = 1e-12


def as_matrix(M) -> np.ndarray:
    """Coerce to a 2-D complex ndarray without copying when possible."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={A.ndim}")
    return A


def is_hermitian(M, rtol: float = HERMITIAN_RTOL) -> bool:
    """True when max |M - M^H| <= rtol * (1 + ||M||_F)."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        return False
    dev = np.max(np.abs(A - A.conj().T)) if A.size else 0.0
    return dev <= rtol * (1.0 + np.linalg.norm(A))


def eig_hermitian(M):
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized as (M + M^H)/2 first, so slightly perturbed
    Hermitian matrices are accepted.  Returns ``(w, V)`` with real
    eigenvalues ``w`` in ascending order and unitary ``V`` whose columns
    are the corresponding eigenvectors.
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"eig_hermitian needs a square matrix, got {A.shape}")
    A = 0.5 * (A + A.conj().T)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"Hermitian eigensolver did not converge: {exc}",
                             iterations=30 * A.shape[0]) from exc
    return w, V


def lu_factor(M):
    """LU with partial pivoting; returns the scipy (lu, piv) pair."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"lu_factor needs a square matrix, got {A.shape}")
    return scipy.linalg.lu_factor(A, check_finite=False)


def _pivot_check(A, lu):
    """Raise SingularMatrixError when a pivot falls under the threshold."""
    piv_mags = np.abs(np.diag(lu))
    norm_inf = np.max(np.abs(A).sum(axis=1)) if A.size else 0.0
    thresh = 1e-14 * norm_inf
    bad = np.nonzero(piv_mags <= thresh)[0]
    if bad.size:
        raise SingularMatrixError(
            f"singular pivot {piv_mags[bad[0]]:.3e} at index {bad[0]} "
            f"(threshold {thresh:.3e})",
            pivot_index=int(bad[0]),
        )


def solve(M, B):
    """Solve M X = B for square nonsingular M.

    Raises SingularMatrixError (carrying the pivot index) when a pivot
    magnitude does not exceed 1e-14 * ||M||_inf.
    """
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"solve needs a square matrix, got {A.shape}")
    Bm = np.asarray(B, dtype=complex)
    if Bm.shape[0] != A.shape[0]:
        raise DimensionError(f"right-hand side rows {Bm.shape[0]} != order {A.shape[0]}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    _pivot_check(A, lu)
    return scipy.linalg.lu_solve((lu, piv), Bm, check_finite=False)


def det(M) -> complex:
    """Determinant as the signed product of LU pivots (0 when singular)."""
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"det needs a square matrix, got {A.shape}")
    if A.shape[0] == 0:
        return 1.0 + 0.0j
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    sign = 1.0 if np.count_nonzero(piv != np.arange(len(piv))) % 2 == 0 else -1.0
    return complex(sign * np.prod(np.diag(lu)))


def spectral_norm(M) -> float:
    """2-norm of a small dense matrix."""
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))

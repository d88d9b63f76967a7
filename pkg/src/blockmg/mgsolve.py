"""Smoothers, the two-grid step, the V-cycle recursion, hierarchy
construction and the convergence driver.

Experiment conventions (the literature rarely pins them down): the right
hand side is b = A x* with x* drawn uniformly from [0,1) under a fixed
seed, the initial guess is zero, and iteration counts use the relative
residual ||b - A x|| / ||b||.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ConfigurationError, SingularMatrixError
from .structured import BlockStructuredMatrix, GridTransfer, galerkin

RICHARDSON = "richardson"
GAUSS_SEIDEL = "gauss_seidel"

DEFAULT_SEED = 20240101
DEFAULT_COARSEST = 64


@dataclass
class SmootherSpec:
    """Configuration of the pre/post smoother.

    Richardson needs a damping parameter in (0, 2/C) where C bounds the
    spectrum of the level matrix; Gauss-Seidel is the forward
    lexicographic sweep and takes no parameter.
    """

    kind: str = GAUSS_SEIDEL
    omega: float | None = None
    sweeps_pre: int = 1
    sweeps_post: int = 1

    def __post_init__(self):
        if self.kind not in (RICHARDSON, GAUSS_SEIDEL):
            raise ConfigurationError(f"unknown smoother kind {self.kind!r}")
        if self.kind == RICHARDSON and self.omega is None:
            raise ConfigurationError("Richardson smoothing needs omega")
        if self.sweeps_pre < 0 or self.sweeps_post < 0:
            raise ConfigurationError("sweep counts must be nonnegative")


def _csr(A):
    if isinstance(A, BlockStructuredMatrix):
        return A.matrix
    return sp.csr_matrix(A)


def gershgorin_bound(A) -> float:
    """Upper bound on the spectrum of a Hermitian matrix: max row abs sum."""
    M = _csr(A)
    return float(np.max(np.abs(M).sum(axis=1))) if M.nnz else 0.0


def _lambda_max_estimate(M: sp.csr_matrix, iters: int = 60) -> float:
    rng = np.random.default_rng(7)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam = float(np.real(np.vdot(v, M @ v)))
    return lam


def _check_omega(M: sp.csr_matrix, omega: float) -> None:
    if omega <= 0:
        raise ConfigurationError(f"Richardson omega must be positive, got {omega}")
    bound = gershgorin_bound(M)
    if bound > 0 and omega < 2.0 / bound:
        return
    lam_max = _lambda_max_estimate(M)
    if 2.0 * omega - omega ** 2 * lam_max <= 0:
        raise ConfigurationError(
            f"omega={omega} outside (0, 2/C): spectral bound ~{lam_max:.4g}")


def _lower_factor(M: sp.csr_matrix):
    """Factorized D + L for forward Gauss-Seidel; exact, no pivoting."""
    diag = M.diagonal()
    if np.any(diag == 0):
        raise ConfigurationError("Gauss-Seidel needs a nonzero diagonal")
    L = sp.tril(M).tocsc()
    return spla.splu(L, permc_spec="NATURAL", options=dict(DiagPivotThresh=0.0))


def smooth(A, x, b, spec: SmootherSpec, sweeps: int, _lower=None):
    """Apply ``sweeps`` smoothing sweeps to A x = b starting from x.

    Richardson: x <- x + omega (b - A x) per sweep.  Gauss-Seidel:
    forward sweep solving each row in order, equivalently
    x <- x + (D + L)^{-1} (b - A x).
    """
    M = _csr(A)
    if M.shape[0] != len(b) or len(x) != len(b):
        raise ArgumentError("smoother size mismatch")
    dtype = np.result_type(M.dtype, np.asarray(b).dtype, float)
    x = np.array(x, dtype=dtype, copy=True)
    if sweeps == 0:
        return x
    if spec.kind == RICHARDSON:
        _check_omega(M, spec.omega)
        for _ in range(sweeps):
            x += spec.omega * (b - M @ x)
        return x
    lower = _lower if _lower is not None else _lower_factor(M)
    for _ in range(sweeps):
        x += lower.solve(b - M @ x)
    return x


def tgm_step(A, P: GridTransfer, x, b, spec: SmootherSpec, coarse_solve=None):
    """One two-grid iteration: pre-smooth, exact coarse-grid correction
    through the Galerkin operator, post-smooth."""
    M = _csr(A)
    x = smooth(M, x, b, spec, spec.sweeps_pre)
    r = b - M @ x
    rc = P.restrict(r)
    if coarse_solve is None:
        Ac = (P.matrix.conj().T @ M @ P.matrix).tocsc()
        try:
            lu = spla.splu(Ac)
        except RuntimeError as exc:
            raise SingularMatrixError(f"coarse matrix is singular: {exc}") from exc
        y = lu.solve(rc)
    else:
        y = coarse_solve(rc)
    x = x + P.prolong(y)
    return smooth(M, x, b, spec, spec.sweeps_post)


@dataclass
class _Level:
    matrix: BlockStructuredMatrix
    transfer: GridTransfer | None
    smoother: SmootherSpec
    lower: object = field(default=None, repr=False)
    coarse_lu: object = field(default=None, repr=False)


class MultigridHierarchy:
    """Ordered levels (matrix, transfer, smoother); coarsest solved directly.

    Construction checks the size chain and, on levels of size at most
    512, positive definiteness of the (Hermitian) level matrices.
    """

    def __init__(self, matrices, transfers, smoother: SmootherSpec,
                 coarsest_max_size: int = DEFAULT_COARSEST, validate: bool = True):
        if len(matrices) != len(transfers) + 1:
            raise ArgumentError("need exactly one transfer per non-coarsest level")
        if not transfers:
            raise ArgumentError("a hierarchy needs at least two levels")
        self.coarsest_max_size = coarsest_max_size
        self.levels = []
        for ell, A in enumerate(matrices):
            T = transfers[ell] if ell < len(transfers) else None
            if T is not None:
                if T.fine_size != A.size:
                    raise ArgumentError(
                        f"level {ell}: transfer fine size {T.fine_size} != {A.size}")
                if T.coarse_size != matrices[ell + 1].size:
                    raise ArgumentError(
                        f"level {ell}: transfer coarse size {T.coarse_size} "
                        f"!= {matrices[ell + 1].size}")
            self.levels.append(_Level(A, T, smoother))
        if validate:
            self._check_positive_definite()

    @classmethod
    def from_transfers(cls, A: BlockStructuredMatrix, transfers, smoother,
                       coarsest_max_size: int = DEFAULT_COARSEST, validate: bool = True):
        """Build the Galerkin chain A, P1^H A P1, ... from the finest matrix."""
        mats = [A]
        for P in transfers:
            mats.append(galerkin(mats[-1], P))
        return cls(mats, list(transfers), smoother,
                   coarsest_max_size=coarsest_max_size, validate=validate)

    def _check_positive_definite(self):
        for ell, lvl in enumerate(self.levels):
            if lvl.matrix.size > 512:
                continue
            H = lvl.matrix.dense()
            w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
            if w[0] <= 1e-12 * max(w[-1], 1.0):
                raise ConfigurationError(
                    f"level {ell} matrix is not positive definite "
                    f"(min eigenvalue {w[0]:.3e})")

    def _lower(self, ell):
        lvl = self.levels[ell]
        if lvl.lower is None:
            lvl.lower = _lower_factor(lvl.matrix.matrix)
        return lvl.lower

    def _coarse_lu(self, ell):
        lvl = self.levels[ell]
        if lvl.coarse_lu is None:
            try:
                lvl.coarse_lu = spla.splu(lvl.matrix.matrix.tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(
                    f"coarsest-level matrix is singular: {exc}") from exc
        return lvl.coarse_lu

    def _smooth(self, ell, x, b, sweeps):
        lvl = self.levels[ell]
        lower = self._lower(ell) if lvl.smoother.kind == GAUSS_SEIDEL else None
        return smooth(lvl.matrix.matrix, x, b, lvl.smoother, sweeps, _lower=lower)


def vcycle_step(h: MultigridHierarchy, level: int, x, b):
    """One V-cycle starting at ``level``: smooth, restrict, recurse once,
    correct, smooth; the last level is solved directly."""
    lvl = h.levels[level]
    if lvl.transfer is None:
        return h._coarse_lu(level).solve(b)
    M = lvl.matrix.matrix
    x = h._smooth(level, x, b, lvl.smoother.sweeps_pre)
    rc = lvl.transfer.restrict(b - M @ x)
    y = vcycle_step(h, level + 1, np.zeros_like(rc), rc)
    x = x + lvl.transfer.prolong(y)
    return h._smooth(level, x, b, lvl.smoother.sweeps_post)


TGM = "tgm"
VCYCLE = "vcycle"


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residuals: list
    converged: bool
    stagnated: bool = False

    @property
    def flag(self) -> str:
        if self.stagnated:
            return "stagnated"
        return "" if self.converged else "noconv"


def detect_stagnation(residuals, ratio: float = 1.5, run: int = 5) -> bool:
    """True when the last ``run`` consecutive residual ratios exceed ``ratio``."""
    if len(residuals) < run + 1:
        return False
    tail = residuals[-(run + 1):]
    return all(tail[k + 1] > ratio * tail[k] for k in range(run))


def solve(h: MultigridHierarchy, b, tol: float = 1e-6, max_iter: int = 100,
          cycle: str = VCYCLE) -> SolveResult:
    """Iterate the chosen cycle from x0 = 0 until the relative residual
    drops to ``tol`` or ``max_iter`` is reached."""
    if tol <= 0:
        raise ArgumentError("tolerance must be positive")
    if cycle not in (TGM, VCYCLE):
        raise ArgumentError(f"unknown cycle {cycle!r}")
    b = np.asarray(b)
    A = h.levels[0].matrix.matrix
    if A.shape[0] != len(b):
        raise ArgumentError("right-hand side size mismatch")
    norm_b = float(np.linalg.norm(b))
    x = np.zeros_like(b, dtype=A.dtype if np.iscomplexobj(A.data) else float)
    if norm_b == 0.0:
        return SolveResult(x=x, iterations=0, residuals=[], converged=True)
    if cycle == TGM and len(h.levels) > 2:
        # a two-grid method solves the first coarse level exactly
        h = MultigridHierarchy(
            [h.levels[0].matrix, h.levels[1].matrix],
            [h.levels[0].transfer], h.levels[0].smoother,
            coarsest_max_size=h.coarsest_max_size, validate=False)
    residuals = []
    stagnated = False
    for it in range(1, max_iter + 1):
        x = vcycle_step(h, 0, x, b)
        res = float(np.linalg.norm(b - A @ x)) / norm_b
        residuals.append(res)
        if res <= tol:
            return SolveResult(x=x, iterations=it, residuals=residuals, converged=True)
        if detect_stagnation(residuals):
            stagnated = True
            break
    return SolveResult(x=x, iterations=len(residuals), residuals=residuals,
                       converged=False, stagnated=stagnated)


def richardson_omega_default(target, npoints: int = 1024) -> float:
    """Default damping 1/||f||_inf.

    Symbol input: ||f||_inf is the maximal eigenvalue of f over a sample
    grid.  Matrix input: the Gershgorin bound stands in for the sup-norm.
    """
    from .symbol import MatrixTrigPolynomial, symbol_sup_norm

    if isinstance(target, MatrixTrigPolynomial):
        sup = symbol_sup_norm(target, npoints)
    else:
        sup = gershgorin_bound(target)
    if sup <= 0:
        raise ArgumentError("cannot derive a damping parameter from a zero operator")
    return 1.0 / sup


def write_residuals(path, residuals) -> None:
    """CSV export of a residual history: iteration, relative_residual."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("iteration,relative_residual\n")
        for k, r in enumerate(residuals, start=1):
            fh.write(f"{k},{float(r)!r}\n")

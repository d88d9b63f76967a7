"""Matrix-valued trigonometric polynomials.

A symbol is a d-by-d matrix-valued trigonometric polynomial in m angular
variables, stored as a window of Fourier coefficients.  This module
provides evaluation, coefficient algebra, eigenvalue-function sampling
with branch tracking, location of the (unique) zero of the minimal
eigenvalue function, the half-angle coarse-symbol map, tensor products
for the multilevel setting, and a plain-text exchange format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import smallmat
from .errors import (ArgumentError, DimensionError, NumericalError,
                     SymbolZeroError, TrackingError)

TRIM_RTOL = 1e-14
HERMITIAN_RTOL = 1e-12
DEFAULT_GRID = 1024


def _as_multi_index(j, m):
    if np.isscalar(j):
        idx = (int(j),)
    else:
        idx = tuple(int(v) for v in j)
    if len(idx) != m:
        raise ArgumentError(f"multi-index {idx} has length {len(idx)}, expected {m}")
    return idx


class MatrixTrigPolynomial:
    """d-by-d matrix trigonometric polynomial f(t) = sum_j c_j e^(i j.t).

    Parameters
    ----------
    coeffs : mapping
        Multi-index (int for m=1, tuple of m ints otherwise) -> (d, d)
        array-like Fourier coefficient.
    m : int, optional
        Number of angular variables; inferred from the keys when omitted.

    Coefficients with Frobenius norm below 1e-14 times the largest one
    are dropped, keeping the stored window minimal.  Instances are
    immutable by convention: no method mutates ``coeffs``.
    """

    def __init__(self, coeffs, m=None):
        if not coeffs:
            raise ArgumentError("a symbol needs at least one coefficient")
        first = next(iter(coeffs))
        if m is None:
            m = 1 if np.isscalar(first) else len(first)
        if m < 1:
            raise ArgumentError(f"number of variables must be >= 1, got {m}")
        normalized = {}
        d = None
        for j, c in coeffs.items():
            idx = _as_multi_index(j, m)
            mat = np.asarray(c, dtype=complex)
            if mat.ndim == 0:
                mat = mat.reshape(1, 1)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise DimensionError(f"coefficient {idx} is not square: {mat.shape}")
            if d is None:
                d = mat.shape[0]
            elif mat.shape[0] != d:
                raise DimensionError(
                    f"coefficient {idx} has order {mat.shape[0]}, expected {d}")
            normalized[idx] = mat.copy()
        scale = max(np.linalg.norm(c) for c in normalized.values())
        if scale > 0:
            normalized = {j: c for j, c in normalized.items()
                          if np.linalg.norm(c) > TRIM_RTOL * scale}
        if not normalized:
            normalized = {(0,) * m: np.zeros((d, d), dtype=complex)}
        self.d = d
        self.m = m
        self.coeffs = normalized

    @classmethod
    def scalar(cls, coeffs, m=None):
        """Build a 1x1 symbol from a mapping of multi-index -> number."""
        return cls({j: np.array([[c]], dtype=complex) for j, c in coeffs.items()}, m=m)

    @classmethod
    def constant(cls, mat, m=1):
        return cls({(0,) * m: mat}, m=m)

    # -- basic queries ----------------------------------------------------

    def window(self):
        """Per-variable coefficient window radius, as a tuple."""
        return tuple(max(abs(j[ell]) for j in self.coeffs) for ell in range(self.m))

    @property
    def hermitian(self) -> bool:
        """True when c_{-j} = c_j^H for every stored index (1e-12 relative)."""
        scale = max(np.linalg.norm(c) for c in self.coeffs.values())
        tol = HERMITIAN_RTOL * max(scale, 1.0)
        for j, c in self.coeffs.items():
            neg = tuple(-v for v in j)
            other = self.coeffs.get(neg)
            if other is None:
                if np.linalg.norm(c) > tol:
                    return False
            elif np.max(np.abs(other - c.conj().T)) > tol:
                return False
        return True

    def _theta(self, theta):
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.m,):
            raise ArgumentError(f"evaluation point has shape {t.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(t)):
            raise ArgumentError("evaluation point must be finite")
        return t

    def evaluate(self, theta) -> np.ndarray:
        """Value at a point of [0, 2pi)^m; Hermitian output is symmetrized."""
        t = self._theta(theta)
        out = np.zeros((self.d, self.d), dtype=complex)
        for j, c in self.coeffs.items():
            out += c * np.exp(1j * float(np.dot(j, t)))
        if self.hermitian:
            out = 0.5 * (out + out.conj().T)
        return out

    def evaluate_grid(self, thetas) -> np.ndarray:
        """Vectorized evaluation; thetas has shape (n,) for m=1 or (n, m)."""
        ts = np.asarray(thetas, dtype=float)
        if ts.ndim == 1:
            if self.m != 1:
                raise ArgumentError("1-D grid given for a multivariate symbol")
            ts = ts[:, None]
        if ts.shape[1] != self.m:
            raise ArgumentError(f"grid has {ts.shape[1]} variables, expected {self.m}")
        J = np.array(list(self.coeffs.keys()), dtype=float)            # (nc, m)
        C = np.stack([self.coeffs[tuple(int(v) for v in j)] for j in J])
        phase = np.exp(1j * ts @ J.T)                                   # (n, nc)
        out = np.einsum("tc,cij->tij", phase, C)
        if self.hermitian:
            out = 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))
        return out

    # -- coefficient algebra ----------------------------------------------

    def _binary_check(self, other):
        if not isinstance(other, MatrixTrigPolynomial):
            raise ArgumentError("operand is not a symbol")
        if other.m != self.m:
            raise ArgumentError(f"variable count mismatch: {self.m} vs {other.m}")
        if other.d != self.d:
            raise DimensionError(f"block order mismatch: {self.d} vs {other.d}")

    def __add__(self, other):
        self._binary_check(other)
        out = {j: c.copy() for j, c in self.coeffs.items()}
        for j, c in other.coeffs.items():
            out[j] = out.get(j, 0) + c
        return MatrixTrigPolynomial(out, m=self.m)

    def __mul__(self, scalar):
        return MatrixTrigPolynomial(
            {j: scalar * c for j, c in self.coeffs.items()}, m=self.m)

    __rmul__ = __mul__

    def __matmul__(self, other):
        """Pointwise matrix product (f g)(t) = f(t) g(t), by convolution."""
        self._binary_check(other)
        out = {}
        for ja, ca in self.coeffs.items():
            for jb, cb in other.coeffs.items():
                k = tuple(a + b for a, b in zip(ja, jb))
                out[k] = out.get(k, 0) + ca @ cb
        return MatrixTrigPolynomial(out, m=self.m)

    def conj_transpose(self):
        """Symbol of t -> f(t)^H."""
        return MatrixTrigPolynomial(
            {tuple(-v for v in j): c.conj().T for j, c in self.coeffs.items()},
            m=self.m)

    def shifted(self, eta):
        """Symbol of t -> f(t + pi*eta) for eta in {0,1}^m."""
        eta = np.atleast_1d(np.asarray(eta, dtype=int))
        if eta.shape != (self.m,):
            raise ArgumentError(f"shift pattern has shape {eta.shape}, expected ({self.m},)")
        out = {}
        for j, c in self.coeffs.items():
            sign = -1.0 if (int(np.dot(j, eta)) % 2) else 1.0
            out[j] = sign * c
        return MatrixTrigPolynomial(out, m=self.m)

    def __repr__(self):
        return (f"MatrixTrigPolynomial(d={self.d}, m={self.m}, "
                f"window={self.window()}, ncoeff={len(self.coeffs)})")


def max_coeff_difference(f: MatrixTrigPolynomial, g: MatrixTrigPolynomial) -> float:
    """Largest entry-wise difference between two coefficient windows."""
    keys = set(f.coeffs) | set(g.coeffs)
    zero = np.zeros((f.d, f.d), dtype=complex)
    return max(np.max(np.abs(f.coeffs.get(k, zero) - g.coeffs.get(k, zero)))
               for k in keys)


@dataclass(frozen=True)
class SymbolZero:
    """Location and structure of the unique zero of the minimal eigenvalue."""

    theta0: tuple          # point in [0, 2pi)^m
    jbar: int              # 1-based index of the vanishing eigenvalue
    q_jbar: np.ndarray     # unit eigenvector of f(theta0) for eigenvalue 0
    order: int             # even order of the zero

    @property
    def theta0_scalar(self) -> float:
        return self.theta0[0]


def theta_grid(n: int = DEFAULT_GRID) -> np.ndarray:
    """Uniform grid on [0, 2pi), endpoint excluded."""
    return np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)


def symbol_sup_norm(f: MatrixTrigPolynomial, npoints: int = DEFAULT_GRID) -> float:
    """Max over a uniform sample grid of the spectral norm of f(t).

    For m >= 2 the per-dimension resolution is reduced so the total
    sample count stays near ``npoints``.
    """
    pts = sample_points(f.m, npoints)
    vals = f.evaluate_grid(pts)
    return float(max(np.linalg.norm(v, 2) for v in vals))


def sample_points(m, npoints):
    if m == 1:
        return theta_grid(npoints)
    per_dim = max(8, int(round(npoints ** (1.0 / m))))
    axes = [theta_grid(per_dim)] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([ax.ravel() for ax in mesh], axis=1)


# -- eigenvalue functions ------------------------------------------------


@dataclass
class EigenCurves:
    """Sampled eigenvalue functions: ascending per point plus a tracked
    labeling where consecutive points are paired by maximal eigenvector
    overlap, so individual branches can be followed through crossings."""

    grid: np.ndarray       # (n,) or (n, m)
    ascending: np.ndarray  # (n, d)
    tracked: np.ndarray    # (n, d); column b follows the branch started
    #                        at grid[0] in ascending position b


def eigenvalue_functions(f: MatrixTrigPolynomial, grid) -> EigenCurves:
    """Sample the eigenvalue functions of a Hermitian symbol on a grid."""
    if not f.hermitian:
        raise ArgumentError("eigenvalue functions require a Hermitian symbol")
    pts = np.asarray(grid, dtype=float)
    if pts.size == 0:
        raise ArgumentError("grid must not be empty")
    vals = f.evaluate_grid(pts)
    n, d = vals.shape[0], f.d
    ascending = np.empty((n, d))
    tracked = np.empty((n, d))
    prev_V = None
    for k in range(n):
        w, V = smallmat.eig_hermitian(vals[k])
        ascending[k] = w
        if prev_V is None:
            tracked[k] = w
            prev_V = V
        else:
            overlap = np.abs(prev_V.conj().T @ V)
            # slight diagonal preference = ascending-order fallback on ties
            cost = -(overlap ** 2) - 1e-9 * np.eye(d)
            rows, cols = linear_sum_assignment(cost)
            perm = np.empty(d, dtype=int)
            perm[rows] = cols
            tracked[k] = w[perm]
            prev_V = V[:, perm]
    return EigenCurves(grid=pts, ascending=ascending, tracked=tracked)


def tracked_eigenpair(mat: np.ndarray, q: np.ndarray, overlap_min: float = 0.6):
    """Eigenvalue of a Hermitian matrix on the branch closest to q.

    Returns (eigenvalue, eigenvector, overlap); raises TrackingError when
    the best overlap |v^H q| falls below ``overlap_min``.
    """
    w, V = smallmat.eig_hermitian(mat)
    overlaps = np.abs(V.conj().T @ q)
    best = int(np.argmax(overlaps))
    if overlaps[best] < overlap_min:
        raise TrackingError(
            f"eigenvector overlap {overlaps[best]:.3f} below {overlap_min}; "
            "branch tracking is ambiguous")
    return float(w[best]), V[:, best], float(overlaps[best])


# -- zero location -------------------------------------------------------


def _lambda_min(f, theta):
    w, _ = smallmat.eig_hermitian(f.evaluate(theta))
    return w[0]


def _golden_section(fun, a, b, tol=1e-12, max_iter=200):
    """Minimize a unimodal scalar function on [a, b]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


_SNAP_DENOM = 12  # candidate zeros at multiples of pi/12 (covers 0, pi/2, pi, ...)


def find_zero(f: MatrixTrigPolynomial, npoints: int = DEFAULT_GRID) -> SymbolZero:
    """Locate the unique zero of the minimal eigenvalue function of f >= 0.

    The argmin of the minimal eigenvalue over a uniform grid is refined
    by per-axis golden-section descent, then snapped to a nearby multiple
    of pi/12 when that candidate is at least as small numerically (the
    curvature of a quadratic minimum limits direct localization to about
    1e-8).  The order of the zero is the nearest even integer to the
    log-log slope of the tracked eigenvalue over dyadic offsets, fitted
    on the smallest scales that stay above the eigensolver noise floor.
    """
    if not f.hermitian:
        raise ArgumentError("find_zero requires a Hermitian symbol")
    m = f.m
    pts = sample_points(m, npoints if m == 1 else npoints * 4)
    vals = f.evaluate_grid(pts)
    mins = np.empty(len(pts))
    maxs = np.empty(len(pts))
    for k in range(len(pts)):
        w = np.linalg.eigvalsh(vals[k])
        mins[k], maxs[k] = w[0], w[-1]
    scale = float(np.max(np.abs(maxs)))
    if scale == 0.0:
        raise ArgumentError("zero symbol has no isolated minimal-eigenvalue zero")
    if np.min(mins) < -1e-10 * scale:
        raise SymbolZeroError(
            f"symbol is not nonnegative: min eigenvalue {np.min(mins):.3e} "
            f"(scale {scale:.3e})")

    pts2 = pts if pts.ndim == 2 else pts[:, None]
    step = 2.0 * np.pi / round(len(pts) ** (1.0 / m))
    best = int(np.argmin(mins))
    # an off-grid zero still leaves a grid value ~ curvature * (step/2)^2
    if mins[best] > 1e-3 * scale:
        raise SymbolZeroError(
            f"minimal eigenvalue never vanishes (grid minimum {mins[best]:.3e}, "
            f"scale {scale:.3e})")
    low = np.nonzero(mins <= max(1e-10 * scale, mins[best] * 10 + 1e-13 * scale))[0]
    for idx in low:
        delta = np.abs(pts2[idx] - pts2[best])
        dist = np.max(np.minimum(delta, 2.0 * np.pi - delta))
        if dist > 2.5 * step:
            raise SymbolZeroError(
                "multiple isolated near-zero minima found "
                f"(grid points {pts2[best]} and {pts2[idx]})")

    theta0 = np.array(pts2[best], dtype=float)
    for _ in range(2 if m > 1 else 1):
        for ax in range(m):
            def along(t, ax=ax):
                p = theta0.copy()
                p[ax] = t
                return _lambda_min(f, p)
            theta0[ax] = _golden_section(along, theta0[ax] - step, theta0[ax] + step)

    # snap to an exact rational multiple of pi when numerically justified
    snap = np.round(theta0 * _SNAP_DENOM / np.pi) * np.pi / _SNAP_DENOM
    snap = np.mod(snap, 2.0 * np.pi)
    if (np.max(np.abs(snap - theta0)) < 1e-5
            and _lambda_min(f, snap) <= _lambda_min(f, theta0) + 100 * np.finfo(float).eps * scale):
        theta0 = snap

    w0, V0 = smallmat.eig_hermitian(f.evaluate(theta0))
    small = np.nonzero(w0 < 1e-10 * scale)[0]
    if small.size != 1:
        raise SymbolZeroError(
            f"expected exactly one vanishing eigenvalue at {theta0}, found {small.size}")
    jbar = int(small[0])
    q = V0[:, jbar].copy()
    pivot = int(np.argmax(np.abs(q)))
    q *= np.conj(q[pivot]) / abs(q[pivot])
    q /= np.linalg.norm(q)

    order = _zero_order(f, theta0, q, scale)
    return SymbolZero(theta0=tuple(float(t) for t in theta0), jbar=jbar + 1,
                      q_jbar=q, order=order)


def _zero_order(f, theta0, q, scale):
    direction = np.ones(f.m) / np.sqrt(f.m)
    hs, lams = [], []
    for k in range(5, 21):
        h = 2.0 ** (-k)
        lam, _, _ = tracked_eigenpair(f.evaluate(theta0 + h * direction), q)
        if lam > 1e4 * np.finfo(float).eps * scale:
            hs.append(h)
            lams.append(lam)
    if len(hs) < 3:
        raise NumericalError("too few usable scales to estimate the zero order",
                             iterations=len(hs))
    hs, lams = np.array(hs[-8:]), np.array(lams[-8:])
    slope = np.polyfit(np.log(hs), np.log(lams), 1)[0]
    order = max(2, 2 * int(round(slope / 2.0)))
    if abs(slope - order) > 0.2:
        raise SymbolZeroError(
            f"zero order fit {slope:.3f} is not close to an even integer")
    return order


# -- coarse symbol, tensor products, corner sums --------------------------


def coarse_symbol(f: MatrixTrigPolynomial, p: MatrixTrigPolynomial) -> MatrixTrigPolynomial:
    """Symbol of the Galerkin-coarsened operator.

    Computed exactly on coefficients: with g = p^H f p, the half-angle
    average (g(t/2) + g(t/2 + pi))/2 keeps only even harmonics, so the
    coarse coefficient at j is the coefficient of g at 2j.
    """
    if f.m != 1 or p.m != 1:
        raise ArgumentError("coarse_symbol is defined for univariate symbols")
    if f.d != p.d:
        raise DimensionError(f"block order mismatch: f has {f.d}, p has {p.d}")
    g = p.conj_transpose() @ f @ p
    out = {}
    for (k,), c in g.coeffs.items():
        if k % 2 == 0:
            out[(k // 2,)] = c
    if not out:
        out[(0,)] = np.zeros((f.d, f.d), dtype=complex)
    return MatrixTrigPolynomial(out, m=1)


def tensor_symbol(ps) -> MatrixTrigPolynomial:
    """Kronecker tensor product of univariate symbols, one per dimension."""
    ps = list(ps)
    if not ps:
        raise ArgumentError("tensor_symbol needs at least one factor")
    for p in ps:
        if p.m != 1:
            raise ArgumentError("tensor_symbol factors must be univariate")
    if len(ps) == 1:
        return ps[0]
    out = {(): np.array([[1.0 + 0.0j]])}
    for p in ps:
        nxt = {}
        for key, acc in out.items():
            for (j,), c in p.coeffs.items():
                nxt[key + (j,)] = np.kron(acc, c)
        out = nxt
    return MatrixTrigPolynomial(out, m=len(ps))


def corner_set(theta, m):
    """The 2^m aliasing corners {theta + pi*eta : eta in {0,1}^m}."""
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if t.shape != (m,):
        raise ArgumentError(f"point has shape {t.shape}, expected ({m},)")
    corners = []
    for mask in range(2 ** m):
        eta = np.array([(mask >> ell) & 1 for ell in range(m)], dtype=float)
        corners.append(t + np.pi * eta)
    return corners


def corner_sum(p: MatrixTrigPolynomial, theta) -> np.ndarray:
    """sum over the corner set of p(xi)^H p(xi); Hermitian PSD by construction."""
    total = np.zeros((p.d, p.d), dtype=complex)
    for xi in corner_set(theta, p.m):
        E = p.evaluate(xi)
        total += E.conj().T @ E
    return 0.5 * (total + total.conj().T)


# -- exchange file format --------------------------------------------------
#
# Line-oriented text, whitespace-separated:
#
#   symbol v1
#   d <int>
#   m <int>
#   coeff <j1> ... <jm>
#   <d rows of d entries>          entry := <re><+|-><im>i, float repr
#   ... further coeff blocks ...
#   end
#
# Floats are written with Python repr and therefore round-trip
# bit-exactly for finite values.


def _format_entry(z: complex) -> str:
    re, im = float(z.real), float(z.imag)
    sign = "+" if im >= 0 or np.isnan(im) else "-"
    return f"{re!r}{sign}{abs(im)!r}i"


def _parse_entry(token: str) -> complex:
    if not token.endswith("i"):
        raise ArgumentError(f"bad symbol entry {token!r}: missing trailing 'i'")
    body = token[:-1]
    split = -1
    for idx in range(len(body) - 1, 0, -1):
        if body[idx] in "+-" and body[idx - 1] not in "eE":
            split = idx
            break
    if split <= 0:
        raise ArgumentError(f"bad symbol entry {token!r}: no imaginary part")
    try:
        return complex(float(body[:split]), float(body[split:]))
    except ValueError as exc:
        raise ArgumentError(f"bad symbol entry {token!r}") from exc


def write_symbol(path, f: MatrixTrigPolynomial) -> None:
    """Write a symbol in the exchange format (see module docstring)."""
    lines = ["symbol v1", f"d {f.d}", f"m {f.m}"]
    for j in sorted(f.coeffs):
        lines.append("coeff " + " ".join(str(v) for v in j))
        c = f.coeffs[j]
        for row in range(f.d):
            lines.append(" ".join(_format_entry(c[row, col]) for col in range(f.d)))
    lines.append("end")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_symbol(path) -> MatrixTrigPolynomial:
    """Parse a symbol exchange file; inverse of :func:`write_symbol`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "symbol v1":
        raise ArgumentError("not a symbol exchange file (missing 'symbol v1' header)")
    if len(lines) < 3 or not lines[1].startswith("d ") or not lines[2].startswith("m "):
        raise ArgumentError("symbol file must declare d and m after the header")
    d = int(lines[1].split()[1])
    m = int(lines[2].split()[1])
    coeffs = {}
    pos = 3
    while pos < len(lines) and lines[pos] != "end":
        head = lines[pos].split()
        if head[0] != "coeff" or len(head) != m + 1:
            raise ArgumentError(f"expected 'coeff' with {m} indices, got {lines[pos]!r}")
        idx = tuple(int(v) for v in head[1:])
        pos += 1
        if pos + d > len(lines) + 1:
            raise ArgumentError(f"truncated coefficient block for {idx}")
        mat = np.empty((d, d), dtype=complex)
        for row in range(d):
            entries = lines[pos + row].split()
            if len(entries) != d:
                raise ArgumentError(
                    f"coefficient {idx} row {row} has {len(entries)} entries, expected {d}")
            mat[row] = [_parse_entry(tok) for tok in entries]
        coeffs[idx] = mat
        pos += d
    if pos >= len(lines) or lines[pos] != "end":
        raise ArgumentError("symbol file missing 'end' terminator")
    if not coeffs:
        raise ArgumentError("symbol file declares no coefficients")
    return MatrixTrigPolynomial(coeffs, m=m)

"""Dense complex matrices, structured operators and product-cost accounting.

Dense matrices are plain ``numpy`` complex arrays. Every dense x dense
product performed through :func:`matmul` or :func:`inverse_multiply` is
charged to a caller-owned :class:`CostTally`; multiplications by a
:class:`StructuredOperator` are free in the dense-product count (they cost
``O(k n^2)`` rather than ``O(n^3)``) and are only recorded in a diagnostic
counter.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from .errors import (
    DimensionMismatchError,
    SingularMatrixError,
    UnsupportedStructureError,
)

MACHINE_EPS = np.finfo(float).eps
PRODUCT_COST = Fraction(1)
INVERSE_MULTIPLY_COST = Fraction(4, 3)


@dataclass
class CostTally:
    """Running count of dense work.

    ``dense_products`` is an exact rational: a product counts 1, an
    inverse-multiply ``X^{-1} Y`` counts 4/3. Structured multiplies, sums
    and scalings cost nothing there but are counted in ``structured_ops``
    so the cheap part can still be profiled.
    """

    dense_products: Fraction = field(default_factory=Fraction)
    dense_exponentials: int = 0
    inversions: int = 0
    structured_ops: int = 0

    def charge_product(self, count: int = 1) -> None:
        self.dense_products += PRODUCT_COST * count

    def charge_inverse_multiply(self) -> None:
        self.dense_products += INVERSE_MULTIPLY_COST
        self.inversions += 1

    def copy(self) -> "CostTally":
        return CostTally(self.dense_products, self.dense_exponentials,
                         self.inversions, self.structured_ops)


def as_dense(M, name: str = "matrix") -> np.ndarray:
    """Validate and promote ``M`` to a square complex128 array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def one_norm(M) -> float:
    """Maximum absolute column sum."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.abs(M).sum(axis=0).max())


def _check_same_dim(X, Y):
    if X.shape != Y.shape:
        raise DimensionMismatchError(f"dimension mismatch: {X.shape} vs {Y.shape}")


def matmul(X, Y, tally: CostTally | None = None) -> np.ndarray:
    """Dense product ``X @ Y`` (cost 1)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {X.shape} by {Y.shape}")
    if tally is not None:
        tally.charge_product()
    return X @ Y


_RCOND_MIN = 100 * MACHINE_EPS


def inverse_multiply(X, Y, tally: CostTally | None = None) -> np.ndarray:
    """Return ``X^{-1} Y`` via an LU factorisation (cost 4/3).

    Raises :class:`SingularMatrixError` when the reciprocal condition
    estimate of ``X`` falls below ``100 * eps``.
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or Y.shape[0] != X.shape[0]:
        raise DimensionMismatchError(f"cannot solve {X.shape} against {Y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise SingularMatrixError("non-finite entries in linear solve")
    lu, piv, info = scipy.linalg.lapack.zgetrf(X)
    if info > 0:
        raise SingularMatrixError("exact zero pivot in LU factorisation")
    anorm = one_norm(X)
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if anorm == 0.0 or rcond < _RCOND_MIN:
        raise SingularMatrixError(f"matrix is numerically singular (rcond={rcond:.2e})")
    if tally is not None:
        tally.charge_inverse_multiply()
    sol, _ = scipy.linalg.lapack.zgetrs(lu, piv, Y)
    return sol


def multiply_inverse(Y, X, tally: CostTally | None = None) -> np.ndarray:
    """Return ``Y X^{-1}`` (cost 4/3), solved through the transpose."""
    return inverse_multiply(np.asarray(X).T, np.asarray(Y).T, tally).T


# ---------------------------------------------------------------------------
# structured operators


class StructuredOperator:
    """A sparse, cheaply exponentiable ``n x n`` operator ``D``.

    Subclasses implement left/right multiplication against dense matrices in
    ``O(k n^2)`` and a cheap exponential.
    """

    dim: int
    bandwidth: int = 1
    kind: str = "abstract"

    def dense(self) -> np.ndarray:
        raise NotImplementedError

    def left(self, X: np.ndarray) -> np.ndarray:
        """``D @ X``."""
        raise NotImplementedError

    def right(self, X: np.ndarray) -> np.ndarray:
        """``X @ D``."""
        raise NotImplementedError

    def exp(self, scale: complex = 1.0, tally: CostTally | None = None) -> "StructuredOperator":
        raise UnsupportedStructureError(f"no cheap exponential for {self.kind}")

    def scaled(self, c: complex) -> "StructuredOperator":
        raise NotImplementedError

    def one_norm(self) -> float:
        return one_norm(self.dense())

    def spectral_interval(self) -> tuple[float, float]:
        """Real interval ``[d-, d+]`` containing the real parts of the spectrum."""
        c, r = _gershgorin(self.dense())
        return float(np.min(c.real - r)), float(np.max(c.real + r))

    def spread(self) -> float:
        """Upper bound on the diameter of the spectrum (used in commutator bounds)."""
        c, r = _gershgorin(self.dense())
        return _disc_diameter(c, r)

    def _check(self, X):
        if X.ndim != 2 or X.shape[0] != self.dim or X.shape[1] != self.dim:
            raise DimensionMismatchError(f"operator of dim {self.dim} against {X.shape}")


def _gershgorin(M):
    c = np.diag(M).astype(complex)
    r = np.abs(M).sum(axis=1) - np.abs(c)
    return c, r


def _disc_diameter(c, r):
    # max_{i,j} |c_i - c_j| + r_i + r_j
    d = np.abs(c[:, None] - c[None, :]) + r[:, None] + r[None, :]
    return float(d.max())


class DiagonalOperator(StructuredOperator):
    kind = "diagonal"

    def __init__(self, diag):
        d = np.asarray(diag, dtype=complex).ravel()
        if d.size < 1:
            raise DimensionMismatchError("empty diagonal")
        self.diag = d
        self.dim = d.size
        self.bandwidth = 1

    def dense(self):
        return np.diag(self.diag)

    def left(self, X):
        self._check(X)
        return self.diag[:, None] * X

    def right(self, X):
        self._check(X)
        return X * self.diag[None, :]

    def exp(self, scale=1.0, tally=None):
        return DiagonalOperator(np.exp(scale * self.diag))

    def scaled(self, c):
        return DiagonalOperator(c * self.diag)

    def one_norm(self):
        return float(np.abs(self.diag).max())

    def spectral_interval(self):
        return float(self.diag.real.min()), float(self.diag.real.max())

    def spread(self):
        d = self.diag
        if np.all(d.imag == 0) or np.all(d.real == 0):
            v = d.real if np.all(d.imag == 0) else d.imag
            return float(v.max() - v.min())
        return float(np.abs(d[:, None] - d[None, :]).max())

    def __repr__(self):
        return f"DiagonalOperator(dim={self.dim})"


def _exp_2x2(p, q, r, s):
    """Vectorised closed-form exponential of the 2x2 matrices [[p, q], [r, s]]."""
    mu = 0.5 * (p + s)
    delta = np.sqrt((0.5 * (p - s)) ** 2 + q * r)
    small = np.abs(delta) < 1e-4
    dsafe = np.where(small, 1.0, delta)
    sinhc = np.where(small, 1 + delta**2 / 6 + delta**4 / 120 + delta**6 / 5040,
                     np.sinh(dsafe) / dsafe)
    ch = np.cosh(delta)
    em = np.exp(mu)
    return (em * (ch + sinhc * (p - mu)), em * sinhc * q,
            em * sinhc * r, em * (ch + sinhc * (s - mu)))


class BlockDiagonal2x2(StructuredOperator):
    """Operator ``[[P, Q], [R, S]]`` with diagonal ``k x k`` blocks (``n = 2k``).

    This is the form of the oscillator generator ``[[0, I], [-Omega^2, 0]]``
    and of its exponential.
    """

    kind = "block2"

    def __init__(self, p, q, r, s):
        p, q, r, s = (np.asarray(v, dtype=complex).ravel() for v in (p, q, r, s))
        if not (p.size == q.size == r.size == s.size) or p.size < 1:
            raise DimensionMismatchError("block diagonals must share one positive length")
        self.p, self.q, self.r, self.s = p, q, r, s
        self.k = p.size
        self.dim = 2 * p.size
        self.bandwidth = 2

    def dense(self):
        return np.block([[np.diag(self.p), np.diag(self.q)],
                         [np.diag(self.r), np.diag(self.s)]])

    def left(self, X):
        self._check(X)
        k = self.k
        top, bot = X[:k], X[k:]
        return np.vstack([self.p[:, None] * top + self.q[:, None] * bot,
                          self.r[:, None] * top + self.s[:, None] * bot])

    def right(self, X):
        self._check(X)
        k = self.k
        lcol, rcol = X[:, :k], X[:, k:]
        return np.hstack([lcol * self.p + rcol * self.r, lcol * self.q + rcol * self.s])

    def exp(self, scale=1.0, tally=None):
        return BlockDiagonal2x2(*_exp_2x2(scale * self.p, scale * self.q,
                                          scale * self.r, scale * self.s))

    def scaled(self, c):
        return BlockDiagonal2x2(c * self.p, c * self.q, c * self.r, c * self.s)

    def eigenvalues(self):
        mu = 0.5 * (self.p + self.s)
        delta = np.sqrt((0.5 * (self.p - self.s)) ** 2 + self.q * self.r)
        return np.concatenate([mu + delta, mu - delta])

    def spectral_interval(self):
        ev = self.eigenvalues()
        return float(ev.real.min()), float(ev.real.max())

    def spread(self):
        # Gershgorin discs of the dense form are always valid here.
        c, r = _gershgorin(self.dense())
        return _disc_diameter(c, r)


class BlockOscillator(BlockDiagonal2x2):
    """``D = [[0, I], [-Omega^2, 0]]`` for ``k`` linearly coupled oscillators."""

    kind = "oscillator"

    def __init__(self, omega):
        omega = np.asarray(omega, dtype=complex).ravel()
        k = omega.size
        super().__init__(np.zeros(k), np.ones(k), -omega**2, np.zeros(k))
        self.omega = omega

    def scaled(self, c):
        return BlockDiagonal2x2(c * self.p, c * self.q, c * self.r, c * self.s)


class GeneralSparse(StructuredOperator):
    """User-supplied sparse ``D``.

    The exponential is formed on the connected blocks of the sparsity graph
    with a dense Pade fallback; each block exponential is charged to
    ``tally.dense_exponentials``.
    """

    kind = "sparse"

    def __init__(self, matrix, max_block: int = 64):
        S = scipy.sparse.csr_matrix(matrix, dtype=complex)
        if S.shape[0] != S.shape[1] or S.shape[0] < 1:
            raise DimensionMismatchError(f"sparse operator must be square, got {S.shape}")
        self.matrix = S
        self.dim = S.shape[0]
        nnz_rows = np.diff(S.indptr)
        self.bandwidth = max(1, int(nnz_rows.max()) if nnz_rows.size else 1)
        self.max_block = max_block

    def dense(self):
        return self.matrix.toarray()

    def left(self, X):
        self._check(X)
        return np.asarray(self.matrix @ X)

    def right(self, X):
        self._check(X)
        return np.asarray((self.matrix.T @ X.T).T)

    def scaled(self, c):
        return GeneralSparse(c * self.matrix, self.max_block)

    def one_norm(self):
        return float(abs(self.matrix).sum(axis=0).max())

    def exp(self, scale=1.0, tally=None):
        from .padetaylor import expm_r26_scaled

        # connectivity only needs the pattern; |S| avoids a complex-to-real cast
        ncomp, labels = scipy.sparse.csgraph.connected_components(
            abs(self.matrix), directed=True, connection="weak")
        rows, cols, vals = [], [], []
        for c in range(ncomp):
            idx = np.flatnonzero(labels == c)
            if idx.size > self.max_block:
                raise UnsupportedStructureError(
                    f"connected block of size {idx.size} exceeds max_block={self.max_block}")
            block = scale * self.matrix[idx][:, idx].toarray()
            if idx.size == 1:
                E = np.exp(block)
            else:
                E = expm_r26_scaled(block)
                if tally is not None:
                    tally.dense_exponentials += 1
            ii, jj = np.meshgrid(idx, idx, indexing="ij")
            rows.append(ii.ravel())
            cols.append(jj.ravel())
            vals.append(E.ravel())
        out = scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=self.matrix.shape)
        out.eliminate_zeros()
        return GeneralSparse(out, self.max_block)


def struct_multiply(D: StructuredOperator, X, side: str = "left",
                    tally: CostTally | None = None) -> np.ndarray:
    """``D @ X`` (``side="left"``) or ``X @ D`` (``side="right"``); no dense-product cost."""
    X = np.asarray(X, dtype=complex)
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', not {side!r}")
    out = D.left(X) if side == "left" else D.right(X)
    if tally is not None:
        tally.structured_ops += 1
    return out


def nested_commutator(D: StructuredOperator, X, r: int = 1,
                      tally: CostTally | None = None) -> np.ndarray:
    """``ad_D^r(X) = [D, [D, ..., [D, X]]]`` from structured multiplies only."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    Y = np.asarray(X, dtype=complex)
    for _ in range(r):
        Y = D.left(Y) - D.right(Y)
    if tally is not None:
        tally.structured_ops += 2 * r
    return Y


def commutator_powers(D: StructuredOperator, X, rmax: int,
                      tally: CostTally | None = None) -> list[np.ndarray]:
    """``[X, ad_D X, ..., ad_D^rmax X]``, each level recycled from the previous."""
    out = [np.asarray(X, dtype=complex)]
    for _ in range(rmax):
        out.append(nested_commutator(D, out[-1], 1, tally))
    return out


def exp_structured(D: StructuredOperator, scale: complex = 1.0,
                   tally: CostTally | None = None) -> StructuredOperator:
    """Exact ``exp(scale * D)`` kept in structured form."""
    E = D.exp(scale, tally)
    if tally is not None:
        tally.structured_ops += 1
    return E


@dataclass(frozen=True)
class PerturbedMatrix:
    """``A = D + eps * B`` with the small parameter kept explicit."""

    D: StructuredOperator
    B: np.ndarray
    eps: float = 1.0

    def __post_init__(self):
        B = as_dense(self.B, "B")
        if B.shape[0] != self.D.dim:
            raise DimensionMismatchError(f"D has dim {self.D.dim} but B is {B.shape}")
        if not np.isfinite(self.eps) or self.eps < 0:
            raise ValueError("eps must be a finite nonnegative real")
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.D.dim

    def dense(self) -> np.ndarray:
        return self.D.dense() + self.eps * self.B

"""Diagonal Pade and Taylor kernels and the classical scaling-and-squaring driver.

Each kernel charges its dense work to an optional :class:`CostTally`:

=========  =====================
kernel     dense products
=========  =====================
r2         4/3
r4         1 + 4/3
r10        3 + 4/3
r26        6 + 4/3
T16        6
=========  =====================
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import UnknownToleranceError
from .matrixcore import (
    CostTally,
    INVERSE_MULTIPLY_COST,
    as_dense,
    identity,
    inverse_multiply,
    matmul,
    one_norm,
)


@lru_cache(maxsize=None)
def pade_coefficients(m: int) -> tuple[Fraction, ...]:
    """Coefficients ``b_0..b_m`` of ``p_m(x) / p_m(0)``.

    ``p_0 = 1``, ``p_1 = 2 + x`` and ``p_m = 2(2m-1) p_{m-1} + x^2 p_{m-2}``;
    the diagonal Pade approximant is then ``p_m(x) / p_m(-x)``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    prev, cur = [Fraction(1)], [Fraction(2), Fraction(1)]
    if m == 0:
        return (Fraction(1),)
    for k in range(2, m + 1):
        nxt = [Fraction(0)] * (k + 1)
        for i, c in enumerate(cur):
            nxt[i] += 2 * (2 * k - 1) * c
        for i, c in enumerate(prev):
            nxt[i + 2] += c
        prev, cur = cur, nxt
    return tuple(c / cur[0] for c in cur)


def _coeffs(m):
    return [complex(c) for c in pade_coefficients(m)]


def pade_r2(X, tally: CostTally | None = None) -> np.ndarray:
    """``(I - X/2)^{-1} (I + X/2)``."""
    X = np.asarray(X, dtype=complex)
    I = identity(X.shape[0])
    return inverse_multiply(I - X / 2, I + X / 2, tally)


def pade_r4(X, tally: CostTally | None = None) -> np.ndarray:
    """``(I - X/2 + X^2/12)^{-1} (I + X/2 + X^2/12)``."""
    X = np.asarray(X, dtype=complex)
    I = identity(X.shape[0])
    even = I + matmul(X, X, tally) / 12
    return inverse_multiply(even - X / 2, even + X / 2, tally)


def pade_r10(X, tally: CostTally | None = None) -> np.ndarray:
    """Order-10 diagonal Pade with 3 products and one solve."""
    X = np.asarray(X, dtype=complex)
    b = _coeffs(5)
    I = identity(X.shape[0])
    X2 = matmul(X, X, tally)
    X4 = matmul(X2, X2, tally)
    U = matmul(X, b[5] * X4 + b[3] * X2 + b[1] * I, tally)
    V = b[4] * X4 + b[2] * X2 + b[0] * I
    return inverse_multiply(V - U, V + U, tally)


def pade_r26(X, tally: CostTally | None = None) -> np.ndarray:
    """Order-26 diagonal Pade with 6 products and one solve."""
    X = np.asarray(X, dtype=complex)
    b = _coeffs(13)
    I = identity(X.shape[0])
    X2 = matmul(X, X, tally)
    X4 = matmul(X2, X2, tally)
    X6 = matmul(X2, X4, tally)
    U = matmul(X6, b[13] * X6 + b[11] * X4 + b[9] * X2, tally)
    U = matmul(X, U + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * I, tally)
    V = matmul(X6, b[12] * X6 + b[10] * X4 + b[8] * X2, tally)
    V = V + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * I
    return inverse_multiply(V - U, V + U, tally)


def taylor_t16(X, tally: CostTally | None = None) -> np.ndarray:
    """Degree-16 Taylor polynomial by Paterson-Stockmeyer (6 products).

    ``T16 = g0 + (g1 + (g2 + (g3 + g4 X^4) X^4) X^4) X^4`` with
    ``g_i = sum_{k=0}^{3} X^k / (4i+k)!`` and ``g4 = I / 16!``.
    """
    X = np.asarray(X, dtype=complex)
    I = identity(X.shape[0])
    X2 = matmul(X, X, tally)
    X3 = matmul(X2, X, tally)
    X4 = matmul(X2, X2, tally)
    powers = (I, X, X2, X3)

    def g(i):
        return sum(p / math.factorial(4 * i + k) for k, p in enumerate(powers))

    # the innermost step g3 + g4 X^4 is a scalar multiple, not a product
    acc = g(3) + X4 / math.factorial(16)
    for i in (2, 1, 0):
        acc = g(i) + matmul(acc, X4, tally)
    return acc


PADE_KERNELS = {1: pade_r2, 2: pade_r4, 5: pade_r10, 13: pade_r26}

# products pi_m of the cheapest evaluation of r_{2m}, m = 1..13
PADE_PRODUCTS = (0, 1, 2, 3, 3, 4, 4, 5, 5, 6, 6, 6, 6)


def pade_cost(m: int) -> Fraction:
    """Dense-product cost of one evaluation of ``r_{2m}``."""
    return PADE_PRODUCTS[m - 1] + INVERSE_MULTIPLY_COST


def pade(X, m: int, tally: CostTally | None = None) -> np.ndarray:
    try:
        kernel = PADE_KERNELS[m]
    except KeyError:
        raise ValueError(f"no kernel for r_{2 * m}; available m: {sorted(PADE_KERNELS)}") from None
    return kernel(X, tally)


# ---------------------------------------------------------------------------
# theta table

U_DOUBLE = 2.0 ** -53

THETA_ROWS = {
    U_DOUBLE: (3.65e-8, 5.32e-4, 1.50e-2, 8.54e-2, 2.54e-1, 5.41e-1, 9.50e-1,
               1.47, 2.10, 2.81, 3.60, 4.46, 5.37),
    1e-10: (3.46e-5, 1.64e-2, 1.47e-1, 4.73e-1, 9.98e-1, 1.69, 2.51,
            3.44, 4.44, 5.51, 6.62, 7.76, 8.94),
    1e-6: (3.46e-3, 1.64e-1, 6.80e-1, 1.49, 2.48, 3.58, 4.76,
           5.98, 7.24, 8.52, 9.81, 11.1, 12.4),
}


def canonical_tolerance(u: float, rows=THETA_ROWS) -> float:
    for key in rows:
        if abs(u - key) <= 1e-9 * key:
            return key
    raise UnknownToleranceError(f"tolerance {u!r} is not tabulated; use one of {sorted(rows)}")


@dataclass(frozen=True)
class ThetaTable:
    """Largest ``||A||_1`` for which ``r_{2m}`` meets a backward-error tolerance ``u``."""

    rows: dict

    def theta(self, u: float, m: int) -> float:
        row = self.rows[canonical_tolerance(u, self.rows)]
        if not 1 <= m <= len(row):
            raise ValueError(f"order index m={m} outside 1..{len(row)}")
        return row[m - 1]

    def recommended(self, u: float, orders=None) -> tuple[int, int]:
        """``(m, pi_m)`` minimising ``pi_m - log2(theta_m)``."""
        row = self.rows[canonical_tolerance(u, self.rows)]
        orders = range(1, len(row) + 1) if orders is None else orders
        m = min(orders, key=lambda m: (PADE_PRODUCTS[m - 1] - math.log2(row[m - 1]), -m))
        return m, PADE_PRODUCTS[m - 1]


THETA_TABLE = ThetaTable(THETA_ROWS)


def theta_lookup(u: float, m: int) -> float:
    return THETA_TABLE.theta(u, m)


def scaling_for(norm: float, theta: float) -> int:
    """Squarings needed to bring ``norm`` below ``theta`` (never negative)."""
    if norm <= theta:
        return 0
    return max(0, math.ceil(math.log2(norm / theta)))


@dataclass(frozen=True)
class PadePlan:
    m: int
    s: int
    cost: Fraction
    predicted_error: float


def plan_standard(norm: float, u: float, orders=tuple(PADE_KERNELS)) -> PadePlan:
    """Choose ``(m, s)`` minimising ``pi_m + s`` among the implemented kernels."""
    row = THETA_ROWS[canonical_tolerance(u)]
    best = None
    for m in orders:
        s = scaling_for(norm, row[m - 1])
        cost = pade_cost(m) + s
        # backward error of r_{2m} grows like (||X|| / theta)^(2m+1)
        ratio = norm / 2**s / row[m - 1] if norm > 0 else 0.0
        pred = u * ratio ** (2 * m + 1)
        key = (cost, pred)
        if best is None or key < best[0]:
            best = (key, PadePlan(m, s, cost, pred))
    return best[1]


def square_repeatedly(Y, s: int, tally: CostTally | None = None) -> np.ndarray:
    for _ in range(s):
        Y = matmul(Y, Y, tally)
    return Y


def expm_standard(A, u: float = 1e-6, tally: CostTally | None = None,
                  return_plan: bool = False):
    """Scaling and squaring with the diagonal Pade kernel chosen from the theta table."""
    A = as_dense(A, "A")
    plan = plan_standard(one_norm(A), u)
    Y = pade(A / 2**plan.s, plan.m, tally)
    Y = square_repeatedly(Y, plan.s, tally)
    return (Y, plan) if return_plan else Y


def expm_r26_scaled(A, theta: float = 1.0, tally: CostTally | None = None) -> np.ndarray:
    """High-accuracy exponential: r26 after scaling ``||A||_1`` below ``theta``.

    ``theta = 1`` is far inside the double-precision radius 5.37, so this is
    used as the reference oracle.
    """
    A = np.asarray(A, dtype=complex)
    s = scaling_for(one_norm(A), theta)
    return square_repeatedly(pade_r26(A / 2**s, tally), s, tally)

"""Backward-error polynomials and cost-based selection of a method.

The truncated local-error bounds are printed for two schemes only: the
commutator-modified Strang method ``Yt0`` of order (6,2) and ``Yt2`` of order
(6,4).  Each term is the product of a tabulated constant, a power of ``h``, a
power of ``eps`` (one per ``B`` in the commutator) and a norm bound:

==========  ========================================  ===========================
name        commutator                                bound used
==========  ========================================  ===========================
nD6B        ad_D^6 B                                  computed exactly
bBDB        [B, [D,B]]                                2 |B| |[D,B]|
bBD3B       [B, ad_D^3 B]                             2 |B| |ad_D^3 B|
bDBD2B      [[B,D], ad_D^2 B]                         2 |[D,B]| |ad_D^2 B|
bB2D2B      [B, [B, ad_D^2 B]]                        4 |B|^2 |ad_D^2 B|
bCross      [[B,D], [B, [B,D]]]                       4 |B| |[D,B]|^2
==========  ========================================  ===========================
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import NoFeasibleScalingError, UnknownSchemeError
from .matrixcore import CostTally, PerturbedMatrix, commutator_powers, exp_structured, one_norm
from .padetaylor import (
    THETA_TABLE,
    canonical_tolerance,
    pade,
    pade_cost,
    plan_standard,
    square_repeatedly,
)
from .splitcat import get_scheme, run_scheme, scheme_cost

MAX_SQUARINGS = 60


@dataclass(frozen=True)
class CommutatorNorms:
    """1-norms of ``ad_D^r B`` (B without its ``eps``) and the bounds built from them."""

    eps: float
    nB: float
    nDB: float
    nD2B: float
    nD3B: float
    nD4B: float
    nD6B: float
    spread: float
    rough: bool = False

    @property
    def bBDB(self) -> float:
        return 2 * self.nB * self.nDB

    @property
    def bBD3B(self) -> float:
        return 2 * self.nB * self.nD3B

    @property
    def bDBD2B(self) -> float:
        return 2 * self.nDB * self.nD2B

    @property
    def bB2D2B(self) -> float:
        return 4 * self.nB**2 * self.nD2B

    @property
    def bCross(self) -> float:
        return 4 * self.nB * self.nDB**2

    @property
    def nD6B_bound(self) -> float:
        """``spread^2 |ad_D^4 B|``, an upper bound on ``nD6B`` for normal ``D``."""
        return self.spread**2 * self.nD4B

    @property
    def kittaneh_bound(self) -> float:
        """``|B| spread``, an upper bound on ``nDB`` for normal ``D``."""
        return self.nB * self.spread


def commutator_norm_table(P: PerturbedMatrix, tally: CostTally | None = None) -> CommutatorNorms:
    """Norms of ``ad_D^r B`` for ``r = 0..6``, from structured products only."""
    powers = commutator_powers(P.D, P.B, 6, tally)
    n = [one_norm(X) for X in powers]
    return CommutatorNorms(P.eps, n[0], n[1], n[2], n[3], n[4], n[6], P.D.spread())


def rough_norms(norm_d: float, eps: float) -> CommutatorNorms:
    """The crude estimate ``|[D,B]| <= 2 |D|^2`` with ``|B| = |D|``, iterated."""
    d = float(norm_d)
    ad = [(2 * d) ** r * d for r in range(7)]
    return CommutatorNorms(eps, ad[0], ad[1], ad[2], ad[3], ad[4], ad[6], 2 * d, rough=True)


# (coefficient, power of h, power of eps, norm attribute)
ERROR_POLYNOMIALS = {
    "Yt0": (
        (3.11e-6, 7, 1, "nD6B"),
        (8.33e-2, 3, 2, "bBDB"),
        (1.39e-3, 5, 2, "bBD3B"),
        (5.56e-3, 5, 2, "bDBD2B"),
        (5.56e-3, 5, 3, "bB2D2B"),
        (2.78e-3, 5, 3, "bCross"),
    ),
    "Yt2": (
        (3.49e-5, 7, 1, "nD6B"),
        (1.70e-3, 5, 2, "bBD3B"),
        (1.39e-3, 5, 2, "bDBD2B"),
        (1.39e-3, 5, 3, "bB2D2B"),
        (4.63e-4, 5, 3, "bCross"),
    ),
}

# schemes without a printed polynomial that may borrow one of the same order
PROXY_POLYNOMIALS = {"Yt1": "Yt2"}

AUTOMATIC_SCHEMES = ("Yt0", "Yt2")


def _polynomial(scheme_id):
    try:
        return ERROR_POLYNOMIALS[scheme_id]
    except KeyError:
        raise UnknownSchemeError(
            f"no error polynomial for {scheme_id!r}; available: {sorted(ERROR_POLYNOMIALS)}"
        ) from None


def error_polynomial(scheme_id: str, h: float, eps: float | None,
                     norms: CommutatorNorms) -> float:
    """Truncated local-error bound of one step of length ``h``.

    ``eps=None`` takes the value stored in ``norms``.
    """
    terms = _polynomial(scheme_id)
    if not 0 < h <= 1:
        raise ValueError(f"h must lie in (0, 1], got {h}")
    eps = norms.eps if eps is None else abs(eps)
    return float(sum(c * h**p * eps**q * getattr(norms, name) for c, p, q, name in terms))


def choose_squarings(scheme_id: str, norms: CommutatorNorms, u: float,
                     eps: float | None = None) -> int:
    """Smallest ``s2`` with ``error_polynomial(scheme, 2**-s2) <= u``."""
    _polynomial(scheme_id)
    for s2 in range(MAX_SQUARINGS + 1):
        if error_polynomial(scheme_id, 2.0**-s2, eps, norms) <= u:
            return s2
    raise NoFeasibleScalingError(
        f"{scheme_id}: bound exceeds u={u:g} even after {MAX_SQUARINGS} squarings")


@dataclass(frozen=True)
class SelectionPlan:
    """A method, its external squarings and its predicted error and cost.

    ``method`` is a catalog id, ``"r<2m>"`` for the Pade baseline or
    ``"structured"`` when ``eps B`` vanishes.  Splittings run with step
    ``h = 2**-s`` followed by ``s`` squarings; the Pade baseline scales by
    ``2**-s``.
    """

    method: str
    s: int
    predicted_error: float
    predicted_cost: Fraction
    u: float
    inner: object = None
    m: int | None = None
    polynomial: str | None = None

    @property
    def kind(self) -> str:
        if self.m is not None:
            return "pade"
        return "structured" if self.method == "structured" else "splitting"


def plan_for_scheme(P: PerturbedMatrix, scheme_id: str, u: float, inner=2,
                    norms: CommutatorNorms | None = None,
                    polynomial: str | None = None) -> SelectionPlan:
    """Plan one catalog scheme from a printed polynomial.

    ``polynomial`` defaults to the scheme's own; schemes listed in
    ``PROXY_POLYNOMIALS`` fall back to the polynomial of the same order.
    """
    scheme = get_scheme(scheme_id)
    if polynomial is None:
        polynomial = scheme_id if scheme_id in ERROR_POLYNOMIALS else PROXY_POLYNOMIALS.get(scheme_id)
    if polynomial is None:
        raise UnknownSchemeError(f"no error polynomial available for {scheme_id!r}")
    norms = commutator_norm_table(P) if norms is None else norms
    s2 = choose_squarings(polynomial, norms, u)
    return SelectionPlan(scheme_id, s2, error_polynomial(polynomial, 2.0**-s2, None, norms),
                         scheme_cost(scheme, s2, inner), u, inner, polynomial=polynomial)


def pade_plan(P: PerturbedMatrix, u: float) -> SelectionPlan:
    plan = plan_standard(one_norm(P.dense()), u)
    return SelectionPlan(f"r{2 * plan.m}", plan.s, plan.predicted_error, plan.cost, u, m=plan.m)


def select_method(P: PerturbedMatrix, u: float, inner=2,
                  candidates=AUTOMATIC_SCHEMES) -> SelectionPlan:
    """Cheapest of the Pade baseline and the candidate splittings.

    Ties go to the smaller predicted error.  Candidates whose bound cannot
    reach ``u`` are skipped.
    """
    u = canonical_tolerance(u)
    if P.eps == 0 or not np.any(P.B):
        return SelectionPlan("structured", 0, 0.0, Fraction(0), u)
    norms = commutator_norm_table(P)
    plans = [pade_plan(P, u)]
    for sid in candidates:
        try:
            plans.append(plan_for_scheme(P, sid, u, inner, norms))
        except NoFeasibleScalingError:
            continue
    return min(plans, key=lambda p: (p.predicted_cost, p.predicted_error))


def run_plan(P: PerturbedMatrix, plan: SelectionPlan,
             tally: CostTally | None = None) -> np.ndarray:
    """Execute a plan; the tally then equals ``plan.predicted_cost``."""
    if plan.kind == "structured":
        return exp_structured(P.D, 1.0, tally).dense()
    if plan.kind == "pade":
        Y = pade(P.dense() / 2**plan.s, plan.m, tally)
        return square_repeatedly(Y, plan.s, tally)
    return run_scheme(P, get_scheme(plan.method), 2.0**-plan.s, plan.s, tally, plan.inner)


# theta_5 of r10 for the tolerances used in the threshold estimate; 1e-4 is not
# one of the tabulated rows
ROUGH_THETA5 = {1e-6: THETA_TABLE.theta(1e-6, 5), 1e-4: 3.85}


def epsilon_threshold(u: float, budget_products: Fraction | None = None,
                      scheme_id: str = "Yt0") -> float:
    """Largest ``eps`` for which ``scheme_id`` beats r10 at r10's cost.

    The splitting gets the squarings that the budget leaves after its own
    inner exponential, and all norms come from the crude estimate with
    ``|D| = |B| = theta_5(u)``.  Returned to three significant digits.
    """
    key = next((k for k in ROUGH_THETA5 if math.isclose(k, u, rel_tol=1e-9)), None)
    if key is None:
        raise ValueError(f"threshold defined for u in {sorted(ROUGH_THETA5)}, got {u!r}")
    budget = pade_cost(5) if budget_products is None else Fraction(budget_products)
    s2 = math.floor(budget - scheme_cost(get_scheme(scheme_id), 0, 2))
    if s2 < 0:
        raise ValueError(f"budget {budget} is below the cost of {scheme_id} itself")
    norms = rough_norms(ROUGH_THETA5[key], 1.0)
    h = 2.0**-s2

    def excess(log_eps):
        return math.log(error_polynomial(scheme_id, h, math.exp(log_eps), norms) / key)

    lo, hi = math.log(1e-12), math.log(1.0)
    if excess(hi) <= 0:
        return 1.0
    root = math.exp(brentq(excess, lo, hi, xtol=1e-10))
    return float(f"{root:.3g}")

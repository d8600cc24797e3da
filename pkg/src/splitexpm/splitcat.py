"""Splitting schemes for ``exp(h (D + eps B))`` and their executors.

Three families are catalogued:

* :class:`SquaringScheme` -- the modified-squaring recursion
  ``X_0 = exp(b h eps B)``, ``X_k = X_{k-1} exp(a_k h D) X_{k-1}`` and
  ``Y = exp(a_{s+1} h D) X_s exp(a_{s+1} h D)``; one dense product per level.
  The central exponent may carry the cheap commutator corrections
  ``beta h^3 eps [D,[D,B]] + gamma h^5 eps ad_D^4 B``.
* :class:`GeneralSplitting` -- palindromic compositions with several distinct
  B-exponentials; repeated sub-products are declared as :class:`Group` and
  evaluated once.
* :class:`ProcessorSpec` -- ``P K^N P^{-1}`` with the processor
  ``P = exp(x h^2 eps [D,B] + y h^4 eps ad_D^3 B)``.

Coefficient indexing follows the recursion: ``a_1`` is the innermost gap
(weight ``2^{s-1}`` in the consistency sum) and ``a_{s+1}`` the outer one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from .errors import UnknownSchemeError
from .matrixcore import (
    CostTally,
    INVERSE_MULTIPLY_COST,
    PerturbedMatrix,
    commutator_powers,
    exp_structured,
    matmul,
    multiply_inverse,
)
from .padetaylor import expm_r26_scaled, pade_r2, pade_r4, square_repeatedly

CONSISTENCY_TOL = 1e-12

# inner exponential of the dense part: Pade order 2 or 4, or "exact" (r26 with
# scaling, untallied) to isolate the splitting error
INNER_COST = {2: Fraction(4, 3), 4: Fraction(7, 3), "exact": Fraction(0)}


@dataclass(frozen=True)
class ModifiedExponentSpec:
    """``exp(alpha h eps B + beta h^3 eps ad_D^2 B + gamma h^5 eps ad_D^4 B)``."""

    alpha: complex
    beta: float = 0.0
    gamma: float = 0.0
    pade_order: int = 2


@dataclass(frozen=True)
class SquaringScheme:
    id: str
    a_coeffs: tuple
    center: ModifiedExponentSpec
    order: tuple
    title: str = ""
    experimental: bool = False

    @property
    def s1(self) -> int:
        return len(self.a_coeffs) - 1

    @property
    def real_only(self) -> bool:
        return all(complex(a).imag == 0 for a in self.a_coeffs)

    @property
    def declared_cost(self) -> Fraction:
        return Fraction(self.s1)

    @property
    def family(self) -> str:
        return "squaring"


@dataclass(frozen=True)
class DStep:
    coeff: complex


@dataclass(frozen=True)
class BStep:
    label: str


@dataclass(frozen=True, eq=False)
class Group:
    """A sub-product that occurs more than once; it is evaluated only once."""

    items: tuple


Item = Union[DStep, BStep, Group]


def _flatten(items):
    for it in items:
        if isinstance(it, Group):
            yield from _flatten(it.items)
        else:
            yield it


def _chain_products(items, seen) -> int:
    count, factors = 0, 0
    for it in items:
        if isinstance(it, DStep):
            continue
        factors += 1
        if isinstance(it, Group) and id(it) not in seen:
            seen.add(id(it))
            count += _chain_products(it.items, seen)
    return count + max(factors - 1, 0)


@dataclass(frozen=True)
class GeneralSplitting:
    id: str
    items: tuple
    exponents: Mapping[str, ModifiedExponentSpec]
    order: tuple
    declared_cost: Fraction
    title: str = ""
    experimental: bool = False

    @property
    def family(self) -> str:
        return "composition"

    def stages(self) -> list[tuple[str, complex]]:
        """Flattened ``(operator, coefficient)`` list; B stages report ``alpha``."""
        out = []
        for it in _flatten(self.items):
            if isinstance(it, DStep):
                out.append(("D", complex(it.coeff)))
            else:
                out.append((it.label, complex(self.exponents[it.label].alpha)))
        return out

    def chain_products(self) -> int:
        return _chain_products(self.items, set())

    @property
    def real_only(self) -> bool:
        return all(c.imag == 0 for _, c in self.stages())


@dataclass(frozen=True)
class ProcessorSpec:
    id: str
    x: float
    y: float
    kernel: SquaringScheme
    order: tuple
    title: str = ""
    experimental: bool = False

    @property
    def family(self) -> str:
        return "processed"

    @property
    def real_only(self) -> bool:
        return self.kernel.real_only


Scheme = Union[SquaringScheme, GeneralSplitting, ProcessorSpec]


# ---------------------------------------------------------------------------
# consistency and cost


def consistency_defect(scheme: Scheme) -> float:
    if isinstance(scheme, ProcessorSpec):
        return consistency_defect(scheme.kernel)
    if isinstance(scheme, SquaringScheme):
        s = scheme.s1
        a = [complex(v) for v in scheme.a_coeffs]
        total = sum(2 ** (s - k) * a[k - 1] for k in range(1, s + 1)) + 2 * a[s]
        return max(abs(total - 1), abs(complex(scheme.center.alpha) - 2.0**-s))
    stages = scheme.stages()
    sa = sum(c for op, c in stages if op == "D")
    sb = sum(c for op, c in stages if op != "D")
    return max(abs(sa - 1), abs(sb - 1))


def consistency_check(scheme: Scheme) -> bool:
    return consistency_defect(scheme) <= CONSISTENCY_TOL


def is_palindromic(scheme: GeneralSplitting) -> bool:
    seq = [(op, round(c.real, 14), round(c.imag, 14)) for op, c in scheme.stages()]
    return seq == seq[::-1]


def default_inner(scheme: Scheme):
    if isinstance(scheme, SquaringScheme):
        return scheme.center.pade_order
    if isinstance(scheme, ProcessorSpec):
        return scheme.kernel.center.pade_order
    return next(iter(scheme.exponents.values())).pade_order


def scheme_cost(scheme: Scheme, s2: int = 0, inner=None) -> Fraction:
    """Dense-product cost of one execution with ``s2`` external squarings."""
    inner = default_inner(scheme) if inner is None else inner
    if isinstance(scheme, SquaringScheme):
        return scheme.declared_cost + s2 + INNER_COST[inner]
    if isinstance(scheme, GeneralSplitting):
        return scheme.declared_cost + s2 + len(scheme.exponents) * INNER_COST[inner]
    # processor exponential + one product + one fused right solve
    return (scheme_cost(scheme.kernel, s2, inner) + INNER_COST[2 if inner != "exact" else "exact"]
            + 1 + INVERSE_MULTIPLY_COST)


# ---------------------------------------------------------------------------
# execution


class CommutatorCache:
    """Lazily computed ``ad_D^r(B)`` for one perturbed matrix."""

    def __init__(self, P: PerturbedMatrix, tally: CostTally | None = None):
        self.P = P
        self._powers = [P.B]
        self._tally = tally

    def __getitem__(self, r: int) -> np.ndarray:
        if r >= len(self._powers):
            more = commutator_powers(self.P.D, self._powers[-1], r - len(self._powers) + 1,
                                     self._tally)
            self._powers.extend(more[1:])
        return self._powers[r]


def build_center_exponent(P: PerturbedMatrix, h: float, spec: ModifiedExponentSpec,
                          tally: CostTally | None = None,
                          cache: CommutatorCache | None = None) -> np.ndarray:
    """Dense exponent ``eps (alpha h B + beta h^3 ad_D^2 B + gamma h^5 ad_D^4 B)``.

    Only structured commutators are used, so the dense-product count is unchanged.
    """
    if h == 0 or not np.isfinite(h):
        raise ValueError("h must be a finite nonzero real")
    cache = CommutatorCache(P, tally) if cache is None else cache
    M = spec.alpha * h * P.B
    if spec.beta:
        M = M + spec.beta * h**3 * cache[2]
    if spec.gamma:
        M = M + spec.gamma * h**5 * cache[4]
    return P.eps * M


def inner_exponential(M, order, tally: CostTally | None = None) -> np.ndarray:
    if order == 2:
        return pade_r2(M, tally)
    if order == 4:
        return pade_r4(M, tally)
    if order == "exact":
        if tally is not None:
            tally.dense_exponentials += 1
        return expm_r26_scaled(M)
    raise ValueError(f"inner exponential must be 2, 4 or 'exact', not {order!r}")


def run_modified_squaring(P: PerturbedMatrix, scheme: SquaringScheme, h: float = 1.0,
                          s2: int = 0, tally: CostTally | None = None, inner=None,
                          cache: CommutatorCache | None = None) -> np.ndarray:
    """Evaluate the modified-squaring recursion, then square ``s2`` times."""
    inner = scheme.center.pade_order if inner is None else inner
    X = inner_exponential(build_center_exponent(P, h, scheme.center, tally, cache), inner, tally)
    for a in scheme.a_coeffs[:-1]:
        E = exp_structured(P.D, a * h, tally)
        X = matmul(E.right(X), X, tally)
    E = exp_structured(P.D, scheme.a_coeffs[-1] * h, tally)
    Y = E.left(E.right(X))
    return square_repeatedly(Y, s2, tally)


def run_general_splitting(P: PerturbedMatrix, scheme: GeneralSplitting, h: float = 1.0,
                          s2: int = 0, tally: CostTally | None = None, inner=None,
                          cache: CommutatorCache | None = None) -> np.ndarray:
    """Evaluate a composition, reusing each distinct exponential and group once."""
    inner = default_inner(scheme) if inner is None else inner
    cache = CommutatorCache(P, tally) if cache is None else cache
    memo: dict = {}

    def dense_factor(it):
        key = it.label if isinstance(it, BStep) else id(it)
        if key not in memo:
            if isinstance(it, BStep):
                M = build_center_exponent(P, h, scheme.exponents[it.label], tally, cache)
                memo[key] = inner_exponential(M, inner, tally)
            else:
                memo[key] = chain(it.items)
        return memo[key]

    def chain(items):
        acc, pending = None, []
        for it in items:
            if isinstance(it, DStep):
                E = exp_structured(P.D, it.coeff * h, tally)
                if acc is None:
                    pending.append(E)
                else:
                    acc = E.right(acc)
                continue
            F = dense_factor(it)
            if acc is None:
                acc = F
                for E in reversed(pending):
                    acc = E.left(acc)
            else:
                acc = matmul(acc, F, tally)
        return acc

    return square_repeatedly(chain(scheme.items), s2, tally)


def run_processed(P: PerturbedMatrix, proc: ProcessorSpec, h: float = 1.0, s2: int = 0,
                  tally: CostTally | None = None, inner=None,
                  cache: CommutatorCache | None = None) -> np.ndarray:
    """``R K^(2^s2) R^{-1}`` with ``R = r2(x h^2 eps [D,B] + y h^4 eps ad_D^3 B)``."""
    cache = CommutatorCache(P, tally) if cache is None else cache
    K = run_modified_squaring(P, proc.kernel, h, s2, tally, inner, cache)
    exponent = P.eps * (proc.x * h**2 * cache[1] + proc.y * h**4 * cache[3])
    R = inner_exponential(exponent, "exact" if inner == "exact" else 2, tally)
    return multiply_inverse(matmul(R, K, tally), R, tally)


def run_scheme(P: PerturbedMatrix, scheme: Scheme, h: float = 1.0, s2: int = 0,
               tally: CostTally | None = None, inner=None,
               cache: CommutatorCache | None = None) -> np.ndarray:
    """Dispatch on the scheme family."""
    if isinstance(scheme, SquaringScheme):
        return run_modified_squaring(P, scheme, h, s2, tally, inner, cache)
    if isinstance(scheme, GeneralSplitting):
        return run_general_splitting(P, scheme, h, s2, tally, inner, cache)
    if isinstance(scheme, ProcessorSpec):
        return run_processed(P, scheme, h, s2, tally, inner, cache)
    raise TypeError(f"not a scheme: {scheme!r}")


def as_composition(scheme: SquaringScheme) -> GeneralSplitting:
    """The recursion written out as a grouped composition (same cost, same result)."""
    X = (BStep("B"),)
    for a in scheme.a_coeffs[:-1]:
        g = Group(X)
        X = (g, DStep(a), g)
    out = scheme.a_coeffs[-1]
    return GeneralSplitting(scheme.id + "_composition", (DStep(out),) + X + (DStep(out),),
                            {"B": scheme.center}, scheme.order, scheme.declared_cost,
                            scheme.title)


# ---------------------------------------------------------------------------
# the catalog


def _strang():
    return SquaringScheme("strang", (0.5,), ModifiedExponentSpec(1.0), (2, 2),
                          "Strang / leapfrog D_{h/2} B_h D_{h/2}")


def _y1():
    a2 = (3 - math.sqrt(3)) / 6
    return SquaringScheme("Y1", (1 - 2 * a2, a2), ModifiedExponentSpec(0.5), (4, 2),
                          "modified squaring s1=1, order (4,2)")


def _y2():
    a1 = math.sqrt((5 - math.sqrt(5)) / 30)
    a2 = math.sqrt((5 - 2 * math.sqrt(5)) / 15)
    a3 = (1 - 2 * a1 - a2) / 2
    return SquaringScheme("Y2", (a1, a2, a3), ModifiedExponentSpec(0.25), (6, 2),
                          "modified squaring s1=2, order (6,2)")


def _y2c():
    # complex fourth-order pair; inner gap 2(2+i)/15, outer gap (1-i/3)/10
    inner = 2 * (2 + 1j) / 15
    outer = (1 - 1j / 3) / 10
    mid = 1 - 2 * (inner + outer)
    return SquaringScheme("Y2c", (inner, mid, outer), ModifiedExponentSpec(0.25, pade_order=4),
                          (4, 4), "modified squaring s1=2, complex order 4")


def _y3():
    a1 = 0.153942020841153420134790213164
    a2 = 0.089999237645462605679630986655
    a3 = 0.102244554291437558627161030779
    a4 = 0.5 - (4 * a1 + 2 * a2 + a3) / 2
    return SquaringScheme("Y3", (a1, a2, a3, a4), ModifiedExponentSpec(0.125), (8, 2),
                          "modified squaring s1=3, order (8,2)")


def _y3c():
    a1 = complex("0.13534452760420860194+0.06201309787740406230j")
    a2 = complex("0.13027125534284511606-0.10310039626441585374j")
    a3 = complex("0.099062332740825337251-0.015885424766237390724j")
    a4 = 0.5 - (4 * a1 + 2 * a2 + a3) / 2
    return SquaringScheme("Y3c", (a1, a2, a3, a4), ModifiedExponentSpec(0.125, pade_order=4),
                          (6, 4), "modified squaring s1=3, complex order (6,4)")


def _y4():
    a1 = 0.077255933048297137202077893145
    a2 = 0.0444926322393204245189059370354
    a3 = 0.051080773613693429438027986467
    a5 = 0.0254553659841308990458390646508
    a4 = 1 - 8 * a1 - 4 * a2 - 2 * a3 - 2 * a5
    return SquaringScheme("Y4", (a1, a2, a3, a4, a5), ModifiedExponentSpec(1 / 16), (10, 2),
                          "modified squaring s1=4, order (10,2)")


def _y4c():
    a1 = complex("0.06782965853562196485274129+0.03038453954138687801299186j")
    a2 = complex("0.06477414774829711915884478-0.05170904068177844632921239j")
    # the tabulated imaginary part of a3 has the wrong sign
    a3 = complex("0.04963134399080347125041612-0.00584283681423207753349501j")
    a5 = complex("0.02474856149827627051056177-0.00610084851840072905292033j")
    a4 = 1 - 8 * a1 - 4 * a2 - 2 * a3 - 2 * a5
    return SquaringScheme("Y4c", (a1, a2, a3, a4, a5),
                          ModifiedExponentSpec(1 / 16, pade_order=4), (8, 4),
                          "modified squaring s1=4, complex order (8,4)")


def _yt0():
    return SquaringScheme("Yt0", (0.5,), ModifiedExponentSpec(1.0, 1 / 24, 1 / 1920), (6, 2),
                          "commutator-modified Strang, order (6,2)")


def _yt1():
    return SquaringScheme("Yt1", (2 / 3, 1 / 6),
                          ModifiedExponentSpec(0.5, -1 / 144, 121 / 311040, pade_order=4),
                          (6, 4), "commutator-modified s1=1, order (6,4)")


def _yt2():
    # tabulated with the inner (twice-used) and middle gap labels exchanged
    a1 = 0.47071989362081947165
    a3 = 0.04898669326146179875
    a2 = 1 - 2 * (a1 + a3)
    center = ModifiedExponentSpec(0.25, -0.002320917859694561351, 0.0000329546718228203782,
                                  pade_order=4)
    return SquaringScheme("Yt2", (a1, a2, a3), center, (6, 4),
                          "commutator-modified s1=2, order (6,4)")


def _yt2_84():
    a1 = 0.3602258146389491220734647
    a3 = 0.0766102130069293861483005
    a2 = 1 - 2 * (a3 + a1)
    center = ModifiedExponentSpec(0.25, -0.00103637077918270398691258,
                                  0.000010240482532598594411391, pade_order=4)
    return SquaringScheme("Yt2_84", (a1, a2, a3), center, (8, 4),
                          "commutator-modified s1=2, order (8,4)")


def _s4():
    c = 2 + 2 ** (-1 / 3) + 2 ** (1 / 3)
    a1, b1 = c / 6, c / 3
    a2, b2 = 0.5 - a1, 1 - 2 * b1
    items = (DStep(a1), BStep("B1"), DStep(a2), BStep("B2"), DStep(a2), BStep("B1"), DStep(a1))
    exps = {"B1": ModifiedExponentSpec(b1, pade_order=4), "B2": ModifiedExponentSpec(b2, pade_order=4)}
    return GeneralSplitting("S4", items, exps, (4, 4), Fraction(2), "triple jump")


S6_PRINTED = {"a3": -0.079837541609741045862, "b2": -0.70077367639641380284}
S7_PRINTED = {"a3": 0.67476633178136516448, "b2": -0.85405927089521001173}

# gamma as tabulated for both processed Yt1 kernels; it repeats the Yt2 value and
# breaks the h^5 first-order condition, so the catalog uses the value solved from it
YT1_PROCESSED_PRINTED_GAMMA = 0.0000329546718228203782
YT1_PROCESSED_GAMMA = {"664": 0.0002371202482800248435030042278,
                       "104": -0.00006473666364394837429683742505}


def _s6():
    a1 = 0.19731107566242791631
    a2 = 0.38252646594731312955
    a3 = 0.5 - a1 - a2
    b1 = 0.42519341909910345071
    b2 = 1 - 4 * b1
    g = Group((BStep("B1"), DStep(a2), BStep("B1")))
    items = (DStep(a1), g, DStep(a3), BStep("B2"), DStep(a3), g, DStep(a1))
    exps = {"B1": ModifiedExponentSpec(b1, pade_order=4), "B2": ModifiedExponentSpec(b2, pade_order=4)}
    return GeneralSplitting("S6", items, exps, (4, 4), Fraction(3),
                            "six-stage real order 4")


def _s7():
    a1 = 0.35937529621978708941
    a2 = -0.098379231055234835826
    a3 = 1 - 2 * a1 - 4 * a2
    b1 = 0.67702963544760500586
    b2 = 0.5 - 2 * b1
    g = Group((BStep("B1"), DStep(a2), BStep("B2"), DStep(a2), BStep("B1")))
    items = (DStep(a1), g, DStep(a3), g, DStep(a1))
    exps = {"B1": ModifiedExponentSpec(b1, pade_order=4), "B2": ModifiedExponentSpec(b2, pade_order=4)}
    return GeneralSplitting("S7", items, exps, (6, 4), Fraction(3),
                            "seven-stage real order (6,4)")


def _yt0_processed():
    kernel = SquaringScheme("Yt0_kernel", (0.5,),
                            ModifiedExponentSpec(1.0, -1 / 24, 31 / 5760, pade_order=4), (2, 2))
    return ProcessorSpec("Yt0_proc", -1 / 12, 1 / 120, kernel, (6, 4), "processed Yt0")


def _yt1_processed(tag, a2, beta, gamma, x, y, order):
    kernel = SquaringScheme(f"Yt1_kernel_{tag}", (1 - 2 * a2, a2),
                            ModifiedExponentSpec(0.5, beta, gamma, pade_order=4), order)
    return ProcessorSpec(f"Yt1_proc{tag}", x, y, kernel, order, f"processed Yt1, order {order}")


def _psi4mod(tag, a2, b2, c1, c2, d1, d2, order):
    a1 = 0.5 - a2
    b1 = (1 - b2) / 2
    items = (DStep(a1), BStep("B1"), DStep(a2), BStep("B2"), DStep(a2), BStep("B1"), DStep(a1))
    exps = {"B1": ModifiedExponentSpec(b1, c1, d1, 2), "B2": ModifiedExponentSpec(b2, c2, d2, 2)}
    return GeneralSplitting(f"psi4mod_{tag}", items, exps, order, Fraction(2),
                            f"r2-compensated four-stage, order {order}", experimental=True)


def _build_catalog():
    entries = [
        _strang(), _y1(), _y2(), _y2c(), _y3(), _y3c(), _y4(), _y4c(),
        _yt0(), _yt1(), _yt2(), _yt2_84(),
        _s4(), _s6(), _s7(),
        _yt0_processed(),
        _yt1_processed("664", 0.2587977340833403434530275, -0.005227683364583625421653925,
                       YT1_PROCESSED_GAMMA["664"], -0.02303276685416841919659022,
                       0.0007499977372301362425777840, (6, 6, 4)),
        _yt1_processed("104", 0.250225501288894385213924, -0.0052083460460411565905784,
                       YT1_PROCESSED_GAMMA["104"], -0.0208897086555569296368143,
                       0.0000573371861339342917744, (10, 4)),
        _psi4mod("104", 0.50468619989723192191, -0.58268652153120735848,
                 -0.0079989398412468330564, -0.14389703981903926044,
                 0.000039345117326816272608, -0.0017987433839305087766, (10, 4)),
        _psi4mod("84", 0.50468619989723192191, -0.58268652153120735848,
                 -0.061046475308497637733, -0.03780196888453765108,
                 0.0011653151315644152329, 0.009460956758445480826, (8, 4)),
    ]
    return {e.id: e for e in entries}


_CATALOG = _build_catalog()

# entries whose measured (p1, p2) disagree with the declared label, and why
UNVERIFIED = {
    "Yt1_proc664": "measured p2 = 4; the eps^2 h^5 term is reduced but not removed",
}


def catalog(include_experimental: bool = True) -> list[Scheme]:
    return [s for s in _CATALOG.values() if include_experimental or not s.experimental]


def get_scheme(scheme_id: str) -> Scheme:
    try:
        return _CATALOG[scheme_id]
    except KeyError:
        raise UnknownSchemeError(f"unknown scheme {scheme_id!r}; known: {sorted(_CATALOG)}") from None


def _num(c):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


def describe(scheme: Scheme) -> dict:
    """Machine-readable summary used by the ``catalog`` command."""
    row = {"id": scheme.id, "family": scheme.family, "order": list(scheme.order),
           "real": scheme.real_only, "experimental": scheme.experimental,
           "verified": scheme.id not in UNVERIFIED,
           "cost": str(scheme_cost(scheme)), "title": scheme.title}
    if isinstance(scheme, SquaringScheme):
        c = scheme.center
        row["coefficients"] = {"a": [_num(a) for a in scheme.a_coeffs],
                               "alpha": _num(c.alpha), "beta": c.beta, "gamma": c.gamma}
    elif isinstance(scheme, GeneralSplitting):
        row["coefficients"] = {"stages": [[op, _num(v)] for op, v in scheme.stages()],
                               "exponents": {k: {"alpha": _num(v.alpha), "beta": v.beta,
                                                 "gamma": v.gamma}
                                             for k, v in scheme.exponents.items()}}
    else:
        k = scheme.kernel
        row["coefficients"] = {"a": [_num(a) for a in k.a_coeffs], "alpha": _num(k.center.alpha),
                               "beta": k.center.beta, "gamma": k.center.gamma,
                               "x": scheme.x, "y": scheme.y}
    return row

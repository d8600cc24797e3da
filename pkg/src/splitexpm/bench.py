"""Test matrices, the reference exponential, experiment sweeps and order checks.

Every sweep returns :class:`ResultRecord` rows that are written to CSV with
the columns ``experiment,scheme,eps,s,h,error,cost,predicted_error,wall_ms``.
Costs are exact rationals and are written as strings such as ``25/3``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errmodel import ERROR_POLYNOMIALS, commutator_norm_table, error_polynomial, run_plan, select_method
from .errors import DimensionMismatchError, IllConditionedFitError, SplitExpmError
from .matrixcore import (
    BlockOscillator,
    CostTally,
    DiagonalOperator,
    PerturbedMatrix,
    matmul,
    one_norm,
)
from .padetaylor import (
    PADE_KERNELS,
    expm_r26_scaled,
    pade,
    pade_coefficients,
    square_repeatedly,
    taylor_t16,
)
from .splitcat import get_scheme, run_scheme

# ---------------------------------------------------------------------------
# generators


def gen_rotation(scale: float = 1.0) -> DiagonalOperator:
    """``i scale diag(-25, -24.5, ..., 25)``: 101 purely imaginary entries."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return DiagonalOperator(1j * scale * (-25 + 0.5 * np.arange(101)))


def gen_dissipation() -> DiagonalOperator:
    """``diag(15, 14.5, ..., -15)``: 61 real entries."""
    return DiagonalOperator(15 - 0.5 * np.arange(61))


def gen_perturbation(D, eps: float = 1.0) -> np.ndarray:
    """``B_ij = k (i - j) / (i + j)`` (1-based) with ``|B|_1 = eps |D|_1``.

    With the default ``eps = 1`` the result has the size of ``D`` and the
    small parameter is kept in :class:`PerturbedMatrix`.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = D.dim
    i = np.arange(1, n + 1, dtype=float)
    B = (i[:, None] - i[None, :]) / (i[:, None] + i[None, :])
    return B * (eps * one_norm(D.dense()) / one_norm(B))


def perturbed_problem(D, eps: float) -> PerturbedMatrix:
    return PerturbedMatrix(D, gen_perturbation(D), eps)


def gen_example2x2(eps: float):
    """``A = [[eps, 1+eps], [-1+eps, -eps]]`` split as rotation plus ``eps [[1,1],[1,-1]]``.

    Returns ``(P, exact)`` where ``exact(s)`` is the closed form of ``exp(2**s A)``.
    """
    if abs(eps) >= 1 / math.sqrt(2):
        raise ValueError("|eps| must be below 1/sqrt(2)")
    P = PerturbedMatrix(BlockOscillator([1.0]), np.array([[1.0, 1.0], [1.0, -1.0]]), eps)
    mu = math.sqrt(1 - 2 * eps**2)

    def exact(s: int) -> np.ndarray:
        t = 2.0**s * mu
        c, sn = math.cos(t), math.sin(t) / mu
        return np.array([[c + eps * sn, (1 + eps) * sn],
                         [-(1 - eps) * sn, c - eps * sn]], dtype=complex)

    return P, exact


BUILTINS = {
    "rotation": lambda eps: perturbed_problem(gen_rotation(1.0), eps),
    "rotation-large": lambda eps: perturbed_problem(gen_rotation(100.0), eps),
    "dissipation": lambda eps: perturbed_problem(gen_dissipation(), eps),
    "example2x2": lambda eps: gen_example2x2(eps)[0],
}


def reference_expm(A) -> np.ndarray:
    """Oracle: r26 after scaling ``|A|_1`` to at most 1; never tallied."""
    return expm_r26_scaled(np.asarray(A, dtype=complex), theta=1.0)


def relative_error(Y, ref) -> float:
    return one_norm(Y - ref) / one_norm(ref)


def taylor4(X, tally: CostTally | None = None) -> np.ndarray:
    """Degree-4 Taylor polynomial with two products."""
    X = np.asarray(X, dtype=complex)
    I = np.eye(X.shape[0], dtype=complex)
    X2 = matmul(X, X, tally)
    return I + X + matmul(X2, I / 2 + X / 6 + X2 / 24, tally)


# ---------------------------------------------------------------------------
# records and CSV

CSV_COLUMNS = ("experiment", "scheme", "eps", "s", "h", "error", "cost", "predicted_error", "wall_ms")

EXPERIMENTS = ("longtime", "rotation", "rotation-large", "dissipation", "order-check")


@dataclass
class ResultRecord:
    experiment: str
    scheme: str
    eps: float
    s: int
    h: float
    error: float
    cost: Fraction
    predicted_error: float | None = None
    wall_ms: float = 0.0

    def row(self) -> dict:
        return {
            "experiment": self.experiment,
            "scheme": self.scheme,
            "eps": repr(float(self.eps)),
            "s": str(self.s),
            "h": repr(float(self.h)),
            "error": repr(float(self.error)),
            "cost": str(Fraction(self.cost)),
            "predicted_error": "" if self.predicted_error is None else repr(float(self.predicted_error)),
            "wall_ms": f"{self.wall_ms:.3f}",
        }

    @classmethod
    def from_row(cls, row: dict) -> "ResultRecord":
        pe = row["predicted_error"]
        return cls(row["experiment"], row["scheme"], float(row["eps"]), int(row["s"]),
                   float(row["h"]), float(row["error"]), Fraction(row["cost"]),
                   None if pe == "" else float(pe), float(row["wall_ms"]))


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def read_csv(path) -> list[ResultRecord]:
    with open(path, newline="") as fh:
        return [ResultRecord.from_row(row) for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# experiments

DEFAULT_SCHEMES = ("strang", "Y1", "Y2", "Yt0", "Yt1", "Yt2", "S7")

DEFAULTS = {
    "longtime": dict(eps_list=(1e-1, 1e-3), s_range=tuple(range(0, 31))),
    "rotation": dict(eps_list=(1e-1, 1e-2, 1e-3), s_range=tuple(range(0, 13))),
    "rotation-large": dict(eps_list=(1e-2, 1e-3), s_range=tuple(range(6, 19))),
    "dissipation": dict(eps_list=(1e-1, 1e-2, 1e-3), s_range=tuple(range(0, 13))),
    "order-check": dict(eps_list=(1.0,), s_range=tuple(range(0, 9))),
}


@dataclass
class ExperimentConfig:
    experiment: str
    eps_list: tuple = ()
    u: float = 1e-6
    schemes: tuple = ("auto",)
    s_range: tuple = ()
    out: str | None = None
    seed: int = 0
    inner: object = 2

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        d = DEFAULTS[self.experiment]
        self.eps_list = tuple(self.eps_list) or d["eps_list"]
        self.s_range = tuple(self.s_range) or d["s_range"]
        if self.experiment != "order-check" and not all(0 < e < 1 for e in self.eps_list):
            raise ValueError("eps values must lie in (0, 1)")
        if not self.s_range or min(self.s_range) < 0:
            raise ValueError("s_range must be a nonempty set of nonnegative integers")

    def scheme_list(self) -> tuple:
        if tuple(self.schemes) == ("auto",):
            return DEFAULT_SCHEMES + ("auto",)
        return tuple(self.schemes)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, 1e3 * (time.perf_counter() - t0)


def _safe_record(experiment, scheme, eps, s, h, ref, fn, predicted=None):
    tally = CostTally()
    try:
        Y, ms = _timed(lambda: fn(tally))
        err = relative_error(Y, ref)
    except (SplitExpmError, ArithmeticError, ValueError, FloatingPointError):
        err, ms = float("nan"), 0.0
    return ResultRecord(experiment, scheme, eps, s, h, err, tally.dense_products, predicted, ms)


def _longtime(cfg):
    recs = []
    for eps in cfg.eps_list:
        P, exact = gen_example2x2(eps)
        A = P.dense()
        strang = get_scheme("strang")
        for s in cfg.s_range:
            ref = exact(s)
            recs.append(_safe_record("longtime", "strang+r2", eps, s, 1.0, ref,
                                     lambda t: run_scheme(P, strang, 1.0, s, t, inner=2)))
            recs.append(_safe_record("longtime", "r4", eps, s, 1.0, ref,
                                     lambda t: square_repeatedly(pade(A, 2, t), s, t)))
            recs.append(_safe_record("longtime", "T4", eps, s, 1.0, ref,
                                     lambda t: square_repeatedly(taylor4(A, t), s, t)))
    return recs


def _matrix_sweep(cfg, make):
    recs = []
    for eps in cfg.eps_list:
        P = make(eps)
        A = P.dense()
        ref = reference_expm(A)
        norms = commutator_norm_table(P)
        for sid in cfg.scheme_list():
            if sid == "auto":
                try:
                    plan = select_method(P, cfg.u, inner=cfg.inner)
                except SplitExpmError:
                    continue
                recs.append(_safe_record(cfg.experiment, f"auto:{plan.method}", eps, plan.s,
                                         2.0**-plan.s, ref, lambda t: run_plan(P, plan, t),
                                         plan.predicted_error))
                continue
            scheme = get_scheme(sid)
            for s in cfg.s_range:
                h = 2.0**-s
                pred = error_polynomial(sid, h, None, norms) if sid in ERROR_POLYNOMIALS else None
                recs.append(_safe_record(cfg.experiment, sid, eps, s, h, ref,
                                         lambda t: run_scheme(P, scheme, h, s, t, inner=cfg.inner),
                                         pred))
        for m in PADE_KERNELS:
            for s in cfg.s_range:
                recs.append(_safe_record(cfg.experiment, f"r{2 * m}", eps, s, 2.0**-s, ref,
                                         lambda t: square_repeatedly(pade(A / 2**s, m, t), s, t)))
    return recs


def _order_check(cfg):
    recs = []
    schemes = [s for s in cfg.scheme_list() if s != "auto"]
    hs = 4.0 * 2.0 ** -np.asarray(cfg.s_range, dtype=float)
    for sid in schemes:
        est = order_errors(get_scheme(sid), hs, seed=cfg.seed)
        for k, (h, e1, e2) in enumerate(zip(hs, est[0], est[1])):
            s = cfg.s_range[k]
            recs.append(ResultRecord("order-check", f"{sid}:eps1", 1.0, s, float(h), e1, Fraction(0)))
            recs.append(ResultRecord("order-check", f"{sid}:eps2", 1.0, s, float(h), e2, Fraction(0)))
    return recs


def run_experiment(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Run a sweep; failing grid points become rows with ``error = nan``."""
    if cfg.experiment == "longtime":
        recs = _longtime(cfg)
    elif cfg.experiment == "order-check":
        recs = _order_check(cfg)
    else:
        recs = _matrix_sweep(cfg, BUILTINS[cfg.experiment])
    if cfg.out:
        write_csv(recs, cfg.out)
    return recs


# ---------------------------------------------------------------------------
# empirical order


def order_problem(seed: int = 0, n: int = 12) -> PerturbedMatrix:
    """Block-nilpotent lift of a random diagonal problem.

    With ``D3 = diag(D, D, D)`` and ``B3`` carrying ``B`` on the two upper
    block diagonals, the (1,2) block of ``exp(h (D3 + B3))`` is exactly the
    first-order term in ``eps`` of ``exp(h (D + eps B))`` and the (1,3) block
    the second-order one.  Applied to any splitting the same blocks isolate its
    ``eps`` and ``eps^2`` errors without finite differences.
    """
    rng = np.random.default_rng(seed)
    d = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B /= one_norm(B)
    Z = np.zeros((n, n))
    return PerturbedMatrix(DiagonalOperator(np.tile(d, 3)), np.block([[Z, B, Z], [Z, Z, B], [Z, Z, Z]]), 1.0)


def order_errors(scheme, hs, seed: int = 0, inner="exact"):
    """First- and second-order-in-``eps`` local errors for each step in ``hs``."""
    P = order_problem(seed)
    n = P.dim // 3
    A = P.dense()
    e1, e2 = [], []
    for h in hs:
        R = run_scheme(P, scheme, float(h), 0, inner=inner) - reference_expm(h * A)
        e1.append(one_norm(R[:n, n:2 * n]))
        e2.append(one_norm(R[:n, 2 * n:]))
    return np.array(e1), np.array(e2)


NOISE_FLOOR = 1e-13


def fit_order(hs, errs, npts: int = 4, floor: float = NOISE_FLOOR, max_resid: float = 0.25) -> float:
    """Local order ``p`` from ``err ~ h^(p+1)`` over the smallest steps above ``floor``."""
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    keep = np.isfinite(errs) & (errs > floor)
    # once the error hits the floor, smaller steps only add noise
    if not keep.all():
        first_bad = int(np.argmin(keep)) if not keep[0] else int(np.flatnonzero(~keep)[0])
        keep[first_bad:] = False
    x, y = np.log2(hs[keep])[-npts:], np.log2(errs[keep])[-npts:]
    if x.size < 3:
        raise IllConditionedFitError(f"only {x.size} usable points above the noise floor")
    coef = np.polyfit(x, y, 1)
    resid = np.abs(np.polyval(coef, x) - y).max()
    if resid > max_resid:
        raise IllConditionedFitError(f"log-log residual {resid:.2f} exceeds {max_resid}")
    return float(coef[0] - 1)


@dataclass(frozen=True)
class OrderEstimate:
    scheme: str
    p1: float
    p2: float
    declared: tuple
    hs: tuple = field(repr=False, default=())

    def matches(self, tol: float = 0.25) -> bool:
        d = self.declared
        return abs(self.p1 - d[0]) <= tol and abs(self.p2 - d[1]) <= tol


def declared_pair(scheme) -> tuple:
    """``(p1, p2)`` from a declared order label; ``(6,6,4)`` reads as ``p1 = p2 = 6``."""
    return tuple(scheme.order[:2])


def empirical_order(scheme, seed: int = 0, hs=None, inner="exact") -> OrderEstimate:
    """Measured ``(p1, p2)`` of a catalog scheme (id or object)."""
    scheme = get_scheme(scheme) if isinstance(scheme, str) else scheme
    hs = 4.0 * 2.0 ** -np.arange(9) if hs is None else np.asarray(hs, float)
    e1, e2 = order_errors(scheme, hs, seed, inner)
    return OrderEstimate(scheme.id, fit_order(hs, e1), fit_order(hs, e2),
                         declared_pair(scheme), tuple(hs))


KERNEL_CONSTANTS = {
    **{f"r{2 * m}": float(Fraction(math.factorial(m) ** 2,
                                   math.factorial(2 * m) * math.factorial(2 * m + 1)))
       for m in PADE_KERNELS},
    "T16": 1 / math.factorial(17),
}


def _kernel_order(name):
    return 17 if name == "T16" else int(name[1:]) + 1


def kernel_error_slope(name: str, seed: int = 0, n: int = 8) -> float:
    """Log-log slope of ``|r(hX) - exp(hX)|`` for a skew-Hermitian ``X`` in double precision.

    The steps are placed where the leading error term ``c h^(2m+1)`` lies
    between 1e-10 and 1e-4.  For r26 this range is still far from the
    asymptotic regime; use :func:`scalar_error_slope` there.
    """
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = (H + H.conj().T) / 2
    lam, V = np.linalg.eigh(H)
    H, lam = H / np.abs(lam).max(), lam / np.abs(lam).max()
    q = _kernel_order(name)
    c = KERNEL_CONSTANTS[name]
    hs = np.geomspace((1e-10 / c) ** (1 / q), (1e-4 / c) ** (1 / q), 5)
    kernel = taylor_t16 if name == "T16" else (lambda X: pade(X, int(name[1:]) // 2))
    errs = []
    for h in hs:
        exact = (V * np.exp(1j * h * lam)) @ V.conj().T
        errs.append(one_norm(kernel(1j * h * H) - exact))
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def scalar_error_slope(name: str, hs=(0.02, 0.01), dps: int = 200) -> float:
    """Slope of ``|r(h) - e^h|`` in extended precision, from the kernels' own coefficients."""
    import mpmath

    with mpmath.workdps(dps):
        if name == "T16":
            def r(x):
                return mpmath.fsum(x**k / mpmath.factorial(k) for k in range(17))
        else:
            b = [mpmath.mpf(c.numerator) / c.denominator for c in pade_coefficients(int(name[1:]) // 2)]

            def r(x):
                return mpmath.polyval(b[::-1], x) / mpmath.polyval(b[::-1], -x)
        errs = [abs(r(mpmath.mpf(h)) - mpmath.exp(h)) for h in hs]
        slope = (mpmath.log(errs[-1]) - mpmath.log(errs[-2])) / (mpmath.log(hs[-1]) - mpmath.log(hs[-2]))
    return float(slope)


# ---------------------------------------------------------------------------
# qualitative curve checks


def _pick(records, **kw):
    return [r for r in records if all(getattr(r, k) == v for k, v in kw.items())]


def qualitative_checks(records, u: float = 1e-6) -> list[tuple[str, bool, str]]:
    """Shape checks on a sweep: ``(name, passed, detail)`` for each applicable check."""
    out = []
    exps = {r.experiment for r in records}
    if "longtime" in exps:
        small = _pick(records, experiment="longtime", eps=1e-3)
        for s in sorted({r.s for r in small})[:1]:
            st = _pick(small, scheme="strang+r2", s=s)
            r4 = _pick(small, scheme="r4", s=s)
            if st and r4:
                out.append(("strang+r2 beats r4 at eps=1e-3", st[0].error < r4[0].error,
                            f"s={s}: {st[0].error:.2e} vs {r4[0].error:.2e}"))
        for eps in sorted({r.eps for r in records if r.experiment == "longtime"}):
            st = sorted(_pick(records, experiment="longtime", scheme="strang+r2", eps=eps),
                        key=lambda r: r.s)
            errs = [r.error for r in st if np.isfinite(r.error)]
            if len(errs) > 2:
                out.append((f"strang error grows with s (eps={eps:g})", errs[-1] >= errs[0],
                            f"{errs[0]:.2e} -> {errs[-1]:.2e}"))
    for exp in exps & {"rotation", "rotation-large", "dissipation"}:
        for eps in sorted({r.eps for r in records if r.experiment == exp}):
            recs = _pick(records, experiment=exp, eps=eps)
            auto = [r for r in recs if r.scheme.startswith("auto:")]
            r10 = [r for r in recs if r.scheme == "r10" and np.isfinite(r.error)]
            if auto and r10:
                # on badly conditioned problems no method reaches u; compare
                # against r10 at the same or lower cost instead
                a = auto[0]
                peers = [r.error for r in r10 if r.cost <= a.cost]
                ok = a.error <= 10 * u or (peers and a.error <= min(peers))
                out.append((f"{exp} eps={eps:g}: automatic plan accurate", bool(ok),
                            f"{a.scheme} error {a.error:.2e} cost {a.cost}"))
            for sid in ("Yt0", "Yt2"):
                rows = sorted((r for r in recs if r.scheme == sid and np.isfinite(r.error)),
                              key=lambda r: r.s)
                tail = [r.error for r in rows if r.error > 1e-13]
                if len(tail) > 3:
                    out.append((f"{exp} eps={eps:g}: {sid} error decreases with squarings",
                                tail[-1] < tail[0], f"{tail[0]:.2e} -> {tail[-1]:.2e}"))
    return out


# ---------------------------------------------------------------------------
# matrix files

_KINDS = ("diagonal", "dense", "oscillator")


def _parse_entries(tokens):
    vals = []
    for tok in tokens:
        re_, _, im = tok.partition(",")
        vals.append(complex(float(re_), float(im) if im else 0.0))
    return np.array(vals, dtype=complex)


def read_matrix_file(path, eps: float | None = None) -> PerturbedMatrix:
    """Parse blocks ``n <dim> kind <kind>`` followed by ``re,im`` entries.

    The first block is ``D``; an optional second dense block is ``B``.  A file
    with a single dense block is split into its diagonal and off-diagonal
    parts.  ``oscillator`` blocks list the ``dim/2`` frequencies.
    """
    tokens = Path(path).read_text().split()
    blocks, i = [], 0
    while i < len(tokens):
        if tokens[i] != "n" or i + 3 >= len(tokens) or tokens[i + 2] != "kind":
            raise ValueError(f"{path}: expected 'n <dim> kind <kind>' at token {i}")
        dim, kind = int(tokens[i + 1]), tokens[i + 3]
        if kind not in _KINDS:
            raise ValueError(f"{path}: unknown kind {kind!r}; expected one of {_KINDS}")
        count = {"diagonal": dim, "dense": dim * dim, "oscillator": dim // 2}[kind]
        if kind == "oscillator" and dim % 2:
            raise DimensionMismatchError("oscillator blocks need an even dimension")
        vals = _parse_entries(tokens[i + 4:i + 4 + count])
        if vals.size != count:
            raise ValueError(f"{path}: block expects {count} entries, found {vals.size}")
        blocks.append((dim, kind, vals))
        i += 4 + count
    if not blocks or len(blocks) > 2:
        raise ValueError(f"{path}: expected one or two blocks, found {len(blocks)}")
    dim, kind, vals = blocks[0]
    if len(blocks) == 1 and kind == "dense":
        M = vals.reshape(dim, dim)
        return PerturbedMatrix(DiagonalOperator(np.diag(M)), M - np.diag(np.diag(M)),
                               1.0 if eps is None else eps)
    D = DiagonalOperator(vals) if kind == "diagonal" else (
        BlockOscillator(vals.real) if kind == "oscillator" else None)
    if D is None:
        raise ValueError(f"{path}: D must be diagonal or oscillator when B is given")
    if len(blocks) == 2:
        bdim, bkind, bvals = blocks[1]
        if bkind != "dense" or bdim != dim:
            raise ValueError(f"{path}: B must be a dense block of dimension {dim}")
        B = bvals.reshape(dim, dim)
    else:
        B = gen_perturbation(D)
    return PerturbedMatrix(D, B, 1.0 if eps is None else eps)


def _fmt(z):
    z = complex(z)
    return f"{z.real!r},{z.imag!r}"


def write_matrix_file(path, D, B=None) -> None:
    """Write ``D`` (diagonal or oscillator) and optionally a dense ``B``."""
    lines = []
    if isinstance(D, BlockOscillator):
        lines.append(f"n {D.dim} kind oscillator")
        lines.append(" ".join(_fmt(complex(w)) for w in D.omega))
    elif isinstance(D, DiagonalOperator):
        lines.append(f"n {D.dim} kind diagonal")
        lines.append(" ".join(_fmt(z) for z in D.diag))
    else:
        raise ValueError("only diagonal and oscillator operators can be written")
    if B is not None:
        B = np.asarray(B, dtype=complex)
        lines.append(f"n {B.shape[0]} kind dense")
        lines.extend(" ".join(_fmt(z) for z in row) for row in B)
    Path(path).write_text("\n".join(lines) + "\n")


import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitexpm.bench import (
    BUILTINS,
    CSV_COLUMNS,
    ExperimentConfig,
    OrderEstimate,
    ResultRecord,
    empirical_order,
    fit_order,
    gen_dissipation,
    gen_example2x2,
    gen_perturbation,
    gen_rotation,
    kernel_error_slope,
    perturbed_problem,
    qualitative_checks,
    read_csv,
    read_matrix_file,
    reference_expm,
    relative_error,
    run_experiment,
    scalar_error_slope,
    write_csv,
    write_matrix_file,
)
from splitexpm.errmodel import plan_for_scheme, pade_plan, run_plan
from splitexpm.errors import DimensionMismatchError, IllConditionedFitError
from splitexpm.matrixcore import BlockOscillator, CostTally, DiagonalOperator, one_norm


# generators

def test_rotation():
    D = gen_rotation()
    assert D.dim == 101
    assert D.diag[0] == -25j and D.diag[100] == 25j
    assert np.all(D.diag.real == 0)
    assert one_norm(gen_rotation(100.0).dense()) == 100 * one_norm(D.dense()) == 2500


def test_dissipation():
    D = gen_dissipation()
    assert D.dim == 61
    assert D.diag.max() - D.diag.min() == 30
    assert D.diag.sum() == 0


@pytest.mark.parametrize("make", [gen_rotation, gen_dissipation])
def test_perturbation(make):
    D = make()
    B = gen_perturbation(D, 0.1)
    np.testing.assert_array_equal(B, -B.T)
    assert np.all(np.diag(B) == 0)
    assert one_norm(B) / one_norm(D.dense()) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(ValueError):
        gen_perturbation(D, 0.0)


def test_example2x2_closed_form():
    _, exact = gen_example2x2(0.0)
    np.testing.assert_allclose(exact(0), [[math.cos(1), math.sin(1)], [-math.sin(1), math.cos(1)]],
                               atol=1e-15)
    P, exact = gen_example2x2(0.1)
    assert P.dense()[0, 1] == pytest.approx(1.1)
    for s in range(7):
        assert relative_error(exact(s), reference_expm(2.0**s * P.dense())) < 1e-12
    with pytest.raises(ValueError):
        gen_example2x2(0.8)


def test_example2x2_mu():
    _, exact = gen_example2x2(0.1)
    # trace of exp(A) is 2 cos(mu) with mu = sqrt(0.98)
    assert np.trace(exact(0)).real == pytest.approx(2 * math.cos(math.sqrt(0.98)), rel=1e-15)


def test_reference_oracle(rng):
    np.testing.assert_array_equal(reference_expm(np.zeros((3, 3))), np.eye(3))
    Q, _ = np.linalg.qr(rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10)))
    lam = rng.uniform(-3, 3, 10) + 1j * rng.uniform(-10, 10, 10)
    A = (Q * lam) @ Q.conj().T
    assert relative_error(reference_expm(A), (Q * np.exp(lam)) @ Q.conj().T) < 1e-13


# CSV

def test_csv_round_trip(tmp_path):
    recs = [ResultRecord("rotation", "Yt0", 1e-3, 5, 2.0**-5, 2.3e-7, Fraction(19, 3), 8.1e-7, 1.25),
            ResultRecord("rotation", "r10", 1e-3, 4, 2.0**-4, float("nan"), Fraction(25, 3), None, 0.0)]
    path = tmp_path / "out.csv"
    write_csv(recs, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(path)
    assert back[0] == recs[0]
    assert math.isnan(back[1].error) and back[1].cost == Fraction(25, 3)
    assert back[1].predicted_error is None


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-12, 1.0), err=st.floats(0, 1e3), s=st.integers(0, 60),
       num=st.integers(0, 1000), den=st.integers(1, 30))
def test_csv_row_property(eps, err, s, num, den):
    r = ResultRecord("dissipation", "Y2", eps, s, 2.0**-s, err, Fraction(num, den), err / 2, 0.5)
    assert ResultRecord.from_row(r.row()) == r


# experiments

def _strip(path):
    return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()]


def test_determinism(tmp_path):
    cfg = dict(eps_list=(1e-2,), schemes=("Yt0", "auto"), s_range=(2, 3))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(ExperimentConfig("dissipation", out=str(a), **cfg))
    run_experiment(ExperimentConfig("dissipation", out=str(b), **cfg))
    assert _strip(a) == _strip(b)


def test_record_cost_reproducible():
    from splitexpm.splitcat import get_scheme, run_scheme
    recs = run_experiment(ExperimentConfig("rotation", eps_list=(1e-3,), schemes=("Yt2",), s_range=(3,)))
    P = BUILTINS["rotation"](1e-3)
    rec = next(r for r in recs if r.scheme == "Yt2")
    t = CostTally()
    run_scheme(P, get_scheme("Yt2"), rec.h, rec.s, t, inner=2)
    assert t.dense_products == rec.cost


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nonsense")
    with pytest.raises(ValueError):
        ExperimentConfig("rotation", eps_list=(2.0,))
    with pytest.raises(ValueError):
        ExperimentConfig("rotation", s_range=(-1,))


def test_longtime_sweep_shape():
    recs = run_experiment(ExperimentConfig("longtime", eps_list=(1e-3,), s_range=(0, 10, 20, 30)))
    st_ = sorted((r for r in recs if r.scheme == "strang+r2"), key=lambda r: r.s)
    assert [r.cost for r in st_] == [Fraction(4, 3) + s for s in (0, 10, 20, 30)]
    # flat eps-dominated region followed by growth
    assert st_[-1].error > 10 * st_[0].error
    assert all(ok for _, ok, _ in qualitative_checks(recs))


def test_rotation_r10_superior_at_large_eps():
    P = BUILTINS["rotation"](1e-1)
    from splitexpm.errmodel import select_method
    assert select_method(P, 1e-6).method == "r10"


def test_rotation_yt1_saves_a_product():
    P = BUILTINS["rotation"](1e-3)
    plan, base = plan_for_scheme(P, "Yt1", 1e-6), pade_plan(P, 1e-6)
    assert base.predicted_cost - plan.predicted_cost >= 1
    assert relative_error(run_plan(P, plan), reference_expm(P.dense())) <= 1e-6


# order harness

@pytest.mark.parametrize("sid, pair", [("strang", (2, 2)), ("Y1", (4, 2)), ("Yt1", (6, 4))])
def test_empirical_order_examples(sid, pair):
    est = empirical_order(sid)
    assert abs(est.p1 - pair[0]) <= 0.25 and abs(est.p2 - pair[1]) <= 0.25
    assert est.matches()


def test_fit_order_exact_power():
    hs = 2.0 ** -np.arange(6)
    assert fit_order(hs, 3 * hs**5) == pytest.approx(4, abs=1e-12)


def test_fit_order_noise_floor():
    hs = 2.0 ** -np.arange(8)
    errs = np.maximum(hs**9, 1e-16)
    with pytest.raises(IllConditionedFitError):
        fit_order(hs[:4], errs[:4] * 0 + 1e-16)
    assert fit_order(hs, errs) == pytest.approx(8, abs=0.01)
    with pytest.raises(IllConditionedFitError):
        fit_order(hs[:5], np.array([1, 1e-3, 1, 1e-3, 1.0]))


def test_order_estimate_matches():
    assert OrderEstimate("x", 6.1, 3.8, (6, 4)).matches()
    assert not OrderEstimate("x", 6.1, 3.7, (6, 4)).matches()


@pytest.mark.parametrize("name, q", [("r2", 3), ("r4", 5), ("r10", 11), ("T16", 17)])
def test_kernel_slopes_double(name, q):
    assert abs(kernel_error_slope(name) - q) <= 0.3


@pytest.mark.parametrize("name, q", [("r2", 3), ("r4", 5), ("r10", 11), ("r26", 27), ("T16", 17)])
def test_kernel_slopes_extended(name, q):
    assert abs(scalar_error_slope(name) - q) <= 0.3


# matrix files

def test_matrix_file_round_trip(tmp_path, rng):
    D = DiagonalOperator(rng.standard_normal(4) + 1j * rng.standard_normal(4))
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    path = tmp_path / "m.txt"
    write_matrix_file(path, D, B)
    P = read_matrix_file(path, 0.01)
    np.testing.assert_array_equal(P.D.diag, D.diag)
    np.testing.assert_array_equal(P.B, B)
    assert P.eps == 0.01


def test_matrix_file_oscillator(tmp_path):
    path = tmp_path / "o.txt"
    write_matrix_file(path, BlockOscillator([1.0, 2.0]))
    P = read_matrix_file(path, 0.1)
    assert isinstance(P.D, BlockOscillator) and P.dim == 4
    assert one_norm(P.B) == pytest.approx(one_norm(P.D.dense()))


def test_matrix_file_single_dense(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("n 2 kind dense\n1,0 2,0\n3,0 4,0\n")
    P = read_matrix_file(path)
    np.testing.assert_array_equal(P.dense(), [[1, 2], [3, 4]])


@pytest.mark.parametrize("text, exc", [
    ("n 2 kind weird\n1 2", ValueError),
    ("n 2 kind diagonal\n1", ValueError),
    ("m 2 kind diagonal\n1 2", ValueError),
    ("n 3 kind oscillator\n1", DimensionMismatchError),
    ("n 2 kind diagonal\n1 2\nn 3 kind dense\n" + "1 " * 9, ValueError),
])
def test_matrix_file_errors(tmp_path, text, exc):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(exc):
        read_matrix_file(path)

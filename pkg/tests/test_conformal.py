
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evdp.conformal import (CalibrationScores, PrivateLevelEValues, ScoreQuantizer, exch_evalue,
                            exch_sensitivity, include_matrix, laplace_defined, predict_set,
                            privatize_levels)
from evdp.errors import DomainError, MechanismUndefined
from evdp.privacy import BudgetLedger, RenyiBudget


def fixed_levels(values, lo=1.0, hi=100.0):
    q = ScoreQuantizer(len(values), lo, hi)
    return PrivateLevelEValues(q, np.log(values), None, BudgetLedger(2.0), "fixed")


def test_quantizer():
    q = ScoreQuantizer(4, 1, 5)
    assert np.allclose(q.centers, [1.5, 2.5, 3.5, 4.5])
    assert q.a == 1.5 and q.b == 4.5
    assert list(q.index([1, 2, 2.0000001, 5])) == [0, 0, 1, 3]
    with pytest.raises(DomainError, match="score 1"):
        q.index([2, 6])
    with pytest.raises(DomainError):
        ScoreQuantizer(0, 1, 5)
    with pytest.raises(DomainError):
        ScoreQuantizer(3, 0, 5)


def test_exch_examples():
    assert exch_evalue(CalibrationScores([4.0] * 7), 4.0).value == pytest.approx(1.0)
    assert exch_evalue(CalibrationScores([1, 2, 3]), 3).value == pytest.approx(12 / 9)
    assert exch_evalue(CalibrationScores([3, 3, 3]), 1e-9).value < 1e-8
    with pytest.raises(DomainError):
        exch_evalue(CalibrationScores([1, 2]), 0.0)


@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=30), st.floats(0.1, 100),
       st.floats(0.1, 100))
def test_exch_increasing(cal, s1, s2):
    c = CalibrationScores(cal)
    lo, hi = sorted((s1, s2))
    assert exch_evalue(c, lo).log_value <= exch_evalue(c, hi).log_value
    assert 0 < exch_evalue(c, hi).value < c.n + 1


def test_sensitivity_examples():
    assert exch_sensitivity(1, 100, 9).value == pytest.approx(20.0)
    assert exch_sensitivity(3, 3, 4).value == pytest.approx(0.4)
    assert exch_sensitivity(1, 100, 9999).value == pytest.approx(0.02)
    with pytest.raises(DomainError):
        exch_sensitivity(0, 1, 3)


@given(st.lists(st.floats(1, 50), min_size=2, max_size=40), st.floats(1, 50), st.floats(1, 50),
       st.data())
def test_neighbour_gap_within_bound(cal, extra, s, data):
    n = len(cal)
    bound = exch_sensitivity(1, 50, n).value
    base = exch_evalue(CalibrationScores(cal), s).log_value
    added = exch_evalue(CalibrationScores(cal + [extra]), s).log_value
    i = data.draw(st.integers(0, n - 1))
    removed = exch_evalue(CalibrationScores(cal[:i] + cal[i + 1:]), s).log_value
    assert abs(added - base) <= bound * (1 + 1e-12)
    assert abs(removed - base) <= bound * (1 + 1e-12)


def test_single_bin_uses_whole_budget():
    q = ScoreQuantizer(1, 1, 100)
    cal = CalibrationScores.from_raw(np.full(5000, 50.0), q)
    lv = privatize_levels(cal, q, RenyiBudget(2.0, 0.3), "gaussian", np.random.default_rng(0))
    assert lv.level_budget == RenyiBudget(2.0, 0.3) and lv.ledger.spent == 0.3


def test_ledger_exact_for_many_bins():
    q = ScoreQuantizer(500, 1, 100)
    cal = CalibrationScores(np.full(10**6, q.centers[-1]))
    lv = privatize_levels(cal, q, RenyiBudget(2.0, 0.5), "gaussian", np.random.default_rng(0))
    assert len(lv.ledger) == 500 and abs(lv.ledger.spent - 0.5) <= 500 * 0.5 * 2.3e-16


def test_identity_levels_equal_exch():
    q = ScoreQuantizer(20, 1, 100)
    cal = CalibrationScores.from_raw(np.random.default_rng(1).uniform(1, 100, 300), q)
    lv = privatize_levels(cal, q, RenyiBudget(2.0, 1.0), "identity", np.random.default_rng(0))
    expect = [exch_evalue(cal, float(s)).log_value for s in q.centers]
    assert np.array_equal(lv.log_values, expect)
    assert len(lv.ledger) == 0


def test_laplace_undefined_suggests_gaussian():
    q = ScoreQuantizer(500, 1, 100)
    cal = CalibrationScores.from_raw(np.full(1000, 10.0), q)
    assert not laplace_defined(q, 1000, RenyiBudget(2.0, 1.0))
    with pytest.raises(MechanismUndefined, match="Gaussian"):
        privatize_levels(cal, q, RenyiBudget(2.0, 1.0), "laplace", np.random.default_rng(0))


def test_predict_set_examples():
    lv = fixed_levels([0.5, 0.5])
    assert predict_set(lv, [("a", 10.0), ("b", 90.0)], 0.05).size == 2
    lv = fixed_levels([25.0, 10.0])
    ps = predict_set(lv, [("a", 10.0), ("b", 90.0)], 0.05)
    assert ps.labels == ("b",) and not ps.was_empty
    lv = fixed_levels([25.0, 30.0])
    ps = predict_set(lv, [("a", 10.0), ("b", 90.0)], 0.05, empty_to_singleton=True)
    assert ps.labels == ("a",) and ps.was_empty
    assert predict_set(lv, [("a", 10.0)], 0.05).size == 0


def test_threshold_is_strict():
    lv = fixed_levels([20.0, 19.999])
    assert predict_set(lv, [("a", 10.0), ("b", 90.0)], 0.05).labels == ("b",)


def test_candidate_out_of_range_index():
    with pytest.raises(DomainError, match="score 1"):
        predict_set(fixed_levels([1.0, 1.0]), [("a", 10.0), ("b", 500.0)], 0.1)


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_include_matrix_matches_predict_set(seed, fix):
    rng = np.random.default_rng(seed)
    q = ScoreQuantizer(10, 1, 100)
    lv = PrivateLevelEValues(q, rng.normal(1.5, 2, 10), None, BudgetLedger(2.0), "fixed")
    scores = rng.uniform(1, 100, (6, 3))
    inc, empty = include_matrix(lv, scores, 0.1, fix)
    for i in range(6):
        ps = predict_set(lv, [(j, scores[i, j]) for j in range(3)], 0.1, fix)
        assert set(ps.labels) == set(np.flatnonzero(inc[i]))
        assert ps.was_empty == empty[i]


def test_noise_drawn_once_per_release():
    q = ScoreQuantizer(10, 1, 100)
    cal = CalibrationScores.from_raw(np.random.default_rng(1).uniform(1, 100, 500), q)
    lv = privatize_levels(cal, q, RenyiBudget(2.0, 1.0), "gaussian", np.random.default_rng(3))
    a = predict_set(lv, [(0, 55.0)], 0.1)
    b = predict_set(lv, [(0, 55.0)], 0.1)
    assert a == b

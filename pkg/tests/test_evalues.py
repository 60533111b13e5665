import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evdp.errors import BudgetMismatch, DomainError
from evdp.evalues import (EValue, PrivateEValue, average, continue_product, e_to_p,
                          growth_penalty, privatize)
from evdp.mechanisms import (GaussianNoiseSpec, IdentityNoise, calibrate_gaussian_rdp,
                             calibrate_laplace_rdp, sample_noise)
from evdp.privacy import ApproxDPBudget, RenyiBudget

B = RenyiBudget(2.0, 0.5)
GAUSS = calibrate_gaussian_rdp(0.1, B)


def rel(v, budget=B):
    return PrivateEValue(math.log(v) if v > 0 else -math.inf, budget, "test")


def test_evalue_domain():
    assert EValue.of(0).value == 0.0
    for bad in (-1.0, math.inf, math.nan):
        with pytest.raises(DomainError):
            EValue.of(bad)
    with pytest.raises(DomainError):
        EValue(math.inf)


def test_privatize_examples():
    rng = np.random.default_rng(0)
    assert privatize(0.0, GAUSS, rng).value == 0.0
    assert privatize(2.5, IdentityNoise(B), rng).value == pytest.approx(2.5, rel=1e-15)
    a = privatize(1.0, GAUSS, np.random.default_rng(11))
    xi = sample_noise(GAUSS, np.random.default_rng(11))
    assert a.log_value == -xi and a.budget == B
    assert privatize(1.0, GAUSS, np.random.default_rng(11)) == a


def test_privatize_rejects_uncalibrated():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        privatize(1.0, GaussianNoiseSpec(0.01, 0.02), rng)
    with pytest.raises(DomainError):
        privatize(1.0, GaussianNoiseSpec(0.0, 0.02, B), rng)


@given(st.floats(-50, 50), st.integers(1, 10**6), st.integers(0, 2**32 - 1))
def test_growth_identity(log_e, n, seed):
    xi = sample_noise(GAUSS, np.random.default_rng(seed))
    pe = privatize(EValue(log_e), GAUSS, np.random.default_rng(seed))
    assert pe.log_value / n == (log_e - xi) / n


def test_privatize_mc_validity():
    lap = calibrate_laplace_rdp(0.1, RenyiBudget(2.0, 1.0))
    for spec in (GAUSS, lap):
        v = np.exp(-sample_noise(spec, np.random.default_rng(5), size=10**6)) * 3.0
        assert v.mean() <= 3.0 * (1 + 4 * v.std(ddof=1) / 3.0 / 1e3)


def test_product_examples():
    p = continue_product(rel(2.0), rel(3.0))
    assert p.value == pytest.approx(6.0) and p.budget == B
    assert continue_product(rel(7.0), rel(1.0)).value == pytest.approx(7.0)
    folded = reduce(continue_product, [rel(1.5), rel(2.0), rel(8.0)])
    assert folded.value == pytest.approx(24.0)
    assert folded.lineage.count("product[independent]") == 2
    with pytest.raises(BudgetMismatch):
        continue_product(rel(2.0), rel(3.0, RenyiBudget(2.0, 0.6)))
    with pytest.raises(BudgetMismatch):
        continue_product(rel(2.0), rel(3.0, RenyiBudget(3.0, 0.5)))


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=12), st.randoms())
def test_product_commutative_associative(logs, rnd):
    vals = [PrivateEValue(x, B, "t") for x in logs]
    a = reduce(continue_product, vals)
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    b = reduce(continue_product, shuffled)
    assert a.log_value == pytest.approx(b.log_value, abs=1e-12)
    assert len(a.lineage) == len(vals) - 1


def test_average_examples():
    ind = average(rel(2.0), rel(4.0), 0.5, same_data=False)
    assert ind.value == pytest.approx(3.0) and ind.budget == B
    same = average(rel(2.0), rel(4.0), 0.5, same_data=True)
    assert same.value == pytest.approx(3.0) and same.budget == RenyiBudget(2.0, 1.0)
    assert average(rel(2.0), rel(4.0), 1.0, False).value == pytest.approx(2.0)
    with pytest.raises(BudgetMismatch):
        average(rel(2.0), rel(4.0, RenyiBudget(3.0, 0.5)), 0.5, False)
    with pytest.raises(DomainError):
        average(rel(2.0), rel(4.0), 1.5, False)


def test_average_approx_dp_doubles_both():
    b = ApproxDPBudget(1.0, 1e-5)
    out = average(rel(1.0, b), rel(2.0, b), 0.3, same_data=True)
    assert out.budget == ApproxDPBudget(2.0, 2e-5)


@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0, 1))
def test_average_between_inputs(x, y, eta):
    out = average(PrivateEValue(x, B, "t"), PrivateEValue(y, B, "t"), eta, False)
    assert min(x, y) <= out.log_value <= max(x, y)


def test_e_to_p_examples():
    assert e_to_p(rel(20.0)).value == pytest.approx(0.05)
    assert e_to_p(rel(0.5)).value == 1.0
    assert e_to_p(rel(0.0)).value == 1.0


@given(st.floats(0, 700), st.floats(0, 700))
def test_e_to_p_monotone(a, b):
    lo, hi = sorted((a, b))
    assert e_to_p(EValue(hi)).value <= e_to_p(EValue(lo)).value


def test_growth_penalty_examples():
    assert growth_penalty(GAUSS, 100) == pytest.approx(1e-4)
    assert growth_penalty(IdentityNoise(), 7) == 0.0
    lap = calibrate_laplace_rdp(0.1, RenyiBudget(2.0, 1.0))
    assert growth_penalty(lap, 1) == pytest.approx(0.00513, abs=1e-3)
    with pytest.raises(DomainError):
        growth_penalty(GAUSS, 0)

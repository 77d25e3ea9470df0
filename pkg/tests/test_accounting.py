
import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resplan.accounting import (PrivacyAccount, approx_dp_delta, calibrate_budget, guarantees,
                                normal_cdf)

mpmath.mp.dps = 50


def delta_oracle(pcost, eps):
    mu = mpmath.sqrt(pcost)
    return mpmath.ncdf(mu / 2 - eps / mu) - mpmath.exp(eps) * mpmath.ncdf(-mu / 2 - eps / mu)


def test_guarantees():
    assert guarantees(1.0) == (0.5, 1.0)
    assert guarantees(4.0)[1] == 2.0
    assert guarantees(0.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        guarantees(-1.0)


@pytest.mark.parametrize("x", [-30, -8.5, -3, -0.5, 0, 0.5, 2, 7])
def test_normal_cdf(x):
    want = mpmath.ncdf(x)
    assert abs(normal_cdf(x) - float(want)) <= 1e-12 * max(1.0, float(want)) + 1e-300


def test_delta_at_zero_epsilon():
    assert approx_dp_delta(1.0, 0.0) == pytest.approx(float(mpmath.ncdf(0.5) - mpmath.ncdf(-0.5)), abs=1e-12)
    assert approx_dp_delta(1.0, 0.0) == pytest.approx(0.38292, abs=1e-5)


def test_delta_zero_cost():
    assert approx_dp_delta(0.0, 0.0) == 0.0
    assert approx_dp_delta(0.0, 1.0) == 0.0


def test_delta_large_epsilon():
    assert approx_dp_delta(1.0, 1000.0) == 0.0


@given(st.floats(0.01, 50), st.floats(0, 20))
def test_delta_matches_oracle(pcost, eps):
    assert approx_dp_delta(pcost, eps) == pytest.approx(float(delta_oracle(pcost, eps)), abs=1e-12)


def test_delta_monotone():
    grid = [0.05 * k for k in range(1, 101)]
    for eps in (0.0, 0.5, 1.0, 3.0):
        ds = [approx_dp_delta(c, eps) for c in grid]
        assert all(a < b for a, b in zip(ds, ds[1:]))
    es = [0.1 * k for k in range(100)]
    ds = [approx_dp_delta(1.0, e) for e in es]
    assert all(a >= b for a, b in zip(ds, ds[1:]))
    assert approx_dp_delta(1.0, 1.0) < approx_dp_delta(2.0, 1.0)


def test_calibrate_simple():
    assert calibrate_budget(rho=0.5) == 1.0
    assert calibrate_budget(mu=1.0) == 1.0
    with pytest.raises(ValueError):
        calibrate_budget(rho=0.5, mu=1.0)
    with pytest.raises(ValueError):
        calibrate_budget()
    with pytest.raises(ValueError):
        calibrate_budget(epsilon=1.0)
    with pytest.raises(ValueError):
        calibrate_budget(epsilon=1.0, delta=1.5)


@given(st.floats(1e-6, 1e6))
def test_roundtrip_guarantees(pcost):
    rho, mu = guarantees(pcost)
    assert calibrate_budget(rho=rho) == pytest.approx(pcost, rel=1e-15)
    assert calibrate_budget(mu=mu) == pytest.approx(pcost, rel=1e-15)


@given(st.floats(0.0, 10.0), st.floats(1e-12, 0.5))
def test_roundtrip_eps_delta(eps, delta):
    c = calibrate_budget(epsilon=eps, delta=delta)
    assert approx_dp_delta(c, eps) == pytest.approx(delta, rel=1e-9, abs=1e-15)


def test_account():
    a = PrivacyAccount(1.0)
    assert (a.rho, a.mu) == (0.5, 1.0)
    assert a.delta(0.0) == approx_dp_delta(1.0, 0.0)
    with pytest.raises(ValueError):
        PrivacyAccount(-0.1)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfprice.errors import ContractError, DegenerateInputError, DomainError
from cfprice.numerics import (
    MarketState,
    OptionContract,
    Volatility,
    d1_d2,
    norm_cdf,
    norm_pdf,
    payoff,
)

from reference import D1_D2_100_90, PDF_AT_ONE, quad_norm_cdf

finite = st.floats(min_value=-40, max_value=40, allow_nan=False)


def test_pdf_values():
    assert norm_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-16)
    assert norm_pdf(1.0) == pytest.approx(PDF_AT_ONE, abs=1e-16)


@given(finite)
def test_pdf_symmetric_positive(x):
    assert norm_pdf(x) == norm_pdf(-x)
    if abs(x) < 35:
        assert norm_pdf(x) > 0


def test_cdf_values():
    assert norm_cdf(0.0) == 0.5
    # 1.959963985 is not the exact 97.5% quantile; the quadrature oracle knows
    assert norm_cdf(1.959963985) == pytest.approx(quad_norm_cdf(1.959963985), abs=1e-12)
    assert norm_cdf(1.959963985) == pytest.approx(0.975, abs=1e-10)


@pytest.mark.parametrize("x", [-8.0, -5.0, -2.5, -1.0, -0.1, 0.3, 1.0, 2.0, 4.0, 7.5])
def test_cdf_against_quadrature(x):
    assert abs(norm_cdf(x) - quad_norm_cdf(x)) <= 1e-12


@given(finite)
def test_cdf_reflection(x):
    assert abs(norm_cdf(x) + norm_cdf(-x) - 1.0) <= 1e-14


@given(finite, finite)
def test_cdf_monotone(x, y):
    lo, hi = min(x, y), max(x, y)
    assert norm_cdf(lo) <= norm_cdf(hi)


@given(st.floats(min_value=-8, max_value=8))
def test_cdf_derivative_is_pdf(x):
    h = 1e-5
    fd = (norm_cdf(x + h) - norm_cdf(x - h)) / (2 * h)
    # O(h^2) truncation plus ~eps/h rounding
    assert fd == pytest.approx(norm_pdf(x), abs=1e-10)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_nonfinite_rejected(bad):
    with pytest.raises(DomainError):
        norm_cdf(bad)
    with pytest.raises(DomainError):
        norm_pdf(bad)


def test_array_input():
    x = np.array([-1.0, 0.0, 1.0])
    out = norm_cdf(x)
    assert isinstance(out, np.ndarray)
    assert out[1] == 0.5


def test_payoff_definition():
    call = OptionContract(100.0, 1.0, "call")
    put = OptionContract(100.0, 1.0, "put")
    assert payoff(call, 110.0) == 10.0
    assert payoff(put, 110.0) == 0.0
    assert payoff(call, 100.0) == 0.0
    with pytest.raises(DomainError):
        payoff(call, 0.0)


@given(st.floats(min_value=1e-3, max_value=1e4), st.floats(min_value=1e-2, max_value=1e4))
def test_payoff_parity(spot, strike):
    call = OptionContract(strike, 1.0, "call")
    put = OptionContract(strike, 1.0, "put")
    assert payoff(call, spot) >= 0 and payoff(put, spot) >= 0
    assert payoff(call, spot) - payoff(put, spot) == pytest.approx(spot - strike, abs=1e-9)


def test_d1_d2_atm():
    d1, d2 = d1_d2(100.0, 100.0, 0.0, 0.2, 1.0)
    assert d1 == pytest.approx(0.1, abs=1e-15)
    assert d2 == pytest.approx(-0.1, abs=1e-15)


def test_d1_d2_itm():
    d1, d2 = d1_d2(100.0, 90.0, 0.05, 0.2, 0.5)
    assert d1 == pytest.approx(D1_D2_100_90[0], abs=1e-14)
    assert d2 == pytest.approx(D1_D2_100_90[1], abs=1e-14)


@given(st.floats(0.0, 0.2), st.floats(0.01, 1.5), st.floats(0.01, 10))
def test_d1_minus_d2(rate, sigma, tau):
    d1, d2 = d1_d2(50.0, 50.0, rate, sigma, tau)
    assert d1 - d2 == pytest.approx(sigma * math.sqrt(tau), rel=1e-12)


@pytest.mark.parametrize("sigma,tau", [(0.0, 1.0), (0.2, 0.0), (-0.1, 1.0), (0.2, -1.0)])
def test_d1_d2_degenerate(sigma, tau):
    with pytest.raises(DegenerateInputError):
        d1_d2(100.0, 100.0, 0.05, sigma, tau)


def test_contract_validation():
    with pytest.raises(ContractError):
        OptionContract(0.0, 1.0)
    with pytest.raises(ContractError):
        OptionContract(100.0, -1.0)
    with pytest.raises(ContractError):
        OptionContract(100.0, 1.0, "straddle")
    with pytest.raises(ContractError):
        OptionContract(100.0, 1.0, "put", "bermudan")
    with pytest.raises(ContractError):
        OptionContract(100.0, 1.0, "put", "bermudan", first_exercise=1.5)
    with pytest.raises(ContractError):
        OptionContract(100.0, 1.0, "put", "american", first_exercise=0.5)
    OptionContract(100.0, 1.0, "put", "bermudan", first_exercise=1.0)


def test_market_validation():
    with pytest.raises(DomainError):
        MarketState(0.0, 0.05)
    with pytest.raises(DomainError):
        MarketState(100.0, 0.05, now=-0.1)
    with pytest.raises(DomainError):
        MarketState(100.0, 0.05, now=2.0).tau(OptionContract(100.0, 1.0))
    with pytest.raises(DomainError):
        Volatility(-0.2)

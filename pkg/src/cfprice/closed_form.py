"""Closed-form prices.

Every price is reported as ``premium_factor * base_price`` where ``base_price``
is a Black-Scholes European value and ``premium_factor`` is an exponential
multiplier:

* European:          factor 1
* American (call/put) with consumption constant ``psi``:
                     factor ``exp(psi * (1 - r) * (T - t))``
* Bermudan put with constant ``delta`` and first exercise date ``T_hat``:
                     factor ``exp(delta * (exp(r * (T_hat - t)) - 1) * (1 - r) * T)``
                     and the base is the European put over the full horizon
                     ``T`` (not ``T - t``), exactly as the formula is written.
* Stochastic-volatility call: Black-Scholes with the volatility component
  ``beta`` in place of ``sigma``; factor 1.

The American prices solve the generalized pricing PDE
``C_t + r S C_S + 0.5 sigma^2 S^2 C_SS - alpha C = 0`` with
``alpha = r - psi (1 - r)``; ``ClosedFormSurface`` exposes the price together
with its analytic partial derivatives so that claim can be checked to
machine precision (see ``cfprice.pde_verify``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, ParameterError
from .numerics import (
    AMERICAN,
    BERMUDAN,
    CALL,
    PUT,
    MarketState,
    OptionContract,
    Volatility,
    d1_d2,
    norm_cdf,
    norm_pdf,
    payoff,
)


@dataclass(frozen=True)
class ConsumptionParams:
    """Consumption-premium constant ``psi``.

    Consumption enters the pricing PDE only through ``c = psi * C``, so
    ``psi`` is the sole model input.
    """

    psi: float

    def __post_init__(self):
        if not math.isfinite(self.psi):
            raise ParameterError("psi must be finite")

    def alpha(self, rate: float) -> float:
        return rate - self.psi * (1.0 - rate)

    def premium_rate(self, rate: float) -> float:
        return self.psi * (1.0 - rate)


@dataclass(frozen=True)
class BermudanParams:
    delta: float

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise ParameterError("delta must be finite")


@dataclass(frozen=True)
class OmegaSpec:
    """Zero-mean distribution for the perturbation multiplier omega.

    ``rademacher``: +1/-1 with equal probability.
    ``uniform``: uniform on ``[-half_width, half_width]``.
    """

    kind: str = "rademacher"
    half_width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "uniform"):
            raise ParameterError(f"unknown omega distribution {self.kind!r}")
        if not (math.isfinite(self.half_width) and self.half_width > 0.0):
            raise ParameterError("half_width must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=n) - 1.0
        return rng.uniform(-self.half_width, self.half_width, size=n)

    @property
    def variance(self) -> float:
        if self.kind == "rademacher":
            return 1.0
        return self.half_width ** 2 / 3.0


@dataclass(frozen=True)
class StochVolParams:
    """Parameters of the perturbed asset dynamics.

    Only ``beta`` enters the closed-form call. ``mu``, ``lam`` and ``omega``
    drive the path simulator in ``cfprice.oracles``.
    """

    beta: float
    mu: float = 0.0
    lam: float = 0.0
    omega: OmegaSpec = field(default_factory=OmegaSpec)

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not (math.isfinite(self.mu) and math.isfinite(self.lam)):
            raise ParameterError("mu and lam must be finite")


@dataclass(frozen=True)
class PriceResult:
    premium_factor: float
    base_price: float
    formula: str = "bs"
    contract: Optional[OptionContract] = None
    market: Optional[MarketState] = None
    price: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "price", self.premium_factor * self.base_price)

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "premium_factor": self.premium_factor,
            "base_price": self.base_price,
            "formula": self.formula,
        }


def european_value(kind, spot, strike, rate, sigma, tau):
    """Black-Scholes value with explicit tau == 0 and sigma == 0 limits.

    Array inputs are supported on the regular branch (tau > 0, sigma > 0).
    """
    if np.ndim(tau) == 0 and tau == 0.0:
        return payoff(OptionContract(strike=strike, maturity=0.0, kind=kind), spot)
    disc_strike = strike * np.exp(-rate * tau)
    if np.ndim(sigma) == 0 and sigma == 0.0:
        if kind == CALL:
            return float(np.maximum(spot - disc_strike, 0.0))
        return float(np.maximum(disc_strike - spot, 0.0))
    d1, d2 = d1_d2(spot, strike, rate, sigma, tau)
    if kind == CALL:
        return spot * norm_cdf(d1) - disc_strike * norm_cdf(d2)
    return disc_strike * norm_cdf(-d2) - spot * norm_cdf(-d1)


def _require_kind(contract: OptionContract, kind: str) -> None:
    if contract.kind != kind:
        raise ContractError(f"expected a {kind} contract, got {contract.kind}")


def _require_style(contract: OptionContract, style: str) -> None:
    if contract.style != style:
        raise ContractError(f"expected {style} style, got {contract.style}")


def _bs(market, contract, vol, formula="bs") -> PriceResult:
    tau = market.tau(contract)
    base = european_value(
        contract.kind, market.spot, contract.strike, market.rate, vol.sigma, tau
    )
    return PriceResult(1.0, float(base), formula, contract, market)


def bs_call(market: MarketState, contract: OptionContract, vol: Volatility) -> PriceResult:
    _require_kind(contract, CALL)
    return _bs(market, contract, vol)


def bs_put(market: MarketState, contract: OptionContract, vol: Volatility) -> PriceResult:
    _require_kind(contract, PUT)
    return _bs(market, contract, vol)


def _american(market, contract, vol, params, kind, formula) -> PriceResult:
    _require_kind(contract, kind)
    _require_style(contract, AMERICAN)
    tau = market.tau(contract)
    factor = math.exp(params.premium_rate(market.rate) * tau)
    base = european_value(kind, market.spot, contract.strike, market.rate, vol.sigma, tau)
    return PriceResult(factor, float(base), formula, contract, market)


def american_call(
    market: MarketState,
    contract: OptionContract,
    vol: Volatility,
    params: ConsumptionParams,
) -> PriceResult:
    return _american(market, contract, vol, params, CALL, "eq3")


def american_put(
    market: MarketState,
    contract: OptionContract,
    vol: Volatility,
    params: ConsumptionParams,
) -> PriceResult:
    return _american(market, contract, vol, params, PUT, "eq4")


def bermudan_factor(delta: float, rate: float, first_exercise: float, now: float,
                    maturity: float) -> float:
    return math.exp(
        delta * math.expm1(rate * (first_exercise - now)) * (1.0 - rate) * maturity
    )


def bermudan_put(
    market: MarketState,
    contract: OptionContract,
    vol: Volatility,
    params: BermudanParams,
) -> PriceResult:
    """Bermudan put.

    The horizon ``T`` appears bare in the discount, the ``d`` terms and the
    exponent tail; valuation time ``t`` enters only through
    ``exp(r (T_hat - t)) - 1``. At ``t = 0`` this is the ordinary reading.
    """
    _require_kind(contract, PUT)
    _require_style(contract, BERMUDAN)
    t_hat = contract.first_exercise
    if not market.now <= t_hat <= contract.maturity:
        raise ParameterError(
            f"first exercise date {t_hat} outside [{market.now}, {contract.maturity}]"
        )
    factor = bermudan_factor(
        params.delta, market.rate, t_hat, market.now, contract.maturity
    )
    base = european_value(
        PUT, market.spot, contract.strike, market.rate, vol.sigma, contract.maturity
    )
    return PriceResult(factor, float(base), "eq5", contract, market)


def stochvol_call(
    market: MarketState, contract: OptionContract, params: StochVolParams
) -> PriceResult:
    # sqrt(beta^2 tau) == beta sqrt(tau) for beta > 0; reuse the BS kernel so
    # beta == sigma reproduces bs_call bit for bit
    _require_kind(contract, CALL)
    tau = market.tau(contract)
    base = european_value(CALL, market.spot, contract.strike, market.rate, params.beta, tau)
    return PriceResult(1.0, float(base), "eq7", contract, market)


class ClosedFormSurface:
    """Price ``C(t, S) = exp(g (T - t)) * BS(t, S)`` as a function of (t, S).

    ``g`` is the premium growth rate ``psi (1 - r)``; ``g = 0`` gives plain
    Black-Scholes. Accepts numpy arrays; only valid for ``t < T``.
    """

    def __init__(self, kind: str, strike: float, maturity: float, rate: float,
                 sigma: float, premium_rate: float = 0.0):
        if kind not in (CALL, PUT):
            raise ContractError(f"unknown option kind {kind!r}")
        if sigma <= 0.0:
            raise ParameterError("surface needs sigma > 0")
        self.kind = kind
        self.strike = strike
        self.maturity = maturity
        self.rate = rate
        self.sigma = sigma
        self.premium_rate = premium_rate

    def __call__(self, t, S):
        tau = self.maturity - np.asarray(t, dtype=float)
        factor = np.exp(self.premium_rate * tau)
        return factor * european_value(
            self.kind, S, self.strike, self.rate, self.sigma, tau
        )

    def partials(self, t, S):
        """Return ``(C, C_t, C_S, C_SS)`` from the analytic Greeks."""
        t = np.asarray(t, dtype=float)
        S = np.asarray(S, dtype=float)
        tau = self.maturity - t
        K, r, v = self.strike, self.rate, self.sigma
        d1, d2 = d1_d2(S, K, r, v, tau)
        sqrt_tau = np.sqrt(tau)
        disc_k = K * np.exp(-r * tau)
        pdf1 = norm_pdf(d1)
        if self.kind == CALL:
            base = S * norm_cdf(d1) - disc_k * norm_cdf(d2)
            delta = norm_cdf(d1)
            base_t = -S * pdf1 * v / (2.0 * sqrt_tau) - r * disc_k * norm_cdf(d2)
        else:
            base = disc_k * norm_cdf(-d2) - S * norm_cdf(-d1)
            delta = norm_cdf(d1) - 1.0
            base_t = -S * pdf1 * v / (2.0 * sqrt_tau) + r * disc_k * norm_cdf(-d2)
        gamma = pdf1 / (S * v * sqrt_tau)
        factor = np.exp(self.premium_rate * tau)
        value = factor * base
        value_t = factor * base_t - self.premium_rate * value
        return value, value_t, factor * delta, factor * gamma


def american_surface(contract: OptionContract, vol: Volatility, rate: float,
                     params: ConsumptionParams) -> ClosedFormSurface:
    return ClosedFormSurface(contract.kind, contract.strike, contract.maturity, rate,
                             vol.sigma, params.premium_rate(rate))


def european_surface(contract: OptionContract, vol: Volatility,
                     rate: float) -> ClosedFormSurface:
    return ClosedFormSurface(contract.kind, contract.strike, contract.maturity, rate,
                             vol.sigma)

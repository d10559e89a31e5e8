"""Scalar building blocks shared by every pricer: the standard normal
density/distribution, vanilla payoffs, the Black-Scholes ``d1``/``d2`` pair and
the contract / market / volatility value types.

The functions accept floats or numpy arrays. A float in gives a float out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ContractError, DegenerateInputError, DomainError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

CALL = "call"
PUT = "put"
EUROPEAN = "european"
AMERICAN = "american"
BERMUDAN = "bermudan"


def _as_float_or_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"non-finite input: {x!r}")
    return arr


def _unwrap(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def norm_pdf(x):
    arr = _as_float_or_array(x)
    return _unwrap(np.exp(-0.5 * arr * arr) * INV_SQRT_2PI)


def norm_cdf(x):
    """Standard normal CDF.

    Backed by the Cephes ``ndtr`` routine (erf/erfc rational approximations),
    whose absolute error is at the level of double rounding, comfortably
    inside 1e-12 everywhere on the real line.
    """
    arr = _as_float_or_array(x)
    return _unwrap(ndtr(arr))


def payoff(contract: "OptionContract", spot):
    s = _as_float_or_array(spot)
    if np.any(s <= 0.0):
        raise DomainError(f"spot must be positive, got {spot!r}")
    if contract.kind == CALL:
        out = np.maximum(s - contract.strike, 0.0)
    else:
        out = np.maximum(contract.strike - s, 0.0)
    return _unwrap(out)


def d1_d2(spot, strike, rate, sigma, tau):
    """Return ``(d1, d2)`` for the lognormal model.

    ``tau`` and ``sigma`` must be strictly positive; the tau -> 0 and
    sigma -> 0 limits are handled by the callers.
    """
    s = _as_float_or_array(spot)
    k = _as_float_or_array(strike)
    r = _as_float_or_array(rate)
    v = _as_float_or_array(sigma)
    tt = _as_float_or_array(tau)
    if np.any(s <= 0.0) or np.any(k <= 0.0):
        raise DomainError("spot and strike must be positive")
    if np.any(tt <= 0.0) or np.any(v <= 0.0):
        raise DegenerateInputError("d1_d2 needs sigma > 0 and tau > 0")
    vol_sqrt = v * np.sqrt(tt)
    d1 = (np.log(s / k) + (r + 0.5 * v * v) * tt) / vol_sqrt
    d2 = d1 - vol_sqrt
    return _unwrap(d1), _unwrap(d2)


@dataclass(frozen=True)
class OptionContract:
    """Vanilla option terms.

    ``first_exercise`` is only meaningful (and required) for Bermudan style.
    """

    strike: float
    maturity: float
    kind: str = CALL
    style: str = EUROPEAN
    first_exercise: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.strike) and self.strike > 0.0):
            raise ContractError(f"strike must be positive, got {self.strike}")
        if not (math.isfinite(self.maturity) and self.maturity >= 0.0):
            raise ContractError(f"maturity must be >= 0, got {self.maturity}")
        if self.kind not in (CALL, PUT):
            raise ContractError(f"unknown option kind {self.kind!r}")
        if self.style not in (EUROPEAN, AMERICAN, BERMUDAN):
            raise ContractError(f"unknown exercise style {self.style!r}")
        if self.style == BERMUDAN:
            if self.first_exercise is None:
                raise ContractError("bermudan style needs first_exercise")
            if not 0.0 <= self.first_exercise <= self.maturity:
                raise ContractError("first_exercise must lie in [0, maturity]")
        elif self.first_exercise is not None:
            raise ContractError("first_exercise is only valid for bermudan style")


@dataclass(frozen=True)
class MarketState:
    spot: float
    rate: float
    now: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.spot) and self.spot > 0.0):
            raise DomainError(f"spot must be positive, got {self.spot}")
        if not (math.isfinite(self.rate) and math.isfinite(self.now)):
            raise DomainError("rate and now must be finite")
        if self.now < 0.0:
            raise DomainError(f"valuation time must be >= 0, got {self.now}")

    def tau(self, contract: OptionContract) -> float:
        if self.now > contract.maturity:
            raise DomainError(
                f"valuation time {self.now} is after maturity {contract.maturity}"
            )
        return contract.maturity - self.now


@dataclass(frozen=True)
class Volatility:
    # sigma == 0 is accepted so the zero-volatility limit branches are reachable
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")

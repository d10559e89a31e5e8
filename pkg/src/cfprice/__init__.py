"""Closed-form option prices with consumption and Bermudan premium factors,
plus the tools to check them: PDE residuals, binomial trees, Monte Carlo and a
square-root-of-Brownian-motion simulator."""

from .closed_form import (
    BermudanParams,
    ClosedFormSurface,
    ConsumptionParams,
    OmegaSpec,
    PriceResult,
    StochVolParams,
    american_call,
    american_put,
    american_surface,
    bermudan_put,
    bs_call,
    bs_put,
    european_surface,
    stochvol_call,
)
from .numerics import (
    MarketState,
    OptionContract,
    Volatility,
    d1_d2,
    norm_cdf,
    norm_pdf,
    payoff,
)

__version__ = "0.1.0"

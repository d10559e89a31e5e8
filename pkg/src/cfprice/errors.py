"""Exception types raised across the package.

Everything derives from ``PricingError`` (itself a ``ValueError``) so callers
that only care about "bad input" can catch one class; the CLI maps the whole
family to the domain-error exit status.
"""


class PricingError(ValueError):
    pass


class DomainError(PricingError):
    """Input outside the mathematical domain (non-finite, non-positive spot...)."""


class DegenerateInputError(PricingError):
    """tau <= 0 or sigma <= 0 reaching a formula that divides by sigma*sqrt(tau)."""


class ContractError(PricingError):
    """Wrong option kind or exercise style for the requested pricer."""


class ParameterError(PricingError):
    pass


class BoundaryError(PricingError):
    """PDE evaluation requested at or beyond maturity."""


class GridError(PricingError):
    pass


class ConfigError(PricingError):
    pass


class StabilityError(PricingError):
    """Binomial risk-neutral probability fell outside (0, 1)."""


class ComparisonError(PricingError):
    pass

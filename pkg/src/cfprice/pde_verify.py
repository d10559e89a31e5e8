"""Residual checks for candidate price functions against the pricing PDEs.

Two equivalent forms are supported:

* alpha form:        ``C_t + r S C_S + 0.5 sigma^2 S^2 C_SS - alpha C``
* consumption form:  ``C_t + r (S C_S - C) + 0.5 sigma^2 S^2 C_SS + (1 - r) c``

With the consumption rule ``c = psi * C`` the second equals the first with
``alpha = r - psi (1 - r)``.

A price function is any callable ``f(t, S)`` that accepts numpy arrays. If it
also has a ``partials(t, S)`` method returning ``(C, C_t, C_S, C_SS)`` those
are used by default; otherwise partials come from central differences with
``h_S = h_S_rel * S`` and absolute ``h_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BoundaryError, GridError, ParameterError

DEFAULT_H_S_REL = 1e-4
DEFAULT_H_T = 1e-6


@dataclass(frozen=True)
class PdeCoefficients:
    rate: float
    sigma: float
    alpha: Optional[float] = None
    psi: Optional[float] = None

    def __post_init__(self):
        if self.alpha is None and self.psi is None:
            object.__setattr__(self, "alpha", self.rate)
        elif self.alpha is None:
            object.__setattr__(self, "alpha", self.rate - self.psi * (1.0 - self.rate))
        elif self.psi is not None:
            implied = self.rate - self.psi * (1.0 - self.rate)
            if not math.isclose(self.alpha, implied, rel_tol=1e-12, abs_tol=1e-15):
                raise ParameterError(
                    f"alpha={self.alpha} inconsistent with psi={self.psi} (implies {implied})"
                )

    @property
    def psi_value(self) -> float:
        if self.psi is not None:
            return self.psi
        # alpha = r - psi (1 - r)
        return (self.rate - self.alpha) / (1.0 - self.rate)


@dataclass(frozen=True)
class GridSpec:
    S_min: float
    S_max: float
    t_min: float
    t_max: float
    n_S: int
    n_t: int

    def __post_init__(self):
        if self.n_S < 2 or self.n_t < 2:
            raise GridError("grid needs at least 2 points per axis")
        if not self.S_min > 0.0:
            raise GridError("S_min must be positive")
        if not (self.S_max > self.S_min and self.t_max > self.t_min):
            raise GridError("grid bounds must be increasing")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.t_min, self.t_max, self.n_t),
                np.linspace(self.S_min, self.S_max, self.n_S))


@dataclass
class ResidualReport:
    t_nodes: np.ndarray
    S_nodes: np.ndarray
    residuals: np.ndarray  # shape (n_t, n_S)
    max_abs: float
    mean_abs: float
    argmax: tuple[float, float]

    def to_dict(self, include_nodes: bool = False) -> dict:
        out = {
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "argmax": {"t": self.argmax[0], "S": self.argmax[1]},
            "n_nodes": int(self.residuals.size),
        }
        if include_nodes:
            out["t_nodes"] = self.t_nodes.tolist()
            out["S_nodes"] = self.S_nodes.tolist()
            out["residuals"] = self.residuals.tolist()
        return out


def _check_time(price_fn, t, maturity):
    if maturity is None:
        maturity = getattr(price_fn, "maturity", None)
    if maturity is not None and np.any(np.asarray(t) >= maturity):
        raise BoundaryError(f"PDE residual is only defined for t < T={maturity}")


def partial_derivatives(price_fn: Callable, t, S, *, analytic: bool = True,
                        h_S_rel: float = DEFAULT_H_S_REL, h_t: float = DEFAULT_H_T):
    """``(C, C_t, C_S, C_SS)`` at (t, S), analytic when available."""
    t = np.asarray(t, dtype=float)
    S = np.asarray(S, dtype=float)
    if analytic and hasattr(price_fn, "partials"):
        return price_fn.partials(t, S)
    h = h_S_rel * S
    c = np.asarray(price_fn(t, S), dtype=float)
    up = np.asarray(price_fn(t, S + h), dtype=float)
    dn = np.asarray(price_fn(t, S - h), dtype=float)
    c_t = (np.asarray(price_fn(t + h_t, S)) - np.asarray(price_fn(t - h_t, S))) / (2.0 * h_t)
    c_s = (up - dn) / (2.0 * h)
    c_ss = (up - 2.0 * c + dn) / (h * h)
    return c, c_t, c_s, c_ss


def _unwrap(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def pde_residual_eq2(price_fn: Callable, coeffs: PdeCoefficients, t, S, *,
                     maturity: Optional[float] = None, analytic: bool = True,
                     h_S_rel: float = DEFAULT_H_S_REL, h_t: float = DEFAULT_H_T):
    """Residual of the alpha-form PDE at (t, S); zero for an exact solution."""
    _check_time(price_fn, t, maturity)
    S = np.asarray(S, dtype=float)
    c, c_t, c_s, c_ss = partial_derivatives(price_fn, t, S, analytic=analytic,
                                            h_S_rel=h_S_rel, h_t=h_t)
    r, v = coeffs.rate, coeffs.sigma
    res = c_t + r * S * c_s + 0.5 * v * v * S * S * c_ss - coeffs.alpha * c
    return _unwrap(res)


def pde_residual_eq1(price_fn: Callable, coeffs: PdeCoefficients, t, S,
                     consumption_rule: Optional[Callable] = None, *,
                     maturity: Optional[float] = None, analytic: bool = True,
                     h_S_rel: float = DEFAULT_H_S_REL, h_t: float = DEFAULT_H_T):
    """Residual of the consumption-form PDE.

    ``consumption_rule`` maps the price to consumption ``c``; the default is
    ``c = psi * C``.
    """
    _check_time(price_fn, t, maturity)
    if consumption_rule is None:
        psi = coeffs.psi_value
        consumption_rule = lambda value: psi * value  # noqa: E731
    S = np.asarray(S, dtype=float)
    c, c_t, c_s, c_ss = partial_derivatives(price_fn, t, S, analytic=analytic,
                                            h_S_rel=h_S_rel, h_t=h_t)
    r, v = coeffs.rate, coeffs.sigma
    consumption = consumption_rule(c)
    res = c_t + r * (S * c_s - c) + 0.5 * v * v * S * S * c_ss + (1.0 - r) * consumption
    return _unwrap(res)


def residual_scan(price_fn: Callable, coeffs: PdeCoefficients, grid: GridSpec, *,
                  maturity: Optional[float] = None, analytic: bool = True,
                  h_S_rel: float = DEFAULT_H_S_REL,
                  h_t: float = DEFAULT_H_T) -> ResidualReport:
    t_nodes, S_nodes = grid.axes()
    tt, ss = np.meshgrid(t_nodes, S_nodes, indexing="ij")
    res = np.asarray(pde_residual_eq2(price_fn, coeffs, tt, ss, maturity=maturity,
                                      analytic=analytic, h_S_rel=h_S_rel, h_t=h_t),
                     dtype=float)
    res = np.broadcast_to(res, tt.shape)
    abs_res = np.abs(res)
    i, j = np.unravel_index(int(np.argmax(abs_res)), abs_res.shape)
    return ResidualReport(
        t_nodes=t_nodes,
        S_nodes=S_nodes,
        residuals=np.array(res),
        max_abs=float(abs_res[i, j]),
        mean_abs=float(abs_res.mean()),
        argmax=(float(t_nodes[i]), float(S_nodes[j])),
    )

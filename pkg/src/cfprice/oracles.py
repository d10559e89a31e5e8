"""Independent reference prices: CRR binomial trees and Monte Carlo engines.

Monte Carlo layout
------------------
Paths are simulated in fixed-size blocks. Block ``b`` draws from three Philox
substreams spawned from ``SeedSequence([seed, b])``: Brownian increments,
square-root-BM increments, and omega. Per-block moments are merged in block
order, so an estimate depends only on ``(seed, n_paths, block_size)`` and not
on ``n_workers``.

Perturbed dynamics
------------------
``mc_eq6_price`` steps

    dS = S (r dt + beta dW) + dS * lam * omega * X

where ``X`` is a square-root-BM increment. Since ``dS`` appears on both sides
it is solved per step as ``dS = S (r dt + beta dW) / (1 - lam omega X)``. Draws
with ``|1 - lam omega X| < eps`` are rejected and redrawn.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .closed_form import PriceResult, StochVolParams
from .errors import ComparisonError, ConfigError, ContractError, ParameterError, StabilityError
from .numerics import (
    AMERICAN,
    BERMUDAN,
    CALL,
    EUROPEAN,
    MarketState,
    OptionContract,
    Volatility,
    payoff,
)
from .sqrtbm import draw_increments

REJECTION_EPS = 1e-6
REJECTION_WARN_RATE = 0.01
DEFAULT_BLOCK_SIZE = 1 << 16

# oracle/closed-form pairings whose agreement is never asserted
REPORT_ONLY_PAIRS = {
    ("eq3", "crr-american"),
    ("eq4", "crr-american"),
    ("eq5", "crr-bermudan"),
    ("eq7", "mc-eq6"),
}


@dataclass(frozen=True)
class TreeConfig:
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("tree needs n_steps >= 1")


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int = 1
    seed: int = 0
    antithetic: bool = False
    block_size: int = DEFAULT_BLOCK_SIZE
    n_workers: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ConfigError("n_paths and n_steps must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.block_size < 2 or self.block_size % 2:
            raise ConfigError("block_size must be an even number >= 2")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("antithetic sampling needs an even n_paths")

    def blocks(self) -> list[int]:
        full, rest = divmod(self.n_paths, self.block_size)
        return [self.block_size] * full + ([rest] if rest else [])


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_effective: int
    method: str = "mc"
    contract: Optional[OptionContract] = None
    market: Optional[MarketState] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_effective": self.n_effective,
            "method": self.method,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
        }


def block_streams(seed: int, block: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence([seed, block]).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(c)) for c in children)


# ---------------------------------------------------------------- trees

def crr_price(market: MarketState, contract: OptionContract, vol: Volatility,
              tree: TreeConfig) -> float:
    """Cox-Ross-Rubinstein lattice price for European, American or Bermudan style.

    Bermudan contracts may be exercised at any node whose calendar time is at
    or after ``contract.first_exercise``.
    """
    tau = market.tau(contract)
    if tau == 0.0:
        return float(payoff(contract, market.spot))
    if vol.sigma <= 0.0:
        raise ParameterError("CRR tree needs sigma > 0")
    n = tree.n_steps
    dt = tau / n
    step = vol.sigma * math.sqrt(dt)
    u = math.exp(step)
    d = 1.0 / u
    growth = math.exp(market.rate * dt)
    p = (growth - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise StabilityError(
            f"risk-neutral probability {p} outside (0, 1); use more steps"
        )
    disc = 1.0 / growth
    K = contract.strike
    sign = 1.0 if contract.kind == CALL else -1.0

    def intrinsic(i: int) -> np.ndarray:
        spots = market.spot * np.exp(step * (2.0 * np.arange(i + 1) - i))
        return np.maximum(sign * (spots - K), 0.0)

    values = intrinsic(n)
    first_exercise_step = None
    if contract.style == AMERICAN:
        first_exercise_step = 0
    elif contract.style == BERMUDAN:
        # exercise allowed at step i iff now + i dt >= first_exercise
        first_exercise_step = max(
            0, math.ceil((contract.first_exercise - market.now) / dt - 1e-9)
        )
    for i in range(n - 1, -1, -1):
        values = disc * (p * values[1:] + (1.0 - p) * values[:-1])
        if first_exercise_step is not None and i >= first_exercise_step:
            np.maximum(values, intrinsic(i), out=values)
    return float(values[0])


# ---------------------------------------------------------------- reductions

def _merge_moments(parts: list[tuple[int, float, float]]) -> tuple[int, float, float]:
    """Combine per-block (count, mean, M2) triples in the given order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _block_moments(samples: np.ndarray) -> tuple[int, float, float]:
    mean = float(samples.mean())
    return samples.size, mean, float(np.sum((samples - mean) ** 2))


def _run_blocks(fn: Callable[[int, int], tuple], sizes: list[int],
                n_workers: Optional[int]) -> list:
    if n_workers is None or n_workers <= 1:
        return [fn(b, m) for b, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def _estimate(parts, discount: float) -> tuple[float, float, int]:
    n, mean, m2 = _merge_moments(parts)
    se = math.sqrt(m2 / (n - 1) / n) if n > 1 else 0.0
    return discount * mean, discount * se, n


def _pair_average(values: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return values
    half = values.size // 2
    return 0.5 * (values[:half] + values[half:])


def _normals(rng: np.random.Generator, m: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(m)
    z = rng.standard_normal(m // 2)
    return np.concatenate([z, -z])


def _terminal_payoff(contract: OptionContract, S: np.ndarray) -> np.ndarray:
    # simulated terminals are not validated: a discretized path may leave (0, inf)
    if contract.kind == CALL:
        return np.maximum(S - contract.strike, 0.0)
    return np.maximum(contract.strike - S, 0.0)


def _require_european(contract: OptionContract) -> None:
    if contract.style != EUROPEAN:
        raise ContractError("Monte Carlo engines price European payoffs only")


# ---------------------------------------------------------------- GBM

def mc_gbm_price(market: MarketState, contract: OptionContract, vol: Volatility,
                 mc: McConfig) -> McEstimate:
    """Risk-neutral GBM price with exact terminal sampling."""
    _require_european(contract)
    tau = market.tau(contract)
    r, sigma = market.rate, vol.sigma
    discount = math.exp(-r * tau)
    if sigma == 0.0 or tau == 0.0:
        terminal = market.spot * math.exp(r * tau)
        value = discount * float(payoff(contract, terminal))
        return McEstimate(value, 0.0, mc.n_paths, "mc-gbm", contract, market,
                          {"degenerate": True})
    drift = (r - 0.5 * sigma * sigma) * tau
    scale = sigma * math.sqrt(tau)

    def block(b: int, m: int):
        rng_w = block_streams(mc.seed, b)[0]
        z = _normals(rng_w, m, mc.antithetic)
        pay = _terminal_payoff(contract, market.spot * np.exp(drift + scale * z))
        return _block_moments(_pair_average(pay, mc.antithetic))

    parts = _run_blocks(block, mc.blocks(), mc.n_workers)
    mean, se, n = _estimate(parts, discount)
    return McEstimate(mean, se, n, "mc-gbm", contract, market,
                      {"n_paths": mc.n_paths, "antithetic": mc.antithetic})


def _euler_block(b, m, mc, spot, drift, sigma, dt, record):
    rng_w = block_streams(mc.seed, b)[0]
    sqrt_dt = math.sqrt(dt)
    S = np.full(m, float(spot))
    path = np.empty((m, mc.n_steps + 1)) if record else None
    if record:
        path[:, 0] = S
    for k in range(mc.n_steps):
        dW = sqrt_dt * _normals(rng_w, m, mc.antithetic)
        S = S + S * (drift * dt + sigma * dW)
        if record:
            path[:, k + 1] = S
    return path if record else S


def gbm_euler_paths(market: MarketState, vol: Volatility, horizon: float,
                    mc: McConfig) -> np.ndarray:
    """Time-stepped (Euler) risk-neutral GBM paths, shape ``(n_paths, n_steps + 1)``.

    Uses the same Brownian substreams as ``eq6_paths``.
    """
    dt = horizon / mc.n_steps
    rows = _run_blocks(
        lambda b, m: _euler_block(b, m, mc, market.spot, market.rate, vol.sigma, dt, True),
        mc.blocks(), mc.n_workers)
    return np.vstack(rows)


def mc_gbm_euler_price(market: MarketState, contract: OptionContract, vol: Volatility,
                       mc: McConfig) -> McEstimate:
    _require_european(contract)
    tau = market.tau(contract)
    dt = tau / mc.n_steps

    def block(b: int, m: int):
        S = _euler_block(b, m, mc, market.spot, market.rate, vol.sigma, dt, False)
        return _block_moments(_pair_average(_terminal_payoff(contract, S), mc.antithetic))

    parts = _run_blocks(block, mc.blocks(), mc.n_workers)
    mean, se, n = _estimate(parts, math.exp(-market.rate * tau))
    return McEstimate(mean, se, n, "mc-gbm-euler", contract, market,
                      {"n_paths": mc.n_paths, "n_steps": mc.n_steps})


# ---------------------------------------------------------------- perturbed dynamics

@dataclass
class _Eq6Block:
    terminal: np.ndarray
    path: Optional[np.ndarray]
    pert_count: int
    pert_mean: float
    pert_m2: float
    n_rejected: int


def _eq6_block(b, m, mc, spot, drift, params: StochVolParams, dt, record,
               eps=REJECTION_EPS) -> _Eq6Block:
    rng_w, rng_x, rng_o = block_streams(mc.seed, b)
    sqrt_dt = math.sqrt(dt)
    lam, beta = params.lam, params.beta
    S = np.full(m, float(spot))
    path = np.empty((m, mc.n_steps + 1)) if record else None
    if record:
        path[:, 0] = S
    pert_parts = []
    n_rejected = 0
    for k in range(mc.n_steps):
        dW = sqrt_dt * _normals(rng_w, m, mc.antithetic)
        x = draw_increments(rng_x, dt, m)[0]
        omega = params.omega.sample(rng_o, m)
        pert = lam * omega * x
        bad = np.flatnonzero(np.abs(1.0 - pert) < eps)
        tries = 0
        while bad.size:
            n_rejected += bad.size
            tries += 1
            if tries > 1000:
                raise ParameterError("perturbation denominator keeps vanishing; "
                                     "lam is too large for this dt")
            x_new = draw_increments(rng_x, dt, bad.size)[0]
            o_new = params.omega.sample(rng_o, bad.size)
            pert[bad] = lam * o_new * x_new
            bad = bad[np.abs(1.0 - pert[bad]) < eps]
        pert_parts.append(_block_moments(pert))
        S = S + S * (drift * dt + beta * dW) / (1.0 - pert)
        if record:
            path[:, k + 1] = S
    cnt, pmean, pm2 = _merge_moments(pert_parts)
    return _Eq6Block(S, path, cnt, pmean, pm2, n_rejected)


def eq6_paths(market: MarketState, params: StochVolParams, horizon: float,
              mc: McConfig, risk_neutral: bool = True) -> np.ndarray:
    """Simulated paths of the perturbed dynamics, shape ``(n_paths, n_steps + 1)``.

    ``risk_neutral=False`` uses the physical drift ``params.mu`` instead of
    ``market.rate``.
    """
    drift = market.rate if risk_neutral else params.mu
    dt = horizon / mc.n_steps
    blocks = _run_blocks(
        lambda b, m: _eq6_block(b, m, mc, market.spot, drift, params, dt, True),
        mc.blocks(), mc.n_workers)
    return np.vstack([blk.path for blk in blocks])


def mc_eq6_price(market: MarketState, contract: OptionContract, params: StochVolParams,
                 mc: McConfig, rejection_eps: float = REJECTION_EPS) -> McEstimate:
    """Risk-neutral Monte Carlo price under the perturbed dynamics.

    ``diagnostics`` carries the sample mean / standard error of the
    perturbation term ``lam * omega * X`` over all steps and paths and the
    rejection count.
    """
    _require_european(contract)
    tau = market.tau(contract)
    if tau == 0.0:
        return McEstimate(float(payoff(contract, market.spot)), 0.0, mc.n_paths,
                          "mc-eq6", contract, market, {"degenerate": True})
    dt = tau / mc.n_steps

    def block(b: int, m: int):
        blk = _eq6_block(b, m, mc, market.spot, market.rate, params, dt, False,
                         eps=rejection_eps)
        pay = _pair_average(_terminal_payoff(contract, blk.terminal), mc.antithetic)
        return _block_moments(pay), (blk.pert_count, blk.pert_mean, blk.pert_m2), blk.n_rejected

    results = _run_blocks(block, mc.blocks(), mc.n_workers)
    mean, se, n = _estimate([r[0] for r in results], math.exp(-market.rate * tau))
    p_n, p_mean, p_m2 = _merge_moments([r[1] for r in results])
    p_se = math.sqrt(p_m2 / (p_n - 1) / p_n) if p_n > 1 else 0.0
    n_rejected = sum(r[2] for r in results)
    n_draws = mc.n_paths * mc.n_steps
    rate = n_rejected / (n_draws + n_rejected)
    warnings = []
    if rate > REJECTION_WARN_RATE:
        warnings.append(
            f"rejection rate {rate:.3%} exceeds {REJECTION_WARN_RATE:.0%}: "
            "lam * omega * X is frequently close to 1"
        )
    diagnostics = {
        "n_paths": mc.n_paths,
        "n_steps": mc.n_steps,
        "antithetic": mc.antithetic,
        "perturbation_mean": p_mean,
        "perturbation_std_error": p_se,
        "perturbation_count": p_n,
        "n_rejected": n_rejected,
        "rejection_rate": rate,
    }
    return McEstimate(mean, se, n, "mc-eq6", contract, market, diagnostics, warnings)


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True)
class TolerancePolicy:
    """``absolute``: |diff| <= value. ``se_multiple``: |diff| <= value * SE.
    ``report_only``: numbers only, no verdict."""

    kind: str = "absolute"
    value: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("absolute", "se_multiple", "report_only"):
            raise ConfigError(f"unknown tolerance policy {self.kind!r}")
        if self.kind != "report_only" and not self.value >= 0.0:
            raise ConfigError("tolerance must be >= 0")


@dataclass
class ComparisonReport:
    closed_form_price: float
    oracle_price: float
    oracle_std_error: Optional[float]
    abs_diff: float
    rel_diff: float
    verdict: str
    formula: str
    oracle_method: str
    policy: TolerancePolicy

    def to_dict(self) -> dict:
        return {
            "closed_form_price": self.closed_form_price,
            "oracle_price": self.oracle_price,
            "oracle_std_error": self.oracle_std_error,
            "abs_diff": self.abs_diff,
            "rel_diff": self.rel_diff,
            "verdict": self.verdict,
            "formula": self.formula,
            "oracle_method": self.oracle_method,
            "policy": {"kind": self.policy.kind, "value": self.policy.value},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compare(closed_form: PriceResult, oracle: Union[float, McEstimate],
            policy: TolerancePolicy, *, oracle_method: Optional[str] = None,
            contract: Optional[OptionContract] = None,
            market: Optional[MarketState] = None) -> ComparisonReport:
    """Compare a closed-form price with an oracle value or Monte Carlo estimate.

    ``contract``/``market`` describe the oracle's inputs when ``oracle`` is a
    bare float; estimates carry their own. Any mismatch with the closed form's
    inputs raises ``ComparisonError``.
    """
    if isinstance(oracle, McEstimate):
        central, se = oracle.mean, oracle.std_error
        method = oracle_method or oracle.method
        contract = contract or oracle.contract
        market = market or oracle.market
    else:
        central, se = float(oracle), None
        method = oracle_method or "value"
    for mine, theirs, what in ((closed_form.contract, contract, "contract"),
                               (closed_form.market, market, "market")):
        if mine is not None and theirs is not None and mine != theirs:
            raise ComparisonError(f"{what} differs between closed form and oracle")

    abs_diff = abs(closed_form.price - central)
    scale = abs(central) if central != 0.0 else abs(closed_form.price)
    rel_diff = abs_diff / scale if scale > 0.0 else 0.0

    if (closed_form.formula, method) in REPORT_ONLY_PAIRS or policy.kind == "report_only":
        verdict = "report_only"
    elif policy.kind == "absolute":
        verdict = "within_tolerance" if abs_diff <= policy.value else "outside_tolerance"
    else:
        if se is None:
            raise ComparisonError("se_multiple policy needs a Monte Carlo estimate")
        verdict = "within_tolerance" if abs_diff <= policy.value * se else "outside_tolerance"
    return ComparisonReport(closed_form.price, central, se, abs_diff, rel_diff, verdict,
                            closed_form.formula, method, policy)

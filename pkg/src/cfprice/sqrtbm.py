"""Increments and paths of the square root of Brownian motion.

Construction used here: for a Gaussian increment ``dB ~ N(0, dt)`` and an
independent random sign ``zeta`` (+1/-1 with equal probability),

    X = zeta * |dB| ** 0.5

so ``E[X] = 0``, ``X**2 = |dB|`` and ``E[X**2] = sqrt(2 dt / pi)``, i.e. the
amplitude scales like ``dt ** 0.25``. This pathwise square root is one
interpretation of the process, chosen because it is the simplest one with the
zero-mean and scaling properties the pricing dynamics rely on.

Random numbers come from Philox (counter-based) generators keyed by
``(seed, stream)``; path ``i`` of a batch always uses stream ``i``, so output
is independent of how many workers produce it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

SIGN_RULES = ("rademacher",)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for substream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


@dataclass(frozen=True)
class SqrtBmConfig:
    dt: float
    n_steps: int
    seed: int = 0
    sign_rule: str = "rademacher"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.sign_rule not in SIGN_RULES:
            raise ConfigError(f"unknown sign rule {self.sign_rule!r}")


@dataclass
class IncrementSample:
    values: np.ndarray  # X_k
    dB: np.ndarray      # underlying Gaussian increments
    signs: np.ndarray   # the +1/-1 draws


def draw_increments(rng: np.random.Generator, dt: float,
                    n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n`` increments from ``rng``; returns ``(X, dB, signs)``."""
    dB = rng.normal(0.0, math.sqrt(dt), size=n)
    signs = 2.0 * rng.integers(0, 2, size=n) - 1.0
    root = np.sqrt(np.abs(dB))
    # re-express dB through the rounded root so X**2 == |dB| holds bit-exactly;
    # this moves dB by at most half an ulp
    dB = np.copysign(root * root, dB)
    return signs * root, dB, signs


def sqrtbm_increments(config: SqrtBmConfig, stream: int = 0) -> IncrementSample:
    rng = make_rng(config.seed, stream)
    x, dB, signs = draw_increments(rng, config.dt, config.n_steps)
    return IncrementSample(values=x, dB=dB, signs=signs)


def sqrtbm_path(config: SqrtBmConfig, stream: int = 0) -> np.ndarray:
    """Partial sums ``[0, X_1, X_1 + X_2, ...]`` of length ``n_steps + 1``."""
    x = sqrtbm_increments(config, stream).values
    path = np.empty(x.size + 1)
    path[0] = 0.0
    np.cumsum(x, out=path[1:])
    return path


def sqrtbm_paths(config: SqrtBmConfig, n_paths: int,
                 n_workers: Optional[int] = None) -> np.ndarray:
    """``(n_paths, n_steps + 1)`` array; row ``i`` is ``sqrtbm_path(config, i)``."""
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    out = np.empty((n_paths, config.n_steps + 1))

    def fill(i: int) -> None:
        out[i] = sqrtbm_path(config, i)

    if n_workers is None or n_workers <= 1:
        for i in range(n_paths):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, range(n_paths)))
    return out


@dataclass(frozen=True)
class ScalingRow:
    dt: float
    mean_sq: float
    std_error: float
    expected: float

    def to_dict(self) -> dict:
        return {"dt": self.dt, "mean_sq": self.mean_sq, "std_error": self.std_error,
                "expected": self.expected}


def expected_second_moment(dt: float) -> float:
    """E|N(0, dt)| = sqrt(2 dt / pi), which is E[X^2] for the construction."""
    return math.sqrt(2.0 * dt / math.pi)


def scaling_diagnostic(config: SqrtBmConfig, dt_list: Sequence[float]) -> list[ScalingRow]:
    """Monte Carlo estimate of ``E[X^2]`` for each ``dt`` (``n_steps`` draws each).

    Entry ``i`` of ``dt_list`` uses substream ``i`` of ``config.seed``.
    """
    if len(dt_list) == 0:
        raise ConfigError("dt_list must be nonempty")
    rows = []
    for i, dt in enumerate(dt_list):
        cfg = SqrtBmConfig(dt=dt, n_steps=config.n_steps, seed=config.seed,
                           sign_rule=config.sign_rule)
        sq = sqrtbm_increments(cfg, stream=i).values ** 2
        se = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else float("nan")
        rows.append(ScalingRow(dt=float(dt), mean_sq=float(sq.mean()), std_error=se,
                               expected=expected_second_moment(dt)))
    return rows


def increment_diagnostics(sample: IncrementSample, dt: float) -> dict:
    """Moment, sign-balance and lag-1 autocorrelation summary of a sample."""
    x = sample.values
    n = x.size
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if n > 1 else 0.0
    sq = x * x
    centered = x - mean
    denom = float(np.dot(centered, centered))
    lag1 = float(np.dot(centered[1:], centered[:-1]) / denom) if n > 1 and denom > 0 else 0.0
    return {
        "n": n,
        "dt": dt,
        "mean": mean,
        "mean_std_error": std / math.sqrt(n),
        "mean_sq": float(sq.mean()),
        "mean_sq_std_error": float(sq.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "expected_mean_sq": expected_second_moment(dt),
        "positive_fraction": float(np.count_nonzero(sample.signs > 0) / n),
        "lag1_autocorrelation": lag1,
    }

"""Hidden price process, trader arrivals and trader decisions.

The external price follows a lazy random walk on the integer tick grid
(one tick per jump). Traders arrive on a deterministic schedule and either
know the hidden price exactly (informed), trade at random (uninformed), or
observe the price through additive noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # only for annotations; quotes live in the belief module
    from .belief import Quote

# Trade event kinds. NO_TRADER is a non-arrival slot; PASS is an arrived
# trader that chose d=0. Policies must treat them differently: PASS is
# informative (price inside the spread), NO_TRADER is not.
NO_TRADER = "no_trader"
PASS = "pass"
BUY = "buy"
SELL = "sell"

EVENT_KINDS = (NO_TRADER, PASS, BUY, SELL)

NOISE_FAMILIES = ("none", "gaussian", "laplace", "lognormal")

# Declared defaults; the noise magnitude is a few ticks in every family.
DEFAULT_NOISE_SCALES = {"gaussian": 2.0, "laplace": 1.5, "lognormal": 0.5}


@dataclass
class MarketParams:
    """Trader informedness, jump probability and arrival rate.

    arrival_rate=0 means no trader ever arrives (used by the no-trade
    spread-growth experiments); otherwise traders arrive at slots that are
    multiples of round(1/arrival_rate).
    """

    alpha: float
    sigma: float
    arrival_rate: float = 1.0
    tick: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must be in [0,1], got {self.sigma}")
        if not 0.0 <= self.arrival_rate <= 1.0:
            raise ValueError(
                f"arrival_rate must be in [0,1], got {self.arrival_rate}"
            )


@dataclass
class TradeEvent:
    """One slot's trade outcome; d is +1 buy, -1 sell, 0 otherwise."""

    kind: str
    d: int = 0

    def __post_init__(self) -> None:
        assert self.kind in EVENT_KINDS
        assert (self.kind == BUY) == (self.d == 1)
        assert (self.kind == SELL) == (self.d == -1)


@dataclass
class TraderNoise:
    """Observation-noise family for the generalized trader model."""

    family: str = "none"
    scale: float | None = None

    def __post_init__(self) -> None:
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.scale is None:
            self.scale = DEFAULT_NOISE_SCALES.get(self.family, 0.0)
        if self.family != "none" and self.scale <= 0:
            raise ValueError("noise scale must be > 0")


@dataclass
class ScenarioDriver:
    """Per-slot mutation of the hidden price and/or (alpha, sigma).

    kinds: "fixed" (no mutation), "single_jump" (add `size` ticks at slot
    `at`, then freeze sigma at 0), "drifting" (alpha and sigma random-walk
    by +/-step, reflected into [0,1]).
    """

    kind: str = "fixed"
    size: int = 0
    at: int = 0
    step: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "single_jump", "drifting"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")


@dataclass
class MarketState:
    """Hidden external price plus the per-run parameter set and RNG."""

    p_ext: int
    params: MarketParams
    rng: np.random.Generator
    t: int = 0


def step_price(state: MarketState) -> MarketState:
    """Advance the hidden price one slot: +/-1 tick w.p. sigma/2 each."""
    u = state.rng.random()
    sigma = state.params.sigma
    if u < sigma / 2.0:
        state.p_ext += 1
    elif u < sigma:
        state.p_ext -= 1
    state.t += 1
    return state


def arrival_at(t: int, arrival_rate: float) -> bool:
    """Deterministic arrival schedule: multiples of round(1/rate).

    A non-integer 1/rate is rounded to the nearest slot count.
    """
    if arrival_rate <= 0.0:
        return False
    period = max(1, round(1.0 / arrival_rate))
    return t % period == 0


def sample_noise(noise: TraderNoise, rng: np.random.Generator) -> float:
    """Draw one observation-noise term eta."""
    if noise.family == "gaussian":
        return rng.normal(0.0, noise.scale)
    if noise.family == "laplace":
        return rng.laplace(0.0, noise.scale)
    if noise.family == "lognormal":
        # Positive-skew additive noise, mean-centered so the trader's
        # observation is unbiased.
        return math.exp(rng.normal(0.0, noise.scale)) - math.exp(
            noise.scale**2 / 2.0
        )
    return 0.0


def trader_decision(
    p_ext: int,
    quote: "Quote",
    params: MarketParams,
    noise: TraderNoise,
    rng: np.random.Generator,
) -> TradeEvent:
    """Decide what an arriving trader does at the posted quote.

    family "none": informed w.p. alpha (buy iff p_ext > ask, sell iff
    p_ext < bid, strict comparisons, pass on equality), else uninformed
    (buy/sell a coin flip). Other families: the trader sees
    p_ext + eta and applies the same strict threshold rule.
    """
    ask, bid = quote.ask, quote.bid
    assert ask >= bid
    if noise.family == "none":
        if rng.random() < params.alpha:
            if p_ext > ask:
                return TradeEvent(BUY, 1)
            if p_ext < bid:
                return TradeEvent(SELL, -1)
            return TradeEvent(PASS, 0)
        return TradeEvent(BUY, 1) if rng.random() < 0.5 else TradeEvent(SELL, -1)
    p_trader = p_ext + sample_noise(noise, rng)
    if p_trader > ask:
        return TradeEvent(BUY, 1)
    if p_trader < bid:
        return TradeEvent(SELL, -1)
    return TradeEvent(PASS, 0)


def _reflect01(x: float) -> float:
    """Reflect x into [0,1] (single bounce is enough for small steps)."""
    if x < 0.0:
        x = -x
    if x > 1.0:
        x = 2.0 - x
    return min(max(x, 0.0), 1.0)


def scenario_advance(driver: ScenarioDriver, state: MarketState) -> MarketState:
    """Apply the scenario's per-slot mutation before quoting."""
    if driver.kind == "single_jump":
        if state.t == driver.at:
            state.p_ext += driver.size
            state.params.sigma = 0.0
        elif state.t > driver.at:
            state.params.sigma = 0.0
    elif driver.kind == "drifting":
        sign_a = 1.0 if state.rng.random() < 0.5 else -1.0
        sign_s = 1.0 if state.rng.random() < 0.5 else -1.0
        state.params.alpha = _reflect01(state.params.alpha + sign_a * driver.step)
        state.params.sigma = _reflect01(state.params.sigma + sign_s * driver.step)
    return state

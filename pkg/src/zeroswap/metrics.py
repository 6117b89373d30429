"""Loss, spread and deviation metrics plus the empirical-law fit helpers.

Everything here is pure: the same run record always produces the same
numbers. Fits operate on already-aggregated series; aggregation across
seeds is the caller's choice (arithmetic mean for level statistics,
geometric mean for exponential-decay series, see the experiment module).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import Quote
from .env import BUY, SELL, TradeEvent


class NoTrades(Exception):
    """Metric needs at least one executed trade."""


class DegenerateSeries(Exception):
    """Series has too few usable (positive) points for the requested fit."""


@dataclass
class RunRecord:
    """Per-slot time series of one simulation run."""

    t: np.ndarray
    p_ext: np.ndarray
    ask: np.ndarray
    bid: np.ndarray
    event: list[str]
    d: np.ndarray
    loss: np.ndarray
    reward: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def spread(self) -> np.ndarray:
        return self.ask - self.bid

    def mid(self) -> np.ndarray:
        return 0.5 * (self.ask + self.bid)

    def mid_deviation(self) -> np.ndarray:
        return np.abs(self.mid() - self.p_ext)

    def trade_mask(self) -> np.ndarray:
        return self.d != 0


def monetary_loss(p_ext: float, quote: Quote, event: TradeEvent) -> float:
    """Maker's loss on one unit trade: p_ext-ask on a buy, bid-p_ext on a sell."""
    if event.kind == BUY:
        return float(p_ext - quote.ask)
    if event.kind == SELL:
        return float(quote.bid - p_ext)
    return 0.0


def percent_loss_per_trade(record: RunRecord) -> float:
    """Mean over trade rows of 100 * loss / p_ext."""
    mask = record.trade_mask()
    if not mask.any():
        raise NoTrades("record has no buy/sell rows")
    p = record.p_ext[mask]
    assert (p > 0).all(), "percent loss needs p_ext > 0 throughout"
    return float(np.mean(100.0 * record.loss[mask] / p))


def risk_rho(p_ext: float, quote: Quote) -> float:
    """Squared quote deviation (p_ext-ask)^2 + (p_ext-bid)^2."""
    return float((p_ext - quote.ask) ** 2 + (p_ext - quote.bid) ** 2)


def fit_growth_exponent(
    series: np.ndarray, window: tuple[int, int] | None = None
) -> float:
    """Least-squares slope of log(series) against log(t).

    The series is indexed by slot (already seed-averaged); the window is a
    [lo, hi) slot range, defaulting to the last 90 percent of the run
    (the first 10 percent is transient). Slot 0 is never used.
    """
    series = np.asarray(series, dtype=float)
    n = len(series)
    lo, hi = window if window is not None else (max(1, n // 10), n)
    lo = max(lo, 1)
    t = np.arange(lo, min(hi, n))
    if len(t) < 3:
        raise DegenerateSeries("fit window has fewer than 3 points")
    y = series[t]
    if (y <= 0).any():
        raise DegenerateSeries("series not strictly positive on the window")
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def fit_decay_rate(series: np.ndarray, floor: float = 1e-6) -> float:
    """Least-squares slope of log(series) against t before the floor.

    Uses the leading run of slots with series >= floor; the fitted slope
    of an exponential decay exp(-k t) is -k.
    """
    series = np.asarray(series, dtype=float)
    above = series >= floor
    if not above.any() or not above[0]:
        raise DegenerateSeries("series starts below the floor")
    stop = int(np.argmin(above)) if not above.all() else len(series)
    t = np.arange(stop)
    if len(t) < 3:
        raise DegenerateSeries("fewer than 3 points above the floor")
    y = series[:stop]
    if (y <= 0).any():
        raise DegenerateSeries("series not strictly positive before the floor")
    return float(np.polyfit(t, np.log(y), 1)[0])


@dataclass
class SeedSummary:
    """Per-run reductions used by aggregation and the acceptance checks."""

    seed: int
    trades: int
    pct_loss: float  # nan when the run has no trades
    spread_mean: float
    middev_mean: float
    risk_sum: float

    @classmethod
    def from_record(cls, record: RunRecord, seed: int) -> "SeedSummary":
        mask = record.trade_mask()
        trades = int(mask.sum())
        pct = percent_loss_per_trade(record) if trades else float("nan")
        risk = float(
            np.sum((record.p_ext - record.ask) ** 2 + (record.p_ext - record.bid) ** 2)
        )
        return cls(
            seed=seed,
            trades=trades,
            pct_loss=pct,
            spread_mean=float(record.spread().mean()) if len(record) else 0.0,
            middev_mean=float(record.mid_deviation().mean()) if len(record) else 0.0,
            risk_sum=risk,
        )


@dataclass
class AggregateStats:
    """Across-seed summary for one (alpha, sigma, lambda, policy) cell."""

    alpha: float
    sigma: float
    arrival_rate: float
    policy: str
    pct_loss_mean: float
    pct_loss_std: float
    spread_mean: float
    middev_mean: float
    seeds: int


def aggregate_stats(
    alpha: float,
    sigma: float,
    arrival_rate: float,
    policy: str,
    summaries: list[SeedSummary],
) -> AggregateStats:
    assert summaries, "need at least one seed"
    pct = np.array([s.pct_loss for s in summaries])
    return AggregateStats(
        alpha=alpha,
        sigma=sigma,
        arrival_rate=arrival_rate,
        policy=policy,
        pct_loss_mean=float(np.nanmean(pct)) if not np.isnan(pct).all() else float("nan"),
        pct_loss_std=float(np.nanstd(pct, ddof=1)) if len(pct) > 1 else 0.0,
        spread_mean=float(np.mean([s.spread_mean for s in summaries])),
        middev_mean=float(np.mean([s.middev_mean for s in summaries])),
        seeds=len(summaries),
    )

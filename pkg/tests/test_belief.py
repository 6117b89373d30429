import math

import numpy as np
import pytest

from zeroswap.belief import (
    Belief,
    Quote,
    ZeroLikelihood,
    belief_stats,
    diffuse,
    posterior_trade,
    solve_quotes,
    two_point_quote_oracle,
)
from zeroswap.env import BUY, PASS, SELL, TradeEvent


def brute_force_ask(belief: Belief, alpha: float) -> float:
    """Independent fixed-point oracle: enumerate every integer cut directly.

    A buy at any ask in [c, c+1) hits prices p > c, so a cut is consistent
    iff its conditional mean lands in that band; ties resolve to the value
    closest to the prior mean, and if no cut is consistent the nearest-band
    cut is used (same contract, direct enumeration).
    """
    prices = list(belief.prices())
    mass = list(belief.mass)
    half = (1.0 - alpha) / 2.0
    mean = sum(p * m for p, m in zip(prices, mass))
    consistent, nearest = [], []
    for cut in range(prices[0] - 1, prices[-1] + 2):
        num = sum(p * (alpha * (p > cut) + half) * m for p, m in zip(prices, mass))
        den = sum((alpha * (p > cut) + half) * m for p, m in zip(prices, mass))
        if den <= 0:
            continue
        e = num / den
        if cut <= e < cut + 1:
            consistent.append(e)
        nearest.append((max(cut - e, e - (cut + 1), 0.0), e))
    if consistent:
        return min(consistent, key=lambda e: abs(e - mean))
    return min(nearest, key=lambda t: t[0])[1]


def brute_force_bid(belief: Belief, alpha: float) -> float:
    """Sell-side twin: a sell at any bid in (c-1, c] hits prices p <= c-1."""
    prices = list(belief.prices())
    mass = list(belief.mass)
    half = (1.0 - alpha) / 2.0
    mean = sum(p * m for p, m in zip(prices, mass))
    consistent, nearest = [], []
    for cut in range(prices[0] - 1, prices[-1] + 2):
        num = sum(p * (alpha * (p <= cut - 1) + half) * m for p, m in zip(prices, mass))
        den = sum((alpha * (p <= cut - 1) + half) * m for p, m in zip(prices, mass))
        if den <= 0:
            continue
        e = num / den
        if cut - 1 < e <= cut:
            consistent.append(e)
        nearest.append((max((cut - 1) - e, e - cut, 0.0), e))
    if consistent:
        return min(consistent, key=lambda e: abs(e - mean))
    return min(nearest, key=lambda t: t[0])[1]


def random_belief(rng, width_max=40, origin_span=200):
    n = int(rng.integers(1, width_max))
    mass = rng.random(n) + 1e-3
    mass /= mass.sum()
    return Belief(int(rng.integers(-origin_span, origin_span)), mass)


# --- posterior_trade -------------------------------------------------------


def test_posterior_buy_uniform_three_point():
    # Direct Bayes enumeration: weights (0.05, 0.05, 0.95) on uniform prior.
    b = Belief.uniform(99, 101)
    post = posterior_trade(b, TradeEvent(BUY, 1), Quote(100.0, 100.0), 0.9)
    assert np.allclose(post.mass, [1 / 21, 1 / 21, 19 / 21], atol=1e-15)


def test_posterior_alpha_zero_is_identity_for_trades():
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = random_belief(rng)
        q = solve_quotes(b, 0.0)
        for ev in (TradeEvent(BUY, 1), TradeEvent(SELL, -1)):
            post = posterior_trade(b, ev, q, 0.0)
            assert post.origin == b.origin
            assert np.allclose(post.mass, b.mass, atol=1e-12)


def test_posterior_pass_degenerate_inside_spread_unchanged():
    b = Belief.degenerate(100)
    post = posterior_trade(b, TradeEvent(PASS, 0), Quote(101.0, 99.0), 0.5)
    assert post.origin == 100 and len(post.mass) == 1


def test_posterior_pass_with_alpha_zero_raises():
    b = Belief.uniform(99, 101)
    with pytest.raises(ZeroLikelihood):
        posterior_trade(b, TradeEvent(PASS, 0), Quote(101.0, 99.0), 0.0)


def test_posterior_pass_with_no_support_inside_spread_raises():
    b = Belief.two_point(90, 110, 0.5)
    with pytest.raises(ZeroLikelihood):
        posterior_trade(b, TradeEvent(PASS, 0), Quote(101.0, 99.0), 0.5)


def test_posterior_monotonicity():
    # A buy never decreases the mean; a sell never increases it.
    rng = np.random.default_rng(1)
    for _ in range(200):
        b = random_belief(rng)
        alpha = rng.uniform(0.0, 1.0)
        q = solve_quotes(b, alpha)
        mean0 = belief_stats(b)[0]
        up = posterior_trade(b, TradeEvent(BUY, 1), q, alpha)
        down = posterior_trade(b, TradeEvent(SELL, -1), q, alpha)
        assert belief_stats(up)[0] >= mean0 - 1e-9
        assert belief_stats(down)[0] <= mean0 + 1e-9


def test_mass_conservation_all_operations():
    rng = np.random.default_rng(2)
    for _ in range(100):
        b = random_belief(rng)
        alpha = rng.uniform(0.05, 0.95)
        sigma = rng.uniform(0.0, 1.0)
        q = solve_quotes(b, alpha)
        for out in (
            posterior_trade(b, TradeEvent(BUY, 1), q, alpha),
            posterior_trade(b, TradeEvent(SELL, -1), q, alpha),
            diffuse(b, sigma),
        ):
            assert abs(out.mass.sum() - 1.0) < 1e-12
            assert (out.mass >= 0).all()


# --- diffuse ---------------------------------------------------------------


def test_diffuse_degenerate_kernel():
    out = diffuse(Belief.degenerate(100), 0.5)
    assert out.to_rows() == [(99, 0.25), (100, 0.5), (101, 0.25)]


def test_diffuse_sigma_zero_identity():
    b = Belief.uniform(10, 14)
    out = diffuse(b, 0.0)
    assert out.origin == b.origin
    assert np.array_equal(out.mass, b.mass)


def test_diffuse_variance_example():
    # var 0.5 prior, sigma 0.3 -> variance exactly 0.8.
    b = Belief(99, np.array([0.25, 0.5, 0.25]))
    _, var = belief_stats(diffuse(b, 0.3))
    assert abs(var - 0.8) < 1e-12


def test_diffuse_adds_exactly_sigma_to_variance():
    # Exact one-step variance law, 1000 random beliefs.
    rng = np.random.default_rng(3)
    for _ in range(1000):
        b = random_belief(rng)
        sigma = rng.uniform(0.0, 1.0)
        var0 = belief_stats(b)[1]
        var1 = belief_stats(diffuse(b, sigma))[1]
        assert abs(var1 - var0 - sigma) <= 1e-9


# --- belief_stats ----------------------------------------------------------


def test_stats_degenerate():
    assert belief_stats(Belief.degenerate(100)) == (100.0, 0.0)


def test_stats_three_point():
    mean, var = belief_stats(Belief(99, np.array([0.25, 0.5, 0.25])))
    assert mean == 100.0 and abs(var - 0.5) < 1e-15


def test_stats_uniform():
    mean, var = belief_stats(Belief.uniform(0, 2))
    assert abs(mean - 1.0) < 1e-15 and abs(var - 2 / 3) < 1e-15


# --- solve_quotes ----------------------------------------------------------


def test_quotes_degenerate_prior_collapse():
    for alpha in (0.0, 0.3, 0.9):
        q = solve_quotes(Belief.degenerate(57), alpha)
        assert q.ask == 57.0 and q.bid == 57.0


def test_quotes_uniform_three_point_against_hand_value():
    q = solve_quotes(Belief.uniform(99, 101), 0.9)
    assert abs(q.ask - 2118 / 21) < 1e-12
    assert abs(q.bid - 2082 / 21) < 1e-12


def test_quotes_alpha_zero_collapse_to_mean():
    rng = np.random.default_rng(4)
    for _ in range(50):
        b = random_belief(rng)
        q = solve_quotes(b, 0.0)
        mean = belief_stats(b)[0]
        assert abs(q.ask - mean) < 1e-9
        assert abs(q.bid - mean) < 1e-9


def test_quotes_match_brute_force_cut_scan():
    rng = np.random.default_rng(5)
    for _ in range(100):
        b = random_belief(rng, width_max=20, origin_span=50)
        alpha = rng.uniform(0.05, 0.95)
        q = solve_quotes(b, alpha)
        assert abs(q.ask - brute_force_ask(b, alpha)) < 1e-9
        assert abs(q.bid - brute_force_bid(b, alpha)) < 1e-9


def test_quote_ordering_ask_mean_bid():
    rng = np.random.default_rng(6)
    for _ in range(300):
        b = random_belief(rng)
        alpha = rng.uniform(0.0, 1.0)
        q = solve_quotes(b, alpha)
        mean = belief_stats(b)[0]
        assert q.ask >= mean - 1e-9
        assert q.bid <= mean + 1e-9


# --- two-point closed form -------------------------------------------------


def test_two_point_oracle_base_case():
    q = two_point_quote_oracle(90, 110, 0.5, 0.9, 0, 0)
    assert q.ask == 109.0


def test_two_point_oracle_alpha_zero_mixture():
    for sigma in (0.2, 0.5, 0.8):
        for b, s in ((0, 0), (3, 1), (5, 5)):
            q = two_point_quote_oracle(90, 110, sigma, 0.0, b, s)
            expect = sigma * 90 + (1 - sigma) * 110
            assert abs(q.ask - expect) < 1e-12
            assert abs(q.bid - expect) < 1e-12


def test_two_point_oracle_log_gap_slope_is_kl_rate():
    # Along the typical trade mix at true price p_u (buys at rate (1+alpha)/2),
    # the log-gap to p_u shrinks at the KL rate per trade. The gap underflows
    # doubles within ~12 trades, so the same closed form is evaluated in exact
    # rational arithmetic here.
    from fractions import Fraction

    alpha = Fraction(9, 10)
    q = (1 - alpha) / 2
    r = (1 + alpha) / 2
    p_l, p_u, w_l = 100, 120, Fraction(1, 2)
    kl = float(alpha) * math.log(float((1 + alpha) / (1 - alpha)))

    def exact_ask_gap(b, s):
        wl = w_l * q ** (b + 1) * (1 - q) ** s
        wu = (1 - w_l) * r ** (b + 1) * (1 - r) ** s
        ask = (p_l * wl + p_u * wu) / (wl + wu)
        return p_u - ask

    ns = list(range(20, 61, 4))
    logs = []
    for n in ns:
        b = round(float(r) * n)
        gap = exact_ask_gap(b, n - b)
        logs.append(math.log(gap.numerator) - math.log(gap.denominator))
    slope = np.polyfit(ns, logs, 1)[0]
    assert abs(slope - (-kl)) / kl < 0.02


def test_algorithm_matches_two_point_closed_form():
    # Trim-free regime: short arbitrary buy/sell sequences keep both prior
    # points above the tail-trim threshold, where the full update chain must
    # reproduce the closed form exactly (tolerance 1e-9); 100 instances.
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        alpha = rng.uniform(0.05, 0.95)
        w_l = rng.uniform(0.05, 0.95)
        p_l = int(rng.integers(-50, 150))
        p_u = p_l + int(rng.integers(2, 60))
        b = Belief.two_point(p_l, p_u, w_l)
        buys = sells = 0
        for _ in range(12):
            q = solve_quotes(b, alpha)
            o = two_point_quote_oracle(p_l, p_u, w_l, alpha, buys, sells)
            worst = max(worst, abs(q.ask - o.ask), abs(q.bid - o.bid))
            if rng.random() < 0.5:
                b = posterior_trade(b, TradeEvent(BUY, 1), q, alpha)
                buys += 1
            else:
                b = posterior_trade(b, TradeEvent(SELL, -1), q, alpha)
                sells += 1
    assert worst < 1e-9, worst


def test_belief_csv_rows():
    rows = Belief.two_point(10, 12, 0.25).to_rows()
    assert rows == [(10, 0.25), (11, 0.0), (12, 0.75)]

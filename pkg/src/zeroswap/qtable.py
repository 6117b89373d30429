"""Model-free tabular quoting: trade-imbalance state, 9-action control.

The maker only observes trade directions. Its state is the windowed trade
imbalance, its action a pair (mid move, half-spread move) in {-1,0,+1}^2,
its reward penalizes squared imbalance and squared spread, and a one-step
TD rule updates the action-value table. One-step challenge checks audit
any claimed argmax or table update.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from .belief import Quote
from .env import TradeEvent

Action = tuple[int, int]

# Lexicographic enumeration of (mid move a1, spread move a2); column index
# of action (a1, a2) is (a1+1)*3 + (a2+1).
ACTIONS: tuple[Action, ...] = tuple(
    (a1, a2) for a1 in (-1, 0, 1) for a2 in (-1, 0, 1)
)


def action_index(action: Action) -> int:
    a1, a2 = action
    return (a1 + 1) * 3 + (a2 + 1)


@dataclass
class RLParams:
    """Exploration, learning-rate and reward-shaping constants.

    epsilon**t is the exploration probability at slot t, floored at
    epsilon_floor (when epsilon > 0) so exploration never fully stops.
    delta_max is fixed at one tick: each action component moves prices by
    at most one tick per slot.
    """

    epsilon: float = 0.999
    learning_rate: float = 0.1
    mu: float = 0.1
    discount: float = 0.99
    delta_max: int = 1
    epsilon_floor: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0,1]")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0,1]")
        if self.mu < 0.0:
            raise ValueError("mu must be >= 0")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must be in [0,1)")
        if self.delta_max != 1:
            raise ValueError("delta_max is fixed at 1 tick")


class QTable:
    """(2H+1) x 9 action values, rows indexed by imbalance n in {-H..H}."""

    def __init__(self, h: int):
        assert h >= 1
        self.h = h
        self.values = np.zeros((2 * h + 1, 9))

    def row(self, n: int) -> np.ndarray:
        assert -self.h <= n <= self.h, f"imbalance {n} outside +/-{self.h}"
        return self.values[n + self.h]

    def get(self, n: int, action: Action) -> float:
        return float(self.row(n)[action_index(action)])

    def save_csv(self, path) -> None:
        """Bit-exact snapshot (repr round-trips the float64 exactly)."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["n", "a1", "a2", "q"])
            for n in range(-self.h, self.h + 1):
                for a1, a2 in ACTIONS:
                    w.writerow([n, a1, a2, repr(self.get(n, (a1, a2)))])

    @classmethod
    def load_csv(cls, path) -> "QTable":
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        ns = [int(r["n"]) for r in rows]
        h = max(abs(min(ns)), abs(max(ns)))
        table = cls(h)
        for r in rows:
            n, a1, a2 = int(r["n"]), int(r["a1"]), int(r["a2"])
            table.row(n)[action_index((a1, a2))] = float(r["q"])
        return table


@dataclass
class MakerState:
    """Quoting state: mid price, half-spread, recent trade directions."""

    mid: float
    half_spread: float
    window: deque

    @classmethod
    def fresh(cls, p0: float, h: int) -> "MakerState":
        return cls(mid=float(p0), half_spread=0.0, window=deque(maxlen=h))


def imbalance(window) -> int:
    """Sum of recent trade directions; non-arrival slots contribute 0."""
    return int(sum(window))


def exploration_prob(params: RLParams, t: int) -> float:
    if params.epsilon == 0.0:
        return 0.0
    return max(params.epsilon**t, params.epsilon_floor)


def argmax_action(row: np.ndarray, rng: np.random.Generator) -> Action:
    """Greedy action; exact ties are broken uniformly at random."""
    best = np.flatnonzero(row == row.max())
    idx = int(best[0]) if len(best) == 1 else int(best[rng.integers(len(best))])
    return ACTIONS[idx]


def select_action(
    q: QTable, n: int, t: int, params: RLParams, rng: np.random.Generator
) -> Action:
    """Epsilon-decay exploration, otherwise the (tie-broken) argmax."""
    if rng.random() < exploration_prob(params, t):
        return ACTIONS[int(rng.integers(9))]
    return argmax_action(q.row(n), rng)


def apply_action(state: MakerState, action: Action) -> tuple[MakerState, Quote]:
    """Move mid and half-spread by one action; spread clamps at zero."""
    a1, a2 = action
    state.mid += a1
    state.half_spread = max(0.0, state.half_spread + a2)
    quote = Quote(ask=state.mid + state.half_spread, bid=state.mid - state.half_spread)
    return state, quote


def compute_reward(n: int, quote: Quote, mu: float) -> float:
    """-n^2 - mu*(ask-bid)^2: balanced flow at a tight spread is optimal."""
    return -float(n * n) - mu * quote.spread**2


def loss_oracle_reward(loss: float, quote: Quote, mu: float) -> float:
    """Baseline reward with oracle access to the realized monetary loss."""
    return -loss - mu * quote.spread**2


def td_update(
    q: QTable, n: int, action: Action, r: float, n_next: int, params: RLParams
) -> QTable:
    """One-step Q-learning update on exactly one table entry."""
    row = q.row(n)
    idx = action_index(action)
    target = r + params.discount * float(q.row(n_next).max())
    row[idx] += params.learning_rate * (target - row[idx])
    return q


def verify_argmax_claim(
    q: QTable, n: int, claimed: Action, challenger: Action
) -> bool:
    """One-step audit of a claimed argmax: valid iff strictly beaten.

    Ties are legitimate claims, so equality does not validate a challenge.
    """
    return q.get(n, challenger) > q.get(n, claimed)


def verify_update_claim(
    q_before: QTable,
    n: int,
    action: Action,
    r: float,
    n_next: int,
    params: RLParams,
    claimed_value: float,
    challenger: Action,
    tol: float = 1e-9,
) -> bool:
    """One-step audit of a claimed table update.

    Inverts the TD rule to recover the max-witness the claimed value
    implies, then checks whether the challenger's entry beats it beyond
    tol.
    """
    q_old = q_before.get(n, action)
    implied = ((claimed_value - q_old) / params.learning_rate - r + q_old) / params.discount
    return q_before.get(n_next, challenger) > implied + tol


class TabularMarketMaker:
    """Per-slot quoting policy wrapping the table, window and TD rule.

    reward_mode "imbalance" is the observable-only reward; "loss_oracle"
    is the baseline that reads the realized monetary loss (oracle access
    granted to it alone by the runner). audit=True records every
    exploitation choice and update for challenge-verification replays.

    bootstrap picks the row whose maximum seeds the TD target: "current"
    (the update rule as literally printed, which ranks a row's actions by
    their immediate expected reward and proved far more stable in long
    runs) or "next" (the textbook one-step target). Both go through the
    same td_update primitive; see the runner defaults.
    """

    def __init__(
        self,
        h: int,
        params: RLParams,
        p0: float,
        rng: np.random.Generator,
        reward_mode: str = "imbalance",
        bootstrap: str = "current",
        audit: bool = False,
    ):
        assert reward_mode in ("imbalance", "loss_oracle")
        assert bootstrap in ("current", "next")
        self.h = h
        self.params = params
        self.rng = rng
        self.reward_mode = reward_mode
        self.bootstrap = bootstrap
        self.table = QTable(h)
        self.state = MakerState.fresh(p0, h)
        self.audit = audit
        self.argmax_log: list[dict] = []
        self.update_log: list[dict] = []
        self._pending: tuple[int, Action] | None = None
        self._last_quote: Quote | None = None

    def quote(self, t: int) -> Quote:
        n = imbalance(self.state.window)
        explored = self.rng.random() < exploration_prob(self.params, t)
        if explored:
            action = ACTIONS[int(self.rng.integers(9))]
        else:
            action = argmax_action(self.table.row(n), self.rng)
            if self.audit:
                self.argmax_log.append(
                    {"t": t, "n": n, "action": action, "row": self.table.row(n).copy()}
                )
        self._pending = (n, action)
        self.state, self._last_quote = apply_action(self.state, action)
        return self._last_quote

    def observe(self, event: TradeEvent, loss: float = 0.0) -> float:
        n, action = self._pending
        self.state.window.append(event.d)
        n_next = imbalance(self.state.window)
        if self.reward_mode == "loss_oracle":
            r = loss_oracle_reward(loss, self._last_quote, self.params.mu)
        else:
            r = compute_reward(n_next, self._last_quote, self.params.mu)
        target_row = n if self.bootstrap == "current" else n_next
        if self.audit:
            self.update_log.append(
                {
                    "n": n,
                    "action": action,
                    "r": r,
                    "n_next": target_row,
                    "q_old": self.table.get(n, action),
                    "next_row": self.table.row(target_row).copy(),
                }
            )
        td_update(self.table, n, action, r, target_row, self.params)
        return r

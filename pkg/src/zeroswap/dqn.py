"""Value-network variant of the imbalance maker for noisy-observation flow.

Replaces the lookup table with a small dense rectifier network that reads
the raw trade-direction window (oldest first) and scores the same 9
actions. Training is one-step TD on minibatches from a FIFO replay buffer.
Everything is double precision and hand-rolled so analytic gradients can
be checked against central differences.
"""
from __future__ import annotations

import struct
from collections import deque

import numpy as np

from .belief import Quote
from .env import TradeEvent
from .qtable import (
    ACTIONS,
    Action,
    MakerState,
    RLParams,
    action_index,
    apply_action,
    compute_reward,
    exploration_prob,
    imbalance,
)

N_ACTIONS = 9


class NonFiniteLoss(RuntimeError):
    """Training loss became non-finite; the run aborts."""


class ValueNet:
    """Dense rectifier network: input -> hidden layers -> 9 action values."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights
        self.biases = biases

    @classmethod
    def create(
        cls,
        input_dim: int,
        hidden: tuple[int, ...] = (64, 64),
        rng: np.random.Generator | None = None,
    ) -> "ValueNet":
        rng = rng or np.random.default_rng()
        dims = (input_dim, *hidden, N_ACTIONS)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def copy(self) -> "ValueNet":
        return ValueNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Deterministic forward pass; accepts (in,) or (batch, in)."""
        a = np.atleast_2d(np.asarray(x, dtype=float))
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                a = np.maximum(a, 0.0)
        return a[0] if np.ndim(x) == 1 else a


def encode_state(window) -> np.ndarray:
    """Identity embedding of the trade window as reals, oldest first."""
    x = np.array(window, dtype=float)
    assert np.isin(x, (-1.0, 0.0, 1.0)).all()
    return x


def q_forward(net: ValueNet, x: np.ndarray) -> np.ndarray:
    """Action values for one encoded window."""
    return net.forward(np.asarray(x, dtype=float))


def act_epsilon_greedy(
    net: ValueNet, window, t: int, params: RLParams, rng: np.random.Generator
) -> Action:
    """Same epsilon**t schedule and uniform tie-break as the tabular maker."""
    if rng.random() < exploration_prob(params, t):
        return ACTIONS[int(rng.integers(N_ACTIONS))]
    q = q_forward(net, encode_state(window))
    best = np.flatnonzero(q == q.max())
    idx = int(best[0]) if len(best) == 1 else int(best[rng.integers(len(best))])
    return ACTIONS[idx]


class ReplayBuffer:
    """FIFO store of (window, action index, reward, next window) tuples.

    A ring list rather than a deque so uniform sampling stays O(batch).
    """

    def __init__(self, capacity: int):
        assert capacity >= 1
        self.capacity = capacity
        self._entries: list = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, x: np.ndarray, a_idx: int, r: float, x_next: np.ndarray) -> None:
        entry = (x, a_idx, r, x_next)
        if len(self._entries) < self.capacity:
            self._entries.append(entry)
        else:
            self._entries[self._next] = entry  # overwrite oldest
        self._next = (self._next + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int):
        """Uniform minibatch (with replacement) as stacked arrays."""
        assert len(self) >= 1
        idx = rng.integers(0, len(self._entries), size=batch_size)
        xs, acts, rs, xns = zip(*(self._entries[i] for i in idx))
        return (
            np.stack(xs),
            np.array(acts, dtype=int),
            np.array(rs, dtype=float),
            np.stack(xns),
        )


def td_loss_given_targets(
    net: ValueNet, x: np.ndarray, a_idx: np.ndarray, targets: np.ndarray
) -> float:
    """Mean squared TD error with the targets held fixed."""
    q = net.forward(x)
    picked = q[np.arange(len(a_idx)), a_idx]
    return float(np.mean((picked - targets) ** 2))


def td_loss_gradients(
    net: ValueNet, x: np.ndarray, a_idx: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Loss and its gradient w.r.t. every parameter (targets fixed)."""
    batch = len(a_idx)
    acts = [np.atleast_2d(x)]
    zs = []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        zs.append(z)
        acts.append(np.maximum(z, 0.0) if i < last else z)
    out = acts[-1]
    picked = out[np.arange(batch), a_idx]
    err = picked - targets
    loss = float(np.mean(err**2))
    delta = np.zeros_like(out)
    delta[np.arange(batch), a_idx] = 2.0 * err / batch
    grads: list[np.ndarray] = []
    for i in range(last, -1, -1):
        grads.append(delta.sum(axis=0))  # bias
        grads.append(acts[i].T @ delta)  # weight
        if i > 0:
            delta = (delta @ net.weights[i].T) * (zs[i - 1] > 0.0)
    grads.reverse()  # now [W0, b0, W1, b1, ...]
    return loss, grads


def train_step(
    net: ValueNet,
    batch,
    params: RLParams,
    lr: float = 1e-3,
    target_net: ValueNet | None = None,
    max_grad_norm: float | None = None,
) -> ValueNet:
    """One SGD step on the mean squared TD error of a replay minibatch.

    Targets are r + discount * max_a' Q(x', a'), evaluated on target_net
    when given (frozen-target variant) and on net itself otherwise.
    max_grad_norm rescales the joint gradient when its norm exceeds the
    bound (standard stabilization for bootstrapped value regression).
    """
    x, a_idx, r, x_next = batch
    assert len(a_idx) >= 1
    scorer = target_net if target_net is not None else net
    targets = r + params.discount * scorer.forward(x_next).max(axis=1)
    loss, grads = td_loss_gradients(net, x, a_idx, targets)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"TD loss is {loss}")
    if max_grad_norm is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > max_grad_norm:
            scale = max_grad_norm / norm
            grads = [g * scale for g in grads]
    for p, g in zip(net.parameters(), grads):
        p -= lr * g
    return net


_MAGIC = b"ZSNET001"


def save_net(net: ValueNet, path) -> None:
    """Flat binary snapshot, little-endian.

    Layout: 8-byte magic, uint32 layer-size count, uint32 sizes
    (input, hidden..., output), then per layer the weight matrix
    (row-major float64) followed by the bias vector.
    """
    dims = net.dims
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(dims)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_net(path) -> ValueNet:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != _MAGIC:
        raise ValueError("not a value-net snapshot")
    (count,) = struct.unpack_from("<I", raw, 8)
    dims = struct.unpack_from(f"<{count}I", raw, 12)
    off = 12 + 4 * count
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    return ValueNet(weights, biases)


class DqnMarketMaker:
    """Quoting policy with the network in place of the table.

    The observable window holds the last H+1 trade directions (the
    network input dimension). train=False freezes the parameters for
    evaluation runs. Targets use a frozen copy refreshed every
    target_refresh updates (0 falls back to plain single-network TD,
    which diverges on this stream); rewards are divided by H^2 for the
    regression only and the joint gradient is norm-clipped, both plain
    numerical conditioning that leaves the greedy policy unchanged.
    """

    def __init__(
        self,
        h: int,
        params: RLParams,
        p0: float,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (64, 64),
        lr: float = 1e-3,
        replay_capacity: int = 10_000,
        batch_size: int = 32,
        target_refresh: int = 500,
        steps_per_slot: int = 1,
        net: ValueNet | None = None,
        train: bool = True,
    ):
        self.h = h
        self.params = params
        self.rng = rng
        self.lr = lr
        self.batch_size = batch_size
        self.target_refresh = target_refresh
        self.steps_per_slot = steps_per_slot
        self.max_grad_norm = 10.0
        self.train = train
        self.net = net if net is not None else ValueNet.create(h + 1, hidden, rng)
        self.target_net = self.net.copy() if target_refresh > 0 else None
        self.replay = ReplayBuffer(replay_capacity)
        self.state = MakerState.fresh(p0, h=1)  # window kept separately
        self.window = deque([0] * (h + 1), maxlen=h + 1)
        # Rewards are scaled into O(1) for the regression only (recorded
        # rewards stay canonical); pure numerical conditioning, the greedy
        # policy is invariant to a positive rescaling of Q.
        self.reward_scale = float(h * h)
        self._updates = 0
        self._pending: tuple[np.ndarray, Action] | None = None
        self._last_quote: Quote | None = None

    def quote(self, t: int) -> Quote:
        x = encode_state(self.window)
        action = act_epsilon_greedy(self.net, self.window, t, self.params, self.rng)
        self._pending = (x, action)
        self.state, self._last_quote = apply_action(self.state, action)
        return self._last_quote

    def observe(self, event: TradeEvent, loss: float = 0.0) -> float:
        x, action = self._pending
        self.window.append(event.d)
        x_next = encode_state(self.window)
        r = compute_reward(imbalance(self.window), self._last_quote, self.params.mu)
        if self.train:
            self.replay.push(x, action_index(action), r / self.reward_scale, x_next)
            if len(self.replay) >= self.batch_size:
                for _ in range(self.steps_per_slot):
                    batch = self.replay.sample(self.rng, self.batch_size)
                    train_step(
                        self.net, batch, self.params, self.lr, self.target_net,
                        max_grad_norm=self.max_grad_norm,
                    )
                    self._updates += 1
                    if (
                        self.target_refresh > 0
                        and self._updates % self.target_refresh == 0
                    ):
                        self.target_net = self.net.copy()
        return r

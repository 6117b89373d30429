"""Experiment orchestration: config, run loop, seed sweeps, CSV emission.

A run is fully determined by (config, seed): one seeded generator drives
the hidden price, the trader draws and the policy's exploration, so the
emitted CSV is byte-identical across repetitions. Multi-seed runs derive
run_seed = base_seed + run_index so any single run can be reproduced in
isolation.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import belief as bl
from . import dqn as dq
from . import env as ev
from . import metrics as mt
from . import qtable as qt

log = logging.getLogger("zeroswap")

POLICIES = ("bayes", "qtable", "dqn", "oracle")
SCENARIOS = ("fixed", "jump", "drifting", "noisy_trader")

RUN_CSV_HEADER = ["t", "p_ext", "ask", "bid", "event", "d", "loss", "reward"]
STATS_CSV_HEADER = [
    "alpha",
    "sigma",
    "lambda",
    "policy",
    "pct_loss_mean",
    "pct_loss_std",
    "spread_mean",
    "middev_mean",
    "seeds",
]


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    """Config file is missing or not valid TOML."""


class ValidationError(ConfigError):
    """A config value is out of range or unknown; names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    policy: str = "bayes"
    scenario: str = "fixed"
    alpha: float = 0.9
    sigma: float = 0.5
    arrival_rate: float = 1.0
    mu: float = 0.1
    epsilon: float = 0.999
    epsilon_floor: float = 0.01
    learning_rate: float = 0.1
    discount: float = 0.99
    h: int = 10
    bootstrap: str = "current"
    noise_family: str = "none"
    noise_scale: float | None = None
    t_slots: int = 100_000
    seeds: int = 50
    seed: int = 0
    jump_size: int = 20
    jump_at: int = 0
    jump_prior: float = 0.5
    drift_step: float = 0.01
    p0: int = 2000
    net_lr: float = 1e-3
    net_hidden: tuple[int, ...] = (64, 64)
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_refresh: int = 0
    workers: int = 1
    out_dir: str = "out"

    def rl_params(self) -> qt.RLParams:
        return qt.RLParams(
            epsilon=self.epsilon,
            learning_rate=self.learning_rate,
            mu=self.mu,
            discount=self.discount,
            epsilon_floor=self.epsilon_floor,
        )


# TOML key -> (attribute, coercion); "T" is the horizon key in files.
_CONFIG_KEYS = {
    "policy": ("policy", str),
    "scenario": ("scenario", str),
    "alpha": ("alpha", float),
    "sigma": ("sigma", float),
    "arrival_rate": ("arrival_rate", float),
    "mu": ("mu", float),
    "epsilon": ("epsilon", float),
    "epsilon_floor": ("epsilon_floor", float),
    "learning_rate": ("learning_rate", float),
    "discount": ("discount", float),
    "bootstrap": ("bootstrap", str),
    "H": ("h", int),
    "noise_family": ("noise_family", str),
    "noise_scale": ("noise_scale", float),
    "T": ("t_slots", int),
    "seeds": ("seeds", int),
    "seed": ("seed", int),
    "jump_size": ("jump_size", int),
    "jump_at": ("jump_at", int),
    "jump_prior": ("jump_prior", float),
    "drift_step": ("drift_step", float),
    "p0": ("p0", int),
    "net_lr": ("net_lr", float),
    "replay_capacity": ("replay_capacity", int),
    "batch_size": ("batch_size", int),
    "target_refresh": ("target_refresh", int),
    "workers": ("workers", int),
    "out_dir": ("out_dir", str),
}

_SWEEP_KEYS = ("alpha", "sigma", "arrival_rate", "policy")


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def check(key: str, ok: bool, msg: str) -> None:
        if not ok:
            raise ValidationError(key, msg)

    check("policy", cfg.policy in POLICIES, f"must be one of {POLICIES}")
    check("scenario", cfg.scenario in SCENARIOS, f"must be one of {SCENARIOS}")
    check("alpha", 0.0 <= cfg.alpha <= 1.0, "must be in [0,1]")
    check("sigma", 0.0 <= cfg.sigma <= 1.0, "must be in [0,1]")
    check("arrival_rate", 0.0 <= cfg.arrival_rate <= 1.0, "must be in [0,1]")
    check("mu", cfg.mu >= 0.0, "must be >= 0")
    check("epsilon", 0.0 <= cfg.epsilon <= 1.0, "must be in [0,1]")
    check("epsilon_floor", 0.0 <= cfg.epsilon_floor <= 1.0, "must be in [0,1]")
    check("learning_rate", 0.0 < cfg.learning_rate <= 1.0, "must be in (0,1]")
    check("discount", 0.0 <= cfg.discount < 1.0, "must be in [0,1)")
    check("H", cfg.h >= 1, "must be >= 1")
    check("bootstrap", cfg.bootstrap in ("current", "next"), "must be current or next")
    check(
        "noise_family",
        cfg.noise_family in ev.NOISE_FAMILIES,
        f"must be one of {ev.NOISE_FAMILIES}",
    )
    check("T", cfg.t_slots >= 0, "must be >= 0")
    check("seeds", cfg.seeds >= 1, "must be >= 1")
    check("jump_prior", 0.0 <= cfg.jump_prior <= 1.0, "must be in [0,1]")
    check("drift_step", cfg.drift_step >= 0.0, "must be >= 0")
    check("p0", cfg.p0 > 0 or cfg.arrival_rate == 0.0, "must be > 0 for trading runs")
    check("workers", cfg.workers >= 1, "must be >= 1")
    if cfg.scenario == "noisy_trader" and cfg.noise_family == "none":
        log.info("noisy_trader scenario with no noise family; defaulting to gaussian")
        cfg.noise_family = "gaussian"
    if cfg.scenario == "jump":
        check("jump_size", cfg.jump_size != 0, "must be nonzero for the jump scenario")
    return cfg


def config_from_mapping(data: dict, source: str = "<dict>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, value in data.items():
        if key == "sweep":
            continue  # handled by load_sweep
        if key not in _CONFIG_KEYS:
            raise ValidationError(key, f"unknown key in {source}")
        attr, cast = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, cast(value))
        except (TypeError, ValueError) as exc:
            raise ValidationError(key, f"bad value {value!r}: {exc}") from exc
    if "T" not in data:
        log.info("T not given in %s; defaulting to %d slots", source, cfg.t_slots)
    return _validate(cfg)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a TOML config; overrides beat file values."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as exc:
        raise ParseError(f"config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed TOML in {path}: {exc}") from exc
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(data, source=str(path))


@dataclass
class SweepSpec:
    """Grid over alpha / sigma / arrival_rate / policy around a base config."""

    base: ExperimentConfig
    grid: dict = field(default_factory=dict)

    def cells(self) -> list[ExperimentConfig]:
        keys = [k for k in _SWEEP_KEYS if k in self.grid]
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            cfg = dataclasses.replace(self.base)
            for k, v in zip(keys, combo):
                setattr(cfg, k, type(getattr(cfg, k))(v))
            out.append(_validate(cfg))
        return out


def load_sweep(path, overrides: dict | None = None) -> SweepSpec:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as exc:
        raise ParseError(f"config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed TOML in {path}: {exc}") from exc
    raw = data.get("sweep")
    if not raw:
        raise ValidationError("sweep", "missing or empty [sweep] table")
    for key, values in raw.items():
        if key not in _SWEEP_KEYS:
            raise ValidationError(key, f"cannot sweep over this key (allowed: {_SWEEP_KEYS})")
        if not isinstance(values, list) or not values:
            raise ValidationError(key, "sweep values must be a nonempty list")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    base = config_from_mapping(data, source=str(path))
    return SweepSpec(base=base, grid=raw)


def make_driver(cfg: ExperimentConfig) -> ev.ScenarioDriver:
    if cfg.scenario == "jump":
        return ev.ScenarioDriver("single_jump", size=cfg.jump_size, at=cfg.jump_at)
    if cfg.scenario == "drifting":
        return ev.ScenarioDriver("drifting", step=cfg.drift_step)
    return ev.ScenarioDriver("fixed")


def make_prior(cfg: ExperimentConfig) -> bl.Belief:
    """Known initial price, or the two-point jump distribution for jumps."""
    if cfg.scenario == "jump" and cfg.jump_at == 0:
        lo = min(cfg.p0, cfg.p0 + cfg.jump_size)
        hi = max(cfg.p0, cfg.p0 + cfg.jump_size)
        w_lo = 1.0 - cfg.jump_prior if cfg.jump_size > 0 else cfg.jump_prior
        return bl.Belief.two_point(lo, hi, w_lo)
    return bl.Belief.degenerate(cfg.p0)


def make_policy(cfg: ExperimentConfig, params: ev.MarketParams, rng: np.random.Generator):
    if cfg.policy == "bayes":
        return bl.BayesianMarketMaker(make_prior(cfg), params)
    if cfg.policy in ("qtable", "oracle"):
        mode = "loss_oracle" if cfg.policy == "oracle" else "imbalance"
        return qt.TabularMarketMaker(
            cfg.h, cfg.rl_params(), cfg.p0, rng,
            reward_mode=mode, bootstrap=cfg.bootstrap,
        )
    return dq.DqnMarketMaker(
        cfg.h,
        cfg.rl_params(),
        cfg.p0,
        rng,
        hidden=cfg.net_hidden,
        lr=cfg.net_lr,
        replay_capacity=cfg.replay_capacity,
        batch_size=cfg.batch_size,
        target_refresh=cfg.target_refresh,
    )


def run_experiment(
    cfg: ExperimentConfig, seed: int, policy=None
) -> mt.RunRecord:
    """Execute one seeded run and return its full per-slot record.

    Per slot: scenario driver, policy quotes, deterministic arrival and
    trader decision, policy observe/learn, record, hidden price step.
    A pre-built policy may be passed in (evaluation of a trained net);
    model errors are re-raised with the slot index attached.
    """
    rng = np.random.default_rng(seed)
    params = ev.MarketParams(cfg.alpha, cfg.sigma, cfg.arrival_rate)
    state = ev.MarketState(p_ext=cfg.p0, params=params, rng=rng)
    driver = make_driver(cfg)
    noise = ev.TraderNoise(cfg.noise_family, cfg.noise_scale)
    if policy is None:
        policy = make_policy(cfg, params, rng)
    elif isinstance(policy, bl.BayesianMarketMaker):
        policy.params = params
    n = cfg.t_slots
    col_t = np.arange(n, dtype=int)
    col_p = np.empty(n, dtype=int)
    col_ask = np.empty(n)
    col_bid = np.empty(n)
    col_event: list[str] = []
    col_d = np.empty(n, dtype=int)
    col_loss = np.empty(n)
    col_reward = np.empty(n)
    for t in range(n):
        ev.scenario_advance(driver, state)
        quote = policy.quote(t)
        if ev.arrival_at(t, params.arrival_rate):
            event = ev.trader_decision(state.p_ext, quote, params, noise, rng)
        else:
            event = ev.TradeEvent(ev.NO_TRADER, 0)
        loss = mt.monetary_loss(state.p_ext, quote, event)
        try:
            reward = policy.observe(event, loss=loss)
        except (bl.ZeroLikelihood, dq.NonFiniteLoss) as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc}  [slot {t}]",)
            exc.slot = t
            raise
        col_p[t] = state.p_ext
        col_ask[t] = quote.ask
        col_bid[t] = quote.bid
        col_event.append(event.kind)
        col_d[t] = event.d
        col_loss[t] = loss
        col_reward[t] = reward
        ev.step_price(state)
    return mt.RunRecord(
        t=col_t,
        p_ext=col_p,
        ask=col_ask,
        bid=col_bid,
        event=col_event,
        d=col_d,
        loss=col_loss,
        reward=col_reward,
    )


def _summarize_seed(args) -> tuple[mt.SeedSummary, np.ndarray | None]:
    cfg, seed, keep_spread = args
    record = run_experiment(cfg, seed)
    spread = record.spread() if keep_spread else None
    return mt.SeedSummary.from_record(record, seed), spread


def run_seed_summaries(
    cfg: ExperimentConfig,
    seeds: list[int] | None = None,
    keep_spread: bool = False,
) -> tuple[list[mt.SeedSummary], np.ndarray | None]:
    """Run many seeds, returning per-seed reductions (and the summed
    spread series when keep_spread is set). Honors cfg.workers."""
    if seeds is None:
        seeds = [cfg.seed + i for i in range(cfg.seeds)]
    jobs = [(cfg, s, keep_spread) for s in seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_summarize_seed, jobs))
    else:
        results = [_summarize_seed(j) for j in jobs]
    summaries = [r[0] for r in results]
    spread_sum = None
    if keep_spread:
        spread_sum = np.sum([r[1] for r in results], axis=0)
    return summaries, spread_sum


def run_cell_stats(cfg: ExperimentConfig) -> mt.AggregateStats:
    summaries, _ = run_seed_summaries(cfg)
    return mt.aggregate_stats(
        cfg.alpha, cfg.sigma, cfg.arrival_rate, cfg.policy, summaries
    )


def run_sweep(spec: SweepSpec) -> list[mt.AggregateStats]:
    """One stats row per grid cell per policy, in deterministic grid order."""
    return [run_cell_stats(cell) for cell in spec.cells()]


def emit_csv(record: mt.RunRecord, path) -> None:
    """RunRecord CSV: full decimal precision, newline-terminated, UTF-8."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RUN_CSV_HEADER)
        for i in range(len(record)):
            w.writerow(
                [
                    int(record.t[i]),
                    int(record.p_ext[i]),
                    repr(float(record.ask[i])),
                    repr(float(record.bid[i])),
                    record.event[i],
                    int(record.d[i]),
                    repr(float(record.loss[i])),
                    repr(float(record.reward[i])),
                ]
            )


def load_run_csv(path) -> mt.RunRecord:
    """Inverse of emit_csv (exact round-trip)."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return mt.RunRecord(
        t=np.array([int(r["t"]) for r in rows], dtype=int),
        p_ext=np.array([int(r["p_ext"]) for r in rows], dtype=int),
        ask=np.array([float(r["ask"]) for r in rows]),
        bid=np.array([float(r["bid"]) for r in rows]),
        event=[r["event"] for r in rows],
        d=np.array([int(r["d"]) for r in rows], dtype=int),
        loss=np.array([float(r["loss"]) for r in rows]),
        reward=np.array([float(r["reward"]) for r in rows]),
    )


def emit_stats_csv(rows: list[mt.AggregateStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(STATS_CSV_HEADER)
        for s in rows:
            w.writerow(
                [
                    repr(float(s.alpha)),
                    repr(float(s.sigma)),
                    repr(float(s.arrival_rate)),
                    s.policy,
                    repr(float(s.pct_loss_mean)),
                    repr(float(s.pct_loss_std)),
                    repr(float(s.spread_mean)),
                    repr(float(s.middev_mean)),
                    int(s.seeds),
                ]
            )


def preset_path(name: str) -> Path:
    """Resolve a shipped named preset (fig_fixed, fig_jump, ...)."""
    p = Path(__file__).parent / "presets" / f"{name}.toml"
    if not p.exists():
        raise ParseError(f"unknown preset {name!r}")
    return p

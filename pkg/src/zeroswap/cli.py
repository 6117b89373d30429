"""Command-line entry points: run, sweep, verify.

Exit codes: 0 success, 1 config/validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import experiment as xp
from . import qtable as qt


def _config_path(value: str) -> Path:
    p = Path(value)
    if p.exists():
        return p
    if value.isidentifier():  # shipped preset name such as fig_fixed
        return xp.preset_path(value)
    raise xp.ParseError(f"config not found: {value}")


def _cmd_run(args) -> int:
    overrides = {"policy": args.policy, "scenario": args.scenario}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.slots is not None:
        overrides["T"] = args.slots
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    cfg = xp.load_config(_config_path(args.config), overrides)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for i in range(cfg.seeds):
        seed = cfg.seed + i
        record = xp.run_experiment(cfg, seed)
        path = out / f"run_{cfg.policy}_{cfg.scenario}_seed{seed}.csv"
        xp.emit_csv(record, path)
        summaries.append(xp.mt.SeedSummary.from_record(record, seed))
        logging.info("wrote %s", path)
    stats = xp.mt.aggregate_stats(
        cfg.alpha, cfg.sigma, cfg.arrival_rate, cfg.policy, summaries
    )
    xp.emit_stats_csv([stats], out / "stats.csv")
    logging.info("wrote %s", out / "stats.csv")
    return 0


def _cmd_sweep(args) -> int:
    spec = xp.load_sweep(_config_path(args.config))
    rows = xp.run_sweep(spec)
    out = Path(args.out or spec.base.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    xp.emit_stats_csv(rows, out / "stats.csv")
    logging.info("wrote %s (%d cells)", out / "stats.csv", len(rows))
    return 0


_CLAIM_FIELDS = [
    "kind",
    "n",
    "a1",
    "a2",
    "r",
    "n_next",
    "claimed_a1",
    "claimed_a2",
    "claimed_value",
    "chal_a1",
    "chal_a2",
]


def _cmd_verify(args) -> int:
    """Replay one-step challenge checks against a Q-table snapshot.

    The claims CSV has columns kind,n,a1,a2,r,n_next,claimed_a1,
    claimed_a2,claimed_value,chal_a1,chal_a2. kind=argmax uses n plus
    the claimed and challenger actions; kind=update uses n, the updated
    action (a1,a2), r, n_next, the claimed new value and the challenger.
    One verdict line per claim is printed: index,kind,valid|invalid.
    """
    table = qt.QTable.load_csv(args.qtable)
    params = qt.RLParams(learning_rate=args.learning_rate, discount=args.discount)
    with open(args.claims, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in _CLAIM_FIELDS if c not in (reader.fieldnames or [])]
        if missing:
            raise xp.ValidationError(missing[0], "missing claims CSV column")
        for i, row in enumerate(reader):
            kind = row["kind"]
            n = int(row["n"])
            challenger = (int(row["chal_a1"]), int(row["chal_a2"]))
            if kind == "argmax":
                claimed = (int(row["claimed_a1"]), int(row["claimed_a2"]))
                valid = qt.verify_argmax_claim(table, n, claimed, challenger)
            elif kind == "update":
                action = (int(row["a1"]), int(row["a2"]))
                valid = qt.verify_update_claim(
                    table,
                    n,
                    action,
                    float(row["r"]),
                    int(row["n_next"]),
                    params,
                    float(row["claimed_value"]),
                    challenger,
                )
            else:
                raise xp.ValidationError("kind", f"unknown claim kind {kind!r}")
            print(f"{i},{kind},{'valid' if valid else 'invalid'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zeroswap",
        description="Market-making simulation lab: run experiments, sweeps and challenge replays.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config across its seeds")
    run.add_argument("--config", required=True, help="TOML path or preset name")
    run.add_argument("--seed", type=int, help="base seed (overrides config)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--policy", choices=xp.POLICIES)
    run.add_argument("--scenario", choices=xp.SCENARIOS)
    run.add_argument("--slots", type=int, help="horizon override (T)")
    run.add_argument("--seeds", type=int, help="seed count override")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run a [sweep] grid and emit stats.csv")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out")
    sweep.set_defaults(func=_cmd_sweep)

    verify = sub.add_parser("verify", help="replay challenge checks on a Q-table snapshot")
    verify.add_argument("--qtable", required=True)
    verify.add_argument("--claims", required=True)
    verify.add_argument("--learning-rate", type=float, default=0.1)
    verify.add_argument("--discount", type=float, default=0.99)
    verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except xp.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

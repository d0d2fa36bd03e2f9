"""Command-line entry point.

Subcommands: ``run``, ``equalize``, ``lowerbound`` and ``oracles``. A YAML
config file supplies defaults; command-line flags override it. Every CSV
starts with one ``#`` line echoing the resolved config and the package
version, followed by a single header line.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime errors.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from . import __version__
from .adversaries import make_strategy
from .analytics import (
    balls_bins_oracle,
    cannot_affect_check,
    equalizing_experiment,
    isolation_probability,
    onion_cost,
    pairs_expectation_oracle,
    write_csv,
    zeta_recursion,
)
from .engine import run
from .errors import ConfigError
from .inputs import SimpleInput, random_simple_input
from .protocols import make_protocol
from .seeding import stream_rng

log = logging.getLogger("onionsim")

DEFAULT_PARAMS = {
    "pibfly": {"n_parties": 16, "chi": 4, "d": 4, "iterations": 4, "kappa": 0.25, "lam": 16},
    "pitree": {"n_parties": 16, "chi": 4, "d": 2, "kappa": 0.25, "lam": 16, "threshold": 1},
    "strawman": {"n_parties": 16, "alpha_hops": 1, "kappa": 0.25},
}

ORACLES = ("pairs", "bins", "zeta", "isolation")


def parse_adversary(text: str) -> Dict[str, Any]:
    """``name`` or ``name:key=value,key=value`` (values parsed as YAML scalars)."""
    name, _, rest = text.partition(":")
    spec: Dict[str, Any] = {"name": name}
    for item in filter(None, re.split(r",(?=\w+=)", rest)):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad adversary parameter {item!r}")
        try:
            spec[key] = yaml.safe_load(value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad value for adversary parameter {key!r}: {value!r}") from exc
    return spec


def load_config(args: argparse.Namespace) -> Dict[str, Any]:
    cfg: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a mapping")
    cfg = copy.deepcopy(cfg)
    if args.protocol:
        cfg["protocol"] = args.protocol
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.out:
        cfg["out"] = args.out
    if args.adversary:
        cfg["adversary"] = parse_adversary(args.adversary)
    if args.oracle_mode:
        cfg["oracle_mode"] = True

    cfg.setdefault("protocol", "pibfly")
    cfg.setdefault("seed", 0)
    cfg.setdefault("out", "out")
    cfg.setdefault("oracle_mode", False)
    adv = cfg.get("adversary", "passive")
    cfg["adversary"] = parse_adversary(adv) if isinstance(adv, str) else dict(adv)
    proto = str(cfg["protocol"]).lower()
    if proto not in DEFAULT_PARAMS:
        raise ConfigError(f"unknown protocol {cfg['protocol']!r}")
    cfg["protocol"] = proto
    cfg["params"] = {**DEFAULT_PARAMS[proto], **(cfg.get("params") or {})}
    cfg["version"] = __version__
    return cfg


def build_protocol(cfg: Dict[str, Any]):
    try:
        proto = make_protocol(cfg["protocol"], **cfg["params"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad protocol parameters: {exc}") from exc
    proto.validate()
    return proto


def build_adversary(cfg: Dict[str, Any]):
    spec = dict(cfg["adversary"])
    name = spec.pop("name", "passive")
    try:
        strategy = make_strategy(name, **spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad adversary parameters for {name!r}: {exc}") from exc
    if strategy.mode == "oracle" and not cfg["oracle_mode"]:
        raise ConfigError(f"adversary {name!r} reads ground truth; pass --oracle-mode to allow it")
    return strategy


def build_input(cfg: Dict[str, Any], n_parties: int) -> SimpleInput:
    spec = cfg.get("input") or {}
    if "permutation" in spec:
        return SimpleInput.from_permutation(spec["permutation"], spec.get("messages"))
    return random_simple_input(n_parties, stream_rng(cfg["seed"], "input"))


def _echo(cfg: Dict[str, Any]) -> str:
    return "config " + json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def cmd_run(cfg: Dict[str, Any]) -> None:
    proto = build_protocol(cfg)
    strategy = build_adversary(cfg)
    inputs = build_input(cfg, proto.n_parties)
    tr = run(proto, inputs, strategy, cfg["seed"])
    cost = onion_cost(tr)
    out = Path(cfg["out"])
    _write(out, "transcript.jsonl", tr.to_jsonl())
    columns = ("protocol", "seed", "rounds", "deliveries", "aborts", "drops", "merges") + cost.columns
    row = [cfg["protocol"], cfg["seed"], tr.rounds, len(tr.message_deliveries()), len(tr.aborted_parties()),
           len(tr.drops), len(tr.merges)] + cost.rows()[0]
    text = write_csv(columns, [row], _echo(cfg))
    _write(out, "summary.csv", text)
    print(text, end="")


def cmd_equalize(cfg: Dict[str, Any]) -> None:
    proto = build_protocol(cfg)
    strategy = build_adversary(cfg)
    inputs = build_input(cfg, proto.n_parties)
    eq = cfg.get("equalize") or {}
    trials = int(cfg.get("trials", 100))
    report = equalizing_experiment(proto, strategy, inputs, int(eq.get("i", 1)), int(eq.get("j", 2)), trials,
                                   cfg["seed"], int(eq.get("bootstrap", 200)))
    text = report.to_csv(_echo(cfg))
    _write(Path(cfg["out"]), "equalize.csv", text)
    print(text, end="")


def cmd_lowerbound(cfg: Dict[str, Any]) -> None:
    """Strawman isolation pipeline: sampling probability, the route check and the
    conditional received counts under both inputs."""
    if cfg["protocol"] != "strawman":
        raise ConfigError("the lower-bound demo runs on the strawman protocol")
    lb = cfg.get("lowerbound") or {}
    i, j = int(lb.get("i", 1)), int(lb.get("j", 2))
    cfg["adversary"] = {"name": "isolating", "target": i}
    proto = build_protocol(cfg)
    inputs = build_input(cfg, proto.n_parties)
    trials = int(cfg.get("trials", 300))
    sample = int(lb.get("sample_size", proto.alpha_hops))
    iso = isolation_probability(proto.n_parties, proto.kappa, sample, int(lb.get("sampling_trials", 100000)),
                                cfg["seed"])
    mean_hops, unaffected = cannot_affect_check(proto, build_adversary(cfg), inputs, i, j,
                                                int(lb.get("route_trials", 100)), cfg["seed"])
    report = equalizing_experiment(proto, build_adversary(cfg), inputs, i, j, trials, cfg["seed"])
    columns = ("input", "i", "j", "r", "trials", "isolated_runs", "p_v_r_zero_given_isolated",
               "p_v_r_positive_given_isolated", "mean_hops_j_via_i", "cannot_affect", "sample_size",
               "p_exact", "p_empirical", "kappa_power")
    rows = []
    for b in (0, 1):
        zero, pos = report.zero_given_isolated[b], report.positive_given_isolated[b]
        rows.append([f"sigma{b}", i, j, report.r, trials, report.isolated[b],
                     "" if zero is None else f"{zero:.6g}", "" if pos is None else f"{pos:.6g}",
                     f"{mean_hops:.6g}", str(unaffected).lower(), sample, str(iso.exact),
                     f"{iso.empirical:.8g}", f"{iso.kappa_power:.8g}"])
    text = write_csv(columns, rows, _echo(cfg))
    _write(Path(cfg["out"]), "lowerbound.csv", text)
    print(text, end="")


def cmd_oracles(cfg: Dict[str, Any], which: str) -> None:
    if which not in ORACLES:
        raise ConfigError(f"unknown oracle {which!r}; choose from {', '.join(ORACLES)}")
    spec = (cfg.get("oracles") or {}).get(which) or {}
    seed = cfg["seed"]
    trials = int(cfg.get("trials", spec.get("trials", 10000)))
    if which == "pairs":
        report = pairs_expectation_oracle(int(spec.get("u", 4)), int(spec.get("v", 2)), trials, seed)
        columns, rows = report.columns, report.rows()
    elif which == "bins":
        report = balls_bins_oracle(int(spec.get("balls", 16)), int(spec.get("bins", 64)),
                                   float(spec.get("log_lambda", 4)), trials, seed)
        columns, rows = report.columns, report.rows()
    elif which == "isolation":
        report = isolation_probability(int(spec.get("n_parties", 100)), float(spec.get("kappa", 0.2)),
                                       int(spec.get("sample_size", 3)), trials, seed)
        columns, rows = report.columns, report.rows()
    else:
        schedule = spec.get("schedule", "0.3,0.3")
        if isinstance(schedule, str):
            schedule = [float(a) for a in schedule.split(",") if a.strip()]
        columns = ("epoch", "expected_zeta")
        rows = [[k, f"{z:.6g}"] for k, z in enumerate(zeta_recursion(schedule), start=1)]
    text = write_csv(columns, rows, _echo(cfg))
    _write(Path(cfg["out"]), f"oracle_{which}.csv", text)
    print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--trials", type=int, help="number of trials")
    common.add_argument("--out", help="output directory")
    common.add_argument("--protocol", choices=sorted(DEFAULT_PARAMS), help="protocol to run")
    common.add_argument("--adversary", help="strategy, e.g. 'passive' or 'isolating:target=3'")
    common.add_argument("--oracle-mode", action="store_true",
                        help="allow strategies that read ground-truth onion structure")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="onionsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one execution: transcript and summary")
    sub.add_parser("equalize", parents=[common], help="received-count comparison under swapped inputs")
    sub.add_parser("lowerbound", parents=[common], help="strawman isolation demo")
    p = sub.add_parser("oracles", parents=[common], help="Monte-Carlo oracles")
    p.add_argument("which", help="one of: " + ", ".join(ORACLES))
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "run":
            cmd_run(cfg)
        elif args.command == "equalize":
            cmd_equalize(cfg)
        elif args.command == "lowerbound":
            cmd_lowerbound(cfg)
        else:
            cmd_oracles(cfg, args.which)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

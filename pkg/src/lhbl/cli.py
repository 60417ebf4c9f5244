"""Command line interface: ``lhbl {train,solve,eval,oracle,label-check,trace}``.

Exit codes: 0 success, 2 configuration error, 3 runtime limit or divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import domains
from .audit import label_check
from .domains import StateSpaceSpec
from .errors import (CheckpointFormatError, ConfigError, DomainMismatchError, LhblError,
                     MalformedStateError, OracleTooLargeError, TrainingDivergedError)
from .evaluation import (TestInstance, benchmark, build_oracle, depression_trace, generate_test_set,
                         linear_ramp, summarize, write_oracle_csv, write_results_csv, write_trace_csv)
from .heuristics import Kind, load_checkpoint, make_model
from .search import Limits, bwas
from .trainer import TrainConfig, samples_accounting, train

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "seed": 0,
    "domain": {"family": "sliding_tile", "size": 8, "unit_cost": 1.0},
    "model": {"kind": "mlp", "hidden": [256, 256]},
    "train": {
        "mode": "ssbl",
        "horizon": None,
        "search_algo": "astar",
        "scramble_depth_max": None,
        "samples_budget": 100000,
        "minibatch_size": 256,
        "lr": 0.001,
        "target_sync_interval": 1000,
        "checkpoint_every": None,
        "output_dir": "runs/default",
        "include_leaves": False,
    },
    "eval": {
        "count": 200,
        "depth_max": None,
        "B": [1, 100, 1000, 10000],
        "lambda": 0.6,
        "max_expansions": 200000,
        "max_time_s": 60.0,
        "max_nodes": None,
    },
}


def _flatten(d, prefix=""):
    for key, value in d.items():
        if isinstance(value, dict):
            yield from _flatten(value, f"{prefix}{key}.")
        else:
            yield f"{prefix}{key}", value


def config_help() -> str:
    lines = ["config keys (JSON file sections; override with --set key=value):"]
    lines += [f"  {key} = {json.dumps(value)}" for key, value in _flatten(DEFAULTS)]
    return "\n".join(lines)


def _merge(base: dict, update: dict, path: str = "") -> None:
    for key, value in update.items():
        full = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {full!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {full!r} must be a section")
            _merge(base[key], value, full + ".")
        else:
            base[key] = value


def _parse_override(item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out: dict = {}
    node = out
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return out


def load_config(path: str | None, overrides=()) -> dict:
    """Defaults <- config file <- ``--set`` overrides. Unknown keys raise ConfigError."""
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        _merge(config, data)
    for item in overrides:
        _merge(config, _parse_override(item))
    return config


def spec_from_config(config: dict) -> StateSpaceSpec:
    d = config["domain"]
    try:
        return StateSpaceSpec(d["family"], d["size"], float(d["unit_cost"]))
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from exc


def train_config_from(config: dict) -> TrainConfig:
    t = config["train"]
    try:
        return TrainConfig(
            spec=spec_from_config(config),
            mode=t["mode"],
            horizon=t["horizon"],
            search_algo=t["search_algo"],
            scramble_depth_max=t["scramble_depth_max"],
            samples_budget=int(t["samples_budget"]),
            minibatch_size=int(t["minibatch_size"]),
            lr=float(t["lr"]),
            target_sync_interval=int(t["target_sync_interval"]),
            seed=int(config["seed"]),
            checkpoint_every=t["checkpoint_every"],
            output_dir=t["output_dir"],
            include_leaves=bool(t["include_leaves"]),
            model_kind=config["model"]["kind"],
            hidden=tuple(config["model"]["hidden"]),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"train: {exc}") from exc


def _limits(args) -> Limits:
    return Limits(args.max_expansions, args.max_time, args.max_nodes)


def _load_heuristic(args, spec: StateSpaceSpec | None):
    if getattr(args, "checkpoint", None):
        model = load_checkpoint(args.checkpoint, spec)
        return model
    if spec is None:
        raise ConfigError("--family/--size are required without --checkpoint")
    return make_model(spec, args.heuristic)


def _spec_from_args(args) -> StateSpaceSpec | None:
    if args.family is None:
        return None
    try:
        return StateSpaceSpec(args.family, args.size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(args) -> int:
    config = load_config(args.config, args.set)
    tc = train_config_from(config)
    result = train(tc)
    acct = samples_accounting(result.log)
    print(json.dumps({"steps": len(result.log), **acct,
                      "final_loss": result.log[-1].loss if result.log else None,
                      "checkpoints": [str(p) for p in result.checkpoints]}, indent=2))
    return EXIT_OK


def _instance_from_args(args, spec) -> TestInstance:
    if args.state:
        start = domains.validate_state(spec, args.state.replace(",", " ").split())
        return TestInstance("cli", spec, start, -1, args.seed)
    rng = np.random.default_rng([args.seed, 0])
    return TestInstance("cli", spec, domains.scramble(spec, args.depth, rng), args.depth, args.seed)


def cmd_solve(args) -> int:
    spec = _spec_from_args(args)
    model = _load_heuristic(args, spec)
    spec = model.spec
    inst = _instance_from_args(args, spec)
    record = bwas(spec, model, inst.start, args.B, args.lam, _limits(args), instance_id=inst.id)
    print(json.dumps({
        "solved": record.solved, "solution_cost": record.solution_cost,
        "path_length": record.path_length, "nodes_generated": record.nodes_generated,
        "nodes_expanded": record.nodes_expanded, "wall_time_ms": round(record.wall_time_ms, 3),
        "B": record.B, "lambda": record.lam, "limit_hit": record.limit_hit,
    }))
    if record.solved:
        print("path:", " ".join(domains.op_name(spec, op) for op in record.path))
        return EXIT_OK
    return EXIT_RUNTIME


def cmd_eval(args) -> int:
    config = load_config(args.config, args.set)
    e = config["eval"]
    spec = _spec_from_args(args)
    if args.checkpoint:
        models = [load_checkpoint(p, spec) for p in args.checkpoint]
        spec = models[0].spec
        for m in models[1:]:
            if (m.spec.family, m.spec.size) != (spec.family, spec.size):
                raise DomainMismatchError("all checkpoints must share one domain")
    else:
        spec = spec or spec_from_config(config)
        models = [make_model(spec, args.heuristic)]
    count = args.count or int(e["count"])
    depth_max = args.depth_max if args.depth_max is not None else (e["depth_max"] or spec.default_depth_max)
    seed = args.seed if args.seed is not None else int(config["seed"])
    instances = generate_test_set(spec, count, linear_ramp(count, depth_max), seed)
    B_list = args.B or [int(b) for b in e["B"]]
    lam = args.lam if args.lam is not None else float(e["lambda"])
    limits = Limits(
        args.max_expansions if args.max_expansions is not None else e["max_expansions"],
        args.max_time if args.max_time is not None else e["max_time_s"],
        args.max_nodes if args.max_nodes is not None else e["max_nodes"],
    )
    oracle = None
    if args.oracle:
        oracle = build_oracle(spec)
    rows = benchmark(models, instances, B_list, lam, limits, oracle)
    with open(args.out, "w", newline="") as fh:
        write_results_csv(rows, fh, include_timing=not args.no_timing)
    for B, stats in summarize(rows).items():
        print(f"B={B}: solved {stats['solved_pct'][0]:.1f}% (sd {stats['solved_pct'][1]:.1f}) "
              f"generated {stats['nodes_generated'][0]:.1f} cost {stats['solution_cost'][0]:.2f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = _spec_from_args(args)
    oracle = build_oracle(spec, args.cap)
    if args.out == "-":
        write_oracle_csv(oracle, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_oracle_csv(oracle, fh)
    print(f"{len(oracle)} states, max h* {oracle.max()}", file=sys.stderr)
    return EXIT_OK


def cmd_label_check(args) -> int:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            worst = label_check(args.trials, args.seed, args.max_vertices, fh)
    else:
        worst = label_check(args.trials, args.seed, args.max_vertices, sys.stdout)
    print(f"max diff {worst:.3g} over {args.trials} graphs", file=sys.stderr)
    return EXIT_OK if worst < args.tol else EXIT_RUNTIME


def cmd_trace(args) -> int:
    spec = _spec_from_args(args)
    model = _load_heuristic(args, spec)
    inst = _instance_from_args(args, model.spec)
    rows = depression_trace(model, inst, args.B, args.lam, _limits(args))
    if args.out == "-":
        write_trace_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_trace_csv(rows, fh)
    return EXIT_OK


def _add_domain_args(p, required=False):
    p.add_argument("--family", choices=[f.value for f in domains.Family], required=required)
    p.add_argument("--size", type=int, default=8)


def _add_heuristic_args(p):
    p.add_argument("--checkpoint", help="checkpoint file (.hh)")
    p.add_argument("--heuristic", choices=[Kind.ZERO.value, Kind.MANHATTAN.value], default="zero",
                   help="fixed heuristic used when no checkpoint is given")


def _add_limit_args(p, defaults=True):
    p.add_argument("--max-expansions", type=int, default=200000 if defaults else None)
    p.add_argument("--max-time", type=float, default=60.0 if defaults else None, help="seconds")
    p.add_argument("--max-nodes", type=int, default=None)


def _add_instance_args(p):
    p.add_argument("--state", help="explicit start state, whitespace or comma separated")
    p.add_argument("--depth", type=int, default=0, help="scramble depth when --state is absent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--B", type=int, default=1)
    p.add_argument("--lam", type=float, default=0.6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lhbl", description="Learn and evaluate cost-to-go heuristics for puzzle search.",
        epilog=config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a heuristic", epilog=config_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="solve one instance with BWAS")
    _add_domain_args(p)
    _add_heuristic_args(p)
    _add_instance_args(p)
    _add_limit_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="benchmark checkpoints over a (B, lambda) grid", epilog=config_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    _add_domain_args(p)
    p.add_argument("--checkpoint", action="append", default=[])
    p.add_argument("--heuristic", choices=[Kind.ZERO.value, Kind.MANHATTAN.value], default="zero")
    p.add_argument("--count", type=int)
    p.add_argument("--depth-max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--B", type=int, nargs="+")
    p.add_argument("--lam", type=float)
    _add_limit_args(p, defaults=False)
    p.add_argument("--oracle", action="store_true", help="fill optimal_cost from an exact oracle")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_ms empty for byte-stable output")
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="exact cost-to-go table by backward search")
    _add_domain_args(p, required=True)
    p.add_argument("--cap", type=int, default=5_000_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("label-check", help="audit limited-horizon labels against path enumeration")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-vertices", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_label_check)

    p = sub.add_parser("trace", help="heuristic value of each expanded node (depression diagnostic)")
    _add_domain_args(p)
    _add_heuristic_args(p)
    _add_instance_args(p)
    _add_limit_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainMismatchError, MalformedStateError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDivergedError, OracleTooLargeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, CheckpointFormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LhblError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

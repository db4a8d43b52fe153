"""Command-line front end.

Subcommands:
    simulate   run a trace, write counters.csv / overhead.csv / events.log
    attack     run seeded attack trials, write results.csv
    bitmap     render the same-set bitmap of the configured large page
    gen-trace  emit a synthetic trace
    dump-rt    write the effective random tables as text

Every run echoes the effective configuration into the output directory as
effective.cfg; re-running from that echo reproduces the outputs byte for
byte. Exit codes: 0 ok, 1 config/trace error, 2 simulation fault,
3 invariant-check failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cache import InclusionError
from .config import ConfigError, ExperimentConfig, format_config, parse_config
from .harness import (
    ATTACK_SCENARIOS,
    SimulationFault,
    attack_csv,
    build_tables,
    run_attack,
    run_bitmap,
    run_simulate,
)
from .mem import AllocationError, TranslationFault
from .rtable import dump_table
from .trace import TRACE_KINDS, TraceError, format_trace, generate_trace, parse_trace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAULT = 2
EXIT_CHECK = 3


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.master_seed = int(args.seed, 16)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: ExperimentConfig, out: Path) -> None:
    (out / "effective.cfg").write_text(format_config(cfg))


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    events = parse_trace(Path(args.trace).read_text())
    out = _out_dir(args)
    result = run_simulate(
        cfg, events, check="every-event" if args.check else "final"
    )
    _echo_config(cfg, out)
    (out / "counters.csv").write_text(result.counters_csv)
    (out / "overhead.csv").write_text(result.overhead_csv)
    (out / "events.log").write_text(result.event_log)
    return EXIT_OK


def _cmd_attack(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    header, rows = run_attack(cfg, args.scenario, args.trials)
    _echo_config(cfg, out)
    (out / "results.csv").write_text(attack_csv(header, rows))
    return EXIT_OK


def _cmd_bitmap(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    pbm = run_bitmap(cfg, args.target_set)
    _echo_config(cfg, out)
    (out / "bitmap.pbm").write_text(pbm)
    return EXIT_OK


def _cmd_gen_trace(args) -> int:
    events = generate_trace(args.kind, int(args.seed, 16), args.length)
    comments = (
        f"synthetic {args.kind} trace, seed={args.seed}, length={args.length}",
        "requires: alloc = sequential 0x400000 8",
        "requires: alloc = sequential 0x800000 32",
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(format_trace(events, comments))
    return EXIT_OK


def _cmd_dump_rt(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    _echo_config(cfg, out)
    tables = build_tables(cfg)
    if not tables:
        print("mode has no remapped caches; nothing to dump", file=sys.stderr)
    for name, table in sorted(tables.items()):
        (out / f"{name}.rt").write_text(dump_table(table))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rclsim",
        description="cache hierarchy simulator with remapped set indexing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="configuration file path")
        p.add_argument("--seed", help="hex master seed override")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("simulate", help="run a trace through the hierarchy")
    common(p)
    p.add_argument("--trace", required=True, help="trace file path")
    p.add_argument(
        "--check",
        action="store_true",
        help="run the full inclusion scan after every event",
    )
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("attack", help="run seeded attack trials")
    common(p)
    p.add_argument("--scenario", required=True, choices=ATTACK_SCENARIOS)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("bitmap", help="same-set bitmap over the large page")
    common(p)
    p.add_argument("--target-set", type=int, default=0)
    p.set_defaults(func=_cmd_bitmap)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace")
    p.add_argument("--kind", required=True, choices=TRACE_KINDS)
    p.add_argument("--length", type=int, default=2000)
    p.add_argument("--seed", default="0x1", help="hex seed")
    p.add_argument("--out", required=True, help="trace file to write")
    p.set_defaults(func=_cmd_gen_trace)

    p = sub.add_parser("dump-rt", help="dump the effective random tables")
    common(p)
    p.set_defaults(func=_cmd_dump_rt)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationFault, TranslationFault, AllocationError, ValueError) as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except InclusionError as exc:
        print(f"invariant check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

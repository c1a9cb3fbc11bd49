"""Command-line front end: ``run``, ``sweep`` and ``selftest``."""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path

from . import acceptance
from .metrics import (format_summary, run_scenario, write_csv, write_erica_csv,
                      write_queue_csv)
from .scenario import ConfigError, ScenarioConfig, expected_offered_load, parse_config

log = logging.getLogger("wwwabr")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _parse_n_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty N list")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wwwabr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value scenario file")
    common.add_argument("--seed", type=int, help="RNG seed (fallback: $SIM_SEED)")
    common.add_argument("--duration", type=float, help="simulated seconds")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", parents=[common], help="simulate one scenario")
    run.add_argument("--n", type=int, help="number of servers N")
    run.add_argument("--queue-sample-period", type=float, default=0.01,
                     help="seconds between queue.csv samples (0 disables)")
    run.add_argument("--erica-debug", action="store_true", help="write per-interval erica.csv")

    sweep = sub.add_parser("sweep", parents=[common], help="efficiency and queue sweep over N")
    sweep.add_argument("--n-list", type=_parse_n_list, default=list(range(1, 16)),
                       help="comma list or ranges, e.g. 1,5,15 or 1-15")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    selftest = sub.add_parser("selftest", help="run the acceptance checks")
    selftest.add_argument("--skip-sweep", action="store_true",
                          help="skip the N sweep and the determinism rerun")
    selftest.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> ScenarioConfig:
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    seed = args.seed
    if seed is None and not re.search(r"^\s*seed\s*=", text, re.M) and os.environ.get("SIM_SEED"):
        try:
            seed = int(os.environ["SIM_SEED"])
        except ValueError:
            raise ConfigError(f"SIM_SEED is not an integer: {os.environ['SIM_SEED']!r}") from None
    overrides = {"seed": seed, "sim_duration": args.duration}
    if getattr(args, "n", None) is not None:
        overrides["n_servers"] = args.n
    return parse_config(text, **overrides)


def _prepare_out(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def cmd_run(args) -> int:
    config = load_config(args)
    log.info("N=%d K=%d seed=%d duration=%gs expected offered load %.2f Mbps",
             config.n_servers, config.k_clients_per_server, config.seed,
             config.sim_duration, expected_offered_load(config))
    metrics, topo = run_scenario(config, args.queue_sample_period, erica_trace=args.erica_debug)
    _prepare_out(args.out)
    write_csv(metrics, args.out / "summary.csv")
    write_queue_csv(metrics, args.out / "queue.csv")
    if args.erica_debug:
        write_erica_csv(topo, args.out / "erica.csv")
    sys.stdout.write(format_summary([metrics]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = load_config(args)
    rows = acceptance.run_sweep(args.n_list, seed=base.seed, duration=base.sim_duration,
                                base=base, jobs=args.jobs)
    _prepare_out(args.out)
    write_csv(rows, args.out / "summary.csv")
    sys.stdout.write(format_summary(rows))
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = acceptance.run_all(include_sweep=not args.skip_sweep)
    for check in checks:
        print(check.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_FAILURE if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

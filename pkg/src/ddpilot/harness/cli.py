"""Command-line entry point: ``ddpilot run|demo3|validate|version``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .. import __version__
from .._kernels import BACKEND
from .config import ConfigError, Scenario, default_spec, parse_config, validate

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--trials", type=int, help="trials per sweep point")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ddpilot", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run the experiment in a config file")
    r.add_argument("config", type=Path)
    sub.add_parser("demo3", parents=[common], help="three-target detection demo")
    v = sub.add_parser("validate", parents=[common], help="check a config without running it")
    v.add_argument("config", type=Path)
    sub.add_parser("version", help="print version and kernel backend")
    return p


def _overrides(spec, args):
    if args.trials is not None and args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    if args.threads is not None and args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    changes = {"master_seed": args.seed, "trials": args.trials, "out_dir": args.out,
               "threads": args.threads}
    return replace(spec, **{k: v for k, v in changes.items() if v is not None})


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "version":
        print(f"ddpilot {__version__} (kernels: {BACKEND})")
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from . import runner

    try:
        if args.cmd == "demo3":
            spec = default_spec(Scenario.DEMO3)
        else:
            spec = parse_config(args.config)
        spec = validate(_overrides(spec, args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd == "validate":
        print(f"ok: {spec.scenario.value}, {len(spec.points())} points x {spec.trials} trials")
        return EXIT_OK
    try:
        res = runner.run(spec)
    except KeyboardInterrupt:
        print("interrupted; completed rows were flushed", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.cmd == "demo3":
        for row in res.rows:
            print("l={1} k={2} kappa={3:+.2f} |v|={4:.2f} doppler={5:.1f} Hz range={6:.1f} m"
                  .format(*row))
    print(f"wrote {res.csv_path}")
    for p in res.plots:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

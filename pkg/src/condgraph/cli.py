"""``condgraph`` command line entry point.

Exit codes: 0 success, 1 an invariant check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import COMMANDS, ConfigError, ExperimentConfig
from .objective import LabelError

log = logging.getLogger("condgraph")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condgraph", description="condition-constant experiments")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--objective", action="append", default=None,
                   help="objective label; repeat for several")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--grid", help="estimation grid lo:hi:n[:exclusion]")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, cfg)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg = cfg.update(k, v)
    if args.objective:
        cfg = cfg.update("objective", ";".join(args.objective))
    for key in ("out", "grid", "seed", "iters"):
        val = getattr(args, key)
        if val is not None:
            cfg = cfg.update(key, str(val))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        log.info("resolved config: %s", cfg.to_dict())
        report = COMMANDS[args.command](cfg)
    except (ConfigError, LabelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        for path in report.write(cfg.out):
            log.info("wrote %s", path)
    else:
        sys.stdout.write(report.to_csv())
        for suffix, text in report.artifacts.items():
            log.info("artifact %s omitted without --out", suffix)
    for v in report.violations:
        print(f"violation: {v}", file=sys.stderr)
    return 1 if report.violations else 0


if __name__ == "__main__":
    sys.exit(main())

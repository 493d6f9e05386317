"""Command line driver: ``ce run``, ``ce oracle`` and ``ce table1``.

Exit codes: 0 success, 2 when any refinement level failed, 3 on a bad
configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .envelopes import get_example, oracle_envelope
from .experiment import (CONFIG_KEYS, ConfigError, emit_report, load_config, make_config,
                         run_experiment, table1_configs)

EXIT_OK, EXIT_FAILED_LEVEL, EXIT_CONFIG = 0, 2, 3


def _print_report(rep) -> None:
    print(rep.scaling)
    print(f"{'h':>10} {'delta':>10} {'theta':>10} {'S':>4} {'nodes':>8} {'error':>11} {'it':>3} {'time':>7}")
    for lv in rep.levels:
        if lv.failed:
            print(f"{lv.h:10.4g}  FAILED  {lv.message}")
            continue
        print(f"{lv.h:10.4g} {lv.delta:10.4g} {lv.theta:10.4g} {lv.S:4d} {lv.nodes:8d} "
              f"{lv.error_linf:11.4e} {lv.iters:3d} {lv.runtime_s:7.2f}")
    print(f"order {rep.order:.3f} (fit residual {rep.residual:.2e})")


def _finish(reports, out_dir) -> int:
    for rep in reports:
        _print_report(rep)
    if out_dir:
        paths = emit_report(reports, out_dir)
        print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_FAILED_LEVEL if any(r.failed for r in reports) else EXIT_OK


def cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = make_config({k: v for k, v in overrides.items() if v is not None})
    return _finish([run_experiment(config)], config.out_dir)


def cmd_oracle(args) -> int:
    try:
        ex = get_example(args.example)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    if args.n < 8:
        raise ConfigError("--n must be at least 8")
    env = oracle_envelope(ex.f, ex.domain, args.n)
    env.to_csv(args.out)
    print(f"{len(env.points)} samples, spacing {env.spacing:.4g}, wrote {args.out}")
    return EXIT_OK


def cmd_table1(args) -> int:
    reports = [run_experiment(c) for c in table1_configs(full=args.full)]
    return _finish(reports, args.out_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ce", description="Convex envelopes by two-scale finite elements.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="refinement sweep from a key = value config file")
    run.add_argument("--config", help="config file; flags below override its keys")
    for key in CONFIG_KEYS:
        run.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="sampled lower-hull envelope of an example")
    orc.add_argument("--example", default="ex1")
    orc.add_argument("--n", type=int, default=257, help="samples per axis")
    orc.add_argument("--out", required=True, help="output CSV")
    orc.set_defaults(func=cmd_oracle)

    t1 = sub.add_parser("table1", help="first example at delta = 0.5 h^1/2, theta = 0.25 h^1/2")
    t1.add_argument("--full", action="store_true", help="levels 2^-4..2^-8 instead of 2^-4..2^-6")
    t1.add_argument("--out-dir", default="table1_out")
    t1.set_defaults(func=cmd_table1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

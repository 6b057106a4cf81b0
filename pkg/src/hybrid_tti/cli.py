"""Command-line entry point: simulate, predict, validate."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .config import ConfigError, SystemConfig, load_config
from .engine import METHODS, lambda_grid, run_sweep, write_results
from .predictor import departure_pmfs, queue_pmfs, rankset_preemption_pmf

log = logging.getLogger("hybrid_tti")


def _base_config(path) -> SystemConfig:
    return load_config(path) if path else SystemConfig()


def cmd_simulate(args) -> int:
    cfg = _base_config(args.config)
    overrides = {}
    if args.slots is not None:
        overrides["n_slots"] = args.slots
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = cfg.replace(**overrides)
    lambdas = lambda_grid(args.lambda_min, args.lambda_max, args.lambda_step)
    methods = list(METHODS) if args.method == "all" else [args.method]
    results = run_sweep(cfg, lambdas, methods)
    metrics, pattern = write_results(results, args.out)
    print(f"wrote {metrics}")
    print(f"wrote {pattern}")
    return 0


def cmd_predict(args) -> int:
    cfg = _base_config(args.config)
    n_s = args.ns if args.ns is not None else cfg.n_s
    m = args.m if args.m is not None else cfg.m
    if args.rank is not None and not 0 <= args.rank < n_s:
        raise ConfigError(f"rank must lie in 0..{n_s - 1}")
    if args.l0 < 0 or n_s < 1 or m < 1:
        raise ConfigError("need l0 >= 0, ns >= 1, m >= 1")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["quantity", "minislot", "rank", "value", "probability"])
    for j, p in enumerate(queue_pmfs(args.l0, args.lam, n_s, m, cfg.tail_eps)):
        for n, v in enumerate(p.mass):
            if v > 0:
                writer.writerow(["L", j, "", n, repr(float(v))])
    for j, q in enumerate(departure_pmfs(args.l0, args.lam, n_s, m, cfg.tail_eps)):
        for n, v in enumerate(q.mass):
            writer.writerow(["D", j, "", n, repr(float(v))])
    ranks = [args.rank] if args.rank is not None else range(n_s)
    for k in ranks:
        y = rankset_preemption_pmf(args.l0, args.lam, n_s, m, (k,), cfg.tail_eps)
        for n, v in enumerate(y.mass):
            writer.writerow(["Y", "", k, n, repr(float(v))])
    return 0


def cmd_validate(args) -> int:
    from .validation import run_all

    cfg = _base_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    checks = run_all(cfg, n_slots=args.slots)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybrid-tti", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a lambda sweep and write CSV results")
    sim.add_argument("--config")
    sim.add_argument("--method", choices=(*METHODS, "all"), default="all")
    sim.add_argument("--lambda-min", type=float, default=0.0)
    sim.add_argument("--lambda-max", type=float, default=2.5)
    sim.add_argument("--lambda-step", type=float, default=0.125)
    sim.add_argument("--slots", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", default="results")
    sim.set_defaults(func=cmd_simulate)

    pred = sub.add_parser("predict", help="dump predicted queue/preemption pmfs as CSV")
    pred.add_argument("--config")
    pred.add_argument("--lambda", dest="lam", type=float, required=True)
    pred.add_argument("--l0", type=int, default=0)
    pred.add_argument("--rank", type=int)
    pred.add_argument("--ns", type=int)
    pred.add_argument("--m", type=int)
    pred.set_defaults(func=cmd_predict)

    val = sub.add_parser("validate", help="run the model invariant suite")
    val.add_argument("--config")
    val.add_argument("--slots", type=int, default=2000)
    val.add_argument("--seed", type=int)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

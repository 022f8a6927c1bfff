"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 runtime or step failure,
3 verify-suite failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .bl import flat_norm
from .config import parse_config
from .errors import BLGameError, ConfigError
from .experiment import parse_flatnorm_input, run_simulate, run_sweep
from .oracle import MAX_SUPPORT, flat_norm_oracle
from .verify import run_verify

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blgame", description="Selection-mutation games on finite strategy spaces.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment from a config file")
    sim.add_argument("config")
    sim.add_argument("--out", help="output directory (overrides output.dir)")

    fn = sub.add_parser("flatnorm", help="flat norm of a weighted point set")
    fn.add_argument("input", help="YAML/JSON file with points and weights")
    fn.add_argument("--oracle", action="store_true", help="also print the brute-force value (<= 3 points)")

    ver = sub.add_parser("verify", help="run a built-in invariant suite")
    ver.add_argument("--suite", default="default")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)

    sw = sub.add_parser("sweep", help="one run per value of a config parameter")
    sw.add_argument("config")
    sw.add_argument("--axis", required=True, help="dotted.path=v1,v2,...")
    sw.add_argument("--out", help="output directory for the sweep")
    sw.add_argument("--workers", type=int, default=None)
    return p


def _simulate(args) -> int:
    cfg = parse_config(args.config)
    res = run_simulate(cfg, args.out)
    if res.status != 0:
        print(f"error: {res.message}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {res.out_dir} (dt used {res.dt_used:g}, {len(res.rows)} diagnostic rows)")
    return EXIT_OK


def _flatnorm(args) -> int:
    mu = parse_flatnorm_input(args.input)
    print(f"flat_norm {flat_norm(mu):.17g}")
    if args.oracle:
        if mu.space.m > MAX_SUPPORT:
            raise ConfigError(f"--oracle supports at most {MAX_SUPPORT} points")
        print(f"oracle {flat_norm_oracle(mu):.17g}")
    return EXIT_OK


def _verify(args) -> int:
    report = run_verify(args.suite, args.seed, args.inject_fault)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_VERIFY


def _sweep(args) -> int:
    rows, summary = run_sweep(args.config, args.axis, args.out, args.workers)
    print(summary.read_text(), end="")
    bad = [r for r in rows if r.get("status") != "ok"]
    for r in bad:
        print(f"error: value {r['value']}: {r.get('error', r.get('status'))}", file=sys.stderr)
    return EXIT_RUNTIME if bad else EXIT_OK


COMMANDS = {"simulate": _simulate, "flatnorm": _flatnorm, "verify": _verify, "sweep": _sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BLGameError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, OSError) else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

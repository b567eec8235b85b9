"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, parse_config, to_lines
from .errors import ConfigurationError
from .scenarios import EXIT_CONFIG, execute


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="signed-particles",
        description="Signed-particle Wigner Monte Carlo simulations.",
    )
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override one key (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory (output.dir)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--workers", type=int, help="creation worker count")
    p.add_argument("--preset", choices=SCENARIOS, help="scenario preset")
    p.add_argument("--dry-run", action="store_true", help="validate and print the resolved configuration only")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for key, value in (("output.dir", args.out), ("seed", args.seed), ("workers", args.workers)):
        if value is not None:
            out[key] = str(value)
    return out


def setup_logging(quiet=False):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s level=%(levelname)s logger=%(name)s %(message)s"))
    root = logging.getLogger("signed_particles")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.quiet)
    try:
        cfg = parse_config(args.config, _overrides(args), args.preset)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        sys.stdout.write(to_lines(cfg))
        return 0
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``glacier-mapper <stage> --config PATH``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, DataError, GlacierMapperError
from .pipeline import Pipeline, load_config, resolve_threads

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

STAGES = {
    "terrain": Pipeline.run_terrain,
    "hydro": Pipeline.run_hydro,
    "segment": Pipeline.run_segment,
    "refine-termini": Pipeline.run_refine,
    "scaz": Pipeline.run_scaz,
    "evaluate": lambda p: p.run_evaluate(from_disk=True),
    "pipeline": Pipeline.run_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glacier-mapper",
        description="Refine glacier ablation masks and estimate full glacier outlines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--threads", type=int, default=None, help="worker cap (env GLACIER_MAPPER_THREADS)")
        p.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        pipeline = Pipeline(cfg, threads=resolve_threads(args.threads))
        STAGES[args.command](pipeline)
        pipeline.write_manifest(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GlacierMapperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``esqpt run|presets|validate``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import PRESETS, ConfigError, ExperimentConfig, NumericFailure, emit_outputs, run
from .signop import SignError
from .spectral import SpectralError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _load(ref: str) -> ExperimentConfig:
    if ref in PRESETS and not Path(ref).exists():
        return PRESETS[ref]
    return ExperimentConfig.load(ref)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esqpt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file or preset name")
    r.add_argument("config")
    r.add_argument("--workers", type=int)
    r.add_argument("--precision", choices=("double", "quad"))
    r.add_argument("--cache-dir")
    r.add_argument("--no-cache", action="store_true")
    r.add_argument("--out")
    sub.add_parser("presets", help="list built-in presets")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        for name, cfg in PRESETS.items():
            sizes = ",".join(f"{s:g}" for s in cfg.sizes)
            print(f"{name:20s} {cfg.kind:15s} {cfg.family:6s} sizes={sizes}")
        return EXIT_OK
    try:
        cfg = _load(args.config)
        if args.command == "validate":
            print(f"ok: {cfg.kind} ({cfg.family}), hash {cfg.content_hash()[:16]}")
            return EXIT_OK
        changes = {}
        if args.workers is not None:
            changes["workers"] = args.workers
        if args.precision is not None:
            changes["precision"] = args.precision
        if args.cache_dir is not None:
            changes["cache_dir"] = args.cache_dir
        if args.no_cache:
            changes["cache"] = False
        if args.out is not None:
            changes["output_dir"] = args.out
        cfg = cfg.replace(**changes) if changes else cfg
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run(cfg)
    except (NumericFailure, SpectralError, SignError, ArithmeticError, MemoryError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        files = emit_outputs(record, cfg.output_dir)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Run built-in presets through the CLI, one output directory per preset."""
import argparse
import sys

from esqpt.cli import main as cli_main
from esqpt.experiments import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=sorted(PRESETS))
    ap.add_argument("--out", default="results")
    ap.add_argument("--cache-dir", default=".esqpt-cache")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    status = 0
    for name in args.names:
        code = cli_main(["run", name, "--out", f"{args.out}/{name}", "--cache-dir", args.cache_dir,
                         "--workers", str(args.workers)])
        print(f"{name}: exit {code}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())

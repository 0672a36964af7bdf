#!/usr/bin/env python3
"""Drive the full pipeline (plan -> mine -> filter -> export) for one run
config via the CLI entry point.

Usage: python scripts/run_pipeline.py configs/cardflip2d.toml [--seed N] [--out DIR]
"""

import sys

from skillrrt.cli import main


def run(argv: list[str]) -> int:
    if not argv or argv[0].startswith("-"):
        print(__doc__, file=sys.stderr)
        return 2
    config, extra = argv[0], argv[1:]
    for command in ("plan", "mine", "filter", "export"):
        code = main([command, "--config", config, *extra])
        if code != 0:
            print(f"{command} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))

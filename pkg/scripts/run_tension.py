#!/usr/bin/env python3
"""Run the tension experiment with the repository config; extra flags pass through."""
import sys
from pathlib import Path

from pdsc.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "tension.cfg"

if __name__ == "__main__":
    argv = ["tension", "--config", str(CONFIG), *sys.argv[1:]]
    raise SystemExit(main(argv))

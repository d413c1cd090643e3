#!/usr/bin/env python3
"""Run the indent experiment with the repository config; extra flags pass through."""
import sys
from pathlib import Path

from pdsc.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "indent.cfg"

if __name__ == "__main__":
    argv = ["indent", "--config", str(CONFIG), *sys.argv[1:]]
    raise SystemExit(main(argv))

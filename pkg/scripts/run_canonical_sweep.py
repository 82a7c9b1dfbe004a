"""Canonical ultrathin sweep: energy gaps, strain moments, and the limit
values, written to out/canonical/.  Extra arguments pass through to the CLI
(e.g. --threads 4 --format json)."""
import sys
from pathlib import Path

from vkfilm.harness import main

ROOT = Path(__file__).resolve().parents[1]
CONFIG = str(ROOT / "configs" / "canonical.yaml")
OUT = str(ROOT / "out" / "canonical")

if __name__ == "__main__":
    extra = sys.argv[1:]
    for sub in ("converge", "strain", "limit"):
        rc = main([sub, "--config", CONFIG, "--out", OUT, *extra])
        if rc != 0:
            sys.exit(rc)
    sys.exit(0)

"""Thin-regime sweep (nu grows with 1/eps) written to out/thin/."""
import sys
from pathlib import Path

from vkfilm.harness import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(main(["converge",
                   "--config", str(ROOT / "configs" / "thin.yaml"),
                   "--out", str(ROOT / "out" / "thin"),
                   *sys.argv[1:]]))

"""Descend the scaled energy from a perturbed flat film; trace lands in
out/minimize/minimize.csv.  Seed fixed so reruns are identical."""
import sys
from pathlib import Path

from vkfilm.harness import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(main(["minimize",
                   "--config", str(ROOT / "configs" / "minimize.yaml"),
                   "--out", str(ROOT / "out" / "minimize"),
                   "--seed", "7",
                   *sys.argv[1:]]))

"""Run every experiment with the shipped configs into results/<name>/."""
import sys
from pathlib import Path

from lfikit.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run_all(seed="1", out="results"):
    codes = {}
    for name in ("curve", "dist", "abc", "bolfi", "budget"):
        cfg = ROOT / "configs" / f"{name}.cfg"
        codes[name] = main([name, "--config", str(cfg), "--seed", seed, "--out", f"{out}/{name}"])
        print(f"{name}: exit {codes[name]}")
    return max(codes.values())


if __name__ == "__main__":
    sys.exit(run_all(*sys.argv[1:]))

"""Elbow curves on the proxy dataset for the desk-scale mixture (true k = 5)."""

import argparse
from pathlib import Path

from feddp_kmeans.bench.cli import main as bench_main

HERE = Path(__file__).parent

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(HERE / "configs" / "desk_elbow.toml"))
    args = parser.parse_args()
    raise SystemExit(bench_main(["elbow", "--config", args.config]))

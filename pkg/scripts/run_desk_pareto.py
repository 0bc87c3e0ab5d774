"""Budget sweep on the desk-scale mixture; prints best cost per method and budget level."""

import argparse
import math
from pathlib import Path

import numpy as np

from feddp_kmeans.bench import export_results, load_config, pareto_front, run_experiment

HERE = Path(__file__).parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=HERE / "configs" / "desk_pareto.toml")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    cfg = load_config(args.config)
    records = run_experiment(cfg)
    export_results(records, pareto_front(records), args.out or cfg.output, cfg.format, cfg)

    optimal = {r.seed: r.cost for r in records if r.method == "Optimal"}
    levels = list(cfg.grid.eps_init) + [math.inf]
    print("median best cost / optimal, by eps_total budget")
    print("method".ljust(16) + "".join(f"{lvl:>9}" for lvl in levels))
    for method in cfg.methods:
        row = []
        for lvl in levels:
            per_seed = []
            for seed in cfg.seeds:
                costs = [r.cost for r in records
                         if r.method == method.value and r.seed == seed and r.eps_total <= lvl]
                per_seed.append(min(costs) / optimal[seed] if costs and seed in optimal else math.nan)
            row.append(np.median(per_seed))
        print(method.value.ljust(16) + "".join(f"{v:9.3f}" for v in row))


if __name__ == "__main__":
    main()

"""Cost of FedDP-KMeans when the server data lacks 0, 1 or 2 mixture components."""

import argparse

import numpy as np

from feddp_kmeans.bench.config import DataConfig, ExperimentConfig, GridConfig
from feddp_kmeans.bench.runner import run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--eps-init", type=float, default=1.0)
    parser.add_argument("--eps-lloyds", type=float, default=1.0)
    parser.add_argument("--T", type=int, default=1)
    args = parser.parse_args()

    grid = GridConfig(eps_init=(args.eps_init,), T=(args.T,), eps_lloyds=(args.eps_lloyds,))
    for missing in range(3):
        cfg = ExperimentConfig(methods=["FedDPKMeans", "Optimal"], seeds=tuple(range(args.seeds)),
                               grid=grid, data=DataConfig(missing_components=tuple(range(missing))))
        records = run_experiment(cfg)
        optimal = {r.seed: r.cost for r in records if r.method == "Optimal"}
        fed = [r for r in records if r.method == "FedDPKMeans"]
        ratio = np.median([r.cost / optimal[r.seed] for r in fed])
        print(f"missing={missing}  eps_total={fed[0].eps_total:g}  "
              f"median cost={np.median([r.cost for r in fed]):.5f}  median cost/opt={ratio:.4f}")


if __name__ == "__main__":
    main()

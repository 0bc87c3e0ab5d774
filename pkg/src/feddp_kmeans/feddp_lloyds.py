"""Private federated Lloyd refinement and the end-to-end FedDP-KMeans pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .federated import (
    ClientClipBounds,
    ClientPartition,
    FederatedRun,
    PrivacyUnit,
    mean_of_means_aggregate,
    noisy_centers,
    sum_count_aggregate,
)
from .feddp_init import InitBudget, InitResult, run_feddp_init
from .kmeans import assign, kmeans_cost

__all__ = [
    "LloydsConfig",
    "Trajectory",
    "run_feddp_lloyds",
    "exact_recovery_check",
    "FedDPResult",
    "run_feddp_kmeans",
]


@dataclass(frozen=True)
class LloydsConfig:
    """T rounds with total budget (eps_gauss + eps_laplace, delta).

    Each round spends eps_gauss/T and delta/T on the Gaussian sums and
    eps_laplace/T on the Laplace counts.
    """

    T: int
    eps_gauss: float = 1.0
    eps_laplace: float = 1.0
    delta: float = 1e-6
    delta_clip: float = 1.0
    clip_bounds: ClientClipBounds | None = None

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.T > 0:
            if not (self.eps_gauss > 0 and self.eps_laplace > 0):
                raise ValueError("per-round epsilons must be positive")
            if not 0 < self.delta < 1:
                raise ValueError("delta must lie in (0, 1)")
            if not self.delta_clip > 0:
                raise ValueError("delta_clip must be positive")


@dataclass
class Trajectory:
    centers: list[np.ndarray] = field(default_factory=list)
    costs: list[float] | None = None

    @property
    def final(self) -> np.ndarray:
        return self.centers[-1]


def run_feddp_lloyds(run: FederatedRun, partition: ClientPartition, init, cfg: LloydsConfig,
                     eval_points=None, label: str = "lloyds") -> Trajectory:
    """T noisy federated Lloyd rounds starting from ``init``.

    If ``eval_points`` is given, the normalized (noise-free) k-means cost of
    every iterate on those points is recorded; this is reporting only and
    spends no budget.
    """
    centers = np.array(init, dtype=float)
    if not np.all(np.isfinite(centers)):
        raise ValueError("initial centers must be finite")
    k = len(centers)
    traj = Trajectory([centers.copy()], [] if eval_points is not None else None)
    if eval_points is not None:
        traj.costs.append(kmeans_cost(eval_points, centers, normalize=True))
    if cfg.T == 0:
        return traj
    if run.unit is PrivacyUnit.CLIENT and cfg.clip_bounds is None:
        raise ValueError("client-level privacy needs clip bounds")

    clipped = partition.clipped(cfg.delta_clip)
    eps_g, eps_l, delta = cfg.eps_gauss / cfg.T, cfg.eps_laplace / cfg.T, cfg.delta / cfg.T
    for t in range(1, cfg.T + 1):
        current = centers

        def labeler(points, current=current):
            return assign(points, current)

        if run.unit is PrivacyUnit.CLIENT:
            sums, counts = mean_of_means_aggregate(
                run, clipped, labeler, k, cfg.clip_bounds.mean, cfg.clip_bounds.hist,
                eps_g, eps_l, delta, f"{label}/round{t}")
        else:
            sums, counts = sum_count_aggregate(run, clipped, labeler, k, eps_g, eps_l, delta,
                                               cfg.delta_clip, f"{label}/round{t}")
        centers = noisy_centers(sums, counts, current)
        traj.centers.append(centers.copy())
        if eval_points is not None:
            traj.costs.append(kmeans_cost(eval_points, centers, normalize=True))
    return traj


def exact_recovery_check(centers, points, ground_truth) -> bool:
    """True iff nearest-center labels equal ``ground_truth`` up to relabeling."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    truth = np.asarray(ground_truth)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(truth) != len(points):
        raise ValueError(f"{len(truth)} labels for {len(points)} points")
    pred = assign(points, centers)
    true_ids, truth_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((len(centers), len(true_ids)), dtype=np.int64)
    np.add.at(table, (pred, truth_idx), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return int(table[rows, cols].sum()) == len(points)


@dataclass
class FedDPResult:
    init: InitResult
    trajectory: Trajectory
    run: FederatedRun

    @property
    def centers(self) -> np.ndarray:
        return self.trajectory.final


def run_feddp_kmeans(run: FederatedRun, partition: ClientPartition, server_data, k: int,
                     init_budget: InitBudget, T: int = 0, eps_gauss: float = 1.0,
                     eps_laplace: float = 1.0, lloyds_delta: float | None = None,
                     delta_clip: float | None = None,
                     clip_bounds: ClientClipBounds | None = None, eval_points=None,
                     restarts: int = 10, simplify=None) -> FedDPResult:
    """FedDP-Init followed by ``T`` rounds of FedDP-Lloyds with the same clip radius."""
    init = run_feddp_init(run, partition, server_data, k, init_budget, delta_clip=delta_clip,
                          clip_bounds=clip_bounds, restarts=restarts, simplify=simplify)
    cfg = LloydsConfig(T, eps_gauss, eps_laplace,
                       init_budget.delta if lloyds_delta is None else lloyds_delta,
                       init.delta_clip, clip_bounds)
    traj = run_feddp_lloyds(run, partition, init.centers, cfg, eval_points=eval_points)
    return FedDPResult(init, traj, run)

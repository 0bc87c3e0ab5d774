"""Private federated initialization: projector, proxy weights, initial centers.

Three communication rounds:

1. the server learns a noisy aggregate of the clients' outer products and keeps
   the top-k eigenvectors as a projector;
2. clients count, per projected server point, how many of their projected points
   have it as nearest neighbour (noisy histogram);
3. the server clusters the weighted projected server points and clients return
   noisy per-cluster sums and counts of their original points, assigned in the
   projected space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import BudgetLedger, PrivacyParams
from .federated import (
    AggregationQuery,
    ClientClipBounds,
    ClientPartition,
    FederatedRun,
    Mechanism,
    PrivacyUnit,
    mean_of_means_aggregate,
    noisy_centers,
    secure_aggregate,
    sum_count_aggregate,
)
from .kmeans import WeightedPoints, assign, weighted_kmeans
from .linalg import Projector, outer_product, project, top_k_projector

__all__ = [
    "DATA_POINT_PROPORTIONS",
    "CLIENT_PROPORTIONS",
    "InitBudget",
    "InitResult",
    "server_radius",
    "step1_private_projector",
    "step2_importance_weights",
    "step3_initial_centers",
    "run_feddp_init",
]

DATA_POINT_PROPORTIONS = (0.2, 0.2, 0.45, 0.15)
CLIENT_PROPORTIONS = (0.35, 0.1, 0.45, 0.1)


@dataclass(frozen=True)
class InitBudget:
    eps1: float
    eps2: float
    eps3G: float
    eps3L: float
    delta: float

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3G", "eps3L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def eps3(self) -> float:
        return self.eps3G + self.eps3L

    @property
    def total(self) -> float:
        return self.eps1 + self.eps2 + self.eps3G + self.eps3L

    @classmethod
    def split(cls, eps_init: float, delta: float, proportions=DATA_POINT_PROPORTIONS) -> "InitBudget":
        """Divide ``eps_init`` across the four mechanisms by ``proportions``."""
        props = np.asarray(proportions, dtype=float)
        if props.shape != (4,) or np.any(props <= 0):
            raise ValueError("need four positive proportions")
        e = eps_init * props / props.sum()
        return cls(float(e[0]), float(e[1]), float(e[2]), float(e[3]), delta)


@dataclass
class InitResult:
    centers: np.ndarray
    projector: Projector
    proxy: WeightedPoints
    ledger: BudgetLedger
    server_centers: np.ndarray
    delta_clip: float


def server_radius(server_points) -> float:
    """Largest L2 norm among server points (uncentered radius)."""
    pts = np.atleast_2d(np.asarray(server_points, dtype=float))
    if len(pts) == 0:
        raise ValueError("server data is empty")
    return float(np.linalg.norm(pts, axis=1).max())


def step1_private_projector(run: FederatedRun, partition: ClientPartition, delta_clip: float,
                            eps1: float, delta: float, k: int,
                            clip_bounds: ClientClipBounds | None = None,
                            label: str = "init/step1") -> Projector:
    d = partition.d
    if k > d:
        raise ValueError(f"k={k} exceeds the data dimension {d}")
    params = PrivacyParams(eps1, delta)
    run.charge(label, params)
    query = AggregationQuery(
        label,
        lambda j, p: outer_product(p, d),
        Mechanism.GAUSSIAN_SYMMETRIC,
        sensitivity=delta_clip ** 2,
        budget=params,
        clip_bound=None if clip_bounds is None else clip_bounds.outer,
    )
    noisy = secure_aggregate(run, query, partition)
    return top_k_projector(noisy, k)


def step2_importance_weights(run: FederatedRun, partition: ClientPartition, projector: Projector,
                             server_points, eps2: float,
                             clip_bounds: ClientClipBounds | None = None,
                             label: str = "init/step2") -> WeightedPoints:
    server = np.atleast_2d(np.asarray(server_points, dtype=float))
    if server.size == 0:
        raise ValueError("server data is empty")
    proj_server = project(projector, server)
    params = PrivacyParams(eps2, 0.0)
    run.charge(label, params)

    def histogram(j, points):
        nearest = assign(project(projector, points), proj_server)
        return np.bincount(nearest, minlength=len(proj_server)).astype(float)

    query = AggregationQuery(
        label, histogram, Mechanism.LAPLACE, sensitivity=1.0, budget=params,
        clip_bound=None if clip_bounds is None else clip_bounds.weights,
    )
    weights = secure_aggregate(run, query, partition)
    return WeightedPoints(proj_server, weights)


def step3_initial_centers(run: FederatedRun, partition: ClientPartition, projector: Projector,
                          proxy: WeightedPoints, k: int, eps3G: float, eps3L: float, delta: float,
                          delta_clip: float, clip_bounds: ClientClipBounds | None = None,
                          restarts: int = 10,
                          label: str = "init/step3") -> tuple[np.ndarray, np.ndarray]:
    """Returns (initial centers, projected server centers xi)."""
    clamped = proxy.clamped()
    if not clamped.weights.sum() > 0:
        raise ValueError("all proxy weights are zero after clamping")
    xi, _ = weighted_kmeans(clamped.points, clamped.weights, k, run.rng("server_kmeans", label),
                            restarts=restarts)

    def labeler(points):
        return assign(project(projector, points), xi)

    if run.unit is PrivacyUnit.CLIENT:
        if clip_bounds is None:
            raise ValueError("client-level privacy needs clip bounds")
        sums, counts = mean_of_means_aggregate(run, partition, labeler, k, clip_bounds.mean,
                                               clip_bounds.hist, eps3G, eps3L, delta, label)
    else:
        sums, counts = sum_count_aggregate(run, partition, labeler, k, eps3G, eps3L, delta,
                                           delta_clip, label)
    return noisy_centers(sums, counts, xi), xi


def run_feddp_init(run: FederatedRun, partition: ClientPartition, server_data, k: int,
                   budget: InitBudget, delta_clip: float | None = None,
                   clip_bounds: ClientClipBounds | None = None, restarts: int = 10,
                   simplify=None) -> InitResult:
    """All three steps of the initialization on ``partition``.

    ``delta_clip`` defaults to the server radius; client points are clipped to
    it before any computation. ``simplify`` optionally takes a
    :class:`feddp_kmeans.theory.SimplifyConfig`; the server set is then reduced
    with SimplifyServerData (extra rounds and budget) between Steps 1 and 2.
    """
    server = np.atleast_2d(np.asarray(server_data, dtype=float))
    if server.size == 0:
        raise ValueError("server data is empty")
    if delta_clip is None:
        delta_clip = server_radius(server)
    if run.unit is PrivacyUnit.CLIENT and clip_bounds is None:
        raise ValueError("client-level privacy needs clip bounds")
    clipped = partition.clipped(delta_clip)

    projector = step1_private_projector(run, clipped, delta_clip, budget.eps1, budget.delta, k,
                                        clip_bounds)
    if simplify is not None:
        from .theory import simplify_server_data

        frozen = simplify_server_data(run, server, clipped, projector, simplify.epsilon,
                                      n=clipped.n, k=k, w_min=simplify.w_min)
        server = server[frozen.frozen]
    proxy = step2_importance_weights(run, clipped, projector, server, budget.eps2, clip_bounds)
    centers, xi = step3_initial_centers(run, clipped, projector, proxy, k, budget.eps3G,
                                        budget.eps3L, budget.delta, delta_clip, clip_bounds,
                                        restarts=restarts)
    return InitResult(centers, projector, proxy, run.ledger, xi, delta_clip)

"""Comparison initializations and non-private references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .federated import ClientPartition
from .kmeans import assign, kmeans_cost, weighted_kmeans, weighted_kmeans_pp_seed, weighted_lloyd

__all__ = [
    "server_kmeanspp",
    "server_lloyds",
    "SpherePackingParams",
    "SpherePackingResult",
    "corner_distance",
    "sphere_packing_init",
    "kfed",
    "optimal_reference",
]


def _server(server_data) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(server_data, dtype=float))
    if pts.size == 0:
        raise ValueError("server data is empty")
    return pts


def server_kmeanspp(server_data, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding on the server points, no refinement."""
    pts = _server(server_data)
    return weighted_kmeans_pp_seed(pts, np.ones(len(pts)), k, rng)


def server_lloyds(server_data, k: int, rng: np.random.Generator, max_iters: int = 100,
                  tol: float = 1e-6) -> np.ndarray:
    """k-means++ seeding then Lloyd to convergence on server points only."""
    pts = _server(server_data)
    w = np.ones(len(pts))
    init = weighted_kmeans_pp_seed(pts, w, k, rng)
    return weighted_lloyd(pts, w, init, max_iters=max_iters, tol=tol)


@dataclass(frozen=True)
class SpherePackingParams:
    delta_est: float
    attempts_per_center: int = 1000
    binary_search_iters: int = 30

    def __post_init__(self):
        if not self.delta_est > 0:
            raise ValueError("delta_est must be positive")
        if self.attempts_per_center < 1 or self.binary_search_iters < 0:
            raise ValueError("attempts and iterations must be positive")


@dataclass
class SpherePackingResult:
    centers: np.ndarray
    radius: float


def corner_distance(x, half_width: float) -> np.ndarray:
    """Distance from each row of ``x`` to the nearest corner of ``[-w, w]^d``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.sqrt(((half_width - np.abs(x)) ** 2).sum(axis=1))


def _try_pack(a: float, k: int, d: int, params: SpherePackingParams, rng) -> np.ndarray | None:
    half = params.delta_est
    centers = np.empty((k, d))
    for i in range(k):
        cand = rng.uniform(-half, half, size=(params.attempts_per_center, d))
        ok = corner_distance(cand, half) >= a
        if i > 0:
            diff = cand[:, None, :] - centers[None, :i, :]
            ok &= np.sqrt((diff ** 2).sum(axis=2)).min(axis=1) >= 2 * a
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            return None
        centers[i] = cand[hits[0]]
    return centers


def sphere_packing_init(params: SpherePackingParams, k: int, d: int,
                        rng: np.random.Generator) -> SpherePackingResult:
    """Data-independent centers in ``[-Delta, Delta]^d`` with the largest packable radius.

    A radius ``a`` is feasible when all k centers can be drawn, each at least
    ``a`` from every hypercube corner and ``2a`` from earlier centers, within
    ``attempts_per_center`` uniform draws each. Binary search runs over
    ``(0, Delta * sqrt(d)]``; the centers of the largest feasible radius are kept.
    """
    lo, hi = 0.0, params.delta_est * np.sqrt(d)
    best = _try_pack(hi, k, d, params, rng)
    if best is not None:
        return SpherePackingResult(best, hi)
    best_a = 0.0
    for _ in range(params.binary_search_iters):
        mid = 0.5 * (lo + hi)
        centers = _try_pack(mid, k, d, params, rng)
        if centers is None:
            hi = mid
        else:
            lo, best, best_a = mid, centers, mid
    if best is None:
        best = _try_pack(0.0, k, d, params, rng)
    return SpherePackingResult(best, best_a)


def kfed(partition: ClientPartition, k: int, rng: np.random.Generator, k_local: int | None = None,
         restarts: int = 1) -> np.ndarray:
    """One-shot non-private federated k-means.

    Every client clusters locally into ``min(k_local, n_j)`` centers; the server
    clusters the pooled local centers, weighted by local cluster sizes.
    """
    k_local = k if k_local is None else k_local
    pooled, sizes = [], []
    for points in partition.clients:
        if len(points) == 0:
            continue
        kj = min(k_local, len(points))
        w = np.ones(len(points))
        centers, _ = weighted_kmeans(points, w, kj, rng, restarts=restarts)
        labels = assign(points, centers)
        pooled.append(centers)
        sizes.append(np.bincount(labels, minlength=kj).astype(float))
    if not pooled:
        raise ValueError("partition holds no points")
    pooled_pts, pooled_w = np.vstack(pooled), np.concatenate(sizes)
    centers, _ = weighted_kmeans(pooled_pts, pooled_w, k, rng, restarts=max(restarts, 10))
    return centers


def optimal_reference(points, k: int, rng: np.random.Generator,
                      restarts: int = 25) -> tuple[np.ndarray, float]:
    """Centralized non-private k-means (best of ``restarts``); returns (centers, cost)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centers, _ = weighted_kmeans(pts, np.ones(len(pts)), k, rng, restarts=restarts)
    return centers, kmeans_cost(pts, centers)

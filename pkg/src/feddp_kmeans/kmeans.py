"""Weighted k-means: cost, nearest-center assignment, k-means++ seeding, Lloyd.

Ties in nearest-center assignment always go to the lowest center index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedPoints",
    "sq_distances",
    "assign",
    "kmeans_cost",
    "weighted_kmeans_pp_seed",
    "cluster_sums",
    "lloyd_step",
    "weighted_lloyd",
    "weighted_kmeans",
    "brute_force_kmeans",
]

_CHUNK = 4096


@dataclass
class WeightedPoints:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have equal length")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def clamped(self) -> "WeightedPoints":
        return WeightedPoints(self.points, np.maximum(self.weights, 0.0))

    def __len__(self) -> int:
        return len(self.weights)


def _check(points, centers) -> tuple[np.ndarray, np.ndarray]:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] == 0:
        raise ValueError("center set is empty")
    if points.shape[1] != centers.shape[1]:
        raise ValueError(f"dimension mismatch: points {points.shape[1]}, centers {centers.shape[1]}")
    return points, centers


def sq_distances(points, centers) -> np.ndarray:
    """Exact (difference-based) squared distances, shape (n, k)."""
    points, centers = _check(points, centers)
    out = np.empty((points.shape[0], centers.shape[0]))
    for start in range(0, points.shape[0], _CHUNK):
        block = points[start:start + _CHUNK]
        diff = block[:, None, :] - centers[None, :, :]
        out[start:start + _CHUNK] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def assign(points, centers) -> np.ndarray:
    return np.argmin(sq_distances(points, centers), axis=1)


def kmeans_cost(points, centers, weights=None, normalize: bool = False) -> float:
    """Sum over points of the squared distance to the nearest center.

    With ``normalize`` the cost is divided by the number of points (or the
    total weight when weights are given).
    """
    d2 = sq_distances(points, centers).min(axis=1)
    if weights is None:
        total = float(d2.sum())
        return total / len(d2) if normalize else total
    w = np.asarray(weights, dtype=float)
    total = float(w @ d2)
    return total / float(w.sum()) if normalize else total


def weighted_kmeans_pp_seed(points, weights, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding where sampling probabilities are scaled by point weights.

    Negative weights are clamped to zero. When every remaining candidate has
    zero ``w * D^2`` (fewer than k distinct positive-weight points), further
    centers are drawn proportionally to weight, which duplicates centers.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not w.sum() > 0:
        raise ValueError("at least one weight must be strictly positive")
    centers = np.empty((k, points.shape[1]))
    idx = rng.choice(len(points), p=w / w.sum())
    centers[0] = points[idx]
    closest = sq_distances(points, centers[:1])[:, 0]
    for i in range(1, k):
        mass = w * closest
        total = mass.sum()
        p = mass / total if total > 0 else w / w.sum()
        idx = rng.choice(len(points), p=p)
        centers[i] = points[idx]
        closest = np.minimum(closest, sq_distances(points, centers[i:i + 1])[:, 0])
    return centers


def cluster_sums(points, labels, k: int, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster (weighted) vector sums and masses, accumulated in row order."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels, dtype=np.intp)
    sums = np.zeros((k, points.shape[1]))
    if weights is None:
        np.add.at(sums, labels, points)
        mass = np.bincount(labels, minlength=k).astype(float)
    else:
        w = np.asarray(weights, dtype=float)
        np.add.at(sums, labels, points * w[:, None])
        mass = np.bincount(labels, weights=w, minlength=k)
    return sums, mass


def lloyd_step(points, weights, centers) -> np.ndarray:
    """One weighted assign/mean update. Empty (zero-weight) clusters keep their center."""
    points, centers = _check(points, centers)
    labels = assign(points, centers)
    sums, mass = cluster_sums(points, labels, centers.shape[0], weights)
    new = centers.copy()
    nonempty = mass > 0
    new[nonempty] = sums[nonempty] / mass[nonempty, None]
    return new


def weighted_lloyd(points, weights, init, max_iters: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Weighted Lloyd iterations from ``init``.

    Stops once the Frobenius norm of the center update is at most
    ``tol * max(1, ||centers||_F)`` or after ``max_iters`` iterations.
    """
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    centers = np.array(init, dtype=float)
    for _ in range(max_iters):
        new = lloyd_step(points, w, centers)
        shift = np.linalg.norm(new - centers)
        centers = new
        if shift <= tol * max(1.0, np.linalg.norm(centers)):
            break
    return centers


def weighted_kmeans(points, weights, k: int, rng: np.random.Generator, restarts: int = 10,
                    max_iters: int = 100, tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Best-of-``restarts`` weighted k-means++ followed by Lloyd. Returns (centers, cost)."""
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    best, best_cost = None, np.inf
    for _ in range(max(1, restarts)):
        init = weighted_kmeans_pp_seed(points, w, k, rng)
        centers = weighted_lloyd(points, w, init, max_iters=max_iters, tol=tol)
        cost = kmeans_cost(points, centers, w)
        if cost < best_cost:
            best, best_cost = centers, cost
    return best, best_cost


def _restricted_growth(n: int, k: int):
    """Yield label vectors for every partition of n items into at most k blocks."""
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield tuple(labels)
            return
        for b in range(min(used + 1, k)):
            labels[i] = b
            yield from rec(i + 1, max(used, b + 1))

    if n == 0:
        return
    yield from rec(1, 1)


def brute_force_kmeans(points, k: int) -> tuple[np.ndarray, float]:
    """Exact k-means optimum by enumerating every partition (n <= 12, k <= 3)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if n > 12 or k > 3 or k < 1:
        raise ValueError(f"brute force limited to n <= 12 and 1 <= k <= 3, got n={n}, k={k}")
    if n == 0:
        raise ValueError("need at least one point")
    best_cost, best_centers = np.inf, None
    for labels in _restricted_growth(n, k):
        labels = np.asarray(labels)
        blocks = labels.max() + 1
        if blocks < min(k, n):
            continue
        centers = np.array([points[labels == b].mean(axis=0) for b in range(blocks)])
        cost = float(((points - centers[labels]) ** 2).sum())
        if cost < best_cost:
            best_cost, best_centers = cost, centers
    if len(best_centers) < k:
        pad = np.repeat(best_centers[-1:], k - len(best_centers), axis=0)
        best_centers = np.vstack([best_centers, pad])
    return best_centers, best_cost


"""Choosing k from the proxy dataset without spending extra budget."""

from __future__ import annotations

import math

import numpy as np

from ..federated import ClientPartition, FederatedRun
from ..feddp_init import InitBudget, server_radius, step1_private_projector, step2_importance_weights
from ..kmeans import weighted_kmeans

__all__ = ["elbow_scan", "locate_elbow"]


def elbow_scan(run: FederatedRun, server_data, partition: ClientPartition, k_prime: int,
               k_range, budget: InitBudget, restarts: int = 10,
               clip_bounds=None) -> list[tuple[int, float]]:
    """Weighted proxy cost for every k in ``k_range``.

    Steps 1 and 2 run once with ``k_prime``; every k is then clustered on the
    same noisy proxy, which is post-processing and charges nothing further.
    """
    ks = sorted({int(k) for k in k_range})
    if not ks or ks[0] < 1 or k_prime < ks[-1]:
        raise ValueError(f"need 1 <= k <= k_prime={k_prime}, got {ks}")
    server = np.atleast_2d(np.asarray(server_data, dtype=float))
    radius = server_radius(server)
    clipped = partition.clipped(radius)
    projector = step1_private_projector(run, clipped, radius, budget.eps1, budget.delta, k_prime,
                                        clip_bounds)
    proxy = step2_importance_weights(run, clipped, projector, server, budget.eps2, clip_bounds)
    proxy = proxy.clamped()
    if not proxy.weights.sum() > 0:
        raise ValueError("all proxy weights are zero after clamping")
    curve = []
    for k in ks:
        k_eff = min(k, len(proxy))
        _, cost = weighted_kmeans(proxy.points, proxy.weights, k_eff, run.rng("elbow", k),
                                  restarts=restarts)
        curve.append((k, float(cost)))
    return curve


def locate_elbow(curve) -> int:
    """k with the largest relative drop ``cost(k - 1) / cost(k)`` over consecutive ks."""
    if len(curve) < 2:
        raise ValueError("need at least two points on the curve")
    best_k, best_ratio = None, -math.inf
    for (_, prev), (k, cost) in zip(curve, curve[1:]):
        if cost <= 0:
            ratio = math.inf if prev > 0 else 1.0
        else:
            ratio = prev / cost
        if ratio > best_ratio:
            best_k, best_ratio = k, ratio
    return best_k

"""Server-data preprocessing used by the theoretical pipeline.

Both procedures are off by default in the practical pipeline: they only matter
when the bounded-diameter or small-server-set conditions fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .dp import PrivacyParams
from .federated import AggregationQuery, ClientPartition, FederatedRun, Mechanism, secure_aggregate
from .kmeans import assign
from .linalg import Projector, project

__all__ = [
    "SimplifyConfig",
    "FrozenSet",
    "simplify_iterations",
    "simplify_server_data",
    "ComponentGraph",
    "DiameterReduction",
    "reduce_diameter",
]


@dataclass(frozen=True)
class SimplifyConfig:
    epsilon: float
    w_min: float | None = None


@dataclass
class FrozenSet:
    """Indices into the server set: ``frozen`` (F) and the survivors after each iteration."""

    frozen: np.ndarray
    iterations: int
    active_history: list[np.ndarray] = field(default_factory=list)
    round_budget: float = 0.0


def simplify_iterations(server_size: int, eps: float, w_min: float) -> int:
    """``ceil(10 ln(4 ln|Q| / (eps w_min)))``, at least 1."""
    arg = 4.0 * math.log(server_size) / (eps * w_min) if server_size > 1 else 0.0
    if arg <= 1.0:
        return 1
    return max(1, math.ceil(10.0 * math.log(arg)))


def simplify_server_data(run: FederatedRun, server_data, partition: ClientPartition,
                         projector: Projector, eps: float, n: int | None = None,
                         k: int | None = None, w_min: float | None = None,
                         label: str = "simplify") -> FrozenSet:
    """Freeze server points that attract many client points; halve the rest each round.

    Each of the T iterations is one round: clients report, for every candidate in
    ``F`` and the active set, how many of their projected points have it as the
    nearest projected candidate (Laplace noise of scale T/eps). Active points
    whose noisy weight exceeds ``2 ln(n) / eps`` are frozen; the light active
    points survive independently with probability 1/2.
    """
    server = np.atleast_2d(np.asarray(server_data, dtype=float))
    if server.size == 0:
        raise ValueError("server data is empty")
    n = partition.n if n is None else n
    if w_min is None:
        w_min = 1.0 / k if k else 1.0
    T = simplify_iterations(len(server), eps, w_min)
    threshold = 2.0 * math.log(n) / eps
    proj_server = project(projector, server)
    sampler = run.rng(label, "subsample")

    frozen = np.zeros(len(server), dtype=bool)
    active = np.ones(len(server), dtype=bool)
    history = [np.flatnonzero(active)]
    for t in range(T):
        cand = np.flatnonzero(frozen | active)
        params = PrivacyParams(eps / T, 0.0)
        tag = f"{label}/iter{t}"
        run.charge(tag, params)
        if cand.size == 0:
            secure_aggregate(run, AggregationQuery(tag, lambda j, p: np.zeros(0), Mechanism.LAPLACE,
                                                   sensitivity=1.0, budget=params), partition)
            history.append(cand)
            continue
        targets = proj_server[cand]

        def histogram(j, points, targets=targets):
            nearest = assign(project(projector, points), targets)
            return np.bincount(nearest, minlength=len(targets)).astype(float)

        weights = secure_aggregate(
            run, AggregationQuery(tag, histogram, Mechanism.LAPLACE, sensitivity=1.0, budget=params),
            partition)
        heavy = cand[weights > threshold]
        light_active = cand[(weights <= threshold) & active[cand]]
        frozen[heavy[active[heavy]]] = True
        active[:] = False
        keep = sampler.random(light_active.size) < 0.5
        active[light_active[keep]] = True
        history.append(np.flatnonzero(active))
    return FrozenSet(np.flatnonzero(frozen), T, history, eps / T)


@dataclass
class ComponentGraph:
    """Threshold graph on surviving server points (indices into the server set)."""

    vertices: np.ndarray
    edges: np.ndarray
    component: np.ndarray
    threshold: float


@dataclass
class DiameterReduction:
    partition: ClientPartition
    server: np.ndarray
    graph: ComponentGraph
    offsets: np.ndarray
    scale: float
    frozen: np.ndarray
    client_components: list[np.ndarray]

    def invert(self, points, components) -> np.ndarray:
        """Undo the per-component translation of ``points`` belonging to ``components``."""
        return np.asarray(points, dtype=float) - self.offsets[np.asarray(components)]


def reduce_diameter(run: FederatedRun, server_data, partition: ClientPartition, eps: float,
                    D: float, freeze_count_threshold: float, w_min: float,
                    n: int | None = None, label: str = "diameter") -> DiameterReduction:
    """Pack distant groups of data closer together with one noisy-count round.

    Server points with at least ``freeze_count_threshold`` server points within
    distance D are frozen. Clients report noisy nearest-server-point counts
    (Laplace 1/eps); a non-frozen point is pruned when the noisy count of its
    D-ball is below ``n w_min / 3``. Survivors are joined when within distance
    D; component i is translated so its lowest-index point lands at
    ``(100 D' i, 0, ..., 0)`` with D' the largest component diameter (at least D).
    Client points move with the component of their nearest server point.
    """
    if not D > 0:
        raise ValueError("D must be positive")
    server = np.atleast_2d(np.asarray(server_data, dtype=float))
    if server.size == 0:
        raise ValueError("server data is empty")
    n = partition.n if n is None else n
    dist = cdist(server, server)
    within = dist <= D
    frozen = within.sum(axis=1) >= freeze_count_threshold

    params = PrivacyParams(eps, 0.0)
    run.charge(label, params)

    def histogram(j, points):
        return np.bincount(assign(points, server), minlength=len(server)).astype(float)

    counts = secure_aggregate(
        run, AggregationQuery(label, histogram, Mechanism.LAPLACE, sensitivity=1.0, budget=params),
        partition)
    ball_counts = within.astype(float) @ counts
    keep = frozen | (ball_counts >= n * w_min / 3.0)
    survivors = np.flatnonzero(keep)
    if survivors.size == 0:
        raise ValueError("no server point survived pruning")

    sub = dist[np.ix_(survivors, survivors)]
    adj = (sub <= D) & ~np.eye(len(survivors), dtype=bool)
    n_comp, comp = connected_components(csr_matrix(adj), directed=False)
    ii, jj = np.nonzero(np.triu(adj))
    edges = np.column_stack([survivors[ii], survivors[jj]])

    diam = max(float(sub[np.ix_(comp == c, comp == c)].max()) for c in range(n_comp))
    scale = max(diam, D)
    d = server.shape[1]
    offsets = np.zeros((n_comp, d))
    for c in range(n_comp):
        rep = server[survivors[np.flatnonzero(comp == c)[0]]]
        target = np.zeros(d)
        target[0] = 100.0 * scale * c
        offsets[c] = target - rep

    server_comp = np.full(len(server), -1)
    server_comp[survivors] = comp
    new_server = server[survivors] + offsets[comp]
    clients, client_comps = [], []
    for points in partition.clients:
        nearest = assign(points, server[survivors])
        cc = comp[nearest]
        clients.append(points + offsets[cc])
        client_comps.append(cc)
    graph = ComponentGraph(survivors, edges, comp, D)
    return DiameterReduction(ClientPartition(clients, partition.labels), new_server, graph,
                             offsets, scale, np.flatnonzero(frozen), client_comps)

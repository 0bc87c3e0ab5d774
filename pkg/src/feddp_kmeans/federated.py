"""Federated simulation: client partitions, a run context, and secure aggregation.

Secure aggregation is modelled as a trusted summation point: the server only
sees the sum of client statistics plus a single draw of mechanism noise.
Sums are computed exactly (correctly rounded per coordinate), so the
aggregate does not depend on client order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dp import (
    BudgetLedger,
    PrivacyParams,
    add_gaussian_noise,
    add_laplace_noise,
    clip_l1,
    clip_l2,
    gaussian_sigma,
    laplace_scale,
    substream,
    symmetric_gaussian_matrix,
)
from .kmeans import assign, cluster_sums

__all__ = [
    "PrivacyUnit",
    "Mechanism",
    "ClientPartition",
    "AggregationQuery",
    "ClientClipBounds",
    "FederatedRun",
    "secure_aggregate",
    "round_trip_counter",
    "sum_count_aggregate",
    "mean_of_means_aggregate",
    "noisy_centers",
    "estimate_clip_bounds",
]


class PrivacyUnit(enum.Enum):
    DATA_POINT = "datapoint"
    CLIENT = "client"


class Mechanism(enum.Enum):
    GAUSSIAN = "gaussian"
    # square-matrix statistic; noise is a symmetric Gaussian matrix
    GAUSSIAN_SYMMETRIC = "gaussian_symmetric"
    LAPLACE = "laplace"
    NONE = "none"


@dataclass
class ClientPartition:
    """Client datasets ``P^1 .. P^m`` (each an (n_j, d) array).

    ``labels`` optionally carries ground-truth component labels aligned with
    each client's rows (synthetic data only).
    """

    clients: list[np.ndarray]
    labels: list[np.ndarray] | None = None

    def __post_init__(self):
        if len(self.clients) < 1:
            raise ValueError("a partition needs at least one client")
        self.clients = [np.atleast_2d(np.asarray(c, dtype=float)) for c in self.clients]
        dims = {c.shape[1] for c in self.clients}
        if len(dims) != 1:
            raise ValueError(f"clients disagree on dimension: {sorted(dims)}")
        if self.labels is not None:
            self.labels = [np.asarray(lbl) for lbl in self.labels]
            if [len(lbl) for lbl in self.labels] != [len(c) for c in self.clients]:
                raise ValueError("labels must align with client rows")

    @property
    def m(self) -> int:
        return len(self.clients)

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.clients)

    @property
    def d(self) -> int:
        return self.clients[0].shape[1]

    def all_points(self) -> np.ndarray:
        return np.vstack(self.clients)

    def all_labels(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("partition carries no labels")
        return np.concatenate(self.labels)

    def clipped(self, bound: float) -> "ClientPartition":
        """Every point clipped to L2 norm ``bound`` (each client clips locally)."""
        out = []
        for c in self.clients:
            norms = np.linalg.norm(c, axis=1)
            scale = np.where(norms > bound, bound / np.where(norms > 0, norms, 1.0), 1.0)
            out.append(c * scale[:, None])
        return ClientPartition(out, self.labels)

    def reordered(self, order: Sequence[int]) -> "ClientPartition":
        labels = None if self.labels is None else [self.labels[i] for i in order]
        return ClientPartition([self.clients[i] for i in order], labels)


@dataclass(frozen=True)
class AggregationQuery:
    """One statistic that every client computes and the server receives summed.

    ``statistic(j, points)`` returns client ``j``'s contribution. In
    data-point mode noise is calibrated to ``sensitivity``; in client mode each
    contribution is clipped to ``clip_bound`` (L2 for Gaussian, L1 for Laplace)
    and the noise is calibrated to that bound.
    """

    label: str
    statistic: Callable[[int, np.ndarray], np.ndarray]
    mechanism: Mechanism = Mechanism.NONE
    sensitivity: float = 0.0
    budget: PrivacyParams | None = None
    clip_bound: float | None = None


@dataclass(frozen=True)
class ClientClipBounds:
    """Per-query clipping bounds for client-level privacy.

    outer: Frobenius bound on a client's outer-product matrix (Step 1).
    weights: L1 bound on a client's nearest-server-point histogram (Step 2).
    mean: L2 bound on a client's stacked k x d local cluster means.
    hist: L1 bound on a client's nonempty-cluster indicator vector.
    """

    outer: float
    weights: float
    mean: float
    hist: float


@dataclass
class FederatedRun:
    """Mutable state of one simulated run: seed, ledger and round counter.

    With ``noise=False`` every mechanism is bypassed (the non-private limit);
    budgets are still charged so the accounting path is exercised.
    """

    seed: int = 0
    unit: PrivacyUnit = PrivacyUnit.DATA_POINT
    noise: bool = True
    ledger: BudgetLedger = field(default_factory=BudgetLedger)
    rounds: int = 0

    def charge(self, label: str, params: PrivacyParams) -> None:
        self.ledger.append(label, params)

    def rng(self, *key) -> np.random.Generator:
        return substream(self.seed, *key)


def round_trip_counter(run: FederatedRun) -> int:
    return run.rounds


def _exact_sum(contributions: list[np.ndarray]) -> np.ndarray:
    stacked = np.stack([np.asarray(c, dtype=float) for c in contributions])
    flat = stacked.reshape(len(contributions), -1)
    total = np.fromiter((math.fsum(col) for col in flat.T), dtype=float, count=flat.shape[1])
    return total.reshape(stacked.shape[1:])


def _aggregate_one(run: FederatedRun, query: AggregationQuery, partition: ClientPartition) -> np.ndarray:
    private = query.mechanism is not Mechanism.NONE
    if private:
        if query.budget is None:
            raise ValueError(f"query {query.label!r} has a mechanism but no budget")
        if query.label not in run.ledger:
            raise ValueError(f"budget for {query.label!r} was not registered in the ledger")
    client_mode = run.unit is PrivacyUnit.CLIENT
    if private and client_mode and query.clip_bound is None:
        raise ValueError(f"client-level query {query.label!r} needs a clip bound")

    contributions = []
    for j, points in enumerate(partition.clients):
        stat = np.asarray(query.statistic(j, points), dtype=float)
        if private and client_mode:
            clip = clip_l1 if query.mechanism is Mechanism.LAPLACE else clip_l2
            stat = clip(stat.ravel(), query.clip_bound).reshape(stat.shape)
        contributions.append(stat)
    total = _exact_sum(contributions)

    if not private or not run.noise:
        return total
    sens = query.clip_bound if client_mode else query.sensitivity
    rng = run.rng("round", run.rounds, query.label)
    eps, delta = query.budget.epsilon, query.budget.delta
    if query.mechanism is Mechanism.LAPLACE:
        return np.asarray(add_laplace_noise(total, laplace_scale(eps, sens), rng))
    sigma = gaussian_sigma(eps, delta, sens)
    if query.mechanism is Mechanism.GAUSSIAN_SYMMETRIC:
        if total.ndim != 2 or total.shape[0] != total.shape[1]:
            raise ValueError("symmetric Gaussian noise needs a square matrix statistic")
        return total + symmetric_gaussian_matrix(total.shape[0], sigma, rng)
    return add_gaussian_noise(total, sigma, rng)


def secure_aggregate(run: FederatedRun, queries, partition: ClientPartition):
    """Run one communication round evaluating ``queries`` on every client.

    Accepts a single query (returns one array) or a sequence of queries
    answered in the same round (returns a list). Each noisy query must have
    its budget charged to ``run.ledger`` beforehand.
    """
    single = isinstance(queries, AggregationQuery)
    batch = [queries] if single else list(queries)
    results = [_aggregate_one(run, q, partition) for q in batch]
    run.rounds += 1
    return results[0] if single else results


def _charge_pair(run, label, eps_gauss, eps_laplace, delta):
    gauss = PrivacyParams(eps_gauss, delta)
    lap = PrivacyParams(eps_laplace, 0.0)
    run.charge(f"{label}/gaussian", gauss)
    run.charge(f"{label}/laplace", lap)
    return gauss, lap


def sum_count_aggregate(run: FederatedRun, partition: ClientPartition, labeler, k: int,
                        eps_gauss: float, eps_laplace: float, delta: float, delta_clip: float,
                        label: str) -> tuple[np.ndarray, np.ndarray]:
    """Noisy per-cluster sums (Gaussian, L2 sensitivity ``delta_clip``) and counts (Laplace, 1).

    ``labeler(points)`` maps a client's points to cluster indices in ``[0, k)``.
    """
    gauss, lap = _charge_pair(run, label, eps_gauss, eps_laplace, delta)
    labels = [labeler(points) for points in partition.clients]
    sums_q = AggregationQuery(
        f"{label}/gaussian",
        lambda j, p: cluster_sums(p, labels[j], k)[0],
        Mechanism.GAUSSIAN, sensitivity=delta_clip, budget=gauss,
    )
    counts_q = AggregationQuery(
        f"{label}/laplace",
        lambda j, p: cluster_sums(p, labels[j], k)[1],
        Mechanism.LAPLACE, sensitivity=1.0, budget=lap,
    )
    sums, counts = secure_aggregate(run, [sums_q, counts_q], partition)
    return sums, counts


def mean_of_means_aggregate(run: FederatedRun, partition: ClientPartition, labeler, k: int,
                            bound_mean: float, bound_hist: float, eps_gauss: float,
                            eps_laplace: float, delta: float,
                            label: str) -> tuple[np.ndarray, np.ndarray]:
    """Client-level variant: noisy sum of local cluster means and nonempty-cluster counts.

    Client ``j`` sends ``u_r = m_r / n_r`` (zero for an empty cluster) clipped to
    ``bound_mean`` and the indicator ``c_r = [n_r > 0]`` clipped to ``bound_hist``.
    """
    if run.unit is not PrivacyUnit.CLIENT:
        raise ValueError("mean-of-means aggregation is only defined for client-level privacy")
    gauss, lap = _charge_pair(run, label, eps_gauss, eps_laplace, delta)
    local = []
    for points in partition.clients:
        sums, counts = cluster_sums(points, labeler(points), k)
        means = np.zeros_like(sums)
        nonempty = counts > 0
        means[nonempty] = sums[nonempty] / counts[nonempty, None]
        local.append((means, nonempty.astype(float)))
    mean_q = AggregationQuery(f"{label}/gaussian", lambda j, p: local[j][0], Mechanism.GAUSSIAN,
                              budget=gauss, clip_bound=bound_mean)
    hist_q = AggregationQuery(f"{label}/laplace", lambda j, p: local[j][1], Mechanism.LAPLACE,
                              budget=lap, clip_bound=bound_hist)
    u, c = secure_aggregate(run, [mean_q, hist_q], partition)
    return u, c


def noisy_centers(sums: np.ndarray, counts: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """Centers ``sums / max(counts, 1)``; a cluster whose count is <= 0 keeps ``previous``."""
    centers = sums / np.maximum(counts, 1.0)[:, None]
    dead = counts <= 0
    centers[dead] = np.asarray(previous, dtype=float)[dead]
    return centers


def estimate_clip_bounds(server_points, client_size: int, k: int, delta_clip: float,
                         rng: np.random.Generator, pseudo_clients: int = 200,
                         quantile: float = 0.9) -> ClientClipBounds:
    """Client-level clip bounds from pseudo-clients resampled out of server data.

    Each pseudo-client draws ``client_size`` server points (clipped to
    ``delta_clip``); each bound is the ``quantile`` of the corresponding
    statistic norm. Uses only public server data, so it costs no budget.
    """
    from .kmeans import weighted_kmeans

    server = np.atleast_2d(np.asarray(server_points, dtype=float))
    server = ClientPartition([server]).clipped(delta_clip).clients[0]
    centers, _ = weighted_kmeans(server, np.ones(len(server)), min(k, len(server)), rng, restarts=3)
    outer, mean, hist = [], [], []
    for _ in range(pseudo_clients):
        pts = server[rng.integers(0, len(server), size=client_size)]
        outer.append(np.linalg.norm(pts.T @ pts))
        sums, counts = cluster_sums(pts, assign(pts, centers), len(centers))
        nonempty = counts > 0
        means = np.zeros_like(sums)
        means[nonempty] = sums[nonempty] / counts[nonempty, None]
        mean.append(np.linalg.norm(means))
        hist.append(nonempty.sum())
    q = lambda xs: float(max(np.quantile(xs, quantile), 1e-12))  # noqa: E731
    return ClientClipBounds(outer=q(outer), weights=float(client_size), mean=q(mean), hist=q(hist))

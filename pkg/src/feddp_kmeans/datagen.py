"""Synthetic Gaussian-mixture scenarios, separation checks and matrix file I/O.

Sampling uses whatever ``numpy.random.Generator`` is passed in; the run code
always passes Philox substreams (see :func:`feddp_kmeans.dp.substream`), and
normals come from numpy's ziggurat sampler. Changing either changes every
generated dataset.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .federated import ClientPartition

__all__ = [
    "MixtureSpec",
    "ScenarioSpec",
    "AssumptionReport",
    "desk_scale_spec",
    "reference_scale_spec",
    "generate_mixture",
    "check_separation",
    "check_assumptions",
    "partition_clients",
    "make_server_data",
    "make_scenario",
    "import_matrix",
    "export_matrix",
]

BINARY_MAGIC = b"FDKM"


@dataclass
class MixtureSpec:
    """Isotropic Gaussian mixture; component i is ``N(means[i], variance * I)``."""

    means: np.ndarray
    variance: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        k = len(self.means)
        if self.weights is None:
            self.weights = np.full(k, 1.0 / k)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (k,) or np.any(self.weights < 0):
            raise ValueError("need one nonnegative weight per component")
        if not math.isclose(self.weights.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("mixture weights must sum to 1")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def w_min(self) -> float:
        return float(self.weights.min())


@dataclass
class ScenarioSpec:
    m: int = 20
    points_per_client: int = 500
    in_dist_per_component: int = 20
    ood_count: int = 50
    missing_components: tuple[int, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.m * self.points_per_client


def _min_pairwise(means: np.ndarray) -> float:
    diff = means[:, None, :] - means[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    dist[np.diag_indices(len(means))] = np.inf
    return float(dist.min())


def desk_scale_spec(rng: np.random.Generator, k: int = 5, d: int = 20, n: int = 10_000,
                    separation: float = 2.0) -> MixtureSpec:
    """Means uniform in ``[0, 1]^d``, equal weights, variance set from the separation rule.

    The variance is the largest value for which the separation check holds with
    constant ``separation`` (so it also holds at c = 1 whenever separation >= 1).
    """
    means = rng.uniform(0.0, 1.0, size=(k, d))
    # equal weights: sqrt(k / w_min) == k
    variance = _min_pairwise(means) / (separation * k * math.log(n))
    return MixtureSpec(means, variance)


def reference_scale_spec(rng: np.random.Generator, k: int = 10, d: int = 100) -> MixtureSpec:
    """Means uniform in ``[0, 1]^d``, covariance ``0.5 I``, equal weights."""
    return MixtureSpec(rng.uniform(0.0, 1.0, size=(k, d)), 0.5)


def generate_mixture(spec: MixtureSpec, n: int, rng: np.random.Generator,
                     components=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` points; returns (points, generating component labels).

    ``components`` restricts sampling to a subset of components (weights renormalized).
    """
    weights = spec.weights.copy()
    if components is not None:
        mask = np.zeros(spec.k, dtype=bool)
        mask[list(components)] = True
        weights = np.where(mask, weights, 0.0)
        if not weights.sum() > 0:
            raise ValueError("no component left to sample from")
        weights /= weights.sum()
    labels = rng.choice(spec.k, size=n, p=weights)
    noise = rng.normal(0.0, 1.0, size=(n, spec.d))
    points = spec.means[labels] + math.sqrt(spec.variance) * noise
    return points, labels


def check_separation(spec: MixtureSpec, n: int, c: float = 1.0) -> tuple[bool, float]:
    """Check ``||mu_i - mu_j|| >= c sqrt(k / w_i) sigma_max ln(n)`` for all pairs.

    ``sigma_max`` is the largest variance along any direction, i.e. ``spec.variance``.
    Returns (holds, worst margin) where margin is distance minus requirement.
    """
    if spec.k < 2:
        return True, math.inf
    margin = math.inf
    need_max = 0.0
    for i in range(spec.k):
        need = c * math.sqrt(spec.k / spec.weights[i]) * spec.variance * math.log(n)
        need_max = max(need_max, need)
        for j in range(spec.k):
            if i != j:
                dist = float(np.linalg.norm(spec.means[i] - spec.means[j]))
                margin = min(margin, dist - need)
    # equality counts as separated, up to rounding of the requirement
    return margin >= -1e-12 * max(1.0, need_max), margin


@dataclass
class AssumptionReport:
    radius: float
    n: int
    diameter_bound: float
    diameter_ok: bool
    server_size: int
    server_bound: float
    server_ok: bool


def check_assumptions(points, server_data, eps: float, k: int, sigma_max: float,
                      w_min: float, n: int | None = None) -> AssumptionReport:
    """Evaluate the bounded-diameter and server-size conditions with unit constants.

    radius = max point norm (``Delta``);
    diameter condition: ``Delta <= k ln(n)^2 sqrt(d) sigma_max / (eps w_min)``;
    server-size condition: ``|Q| <= eps n k ln(n) sigma_max^2 / Delta^2``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    server = np.asarray(server_data, dtype=float).reshape(-1, pts.shape[1])
    n = len(pts) if n is None else n
    radius = float(np.linalg.norm(pts, axis=1).max())
    d = pts.shape[1]
    ln = math.log(n)
    diam_bound = k * ln ** 2 * math.sqrt(d) * sigma_max / (eps * w_min)
    server_bound = eps * n * k * ln * sigma_max ** 2 / radius ** 2
    return AssumptionReport(
        radius=radius, n=n,
        diameter_bound=diam_bound, diameter_ok=radius <= diam_bound,
        server_size=len(server), server_bound=server_bound,
        server_ok=len(server) <= server_bound,
    )


def partition_clients(points, labels, m: int, rng: np.random.Generator, scheme: str = "iid",
                      sizes=None) -> ClientPartition:
    """Split rows across ``m`` clients.

    ``iid`` shuffles and splits as evenly as possible. ``by_size`` shuffles and
    splits by explicit ``sizes`` (summing to n) or, when omitted, by sizes drawn
    from a flat Dirichlet with every client keeping at least one point.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    lbl = None if labels is None else np.asarray(labels)
    order = rng.permutation(n)
    if scheme == "iid":
        chunks = np.array_split(order, m)
    elif scheme == "by_size":
        if sizes is None:
            props = rng.dirichlet(np.ones(m))
            sizes = 1 + np.floor(props * (n - m)).astype(int)
            sizes[: (n - sizes.sum())] += 1
        sizes = np.asarray(sizes, dtype=int)
        if len(sizes) != m or sizes.sum() != n or np.any(sizes < 0):
            raise ValueError("sizes must be m nonnegative integers summing to n")
        chunks = np.split(order, np.cumsum(sizes)[:-1])
    else:
        raise ValueError(f"unknown partition scheme {scheme!r}")
    clients = [pts[c] for c in chunks]
    client_labels = None if lbl is None else [lbl[c] for c in chunks]
    return ClientPartition(clients, client_labels)


def make_server_data(spec: MixtureSpec, scenario: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """In-distribution samples from each non-missing component plus uniform ``[0,1]^d`` points."""
    parts = []
    for comp in range(spec.k):
        if comp in scenario.missing_components:
            continue
        noise = rng.normal(0.0, 1.0, size=(scenario.in_dist_per_component, spec.d))
        parts.append(spec.means[comp] + math.sqrt(spec.variance) * noise)
    parts.append(rng.uniform(0.0, 1.0, size=(scenario.ood_count, spec.d)))
    return np.vstack(parts)


def make_scenario(spec: MixtureSpec, scenario: ScenarioSpec, rng: np.random.Generator):
    """Client partition (iid, with labels) and server data for one scenario."""
    points, labels = generate_mixture(spec, scenario.n, rng)
    partition = partition_clients(points, labels, scenario.m, rng)
    server = make_server_data(spec, scenario, rng)
    return partition, server


def _check_matrix(arr: np.ndarray, source) -> np.ndarray:
    if arr.size == 0:
        raise ValueError(f"{source}: no data")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{source}: non-finite values")
    return arr


def import_matrix(path, fmt: str = "csv") -> np.ndarray:
    """Load an (n, d) matrix from CSV (optional header line) or the FDKM binary format."""
    path = Path(path)
    if fmt == "csv":
        rows = []
        with path.open(newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    rows.append([float(cell) for cell in row])
                except ValueError:
                    if lineno == 1 and not rows:
                        continue  # header
                    raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
                if len(rows[-1]) != len(rows[0]):
                    raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
        return _check_matrix(np.asarray(rows, dtype=float), path)
    if fmt == "binary_f64":
        raw = path.read_bytes()
        if len(raw) < 12 or raw[:4] != BINARY_MAGIC:
            raise ValueError(f"{path}: missing FDKM header")
        n, d = struct.unpack("<II", raw[4:12])
        body = raw[12:]
        if len(body) != 8 * n * d:
            raise ValueError(f"{path}: expected {n}x{d} doubles, found {len(body)} bytes")
        arr = np.frombuffer(body, dtype="<f8").reshape(n, d).astype(float)
        return _check_matrix(arr, path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def export_matrix(points, path, fmt: str = "csv") -> None:
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            for row in arr:
                writer.writerow([repr(float(x)) for x in row])
    elif fmt == "binary_f64":
        n, d = arr.shape
        path.write_bytes(BINARY_MAGIC + struct.pack("<II", n, d) + arr.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")

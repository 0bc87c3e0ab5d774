"""Run every (method, grid point, seed) job of an experiment config."""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..baselines import (
    SpherePackingParams,
    kfed,
    optimal_reference,
    server_kmeanspp,
    server_lloyds,
    sphere_packing_init,
)
from ..datagen import (
    ScenarioSpec,
    desk_scale_spec,
    generate_mixture,
    import_matrix,
    make_server_data,
    partition_clients,
    reference_scale_spec,
)
from ..dp import BudgetLedger, substream, total_budget
from ..federated import ClientPartition, FederatedRun, PrivacyUnit, estimate_clip_bounds
from ..feddp_init import CLIENT_PROPORTIONS, DATA_POINT_PROPORTIONS, InitBudget, server_radius
from ..feddp_lloyds import LloydsConfig, run_feddp_kmeans, run_feddp_lloyds
from ..kmeans import kmeans_cost
from .config import DataConfig, ExperimentConfig, GridPoint, Method

__all__ = ["Dataset", "RunRecord", "build_dataset", "eps_total_from_ledger", "run_job",
           "run_experiment", "workers_from_env"]

WORKERS_ENV = "FEDDP_BENCH_WORKERS"


@dataclass
class Dataset:
    partition: ClientPartition
    server: np.ndarray
    points: np.ndarray
    labels: np.ndarray | None
    means: np.ndarray | None = None


@dataclass
class RunRecord:
    config_hash: str
    method: str
    grid_index: int
    seed: int
    eps_init: float | None
    T: int
    eps_lloyds: float | None
    eps_total: float
    delta: float
    cost: float
    rounds: int
    non_private: bool
    ledger: str
    # excluded from equality and from the deterministic output files
    wall_time: float = field(default=0.0, compare=False)


def _scenario(data: DataConfig) -> ScenarioSpec:
    return ScenarioSpec(m=data.m, points_per_client=data.n // data.m,
                        in_dist_per_component=data.in_dist_per_component,
                        ood_count=data.ood_count, missing_components=data.missing_components)


def build_dataset(data: DataConfig, seed: int) -> Dataset:
    """Client partition and server data for one seed (deterministic in ``seed``)."""
    rng = substream(seed, "data")
    if data.kind == "import":
        points = import_matrix(data.path, data.format)
        server = import_matrix(data.server_path, data.format)
        if server.shape[1] != points.shape[1]:
            raise ValueError("client and server data disagree on dimension")
        return Dataset(partition_clients(points, None, data.m, rng), server, points, None)
    if data.kind == "desk":
        spec = desk_scale_spec(rng, k=data.k, d=data.d, n=data.n, separation=data.separation)
    else:
        spec = reference_scale_spec(rng, k=data.k, d=data.d)
    scenario = _scenario(data)
    points, labels = generate_mixture(spec, scenario.n, rng)
    partition = partition_clients(points, labels, scenario.m, rng)
    server = make_server_data(spec, scenario, rng)
    return Dataset(partition, server, partition.all_points(), partition.all_labels(), spec.means)


@lru_cache(maxsize=4)
def _cached_dataset(data_json: str, seed: int) -> Dataset:
    return build_dataset(DataConfig(**json.loads(data_json)), seed)


def eps_total_from_ledger(ledger_json: str) -> tuple[float, float]:
    """(eps_total, delta) of a serialized ledger; an empty ledger costs nothing."""
    ledger = BudgetLedger.from_list(json.loads(ledger_json))
    if len(ledger) == 0:
        return 0.0, 0.0
    total = total_budget(ledger)
    return total.epsilon, total.delta


def _job_seed(seed: int, method: Method, gp: GridPoint) -> int:
    ss = np.random.SeedSequence([seed, list(Method).index(method), gp.index])
    return int(ss.generate_state(1, np.uint64)[0])


def _clip_bounds(cfg: ExperimentConfig, run: FederatedRun, ds: Dataset, radius: float):
    if cfg.unit is not PrivacyUnit.CLIENT:
        return None
    size = max(1, ds.partition.n // ds.partition.m)
    return estimate_clip_bounds(ds.server, size, cfg.data.k, radius, run.rng("clip_bounds"))


def _lloyd_split(cfg: ExperimentConfig, eps: float) -> tuple[float, float]:
    g = cfg.grid.gauss_fraction
    return g * eps, (1.0 - g) * eps


def run_job(cfg: ExperimentConfig, method: Method, gp: GridPoint, seed: int,
            ds: Dataset | None = None) -> RunRecord:
    """One run; the reported cost is the noise-free normalized cost on all client points."""
    start = time.perf_counter()
    if ds is None:
        ds = build_dataset(cfg.data, seed)
    k = cfg.data.k
    run = FederatedRun(seed=_job_seed(seed, method, gp), unit=cfg.unit, noise=cfg.noise)

    if method is Method.OPTIMAL:
        centers, _ = optimal_reference(ds.points, k, run.rng("optimal"), restarts=max(cfg.restarts, 10))
    elif method is Method.KFED:
        centers = kfed(ds.partition, k, run.rng("kfed"))
    else:
        radius = server_radius(ds.server)
        bounds = _clip_bounds(cfg, run, ds, radius)
        eps_g, eps_l = _lloyd_split(cfg, gp.eps_lloyds) if gp.T > 0 else (1.0, 1.0)
        if method is Method.FEDDP:
            # delta is split evenly over the Gaussian groups: Step 1, Step 3, Lloyd rounds
            step_delta = cfg.delta / (2 + (gp.T > 0))
            props = CLIENT_PROPORTIONS if cfg.unit is PrivacyUnit.CLIENT else DATA_POINT_PROPORTIONS
            result = run_feddp_kmeans(run, ds.partition, ds.server, k,
                                      InitBudget.split(gp.eps_init, step_delta, props), T=gp.T,
                                      eps_gauss=eps_g, eps_laplace=eps_l, lloyds_delta=step_delta,
                                      delta_clip=radius, clip_bounds=bounds,
                                      restarts=cfg.restarts)
            centers = result.centers
        else:
            rng = run.rng("baseline_init")
            if method is Method.SERVER_KMEANSPP:
                init = server_kmeanspp(ds.server, k, rng)
            elif method is Method.SERVER_LLOYDS:
                init = server_lloyds(ds.server, k, rng)
            else:
                half = float(np.abs(ds.server).max())
                init = sphere_packing_init(SpherePackingParams(half), k, ds.server.shape[1], rng).centers
            lcfg = LloydsConfig(gp.T, eps_g, eps_l, cfg.delta, radius, bounds)
            centers = run_feddp_lloyds(run, ds.partition, init, lcfg).final

    ledger_json = json.dumps(run.ledger.to_list(), sort_keys=True)
    if method.non_private:
        eps_total, delta = math.inf, 0.0
    else:
        eps_total, delta = eps_total_from_ledger(ledger_json)
    cost = kmeans_cost(ds.points, centers, normalize=True)
    return RunRecord(cfg.config_hash(), method.value, gp.index, seed, gp.eps_init, gp.T,
                     gp.eps_lloyds, eps_total, delta, cost, run.rounds, method.non_private,
                     ledger_json, time.perf_counter() - start)


def _run_seed(cfg: ExperimentConfig, seed: int) -> list[RunRecord]:
    data_json = json.dumps({**cfg.data.__dict__, "missing_components": list(cfg.data.missing_components)},
                           sort_keys=True)
    ds = _cached_dataset(data_json, seed)
    return [run_job(cfg, method, gp, seed, ds)
            for method in cfg.methods for gp in cfg.grid_points(method)]


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{WORKERS_ENV} must be positive")
    return value


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[RunRecord]:
    """All records, ordered by (method, grid index, seed) regardless of worker count."""
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        per_seed = [_run_seed(cfg, s) for s in cfg.seeds]
    records = [r for batch in per_seed for r in batch]
    order = {m.value: i for i, m in enumerate(cfg.methods)}
    records.sort(key=lambda r: (order[r.method], r.grid_index, cfg.seeds.index(r.seed)))
    return records

import numpy as np
import pytest

from feddp_kmeans.datagen import ScenarioSpec, desk_scale_spec, make_scenario
from feddp_kmeans.dp import compose_basic, substream
from feddp_kmeans.federated import ClientPartition, FederatedRun, PrivacyUnit, estimate_clip_bounds
from feddp_kmeans.feddp_init import (
    CLIENT_PROPORTIONS,
    DATA_POINT_PROPORTIONS,
    InitBudget,
    run_feddp_init,
    server_radius,
    step1_private_projector,
    step2_importance_weights,
)
from feddp_kmeans.kmeans import assign
from feddp_kmeans.linalg import project, top_k_projector


@pytest.fixture(scope="module")
def scenario():
    rng = substream(3, "test-data")
    spec = desk_scale_spec(rng, n=2000)
    part, server = make_scenario(spec, ScenarioSpec(m=5, points_per_client=400), rng)
    return spec, part, server


def test_budget_split_proportions():
    b = InitBudget.split(2.0, 1e-6)
    assert b.total == pytest.approx(2.0, abs=1e-15)
    assert (b.eps1, b.eps2, b.eps3G, b.eps3L) == pytest.approx((0.4, 0.4, 0.9, 0.3))
    c = InitBudget.split(1.0, 1e-6, CLIENT_PROPORTIONS)
    assert (c.eps1, c.eps2, c.eps3G, c.eps3L) == pytest.approx((0.35, 0.1, 0.45, 0.1))
    assert sum(DATA_POINT_PROPORTIONS) == pytest.approx(1.0)


def test_budget_validation():
    with pytest.raises(ValueError):
        InitBudget(0.0, 1, 1, 1, 1e-6)
    with pytest.raises(ValueError):
        InitBudget(1, 1, 1, 1, 0.0)
    with pytest.raises(ValueError):
        InitBudget.split(1.0, 1e-6, (1, 1, 1))


def test_server_radius():
    assert server_radius([[3.0, 4.0], [1.0, 0.0]]) == 5.0
    with pytest.raises(ValueError):
        server_radius(np.zeros((0, 2)))


def test_init_uses_three_rounds_and_charges_budget(scenario):
    spec, part, server = scenario
    run = FederatedRun(seed=1)
    budget = InitBudget.split(1.0, 1e-6)
    res = run_feddp_init(run, part, server, spec.k, budget)
    assert run.rounds == 3
    total = compose_basic(run.ledger)
    assert total.epsilon == pytest.approx(1.0, abs=1e-12)
    assert total.delta == pytest.approx(2e-6)
    assert res.centers.shape == (spec.k, spec.d)
    assert res.projector.rank == spec.k


def test_noise_free_steps_match_direct_computation(scenario):
    spec, part, server = scenario
    radius = server_radius(server)
    clipped = part.clipped(radius)
    run = FederatedRun(noise=False)
    pi = step1_private_projector(run, clipped, radius, 1.0, 1e-6, spec.k)
    pts = clipped.all_points()
    direct = top_k_projector(pts.T @ pts, spec.k)
    np.testing.assert_allclose(pi.matrix, direct.matrix, atol=1e-8)
    proxy = step2_importance_weights(run, clipped, pi, server, 1.0)
    # weights are exact nearest-neighbour counts and sum to n
    assert proxy.weights.sum() == part.n
    counts = np.bincount(assign(project(pi, pts), project(pi, server)), minlength=len(server))
    np.testing.assert_array_equal(proxy.weights, counts)
    assert run.rounds == 2


def test_k_larger_than_dimension_rejected():
    part = ClientPartition([np.ones((4, 2))])
    with pytest.raises(ValueError):
        step1_private_projector(FederatedRun(), part, 1.0, 1.0, 1e-6, 3)


def test_client_level_init(scenario):
    spec, part, server = scenario
    radius = server_radius(server)
    bounds = estimate_clip_bounds(server, 400, spec.k, radius, substream(0, "clip"), pseudo_clients=50)
    run = FederatedRun(seed=2, unit=PrivacyUnit.CLIENT)
    res = run_feddp_init(run, part, server, spec.k, InitBudget.split(1.0, 1e-6, CLIENT_PROPORTIONS),
                         clip_bounds=bounds)
    assert run.rounds == 3 and np.all(np.isfinite(res.centers))
    with pytest.raises(ValueError):
        run_feddp_init(FederatedRun(unit=PrivacyUnit.CLIENT), part, server, spec.k,
                       InitBudget.split(1.0, 1e-6))


def test_empty_server_rejected(scenario):
    spec, part, _ = scenario
    with pytest.raises(ValueError):
        run_feddp_init(FederatedRun(), part, np.zeros((0, spec.d)), spec.k, InitBudget.split(1.0, 1e-6))

"""Differentially private federated k-means with server-side proxy data."""

from .baselines import (
    kfed,
    optimal_reference,
    server_kmeanspp,
    server_lloyds,
    sphere_packing_init,
    SpherePackingParams,
)
from .datagen import (
    MixtureSpec,
    ScenarioSpec,
    check_assumptions,
    check_separation,
    desk_scale_spec,
    generate_mixture,
    make_scenario,
    make_server_data,
    reference_scale_spec,
    partition_clients,
)
from .dp import BudgetLedger, PrivacyParams, compose_advanced, compose_basic, total_budget
from .federated import (
    ClientClipBounds,
    ClientPartition,
    FederatedRun,
    PrivacyUnit,
    estimate_clip_bounds,
    round_trip_counter,
    secure_aggregate,
)
from .feddp_init import CLIENT_PROPORTIONS, DATA_POINT_PROPORTIONS, InitBudget, run_feddp_init
from .feddp_lloyds import LloydsConfig, exact_recovery_check, run_feddp_kmeans, run_feddp_lloyds
from .kmeans import WeightedPoints, assign, kmeans_cost, weighted_kmeans, weighted_lloyd

__version__ = "0.1.0"

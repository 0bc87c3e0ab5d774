import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feddp_kmeans.dp import (
    BudgetLedger,
    PrivacyParams,
    add_gaussian_noise,
    add_laplace_noise,
    clip_l1,
    clip_l2,
    compose_advanced,
    compose_basic,
    gaussian_sigma,
    laplace_scale,
    substream,
    symmetric_gaussian_matrix,
    total_budget,
)


def test_gaussian_sigma_unit_case():
    # ln(1.25e6) = ln 1.25 + 6 ln 10 = 14.03865; sqrt(2 * 14.03865) = 5.29880
    assert gaussian_sigma(1.0, 1e-6, 1.0) == pytest.approx(5.29880, abs=1e-5)


def test_gaussian_sigma_scales_with_sensitivity_and_epsilon():
    base = gaussian_sigma(1.0, 1e-5, 1.0)
    assert gaussian_sigma(1.0, 1e-5, 3.0) == pytest.approx(3 * base)
    assert gaussian_sigma(0.5, 1e-5, 1.0) == pytest.approx(2 * base)


@pytest.mark.parametrize("eps,delta,s", [(0, 1e-5, 1), (1, 0, 1), (1, 1, 1), (1, 1e-5, 0), (-1, 1e-5, 1)])
def test_gaussian_sigma_rejects_bad_inputs(eps, delta, s):
    with pytest.raises(ValueError):
        gaussian_sigma(eps, delta, s)


def test_laplace_scale():
    assert laplace_scale(0.5, 2.0) == 4.0
    with pytest.raises(ValueError):
        laplace_scale(0.0, 1.0)


def test_privacy_params_validation():
    with pytest.raises(ValueError):
        PrivacyParams(0.0)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0)
    assert PrivacyParams(1.0).delta == 0.0


def test_zero_scale_noise_is_identity(rng):
    v = np.arange(5.0)
    np.testing.assert_array_equal(add_gaussian_noise(v, 0.0, rng), v)
    np.testing.assert_array_equal(add_laplace_noise(v, 0.0, rng), v)


def test_laplace_scalar_in_scalar_out(rng):
    assert isinstance(add_laplace_noise(3.0, 1.0, rng), float)


def test_symmetric_gaussian_matrix(rng):
    d, sigma = 6, 2.0
    draws = np.stack([symmetric_gaussian_matrix(d, sigma, rng) for _ in range(4000)])
    np.testing.assert_array_equal(draws, np.swapaxes(draws, 1, 2))
    var = draws.var(axis=0)
    # every entry (diagonal and off-diagonal) has variance sigma^2
    assert np.all(np.abs(var / sigma**2 - 1) < 0.12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_clip_l2_properties(values, bound):
    v = np.array(values)
    out = clip_l2(v, bound)
    assert np.linalg.norm(out) <= bound * (1 + 1e-12)
    if np.linalg.norm(v) <= bound:
        np.testing.assert_array_equal(out, v)
    else:
        # same direction
        assert np.dot(out, v) >= 0


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_clip_l1_properties(values, bound):
    v = np.array(values)
    out = clip_l1(v, bound)
    assert np.abs(out).sum() <= bound * (1 + 1e-12)
    if np.abs(v).sum() <= bound:
        np.testing.assert_array_equal(out, v)


def test_ledger_rejects_duplicate_labels():
    ledger = BudgetLedger()
    ledger.append("a", PrivacyParams(1.0))
    with pytest.raises(ValueError):
        ledger.append("a", PrivacyParams(2.0))
    assert "a" in ledger and len(ledger) == 1


def test_ledger_serialization_round_trip():
    ledger = BudgetLedger()
    ledger.append("x", PrivacyParams(0.1, 1e-7))
    ledger.append("y", PrivacyParams(0.3))
    again = BudgetLedger.from_list(ledger.to_list())
    assert list(again) == list(ledger)


def test_compose_basic_sums():
    total = compose_basic([PrivacyParams(0.1, 1e-7), PrivacyParams(0.2, 2e-7), PrivacyParams(0.3)])
    assert total.epsilon == pytest.approx(0.6, abs=1e-15)
    assert total.delta == pytest.approx(3e-7, rel=1e-12)


def test_compose_empty_raises():
    with pytest.raises(ValueError):
        compose_basic([])


def test_compose_advanced_matches_hand_computation():
    # s = 100 steps of (0.01, 1e-8), slack 1e-6:
    # sqrt(200 ln 1e6) * 0.01 + 100 * 0.01 * (e^0.01 - 1)
    expected = math.sqrt(200 * math.log(1e6)) * 0.01 + 1.0 * (math.exp(0.01) - 1)
    out = compose_advanced([PrivacyParams(0.01, 1e-8)] * 100, 1e-6)
    assert out.epsilon == pytest.approx(expected, rel=1e-12)
    assert out.epsilon == pytest.approx(0.535702, abs=1e-6)
    assert out.delta == pytest.approx(100 * 1e-8 + 1e-6)


def test_compose_advanced_requires_homogeneous_entries():
    with pytest.raises(ValueError):
        compose_advanced([PrivacyParams(0.1), PrivacyParams(0.2)], 1e-6)


def test_total_budget_picks_the_tighter_bound():
    many = [PrivacyParams(0.01, 1e-9)] * 400
    assert total_budget(many).epsilon < compose_basic(many).epsilon
    few = [PrivacyParams(1.0, 1e-7)] * 2
    assert total_budget(few) == compose_basic(few)
    mixed = [PrivacyParams(0.1, 1e-7), PrivacyParams(0.5)]
    assert total_budget(mixed) == compose_basic(mixed)


def test_substreams_are_deterministic_and_distinct():
    a = substream(7, "round", 1).random(5)
    np.testing.assert_array_equal(a, substream(7, "round", 1).random(5))
    assert not np.array_equal(a, substream(7, "round", 2).random(5))
    assert not np.array_equal(a, substream(8, "round", 1).random(5))

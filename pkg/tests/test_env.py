import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cheap_eco_bs
from slicesim.env import (
    Observation,
    all_outcomes,
    context_dim,
    evaluate_config,
    hour_features,
    oracle_best,
    reset,
    reward,
    step,
)
from slicesim.netmodel import default_base_station

rates = st.lists(st.floats(0, 200, allow_nan=False), min_size=3, max_size=3)


def test_reward_examples():
    for beta in (0.0, 0.8, 5.0):
        assert reward(0, 0, beta) == 0
    assert reward(1, 1, 5) == 4
    assert reward(0.8, 0.5, 0.8) == pytest.approx(-0.4)


@pytest.mark.parametrize("args", [(-0.1, 0.5, 1), (1.5, 0.5, 1), (0.5, 1.1, 1), (0.5, 0.5, -1)])
def test_reward_range_checks(args):
    with pytest.raises(ValueError):
        reward(*args)


def test_all_active_no_migration(bs):
    out = evaluate_config(bs, [3.0, 12.0, 1.0], 0b111, 5.0)
    assert out.n_migrated == 0
    assert out.per_slice_load_mbps == (3.0, 12.0, 1.0, 0.0)
    assert out.n_users == 3 + 3 + 3


def test_all_inactive_fits_eco(bs):
    out = evaluate_config(bs, [4.0, 5.0, 1.0], 0, 5.0)
    # Eco delay 50 / (1 - 10/30) = 75 ms, within every budget
    assert out.qos == 1.0
    assert out.energy_wh == pytest.approx(100 + 4 + 0.25 * 10)
    assert out.per_slice_load_mbps[-1] == 10.0
    assert out.n_migrated == out.n_users


def test_all_inactive_saturates_eco(bs):
    out = evaluate_config(bs, [20.0, 20.0, 5.0], 0, 5.0)
    assert out.qos == 0.0


def test_partial_migration_counts(bs):
    out = evaluate_config(bs, [2.0, 10.0, 0.8], 0b010, 5.0)
    assert out.n_migrated == 2 + 2
    assert out.per_slice_load_mbps == (0.0, 10.0, 0.0, 2.8)


def test_evaluate_config_validation(bs):
    with pytest.raises(ValueError):
        evaluate_config(bs, [1.0, 1.0], 0, 5.0)
    with pytest.raises(ValueError):
        evaluate_config(bs, [1.0, 1.0, 1.0], 8, 5.0)


@settings(max_examples=100, deadline=None)
@given(rates, st.integers(0, 7), st.floats(0, 10))
def test_outcome_ranges(traffic, config, beta):
    out = evaluate_config(default_base_station(), traffic, config, beta)
    assert 0 <= out.qos <= 1
    assert 0 < out.e_norm <= 1 + 1e-9
    assert -1 - 1e-9 <= out.reward <= beta
    assert math.fsum(out.per_slice_load_mbps) == pytest.approx(sum(traffic))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deactivation_to_cheaper_eco_never_costs_energy(seed):
    rng = np.random.default_rng(seed)
    bs = random_cheap_eco_bs(rng)
    traffic = rng.uniform(0, 80, size=3)
    for config in range(8):
        for pos in range(3):
            if config >> pos & 1:
                off = config & ~(1 << pos)
                assert evaluate_config(bs, traffic, off, 1).energy_wh <= evaluate_config(bs, traffic, config, 1).energy_wh + 1e-9


def test_oracle_examples(bs):
    assert oracle_best(bs, [5.0, 10.0, 2.0], 0.0)[0] == 0
    assert oracle_best(bs, [40.0, 40.0, 40.0], 5.0)[0] == 0b111
    assert oracle_best(bs, [0.0, 0.0, 0.0], 5.0)[0] == 0


@settings(max_examples=50, deadline=None)
@given(rates, st.floats(0, 10))
def test_oracle_dominates(traffic, beta):
    bs = default_base_station()
    cfg, r = oracle_best(bs, traffic, beta)
    assert all(o.reward <= r for o in all_outcomes(bs, traffic, beta))
    assert evaluate_config(bs, traffic, cfg, beta).reward == r


def test_reset_bootstraps_from_all_active(bs):
    traffic = np.array([[3.0, 1.0], [12.0, 2.0], [1.0, 0.5]])
    obs, state = reset(bs, traffic, 5.0)
    boot = evaluate_config(bs, traffic[:, 0], 7, 5.0)
    assert obs == Observation(boot.e_norm, boot.qos)
    assert state.t == 0 and state.horizon == 2


def test_step_purity_and_horizon(bs):
    traffic = np.array([[3.0, 3.0], [12.0, 12.0], [1.0, 1.0]])
    obs, s0 = reset(bs, traffic, 5.0)
    o1, r1, out1, s1 = step(s0, 0b011)
    o2, r2, out2, s2 = step(s1, 0b011)
    assert out1 == out2 and r1 == r2
    assert o1 == Observation(out1.e_norm, out1.qos)
    # the original state is untouched
    assert step(s0, 0b011)[2] == out1
    with pytest.raises(IndexError):
        step(s2, 0)


def test_time_features(bs):
    traffic = np.ones((3, 30))
    obs, s = reset(bs, traffic, 5.0, time_features=True)
    assert obs.as_vector().shape == (context_dim(True),)
    assert obs.time_features == pytest.approx((0.0, 1.0))
    for _ in range(6):
        obs, _, _, s = step(s, 7)
    assert obs.time_features == pytest.approx(hour_features(6, 3600.0))
    assert obs.time_features == pytest.approx((1.0, 0.0), abs=1e-12)


def test_observation_bounds():
    with pytest.raises(ValueError):
        Observation(1.5, 0.5)

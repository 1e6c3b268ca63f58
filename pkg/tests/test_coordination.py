import numpy as np
import pytest

from coordbid.bidders import MD_ROS, TRIGGER_OVERBID, make_bidder, observe
from coordbid.coordination import (
    ALL_TRUTHFUL,
    HIGHEST_VALUE,
    INDEPENDENT,
    MechanismSpec,
    Variant,
    baseline_family,
    bids_array,
    produce_bids,
)
from coordbid.distributions import Uniform
from coordbid.exceptions import ConfigError
from coordbid.simulator import ScenarioConfig, run_once


def states(n, alg=MD_ROS):
    return [make_bidder(alg, 100) for _ in range(n)]


def test_highest_value_bids():
    bids, active = produce_bids(HIGHEST_VALUE, [0.2, 0.9, 0.5], states(3))
    assert bids.tolist() == [0, 1.8, 0]
    assert active.tolist() == [False, True, False]


def test_independent_bids():
    bids, active = produce_bids(INDEPENDENT, [0.2, 0.9, 0.5], states(3))
    assert bids == pytest.approx([0.4, 1.8, 1.0])
    assert active.all()


def test_trigger_selected_after_silence_bids_max():
    ss = states(2, TRIGGER_OVERBID)
    bids, active = produce_bids(HIGHEST_VALUE, [0.3, 0.6], ss)
    ss = [observe(s, b, False, 0.0, v) for s, b, v in zip(ss, bids, [0.3, 0.6])]
    bids, _ = produce_bids(HIGHEST_VALUE, [0.4, 0.1], ss)
    assert bids.tolist() == [1.0, 0.0]


def test_tie_goes_to_lowest_index():
    _, active = produce_bids(HIGHEST_VALUE, [0.5, 0.5, 0.1], states(3))
    assert active.tolist() == [True, False, False]


def test_empty_coalition():
    with pytest.raises(ValueError):
        produce_bids(HIGHEST_VALUE, [], [])


def test_single_bidder_mechanisms_agree():
    rng = np.random.default_rng(0)
    v = rng.random((50, 1))
    lam = rng.random((50, 1)) + 0.1
    flag = np.zeros((50, 1), bool)
    a, _ = bids_array(INDEPENDENT, MD_ROS, v, lam, flag)
    b, _ = bids_array(HIGHEST_VALUE, MD_ROS, v, lam, flag)
    assert np.array_equal(a, b)


def test_highest_value_exactly_one_active():
    rng = np.random.default_rng(1)
    v = rng.random((1000, 4))
    bids, active = bids_array(HIGHEST_VALUE, MD_ROS, v, np.ones((1000, 4)), np.zeros((1000, 4), bool))
    assert np.all(active.sum(axis=1) == 1)
    assert np.all(bids[~active] == 0)


def test_silenced_lambda_unchanged_in_run():
    cfg = ScenarioConfig(3, 300, (Uniform(0, 1),), Uniform(0, 1))
    s = run_once(cfg, 1)
    lam, active = s.trace["lambdas"], s.trace["active"]
    unchanged = lam[1:] == lam[:-1]
    assert np.all(unchanged[~active[:-1]])


def test_activation_frequency():
    N, T = 4, 20000
    cfg = ScenarioConfig(N, T, (Uniform(0, 1),), Uniform(0, 1))
    s = run_once(cfg, 1)
    freq = s.trace["active"].mean(axis=0)
    sigma = np.sqrt((1 / N) * (1 - 1 / N) / T)
    assert np.all(np.abs(freq - 1 / N) <= 3 * sigma)


def test_baseline_family_contents():
    fam = baseline_family(4)
    names = [str(m) for m in fam]
    assert names[0] == "all-truthful"
    assert "fixed-multiplier-all(0.5)" in names
    assert "scale-top-k(3,0.5)" in names


def test_scale_top_k_bids():
    mech = MechanismSpec(Variant.SCALE_TOP_K, lambda0=1.0, k=2)
    bids, _ = bids_array(mech, MD_ROS, np.array([[0.1, 0.4, 0.3]]), np.ones((1, 3)), np.zeros((1, 3), bool))
    assert bids.tolist() == [[0.1, 0.8, 0.6]]


def test_mechanism_parse_and_validation():
    assert MechanismSpec.parse("highest-value") == HIGHEST_VALUE
    assert MechanismSpec.parse("fixed-multiplier-all(2)").lambda0 == 2
    assert MechanismSpec.parse("scale-top-k(2,0.5)").k == 2
    assert str(ALL_TRUTHFUL) == "all-truthful"
    with pytest.raises(ConfigError):
        MechanismSpec.parse("random")
    with pytest.raises(ConfigError):
        MechanismSpec(Variant.SCALE_TOP_K, lambda0=1.0)

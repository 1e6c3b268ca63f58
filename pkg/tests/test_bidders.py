import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coordbid.bidders import (
    MD_ROS,
    TRIGGER_OVERBID,
    TRUTHFUL,
    Algorithm,
    Kind,
    make_bidder,
    next_bid,
    observe,
)
from coordbid.exceptions import ConfigError
from coordbid.mirror_map import LAMBDA_MAX, LAMBDA_MIN

ALGS = [MD_ROS, TRUTHFUL, TRIGGER_OVERBID, Algorithm(Kind.FIXED_MULTIPLIER, 0.5)]


def test_initial_state():
    s = make_bidder(MD_ROS, 400)
    assert s.lam == 1.0 and s.alpha == pytest.approx(0.05)


def test_alpha_override_logged(caplog):
    with caplog.at_level("INFO"):
        s = make_bidder(MD_ROS, 400, alpha=0.3)
    assert s.alpha == 0.3 and "non-default" in caplog.text


def test_bid_examples():
    assert next_bid(make_bidder(MD_ROS, 100), 0.4) == pytest.approx(0.8)
    assert next_bid(make_bidder(TRUTHFUL, 100), 0.55) == 0.55
    s = make_bidder(TRIGGER_OVERBID, 100)
    s = observe(s, 0.0, False, 0.0, 0.2)
    assert next_bid(s, 0.3) == 1.0
    assert next_bid(make_bidder(Algorithm.parse("fixed-multiplier(0.5)"), 100), 0.2) == pytest.approx(0.6)


def test_value_out_of_range():
    with pytest.raises(ValueError):
        next_bid(make_bidder(MD_ROS, 10), 1.5)


def test_observe_md_update():
    s = make_bidder(MD_ROS, 100)  # alpha = 0.1
    s2 = observe(s, 1.2, True, 0.4, 0.6)
    assert s2.lam == pytest.approx(math.exp(-0.02), rel=1e-15)
    assert s2.lam == pytest.approx(0.980198673306755, rel=1e-12)


def test_silenced_round_leaves_lambda():
    s = make_bidder(MD_ROS, 100)
    s = observe(s, 1.5, True, 0.5, 0.9)
    assert observe(s, 0.0, False, 0.0, 0.3).lam == s.lam


def test_losing_payment_rejected():
    with pytest.raises(ValueError):
        observe(make_bidder(MD_ROS, 10), 0.5, False, 0.1, 0.5)


def test_trigger_is_sticky():
    s = make_bidder(TRIGGER_OVERBID, 10)
    assert not s.ever_bid_zero
    s = observe(s, 0.0, False, 0.0, 0.1)
    assert s.ever_bid_zero
    for b in (0.3, 1.0, 0.7):
        s = observe(s, b, True, 0.1, 0.5)
        assert s.ever_bid_zero


def test_parse_algorithm():
    assert Algorithm.parse("md-ros") == MD_ROS
    assert Algorithm.parse("fixed-multiplier(2)").lambda0 == 2
    with pytest.raises(ConfigError):
        Algorithm.parse("greedy")
    with pytest.raises(ConfigError):
        Algorithm(Kind.FIXED_MULTIPLIER)


feedback = st.lists(st.tuples(st.floats(0, 1), st.booleans(), st.floats(0, 1), st.booleans()), min_size=1, max_size=60)


@given(st.sampled_from(ALGS), feedback)
@settings(max_examples=200, deadline=None)
def test_weak_overbidding_on_reachable_states(alg, rounds):
    s = make_bidder(alg, 50)
    for v, won, price, silenced in rounds:
        b = next_bid(s, v)
        assert b >= v
        sub = 0.0 if silenced else b
        w = won and not silenced and price <= sub
        s = observe(s, sub, w, price if w else 0.0, v)
        assert LAMBDA_MIN <= s.lam <= LAMBDA_MAX


@given(feedback)
@settings(max_examples=100, deadline=None)
def test_lambda_replay_reproduces(rounds):
    trace = []
    s = make_bidder(MD_ROS, 50)
    for v, won, price, _ in rounds:
        b = next_bid(s, v)
        w = won and price <= b
        trace.append((b, w, price if w else 0.0, v))
        s = observe(s, *trace[-1])
    r = make_bidder(MD_ROS, 50)
    for step in trace:
        r = observe(r, *step)
    assert r.lam == s.lam

"""Bidder algorithms: mirror-descent RoS auto-bidder, truthful, trigger-overbid, fixed multiplier.

Each algorithm keeps only the statistics it needs (the multiplier and the
trigger flag).  The array functions :func:`bid_array` and
:func:`update_arrays` do the actual work, and the simulator calls them
directly on whole batches.  :func:`next_bid` and :func:`observe` are
per-bidder wrappers around them.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .mirror_map import ENTROPY, LAMBDA_MAX, LAMBDA_MIN, MirrorMap, md_update

log = logging.getLogger(__name__)


class Kind(str, Enum):
    MD_ROS = "md-ros"
    TRUTHFUL = "truthful"
    TRIGGER_OVERBID = "trigger-overbid"
    FIXED_MULTIPLIER = "fixed-multiplier"


@dataclass(frozen=True)
class Algorithm:
    kind: Kind
    lambda0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.FIXED_MULTIPLIER:
            if self.lambda0 is None or not (LAMBDA_MIN <= self.lambda0 <= LAMBDA_MAX):
                raise ConfigError(f"fixed-multiplier needs lambda0 in [{LAMBDA_MIN:g}, {LAMBDA_MAX:g}]")
        elif self.lambda0 is not None:
            raise ConfigError(f"{self.kind.value} takes no lambda0")

    def __str__(self):
        if self.kind is Kind.FIXED_MULTIPLIER:
            return f"fixed-multiplier({self.lambda0:g})"
        return self.kind.value

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        m = re.fullmatch(r"fixed-multiplier\(\s*([^)]+)\)", text)
        if m:
            return cls(Kind.FIXED_MULTIPLIER, float(m.group(1)))
        try:
            return cls(Kind(text))
        except ValueError:
            known = ", ".join(k.value for k in Kind)
            raise ConfigError(f"unknown algorithm {text!r}; known: {known}") from None


MD_ROS = Algorithm(Kind.MD_ROS)
TRUTHFUL = Algorithm(Kind.TRUTHFUL)
TRIGGER_OVERBID = Algorithm(Kind.TRIGGER_OVERBID)


def default_learning_rate(horizon):
    return 1.0 / math.sqrt(horizon)


@dataclass(frozen=True)
class BidderState:
    algorithm: Algorithm
    lam: float = 1.0
    alpha: float = 0.0
    mirror_map: MirrorMap = ENTROPY
    ever_bid_zero: bool = False
    max_bid: float = 1.0


def make_bidder(algorithm, horizon, mirror_map=ENTROPY, max_bid=1.0, alpha=None):
    """Initial state: lambda = 1 and learning rate 1/sqrt(horizon).

    Passing ``alpha`` overrides the learning rate; that departs from the
    algorithm as published and is logged.
    """
    if isinstance(algorithm, str):
        algorithm = Algorithm.parse(algorithm)
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if alpha is None:
        alpha = default_learning_rate(horizon)
    else:
        log.info("non-default learning rate alpha=%g (default would be %g)", alpha, default_learning_rate(horizon))
    lam = algorithm.lambda0 if algorithm.kind is Kind.FIXED_MULTIPLIER else 1.0
    return BidderState(algorithm, lam=lam, alpha=float(alpha), mirror_map=mirror_map, max_bid=float(max_bid))


def bid_array(algorithm, lam, ever_bid_zero, values, max_bid=1.0):
    """Bids for arrays of states and values (all broadcastable)."""
    kind = algorithm.kind
    if kind is Kind.MD_ROS:
        return (1.0 + 1.0 / lam) * values
    if kind is Kind.TRUTHFUL:
        return np.array(values, dtype=float, copy=True)
    if kind is Kind.TRIGGER_OVERBID:
        # never below the value, even if values exceed max_bid
        return np.where(ever_bid_zero, np.maximum(max_bid, values), values)
    if kind is Kind.FIXED_MULTIPLIER:
        return (1.0 + 1.0 / algorithm.lambda0) * values
    raise AssertionError(kind)


def update_arrays(algorithm, mirror_map, alpha, lam, ever_bid_zero, submitted, utility, counter=None):
    """Post-round state update; returns ``(lam, ever_bid_zero)``.

    ``utility`` is the realized ``v x - p`` and ``submitted`` the bid that
    actually entered the auction (0 for a silenced bidder).
    """
    kind = algorithm.kind
    if kind is Kind.MD_ROS:
        lam = md_update(mirror_map, lam, utility, alpha, counter)
    elif kind is Kind.TRIGGER_OVERBID:
        ever_bid_zero = ever_bid_zero | (submitted == 0)
    return lam, ever_bid_zero


def next_bid(state, value):
    if not 0 <= value <= state.max_bid:
        raise ValueError(f"value {value} outside [0, {state.max_bid}]")
    return float(bid_array(state.algorithm, state.lam, state.ever_bid_zero, float(value), state.max_bid))


def observe(state, own_bid_submitted, won, payment, value):
    """Return the state after one round of feedback."""
    if not won and payment != 0:
        raise ValueError(f"a losing bidder cannot pay (payment={payment})")
    utility = value * float(won) - payment
    lam, flag = update_arrays(
        state.algorithm,
        state.mirror_map,
        state.alpha,
        np.float64(state.lam),
        np.bool_(state.ever_bid_zero),
        np.float64(own_bid_submitted),
        np.float64(utility),
    )
    return replace(state, lam=float(lam), ever_bid_zero=bool(flag))

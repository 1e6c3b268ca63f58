"""Coordination mechanisms: who bids what, given the round's values.

``Independent`` lets every bidder run its own algorithm.  ``HighestValue``
lets only the highest-value bidder bid (lowest index on ties) and
silences the rest with a zero bid.  The remaining mechanisms ignore the
bidders' algorithms and set bids directly; they form the comparison
family for the value-ceiling checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .bidders import bid_array
from .exceptions import ConfigError
from .mirror_map import LAMBDA_MAX, LAMBDA_MIN


class Variant(str, Enum):
    INDEPENDENT = "independent"
    HIGHEST_VALUE = "highest-value"
    ALL_TRUTHFUL = "all-truthful"
    FIXED_MULTIPLIER_ALL = "fixed-multiplier-all"
    SCALE_TOP_K = "scale-top-k"


@dataclass(frozen=True)
class MechanismSpec:
    variant: Variant
    lambda0: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        v = self.variant
        if v in (Variant.FIXED_MULTIPLIER_ALL, Variant.SCALE_TOP_K):
            if self.lambda0 is None or not LAMBDA_MIN <= self.lambda0 <= LAMBDA_MAX:
                raise ConfigError(f"{v.value} needs lambda0 in [{LAMBDA_MIN:g}, {LAMBDA_MAX:g}]")
        elif self.lambda0 is not None:
            raise ConfigError(f"{v.value} takes no lambda0")
        if v is Variant.SCALE_TOP_K:
            if self.k is None or self.k < 1:
                raise ConfigError("scale-top-k needs k >= 1")
        elif self.k is not None:
            raise ConfigError(f"{v.value} takes no k")

    def __str__(self):
        if self.variant is Variant.FIXED_MULTIPLIER_ALL:
            return f"fixed-multiplier-all({self.lambda0:g})"
        if self.variant is Variant.SCALE_TOP_K:
            return f"scale-top-k({self.k},{self.lambda0:g})"
        return self.variant.value

    @property
    def uses_algorithm(self):
        """Whether bids come from the bidders' own algorithms."""
        return self.variant in (Variant.INDEPENDENT, Variant.HIGHEST_VALUE)

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        m = re.fullmatch(r"fixed-multiplier-all\(\s*([^)]+)\)", text)
        if m:
            return cls(Variant.FIXED_MULTIPLIER_ALL, lambda0=float(m.group(1)))
        m = re.fullmatch(r"scale-top-k\(\s*(\d+)\s*,\s*([^)]+)\)", text)
        if m:
            return cls(Variant.SCALE_TOP_K, lambda0=float(m.group(2)), k=int(m.group(1)))
        try:
            return cls(Variant(text))
        except ValueError:
            raise ConfigError(f"unknown mechanism {text!r}") from None


INDEPENDENT = MechanismSpec(Variant.INDEPENDENT)
HIGHEST_VALUE = MechanismSpec(Variant.HIGHEST_VALUE)
ALL_TRUTHFUL = MechanismSpec(Variant.ALL_TRUTHFUL)


def baseline_family(n_bidders, lambda_grid=(0.1, 0.5, 1.0, 2.0, 10.0)):
    """The fixed comparison set for value-ceiling checks.

    HighestValue with truthful bids is obtained by pairing
    ``HIGHEST_VALUE`` with the truthful algorithm, so it is not listed here.
    """
    family = [ALL_TRUTHFUL]
    family += [MechanismSpec(Variant.FIXED_MULTIPLIER_ALL, lambda0=l) for l in lambda_grid]
    if n_bidders > 1:
        family += [MechanismSpec(Variant.SCALE_TOP_K, lambda0=0.5, k=k) for k in range(1, n_bidders)]
    return family


def bids_array(mech, algorithm, values, lam, ever_bid_zero, max_bid=1.0):
    """Bids and active mask for a batch; ``values`` has shape ``(M, N)``."""
    m, n = values.shape
    if n == 0:
        raise ValueError("empty coalition")
    v = mech.variant
    if v is Variant.INDEPENDENT:
        return bid_array(algorithm, lam, ever_bid_zero, values, max_bid), np.ones((m, n), dtype=bool)
    if v is Variant.HIGHEST_VALUE:
        active = np.zeros((m, n), dtype=bool)
        active[np.arange(m), np.argmax(values, axis=1)] = True
        own = bid_array(algorithm, lam, ever_bid_zero, values, max_bid)
        return np.where(active, own, 0.0), active
    active = np.ones((m, n), dtype=bool)
    if v is Variant.ALL_TRUTHFUL:
        return values.astype(float, copy=True), active
    scale = 1.0 + 1.0 / mech.lambda0
    if v is Variant.FIXED_MULTIPLIER_ALL:
        return scale * values, active
    if v is Variant.SCALE_TOP_K:
        k = min(mech.k, n)
        # stable sort keeps lowest-index-first among equal values
        order = np.argsort(-values, axis=1, kind="stable")
        top = np.zeros((m, n), dtype=bool)
        np.put_along_axis(top, order[:, :k], True, axis=1)
        return np.where(top, scale * values, values), active
    raise AssertionError(v)


def produce_bids(mech, values, states):
    """Bids and active mask for one round given per-bidder states."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a nonempty 1-D vector")
    if len(states) != values.size:
        raise ValueError(f"{len(states)} states for {values.size} values")
    algorithms = {s.algorithm for s in states}
    if len(algorithms) != 1:
        raise ValueError("all coalition bidders must run the same algorithm")
    algorithm = algorithms.pop()
    lam = np.array([[s.lam for s in states]])
    flag = np.array([[s.ever_bid_zero for s in states]])
    bids, active = bids_array(mech, algorithm, values[None, :], lam, flag, states[0].max_bid)
    return bids[0], active[0]

"""One round of a second-price auction between a coalition and an outside bid.

Ties: a coalition bid equal to its competing bid wins, and among
coalition bidders tied at the top the lowest index wins.  Only that
bidder's win flag is set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class RoundOutcome:
    values: np.ndarray
    bids: np.ndarray
    outside_bid: float
    competing: np.ndarray
    won: np.ndarray
    payments: np.ndarray
    utilities: np.ndarray
    winner: Optional[int]


def resolve(bids, outside):
    """Vectorized resolution over a leading batch axis.

    ``bids`` has shape ``(M, N)`` and ``outside`` shape ``(M,)``.  Returns
    ``(top, won, price, over_top)``: ``top`` is the lowest-index highest
    bidder of each row, ``won`` whether it beats its competing bid,
    ``price`` that competing bid (the payment when ``won``), and
    ``over_top = max(outside, top bid)``, the competing bid every other
    bidder faces.
    """
    m, n = bids.shape
    rows = np.arange(m)
    top = np.argmax(bids, axis=1)
    b1 = bids[rows, top]
    if n > 1:
        masked = bids.copy()
        masked[rows, top] = -np.inf
        b2 = masked.max(axis=1)
    else:
        b2 = np.full(m, -np.inf)
    price = np.maximum(outside, b2)
    won = b1 >= price
    return top, won, price, np.maximum(outside, b1)


def competing_bids(bids, outside):
    """``d_i = max(outside, max_{j != i} b_j)`` for every bidder; shape ``(M, N)``."""
    bids = np.atleast_2d(bids)
    m, n = bids.shape
    rows = np.arange(m)
    top, _, price, over_top = resolve(bids, np.broadcast_to(outside, (m,)))
    d = np.repeat(over_top[:, None], n, axis=1)
    d[rows, top] = price
    return d


def run_round(values, bids, outside_bid):
    """Resolve a single round and return the full :class:`RoundOutcome`."""
    values = np.asarray(values, dtype=float)
    bids = np.asarray(bids, dtype=float)
    if values.shape != bids.shape or values.ndim != 1:
        raise ValueError(f"values and bids must be 1-D of equal length, got {values.shape} and {bids.shape}")
    if values.size == 0:
        raise ValueError("empty coalition")
    if np.any(values < 0) or np.any(bids < 0) or outside_bid < 0:
        raise ValueError("values, bids and the outside bid must be nonnegative")
    top, won_any, price, _ = resolve(bids[None, :], np.array([float(outside_bid)]))
    n = values.size
    won = np.zeros(n, dtype=bool)
    payments = np.zeros(n)
    utilities = np.zeros(n)
    winner = None
    if won_any[0]:
        winner = int(top[0])
        won[winner] = True
        payments[winner] = price[0]
        utilities[winner] = values[winner] - price[0]
    return RoundOutcome(
        values=values,
        bids=bids,
        outside_bid=float(outside_bid),
        competing=competing_bids(bids, float(outside_bid))[0],
        won=won,
        payments=payments,
        utilities=utilities,
        winner=winner,
    )

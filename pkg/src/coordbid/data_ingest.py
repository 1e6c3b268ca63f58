"""Winning-price logs to an empirical outside-bid law.

Prices are read from one column of a delimited text file, normalized by
the pool maximum (no outlier removal) and used as an ``Empirical`` pool.
The outside bid is a pool draw times an independent ``Uniform(1, 2)``
factor, so it can exceed the value bound of 1.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .distributions import Empirical, Uniform
from .exceptions import ConfigError

log = logging.getLogger(__name__)

FIXTURE_NAME = "synthetic_prices.tsv"
FIXTURE_COLUMN = "payprice"
# mean of the normalized fixture pool (regression value)
FIXTURE_NORMALIZED_MEAN = 0.217624


@dataclass(frozen=True)
class PricePool:
    raw: np.ndarray
    normalization_max: float
    normalized: np.ndarray
    source: str = ""
    rows_read: int = 0
    parse_failures: int = 0
    advertisers: int = 0

    @property
    def count(self):
        return int(self.raw.size)

    def stats(self):
        return {
            "source": self.source,
            "count": self.count,
            "max": self.normalization_max,
            "mean": float(self.normalized.mean()),
            "rows_read": self.rows_read,
            "parse_failures": self.parse_failures,
            "advertisers": self.advertisers,
        }


def fixture_path():
    """Path of the bundled 10^4-row synthetic log (same schema as the real one)."""
    return Path(str(resources.files("coordbid") / "data" / FIXTURE_NAME))


def pool_from_prices(prices, source="", rows_read=None, parse_failures=0, advertisers=0):
    raw = np.asarray(prices, dtype=float).ravel()
    if raw.size == 0:
        raise ConfigError(f"empty price pool{' from ' + source if source else ''}")
    if not (np.isfinite(raw).all() and (raw >= 0).all()):
        raise ConfigError("prices must be finite and nonnegative")
    top = float(raw.max())
    if top <= 0:
        raise ConfigError("all prices are zero; cannot normalize")
    norm = raw / top
    raw.setflags(write=False)
    norm.setflags(write=False)
    return PricePool(raw, top, norm, source, raw.size if rows_read is None else rows_read, parse_failures, advertisers)


def _column_index(header, column):
    if isinstance(column, int):
        return column
    if str(column).isdigit():
        return int(column)
    if header is None:
        raise ConfigError(f"column {column!r} given by name but the file has no header")
    try:
        return header.index(column)
    except ValueError:
        raise ConfigError(f"column {column!r} not in header {header}") from None


def load_price_pool(path, column=FIXTURE_COLUMN, delimiter="\t", header=True, advertiser_column="advertiser"):
    """Parse one numeric column into a normalized :class:`PricePool`.

    Rows whose column is missing, non-numeric, negative or non-finite are
    counted and skipped; the load fails only when no row survives.
    Integer ``column`` values are zero-based indices.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"price file not found: {path}")
    prices, failures, rows = [], 0, 0
    advertisers = set()
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            head = next(reader, None) if header else None
            idx = _column_index(head, column)
            adv = head.index(advertiser_column) if head and advertiser_column in head else None
            for row in reader:
                if not row:
                    continue
                rows += 1
                try:
                    x = float(row[idx])
                except (IndexError, ValueError):
                    failures += 1
                    continue
                if not (math.isfinite(x) and x >= 0):
                    failures += 1
                    continue
                prices.append(x)
                if adv is not None and adv < len(row):
                    advertisers.add(row[adv])
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    if failures:
        log.warning("%s: skipped %d of %d rows that did not parse", path, failures, rows)
    if not prices:
        raise ConfigError(f"{path}: no parseable values in column {column!r} ({failures} failures)")
    return pool_from_prices(prices, str(path), rows, failures, len(advertisers))


def outside_spec_from_pool(pool):
    """``(Empirical(normalized pool), Uniform(1, 2))``; the simulator multiplies the two."""
    if pool.count == 0:
        raise ConfigError("empty price pool")
    return Empirical(pool.normalized, label=pool.source or "pool"), Uniform(1.0, 2.0)


def write_synthetic_fixture(path, n_rows=10_000, seed=2024):
    """Regenerate the bundled fixture: log-normal-ish integer prices in an iPinYou-like schema."""
    rng = np.random.default_rng(seed)
    pay = np.clip(np.round(rng.lognormal(mean=4.0, sigma=0.6, size=n_rows)), 0, 300).astype(int)
    slot = np.clip(pay - rng.integers(0, 20, n_rows), 0, None)
    bid = pay + rng.integers(0, 80, n_rows)
    adv = rng.choice([1458, 2259, 2261, 2821, 2997, 3358, 3386, 3427, 3476], n_rows)
    ts = 20130606000000000 + np.sort(rng.integers(0, 10**9, n_rows))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["bidid", "timestamp", "slotprice", "bidprice", "payprice", "advertiser"])
        for k in range(n_rows):
            w.writerow([f"{rng.integers(0, 2**63):016x}", ts[k], slot[k], bid[k], pay[k], adv[k]])

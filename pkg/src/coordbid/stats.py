"""Mean and 95% confidence half-width, the one reporting primitive everything uses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.96


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    half_width_95: float
    n_samples: int

    @property
    def lo(self):
        return self.mean - self.half_width_95

    @property
    def hi(self):
        return self.mean + self.half_width_95

    @property
    def se(self):
        return self.half_width_95 / Z95

    def to_dict(self):
        return {"mean": self.mean, "ci95": self.half_width_95, "n": self.n_samples}

    def __format__(self, spec):
        spec = spec or ".4f"
        return f"{self.mean:{spec}} ± {self.half_width_95:{spec}}"


def estimate(samples):
    """``1.96 * s / sqrt(n)`` with the sample (ddof=1) standard deviation."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    m = float(x.mean())
    hw = Z95 * float(x.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return EstimateWithCI(m, hw, n)


def columnwise(samples):
    """Per-column estimates of an ``(n, k)`` array as ``(means, half_widths)``."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two samples for a confidence interval")
    return x.mean(axis=0), Z95 * x.std(axis=0, ddof=1) / math.sqrt(n)

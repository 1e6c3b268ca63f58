"""Legendre mirror maps and the multiplier update they induce.

The closed-form update lives in derivative ("dual") space,
``y = h'(lambda)``, where a mirror-descent step is a plain subtraction.
:func:`md_update_argmin` solves the original proximal problem by direct
numeric minimization instead, and serves as an independent check of the
closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np

from .exceptions import ConfigError

log = logging.getLogger(__name__)

LAMBDA_MIN = 1e-9
LAMBDA_MAX = 1e9


@dataclass(frozen=True)
class MirrorMap:
    """A strictly convex ``h`` on (0, inf) whose derivative maps onto the reals.

    ``h_prime`` and ``h_prime_inverse`` must accept numpy arrays.  ``h_mp``
    is an optional multiprecision version of ``h`` (mpmath numbers in and
    out) used by the argmin oracle; without it the oracle falls back to
    float arithmetic and loses about half the digits.
    """

    name: str
    h: Callable
    h_prime: Callable
    h_prime_inverse: Callable
    h_mp: Optional[Callable] = None

    def bregman(self, lam, mu):
        """``D_h(lam, mu) = h(lam) - h(mu) - h'(mu) (lam - mu)``."""
        return self.h(lam) - self.h(mu) - self.h_prime(mu) * (lam - mu)


def _entropy_h(lam):
    lam = np.asarray(lam, dtype=float)
    return lam * np.log(lam) - lam


def _entropy_h_mp(lam):
    return lam * mpmath.log(lam) - lam


ENTROPY = MirrorMap(
    name="entropy",
    h=_entropy_h,
    h_prime=np.log,
    h_prime_inverse=np.exp,
    h_mp=_entropy_h_mp,
)

_REGISTRY = {"entropy": ENTROPY}


def check_legendre(mmap, rtol=1e-12, n_grid=200, seed=0):
    """Raise :class:`ConfigError` unless ``mmap`` passes the Legendre checks.

    Checks, on a log-spaced grid over [1e-6, 1e6]: ``h'`` strictly
    increasing, ``h'`` negative near 0 and positive near infinity (a map
    onto a half-line such as the quadratic fails here), the inverse
    round-trips to ``rtol``, and Bregman divergences are nonnegative.
    """
    grid = np.logspace(-6, 6, n_grid)
    hp = np.asarray(mmap.h_prime(grid), dtype=float)
    if not np.all(np.isfinite(hp)):
        raise ConfigError(f"mirror map {mmap.name!r}: h' is not finite on [1e-6, 1e6]")
    if not np.all(np.diff(hp) > 0):
        raise ConfigError(f"mirror map {mmap.name!r}: h' is not strictly increasing")
    lo, hi = float(mmap.h_prime(LAMBDA_MIN)), float(mmap.h_prime(LAMBDA_MAX))
    if not (lo < 0 < hi):
        raise ConfigError(
            f"mirror map {mmap.name!r}: h' does not map onto the real line "
            f"(h'({LAMBDA_MIN:g})={lo:g}, h'({LAMBDA_MAX:g})={hi:g})"
        )
    back = np.asarray(mmap.h_prime_inverse(hp), dtype=float)
    err = np.max(np.abs(back - grid) / grid)
    if not err <= rtol:
        raise ConfigError(f"mirror map {mmap.name!r}: inverse round-trip error {err:.2e} exceeds {rtol:g}")
    rng = np.random.default_rng(seed)
    lam, mu = np.exp(rng.uniform(np.log(1e-6), np.log(1e6), (2, 1000)))
    d = np.asarray(mmap.bregman(lam, mu), dtype=float)
    scale = np.maximum(1.0, np.abs(np.asarray(mmap.h(lam), dtype=float)))
    if np.any(d < -1e-9 * scale):
        raise ConfigError(f"mirror map {mmap.name!r}: negative Bregman divergence")


def register_mirror_map(mmap):
    check_legendre(mmap)
    _REGISTRY[mmap.name] = mmap
    return mmap


def get_mirror_map(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown mirror map {name!r}; known: {sorted(_REGISTRY)}") from None


class ClampCounter:
    """Counts updates that hit the [LAMBDA_MIN, LAMBDA_MAX] clamp."""

    def __init__(self):
        self.low = 0
        self.high = 0

    @property
    def total(self):
        return self.low + self.high


def md_update(mmap, lam, g, alpha, counter=None):
    """One mirror-descent step: ``h'^-1(h'(lam) - alpha g)``, clamped.

    Works elementwise on arrays.  Positive utility ``g`` lowers lambda.
    """
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(g, dtype=float)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(g)) and np.all(np.isfinite(alpha))):
        raise ValueError("md_update requires finite inputs")
    step = alpha * g
    y = mmap.h_prime(lam) - step
    with np.errstate(over="ignore", under="ignore"):
        # a zero step is an exact fixed point; skip the lossy round trip
        out = np.where(step == 0, lam, mmap.h_prime_inverse(y))
    clamped = np.clip(out, LAMBDA_MIN, LAMBDA_MAX)
    if counter is not None:
        counter.low += int(np.count_nonzero(out < LAMBDA_MIN))
        counter.high += int(np.count_nonzero(out > LAMBDA_MAX))
    return float(clamped) if clamped.ndim == 0 else clamped


_INVPHI = (math.sqrt(5) - 1) / 2


def md_update_argmin(mmap, lam, g, alpha, dps=40, xtol=1e-13):
    """Solve ``argmin_{l>0} alpha g l + D_h(l, lam)`` by golden-section search.

    The search runs over ``log l`` in the clamp range with mpmath at
    ``dps`` digits, so it never touches ``h'^-1``.  A minimizer at the
    clamp boundary is logged and returned clamped.
    """
    if not all(math.isfinite(x) for x in (lam, g, alpha)):
        raise ValueError("md_update_argmin requires finite inputs")
    with mpmath.workdps(dps):
        if mmap.h_mp is not None:
            h = mmap.h_mp
        else:
            h = lambda x: mpmath.mpf(float(mmap.h(float(x))))
        mu = mpmath.mpf(lam)
        hmu = h(mu)
        hpmu = mpmath.mpf(float(mmap.h_prime(lam)))
        ag = mpmath.mpf(alpha) * mpmath.mpf(g)

        def objective(s):
            x = mpmath.exp(s)
            return ag * x + h(x) - hmu - hpmu * (x - mu)

        a, b = mpmath.log(LAMBDA_MIN), mpmath.log(LAMBDA_MAX)
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = objective(c), objective(d)
        while b - a > xtol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = objective(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = objective(d)
        s = (a + b) / 2
        out = float(mpmath.exp(s))
    edge = 1e-12
    if out <= LAMBDA_MIN * (1 + edge) or out >= LAMBDA_MAX * (1 - edge):
        log.warning("argmin update hit the clamp boundary (lam=%g, g=%g, alpha=%g)", lam, g, alpha)
    return min(max(out, LAMBDA_MIN), LAMBDA_MAX)

"""Value and outside-bid distributions, plus reproducible random streams.

Every sampler consumes its stream element by element, so drawing ``n``
values in one call leaves the stream in exactly the state that ``n``
separate calls to :func:`sample` would.  The simulator relies on this to
vectorize without changing any draw.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .exceptions import ConfigError

__all__ = [
    "Uniform",
    "Beta",
    "TruncNormal",
    "CappedNormal",
    "Empirical",
    "DistributionSpec",
    "RandomStream",
    "sample",
    "sample_n",
    "sample_top_two",
    "cdf",
    "mean",
    "support",
    "parse_distribution",
    "format_distribution",
]


def _finite(*xs):
    return all(math.isfinite(x) for x in xs)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not _finite(self.lo, self.hi) or not self.lo < self.hi:
            raise ConfigError(f"uniform requires finite lo < hi, got ({self.lo}, {self.hi})")
        if self.lo < 0:
            raise ConfigError(f"uniform support must be nonnegative, got lo={self.lo}")

    def _draw(self, rng, size):
        return self.lo + (self.hi - self.lo) * rng.random(size)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def support(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float

    def __post_init__(self):
        if not _finite(self.alpha, self.beta) or self.alpha <= 0 or self.beta <= 0:
            raise ConfigError(f"beta requires alpha, beta > 0, got ({self.alpha}, {self.beta})")

    def _draw(self, rng, size):
        # numpy's Generator.beta draws gamma(a) then gamma(b) per element.
        return rng.beta(self.alpha, self.beta, size)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return special.betainc(self.alpha, self.beta, x)

    @property
    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    @property
    def support(self):
        return 0.0, 1.0


class _NormalOnInterval:
    mu: float
    sigma: float
    lo: float
    hi: float

    def _check(self, name):
        if not _finite(self.mu, self.sigma, self.lo, self.hi):
            raise ConfigError(f"{name} parameters must be finite")
        if self.sigma <= 0:
            raise ConfigError(f"{name} requires sigma > 0, got {self.sigma}")
        if not self.lo < self.hi:
            raise ConfigError(f"{name} requires lo < hi, got ({self.lo}, {self.hi})")
        if self.lo < 0:
            raise ConfigError(f"{name} support must be nonnegative, got lo={self.lo}")

    @property
    def support(self):
        return self.lo, self.hi

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma


@dataclass(frozen=True)
class TruncNormal(_NormalOnInterval):
    """Normal(mu, sigma) conditioned on [lo, hi], sampled by rejection."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        self._check("truncnormal")
        mass = special.ndtr((self.hi - self.mu) / self.sigma) - special.ndtr((self.lo - self.mu) / self.sigma)
        if mass < 1e-3:
            raise ConfigError(f"truncnormal acceptance probability {mass:.2e} is too small for rejection sampling")

    def _draw(self, rng, size):
        n = int(np.prod(size))
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            state = rng.bit_generator.state
            chunk = max(2 * need, 16)
            z = self.mu + self.sigma * rng.standard_normal(chunk)
            accepted = np.flatnonzero((z >= self.lo) & (z <= self.hi))
            if accepted.size >= need:
                # rewind and consume exactly up to the last accepted draw
                rng.bit_generator.state = state
                rng.standard_normal(accepted[need - 1] + 1)
                out[filled:] = z[accepted[:need]]
                filled = n
            else:
                out[filled : filled + accepted.size] = z[accepted]
                filled += accepted.size
        return out.reshape(size)

    def cdf(self, x):
        a = special.ndtr((self.lo - self.mu) / self.sigma)
        b = special.ndtr((self.hi - self.mu) / self.sigma)
        return np.clip((special.ndtr(self._z(x)) - a) / (b - a), 0.0, 1.0)

    @property
    def mean(self):
        a, b = (self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        mass = special.ndtr(b) - special.ndtr(a)
        return self.mu + self.sigma * (phi(a) - phi(b)) / mass


@dataclass(frozen=True)
class CappedNormal(_NormalOnInterval):
    """Normal(mu, sigma) clipped to [lo, hi]; the tails become point masses at the caps."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        self._check("cappednormal")

    def _draw(self, rng, size):
        return np.clip(self.mu + self.sigma * rng.standard_normal(size), self.lo, self.hi)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.lo, 0.0, np.where(x >= self.hi, 1.0, special.ndtr(self._z(x))))

    @property
    def mean(self):
        a, b = (self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        Pa, Pb = special.ndtr(a), special.ndtr(b)
        inner = self.mu * (Pb - Pa) + self.sigma * (phi(a) - phi(b))
        return self.lo * Pa + inner + self.hi * (1 - Pb)


@dataclass(frozen=True, eq=False)
class Empirical:
    """Uniform-with-replacement draws from a finite pool.

    Ties have positive probability here, unlike the continuous families.
    """

    pool: np.ndarray
    label: str = ""

    def __post_init__(self):
        pool = np.array(self.pool, dtype=float).ravel()
        if pool.size == 0:
            raise ConfigError("empirical pool must be nonempty")
        if not (np.isfinite(pool).all() and (pool >= 0).all()):
            raise ConfigError("empirical pool values must be finite and nonnegative")
        pool.setflags(write=False)
        object.__setattr__(self, "pool", pool)
        object.__setattr__(self, "_sorted", np.sort(pool))

    def __eq__(self, other):
        return isinstance(other, Empirical) and np.array_equal(self.pool, other.pool)

    def __hash__(self):
        return hash(self.pool.tobytes())

    def _draw(self, rng, size):
        n = self.pool.size
        idx = np.minimum((rng.random(size) * n).astype(np.int64), n - 1)
        return self.pool[idx]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self._sorted, x, side="right") / self.pool.size

    @property
    def mean(self):
        return float(self.pool.mean())

    @property
    def support(self):
        return float(self._sorted[0]), float(self._sorted[-1])

    def __repr__(self):
        if self.pool.size <= 8:
            return f"Empirical({self.pool.tolist()})"
        tag = f", label={self.label!r}" if self.label else ""
        return f"Empirical(<{self.pool.size} values>{tag})"


DistributionSpec = Union[Uniform, Beta, TruncNormal, CappedNormal, Empirical]


def _role_code(role):
    digest = hashlib.blake2b(str(role).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomStream:
    """A seeded, deterministically advancing source of uniforms and normals.

    The underlying generator is derived from ``(seed, run, round, role)``
    through :class:`numpy.random.SeedSequence`, so streams with different
    ids are independent and the same id always replays the same draws.
    In the simulator ``round`` stays 0 and rounds are consumed in order
    from a per-(run, role) stream.
    """

    def __init__(self, seed, run=0, round=0, role="main"):
        if not 0 <= int(seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.stream_id = (int(run), int(round), str(role))
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(run), int(round), _role_code(role)))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, role):
        """An independent stream sharing seed, run and round, with a sub-role."""
        run, rnd, base = self.stream_id
        return RandomStream(self.seed, run, rnd, f"{base}/{role}")

    def fresh(self):
        """The same stream rewound to its start (for common random numbers)."""
        run, rnd, role = self.stream_id
        return RandomStream(self.seed, run, rnd, role)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def sample(spec, stream):
    """One draw from ``spec``; advances ``stream``."""
    return float(spec._draw(stream.generator, 1)[0])


def sample_n(spec, stream, size):
    """``prod(size)`` consecutive draws in row-major order."""
    return spec._draw(stream.generator, size)


def sample_top_two(spec, n, stream):
    """Draw ``n`` values and return ``(v_max, v_second, argmax)``.

    ``argmax`` is zero-based, ties go to the lowest index.
    """
    if n < 2:
        raise ValueError(f"sample_top_two needs n >= 2, got {n}")
    v = sample_n(spec, stream, n)
    i = int(np.argmax(v))
    rest = np.delete(v, i)
    return float(v[i]), float(rest.max()), i


def cdf(spec, x):
    out = spec.cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def mean(spec):
    return float(spec.mean)


def support(spec):
    return spec.support


_CALL = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$", re.IGNORECASE)
_ALIASES = {
    "uniform": (Uniform, 2),
    "u": (Uniform, 2),
    "beta": (Beta, 2),
    "truncnormal": (TruncNormal, 4),
    "cappednormal": (CappedNormal, 4),
    "point": (None, 1),
}


def parse_distribution(text):
    """Parse ``uniform(0,1)``, ``beta(3,2)``, ``truncnormal(mu,sigma,lo,hi)``,
    ``cappednormal(mu,sigma,lo,hi)``, ``point(x)`` or ``empirical(a,b,...)``.

    File-backed ``empirical(path=..., column=...)`` is resolved by
    :mod:`coordbid.config`, which knows the config file's directory.
    """
    m = _CALL.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse distribution {text!r}")
    name, args = m.group(1).lower(), m.group(2)
    if name == "empirical":
        if "=" in args:
            raise ConfigError("file-backed empirical(...) must be resolved through a config file")
        vals = [float(a) for a in args.split(",") if a.strip()]
        return Empirical(vals)
    if name not in _ALIASES:
        raise ConfigError(f"unknown distribution family {name!r}")
    cls, arity = _ALIASES[name]
    try:
        vals = [float(a) for a in args.split(",")]
    except ValueError:
        raise ConfigError(f"non-numeric argument in {text!r}") from None
    if len(vals) != arity:
        raise ConfigError(f"{name} takes {arity} arguments, got {len(vals)} in {text!r}")
    if cls is None:
        return Empirical([vals[0]])
    return cls(*vals)


def format_distribution(spec):
    """Inverse of :func:`parse_distribution` for the analytic families."""
    if isinstance(spec, Uniform):
        return f"uniform({spec.lo:g},{spec.hi:g})"
    if isinstance(spec, Beta):
        return f"beta({spec.alpha:g},{spec.beta:g})"
    if isinstance(spec, TruncNormal):
        return f"truncnormal({spec.mu:g},{spec.sigma:g},{spec.lo:g},{spec.hi:g})"
    if isinstance(spec, CappedNormal):
        return f"cappednormal({spec.mu:g},{spec.sigma:g},{spec.lo:g},{spec.hi:g})"
    if isinstance(spec, Empirical):
        if spec.label:
            return f"empirical({spec.label})"
        if spec.pool.size <= 8:
            return "empirical(" + ",".join(f"{p:g}" for p in spec.pool) + ")"
        return f"empirical(<{spec.pool.size} values>)"
    raise TypeError(f"not a distribution spec: {spec!r}")

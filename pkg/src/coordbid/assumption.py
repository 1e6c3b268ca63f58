"""Estimators for the coalition-level quantities that govern when coordination helps.

Monte-Carlo estimators derive their draws from the *identity* of the
stream they are given (via ``stream.child``), not from its state.  Passing
the same stream to two calls therefore reuses the same draws (common
random numbers); pass streams with different roles or run indices for
independent estimates.

The ``*_quadrature`` functions evaluate the same expectations by 1-D
numeric integration over the analytic CDFs and share no code with the
Monte-Carlo path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import distributions as dist
from .exceptions import ConfigError, NoRootInBracket
from .stats import EstimateWithCI, estimate

ZERO_PLUS = "0+"
LAMBDA_BRACKET = (1e-6, 1e6)
DEFAULT_SAMPLES = 1_000_000

HOLDS = "HOLDS"
FAILS = "FAILS"
INCONCLUSIVE = "INCONCLUSIVE"


def _default_stream(stream, role):
    return dist.RandomStream(0, role=role) if stream is None else stream


def _specs(value_specs, n_bidders):
    if not isinstance(value_specs, (list, tuple)):
        value_specs = [value_specs]
    value_specs = list(value_specs)
    if n_bidders is None:
        n_bidders = len(value_specs)
    if len(value_specs) not in (1, n_bidders):
        raise ConfigError(f"{len(value_specs)} value specs for {n_bidders} bidders")
    return value_specs, n_bidders


def draw_values(value_specs, n_bidders, n_samples, stream):
    """``(n_samples, N)`` values; one ``values`` stream if i.i.d., else ``values/<i>`` per bidder."""
    specs, n = _specs(value_specs, n_bidders)
    if len(specs) == 1:
        return dist.sample_n(specs[0], stream.child("values"), (n_samples, n))
    return np.column_stack([dist.sample_n(specs[i], stream.child(f"values/{i + 1}"), n_samples) for i in range(n)])


def draw_outside(outside_spec, n_samples, stream, outside_scale=None):
    d = dist.sample_n(outside_spec, stream.child("outside"), n_samples)
    if outside_scale is not None:
        d = d * dist.sample_n(outside_scale, stream.child("scale"), n_samples)
    return d


def _check_samples(n_samples):
    if n_samples < 2:
        raise ConfigError(f"n_samples must be >= 2, got {n_samples}")


def _top_two(values):
    part = np.partition(values, values.shape[1] - 2, axis=1)
    return part[:, -1], part[:, -2]


def delta_terms(value_specs, outside_spec, n_bidders=None, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """Per-sample ``(v_(N-1) - d)_+`` and ``(d - v_(N))_+`` on shared draws."""
    specs, n = _specs(value_specs, n_bidders)
    if n < 2:
        raise ConfigError("the second-highest value needs at least 2 bidders")
    _check_samples(n_samples)
    stream = _default_stream(stream, "delta")
    v = draw_values(specs, n, n_samples, stream)
    d = draw_outside(outside_spec, n_samples, stream, outside_scale)
    vmax, vsec = _top_two(v)
    return np.maximum(vsec - d, 0.0), np.maximum(d - vmax, 0.0)


def estimate_delta(value_specs, outside_spec, n_bidders=None, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """``E[(v_(N-1) - d)_+ - (d - v_(N))_+]`` with a 95% interval."""
    up, down = delta_terms(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale)
    return estimate(up - down)


def delta_decomposition(value_specs, outside_spec, n_bidders=None, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """The two terms of the Delta expression as separate estimates."""
    up, down = delta_terms(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale)
    return estimate(up), estimate(down)


def estimate_L(value_specs, outside_spec, n_bidders=None, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """``E[(d - v_(N))_+]``."""
    return delta_decomposition(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale)[1]


def estimate_delta_i(value_specs, outside_spec, bidder, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """``E[(v_i - d) 1{v_i is the coalition maximum}]``; ``bidder`` is zero-based, ties to the lowest index."""
    return estimate_all_delta_i(value_specs, outside_spec, n_samples, stream, outside_scale, only=bidder)[0]


def estimate_all_delta_i(value_specs, outside_spec, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None, only=None):
    specs = list(value_specs)
    n = len(specs)
    if only is not None and not 0 <= only < n:
        raise IndexError(f"bidder index {only} out of range for {n} bidders")
    _check_samples(n_samples)
    stream = _default_stream(stream, "delta-i")
    v = draw_values(specs, n, n_samples, stream)
    d = draw_outside(outside_spec, n_samples, stream, outside_scale)
    top = np.argmax(v, axis=1)
    who = range(n) if only is None else [only]
    return [estimate(np.where(top == i, v[:, i] - d, 0.0)) for i in who]


def _check_lambda(lam):
    if not (isinstance(lam, (int, float, np.floating)) and lam > 0 and math.isfinite(lam)):
        raise ConfigError(f"lambda must be a finite positive number, got {lam!r}")


def _vmax_and_outside(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale, role):
    specs, n = _specs(value_specs, n_bidders)
    _check_samples(n_samples)
    stream = _default_stream(stream, role)
    v = draw_values(specs, n, n_samples, stream)
    return v.max(axis=1), draw_outside(outside_spec, n_samples, stream, outside_scale)


def _g_samples(vmax, d, lam):
    return np.where((1.0 + 1.0 / lam) * vmax > d, vmax - d, 0.0)


def estimate_G(value_specs, outside_spec, n_bidders, lam, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """``E[(v_(N) - d) 1{(1 + 1/lam) v_(N) > d}]``."""
    _check_lambda(lam)
    vmax, d = _vmax_and_outside(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale, "G")
    return estimate(_g_samples(vmax, d, lam))


def estimate_G_grid(value_specs, outside_spec, n_bidders, lambdas, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """G on a lambda grid, all points evaluated on one set of draws."""
    for lam in lambdas:
        _check_lambda(lam)
    vmax, d = _vmax_and_outside(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale, "G")
    return [estimate(_g_samples(vmax, d, lam)) for lam in lambdas]


def estimate_value_curve(value_specs, outside_spec, n_bidders, lam, n_samples=DEFAULT_SAMPLES, stream=None, outside_scale=None):
    """``E[v_(N) 1{(1 + 1/lam) v_(N) > d}]``; ``lam="0+"`` gives ``E[v_(N)]`` with no indicator."""
    if lam != ZERO_PLUS:
        _check_lambda(lam)
    vmax, d = _vmax_and_outside(value_specs, outside_spec, n_bidders, n_samples, stream, outside_scale, "V")
    if lam == ZERO_PLUS:
        return estimate(vmax)
    return estimate(np.where((1.0 + 1.0 / lam) * vmax > d, vmax, 0.0))


@dataclass(frozen=True)
class LambdaStarResult:
    value: float
    boundary: bool
    bracket: tuple
    g_lo: EstimateWithCI = None
    g_hi: EstimateWithCI = None
    probes: int = 0

    def to_dict(self):
        return {"value": self.value, "boundary": self.boundary, "bracket": list(self.bracket), "probes": self.probes}


def find_lambda_star(
    value_specs,
    outside_spec,
    n_bidders,
    n_samples_per_probe=100_000,
    tol=1e-3,
    stream=None,
    outside_scale=None,
    bracket=LAMBDA_BRACKET,
):
    """Smallest lambda with ``G(lambda) >= 0``, by bisection in log lambda.

    Every probe reuses one set of draws, so the probed function is exactly
    nondecreasing.  ``tol`` is relative: bisection stops once
    ``hi / lo - 1 <= tol``.  If G is already clearly positive (more than
    twice its CI half-width) at the lower bracket end, the result is the
    boundary case with value 0.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ConfigError(f"invalid bracket {bracket}")
    vmax, d = _vmax_and_outside(value_specs, outside_spec, n_bidders, n_samples_per_probe, stream, outside_scale, "G")
    G = lambda lam: estimate(_g_samples(vmax, d, lam))
    g_lo, g_hi = G(lo), G(hi)
    if g_lo.mean > 2 * g_lo.half_width_95:
        return LambdaStarResult(0.0, True, (lo, hi), g_lo, g_hi, 2)
    if g_hi.mean < 0:
        raise NoRootInBracket(f"G({hi:g}) = {g_hi:.4g} < 0: lambda* lies above the bracket")
    if g_lo.mean >= 0:
        # nonnegative at the bottom but not clearly positive
        return LambdaStarResult(lo, False, (lo, lo), g_lo, g_hi, 2)
    a, b, probes = math.log(lo), math.log(hi), 2
    while math.exp(b - a) - 1 > tol:
        mid = 0.5 * (a + b)
        probes += 1
        if G(math.exp(mid)).mean >= 0:
            b = mid
        else:
            a = mid
    return LambdaStarResult(math.exp(0.5 * (a + b)), False, (math.exp(a), math.exp(b)), g_lo, g_hi, probes)


def verdict(est, z=1.0):
    """HOLDS if the CI lies above 0, FAILS if below, INCONCLUSIVE if it straddles 0."""
    if est.mean - z * est.half_width_95 > 0:
        return HOLDS
    if est.mean + z * est.half_width_95 < 0:
        return FAILS
    return INCONCLUSIVE


@dataclass(frozen=True)
class SweepPoint:
    n_bidders: int
    delta: EstimateWithCI
    verdict: str


def delta_sweep(value_spec, outside_spec, n_values, n_samples=200_000, stream=None, outside_scale=None):
    """Delta across coalition sizes, each size on its own run index.

    Returns ``(points, crossover)`` where ``crossover`` is the smallest N
    from which every larger swept N HOLDS, or None.
    """
    stream = _default_stream(stream, "sweep")
    seed, _, role = stream.seed, stream.stream_id[1], stream.stream_id[2]
    points = []
    for n in n_values:
        s = dist.RandomStream(seed, run=n, role=role)
        est = estimate_delta(value_spec, outside_spec, n, n_samples, s, outside_scale)
        points.append(SweepPoint(n, est, verdict(est)))
    crossover = None
    for p in reversed(points):
        if p.verdict != HOLDS:
            break
        crossover = p.n_bidders
    return points, crossover


# deterministic quadrature path

def _cdf_max(specs, n):
    if len(specs) == 1:
        return lambda s: dist.cdf(specs[0], s) ** n
    return lambda s: math.prod(dist.cdf(f, s) for f in specs)


def _cdf_second(specs, n):
    if len(specs) == 1:
        f = specs[0]

        def F2(s):
            p = dist.cdf(f, s)
            return p**n + n * p ** (n - 1) * (1 - p)

        return F2

    def F2(s):
        ps = [dist.cdf(f, s) for f in specs]
        total = math.prod(ps)
        for i in range(len(ps)):
            total += (1 - ps[i]) * math.prod(ps[:i] + ps[i + 1 :])
        return total

    return F2


def _breakpoints(*specs):
    pts = set()
    for s in specs:
        lo, hi = dist.support(s)
        pts.update((lo, hi))
    return sorted(pts)


def _integrate(fn, pts):
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    return total


def expected_positive_part(cdf_x, cdf_d, pts):
    """``E[(X - D)_+] = int F_D(s) (1 - F_X(s)) ds`` for independent nonnegative X, D."""
    return _integrate(lambda s: cdf_d(s) * (1.0 - cdf_x(s)), pts)


def delta_quadrature(value_specs, outside_spec, n_bidders=None):
    """Delta by integrating order-statistic CDFs against the outside-bid CDF."""
    specs, n = _specs(value_specs, n_bidders)
    if n < 2:
        raise ConfigError("the second-highest value needs at least 2 bidders")
    pts = [0.0] + [p for p in _breakpoints(outside_spec, *specs) if p > 0]
    Fd = lambda s: dist.cdf(outside_spec, s)
    up = expected_positive_part(_cdf_second(specs, n), Fd, pts)
    down = expected_positive_part(Fd, _cdf_max(specs, n), pts)
    return up - down


def L_quadrature(value_specs, outside_spec, n_bidders=None):
    specs, n = _specs(value_specs, n_bidders)
    pts = [0.0] + [p for p in _breakpoints(outside_spec, *specs) if p > 0]
    return expected_positive_part(lambda s: dist.cdf(outside_spec, s), _cdf_max(specs, n), pts)


def expected_max_quadrature(value_specs, n_bidders=None):
    """``E[v_(N)] = int (1 - F_max(s)) ds``."""
    specs, n = _specs(value_specs, n_bidders)
    pts = [0.0] + [p for p in _breakpoints(*specs) if p > 0]
    F = _cdf_max(specs, n)
    return _integrate(lambda s: 1.0 - F(s), pts)


def exact_gap(delta, L, n_bidders, horizon):
    """Per-bidder expected utility gap of the trigger-overbid algorithm under coordination."""
    n, T = n_bidders, horizon
    if n < 2:
        return 0.0
    return T / n * delta + (1 - n ** (-T)) / (n - 1) * L

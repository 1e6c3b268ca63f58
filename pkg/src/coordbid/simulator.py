"""Repeated-auction runs, paired scenarios and replication summaries.

Draw-order contract (the reproducibility and pairing anchor): for run
``r`` and seed ``s`` the simulator opens ``RandomStream(s, run=r,
role=...)`` streams and consumes one entry per round, in round order:

* ``values``: i.i.d. configs; each round draws bidders 1..N in index order.
* ``values/<i>``: non-i.i.d. configs; one stream per bidder.
* ``outside``: the outside bid.
* ``scale``: the multiplicative outside-bid factor, when configured.

All bidder algorithms are deterministic given feedback, so two scenarios
replayed on the same run index see identical draws.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import distributions as dist
from .auction import resolve
from .bidders import MD_ROS, Algorithm, Kind, default_learning_rate, update_arrays
from .coordination import HIGHEST_VALUE, INDEPENDENT, MechanismSpec, bids_array
from .exceptions import ConfigError, SimulationError
from .mirror_map import LAMBDA_MAX, LAMBDA_MIN, ClampCounter, get_mirror_map
from .stats import EstimateWithCI, columnwise, estimate

log = logging.getLogger(__name__)

DRAW_ORDER = "per round: values bidders 1..N (index order), then outside bid, then scale factor"
JOBS_ENV = "COORDBID_JOBS"
_MAX_BATCH_FLOATS = 20_000_000


@dataclass(frozen=True)
class ScenarioConfig:
    n_bidders: int
    horizon: int
    value_specs: tuple
    outside_spec: object
    outside_scale: Optional[object] = None
    mechanism: MechanismSpec = HIGHEST_VALUE
    algorithm: Algorithm = MD_ROS
    mirror_map: str = "entropy"
    replications: int = 100
    base_seed: int = 0
    alpha: Optional[float] = None
    max_value: float = 1.0
    label: str = ""
    setting: str = ""

    def __post_init__(self):
        specs = self.value_specs
        if not isinstance(specs, tuple):
            specs = tuple(specs) if isinstance(specs, (list, tuple)) else (specs,)
            object.__setattr__(self, "value_specs", specs)
        if self.n_bidders < 1:
            raise ConfigError(f"n_bidders must be >= 1, got {self.n_bidders}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if len(specs) not in (1, self.n_bidders):
            raise ConfigError(f"value_specs must have length 1 or {self.n_bidders}, got {len(specs)}")
        for s in specs:
            lo, hi = dist.support(s)
            if lo < 0 or hi > self.max_value:
                raise ConfigError(f"value distribution {dist.format_distribution(s)} leaves [0, {self.max_value:g}]")
        if self.outside_scale is not None and dist.support(self.outside_scale)[0] < 1:
            raise ConfigError("outside_scale support must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")
        get_mirror_map(self.mirror_map)

    @property
    def iid(self):
        return len(self.value_specs) == 1

    def spec_for(self, i):
        return self.value_specs[0] if self.iid else self.value_specs[i]

    @property
    def learning_rate(self):
        return default_learning_rate(self.horizon) if self.alpha is None else self.alpha

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class MetricsSeries:
    """One run of one scenario.

    ``checkpoints`` are 1-based rounds; ``cum_utility``, ``cum_value`` and
    ``lam`` hold per-bidder rows at those rounds (``lam`` is the multiplier
    the bid was formed with).  ``trace`` holds full per-round arrays when
    the run was recorded with ``record="full"``.
    """

    run_index: int
    scenario: str
    mechanism: str
    algorithm: str
    horizon: int
    n_bidders: int
    checkpoints: np.ndarray
    cum_utility: np.ndarray
    cum_value: np.ndarray
    lam: np.ndarray
    coalition_value: np.ndarray
    total_utility: np.ndarray
    total_value: np.ndarray
    final_lambda: np.ndarray
    clamp_events: int = 0
    trace: Optional[dict] = field(default=None, repr=False)

    @property
    def coalition_utility_total(self):
        return float(self.total_utility.sum())

    @property
    def coalition_value_total(self):
        return float(self.total_value.sum())


def _streams(config, run_index):
    seed = config.base_seed
    if config.iid:
        values = [dist.RandomStream(seed, run=run_index, role="values")]
    else:
        values = [dist.RandomStream(seed, run=run_index, role=f"values/{i + 1}") for i in range(config.n_bidders)]
    outside = dist.RandomStream(seed, run=run_index, role="outside")
    scale = dist.RandomStream(seed, run=run_index, role="scale") if config.outside_scale is not None else None
    return values, outside, scale


def draw_run(config, run_index):
    """All draws of one run: values ``(T, N)`` and effective outside bids ``(T,)``."""
    T, N = config.horizon, config.n_bidders
    vstreams, ostream, sstream = _streams(config, run_index)
    if config.iid:
        values = dist.sample_n(config.value_specs[0], vstreams[0], (T, N))
    else:
        values = np.column_stack([dist.sample_n(config.value_specs[i], vstreams[i], T) for i in range(N)])
    outside = dist.sample_n(config.outside_spec, ostream, T)
    if sstream is not None:
        outside = outside * dist.sample_n(config.outside_scale, sstream, T)
    if values.min() < 0 or values.max() > config.max_value:
        raise SimulationError(f"run {run_index}: a value left [0, {config.max_value:g}]")
    return values, outside


def _checkpoints(T, every):
    if every is None:
        every = max(1, math.ceil(T / 1000))
    cps = np.arange(every, T + 1, every)
    if cps.size == 0 or cps[-1] != T:
        cps = np.append(cps, T)
    return cps


def _simulate_batch(config, run_indices, scenarios, record, every, draws=None):
    """Run every (tag, mechanism, algorithm) scenario on the same draws for a batch of runs."""
    T, N = config.horizon, config.n_bidders
    M = len(run_indices)
    if draws is None:
        draws = [draw_run(config, r) for r in run_indices]
    V = np.stack([d[0] for d in draws])  # (M, T, N)
    D = np.stack([d[1] for d in draws])  # (M, T)
    mmap = get_mirror_map(config.mirror_map)
    alpha = config.learning_rate
    B = config.max_value
    full = record == "full"
    cps = np.arange(1, T + 1) if full else _checkpoints(T, every)
    is_cp = np.zeros(T + 1, dtype=bool)
    is_cp[cps] = True
    rows = np.arange(M)
    y_min, y_max = mmap.h_prime(LAMBDA_MIN), mmap.h_prime(LAMBDA_MAX)
    out = {}
    for tag, mech, alg in scenarios:
        init = alg.lambda0 if alg.kind is Kind.FIXED_MULTIPLIER else 1.0
        lam = np.full((M, N), float(init))
        flag = np.zeros((M, N), dtype=bool)
        cu = np.zeros((M, N))
        cv = np.zeros((M, N))
        K = cps.size
        cp_u = np.empty((M, K, N))
        cp_v = np.empty((M, K, N))
        cp_l = np.empty((M, K, N))
        coal_v = np.empty((M, K))
        tr = None
        if full:
            tr = {k: np.empty((M, T, N)) for k in ("bids", "payments", "utilities", "lambdas")}
            tr["active"] = np.empty((M, T, N), dtype=bool)
            tr["won"] = np.empty((M, T, N), dtype=bool)
        counters = [ClampCounter() for _ in range(M)] if alg.kind is Kind.MD_ROS else None
        k = 0
        for t in range(T):
            v = V[:, t, :]
            bids, active = bids_array(mech, alg, v, lam, flag, B)
            top, won_any, price, _ = resolve(bids, D[:, t])
            r, c = rows[won_any], top[won_any]
            u = np.zeros((M, N))
            val = np.zeros((M, N))
            u[r, c] = v[r, c] - price[won_any]
            val[r, c] = v[r, c]
            cu += u
            cv += val
            if full:
                won = np.zeros((M, N), dtype=bool)
                won[r, c] = True
                pay = np.zeros((M, N))
                pay[r, c] = price[won_any]
                tr["bids"][:, t] = bids
                tr["active"][:, t] = active
                tr["won"][:, t] = won
                tr["payments"][:, t] = pay
                tr["utilities"][:, t] = u
                tr["lambdas"][:, t] = lam
            if is_cp[t + 1]:
                cp_u[:, k] = cu
                cp_v[:, k] = cv
                cp_l[:, k] = lam
                coal_v[:, k] = val.sum(axis=1)
                k += 1
            if counters is not None:
                # per-run clamp bookkeeping, done in dual space
                y = mmap.h_prime(lam) - alpha * u
                lo_hit, hi_hit = y < y_min, y > y_max
                if lo_hit.any() or hi_hit.any():
                    for m_ in np.flatnonzero((lo_hit | hi_hit).any(axis=1)):
                        counters[m_].low += int(lo_hit[m_].sum())
                        counters[m_].high += int(hi_hit[m_].sum())
            lam, flag = update_arrays(alg, mmap, alpha, lam, flag, bids, u)
        series = []
        for m_, run in enumerate(run_indices):
            trace = None
            if full:
                trace = {key: arr[m_] for key, arr in tr.items()}
                trace["values"] = V[m_]
                trace["outside"] = D[m_]
            series.append(
                MetricsSeries(
                    run_index=run,
                    scenario=tag,
                    mechanism=str(mech),
                    algorithm=str(alg),
                    horizon=T,
                    n_bidders=N,
                    checkpoints=cps,
                    cum_utility=cp_u[m_],
                    cum_value=cp_v[m_],
                    lam=cp_l[m_],
                    coalition_value=coal_v[m_],
                    total_utility=cu[m_].copy(),
                    total_value=cv[m_].copy(),
                    final_lambda=lam[m_].copy(),
                    clamp_events=counters[m_].total if counters else 0,
                    trace=trace,
                )
            )
        out[tag] = series
    return out


def _batches(config, run_indices):
    per_run = config.horizon * config.n_bidders * 8
    size = max(1, min(len(run_indices), _MAX_BATCH_FLOATS // max(per_run, 1)))
    return [run_indices[i : i + size] for i in range(0, len(run_indices), size)]


def _worker(args):
    config, runs, scenarios, record, every = args
    return _simulate_batch(config, runs, scenarios, record, every)


def default_jobs():
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_scenarios(config, scenarios, run_indices=None, record="summary", every=None, jobs=1):
    """Run several scenarios on identical draws.

    ``scenarios`` is a sequence of ``(tag, mechanism, algorithm)``; an
    algorithm of ``None`` means ``config.algorithm``.  Returns a dict
    ``tag -> list[MetricsSeries]`` ordered by run index.
    """
    if run_indices is None:
        run_indices = list(range(1, config.replications + 1))
    run_indices = [int(r) for r in run_indices]
    scenarios = [(tag, mech, alg if alg is not None else config.algorithm) for tag, mech, alg in scenarios]
    tags = [s[0] for s in scenarios]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"duplicate scenario tags {tags}")
    batches = _batches(config, run_indices)
    if jobs is None:
        jobs = default_jobs()
    if jobs > 1 and len(batches) < jobs and len(run_indices) >= jobs:
        size = math.ceil(len(run_indices) / jobs)
        batches = [run_indices[i : i + size] for i in range(0, len(run_indices), size)]
    work = [(config, b, scenarios, record, every) for b in batches]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_worker, work))
    else:
        parts = [_worker(w) for w in work]
    return {tag: [s for part in parts for s in part[tag]] for tag in tags}


def run_once(config, run_index, record="full", every=None):
    """One run of ``config.mechanism`` with ``config.algorithm``."""
    res = _simulate_batch(config, [int(run_index)], [("run", config.mechanism, config.algorithm)], record, every)
    return res["run"][0]


def run_paired(config, run_index=1, record="full", every=None):
    """Independent bidding and ``config.mechanism`` replayed on the same draws."""
    res = _simulate_batch(
        config,
        [int(run_index)],
        [("I", INDEPENDENT, config.algorithm), ("C", config.mechanism, config.algorithm)],
        record,
        every,
    )
    return res["I"][0], res["C"][0]


@dataclass(frozen=True)
class ScenarioSummary:
    """Replication statistics for one scenario, totals divided by T."""

    scenario: str
    mechanism: str
    algorithm: str
    utility: EstimateWithCI
    value: EstimateWithCI
    bidder_utility: np.ndarray
    bidder_utility_ci: np.ndarray
    bidder_value: np.ndarray
    bidder_value_ci: np.ndarray
    clamp_events: int

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "mechanism": self.mechanism,
            "algorithm": self.algorithm,
            "total_utility": self.utility.to_dict(),
            "total_value": self.value.to_dict(),
            "bidder_utility": {"mean": self.bidder_utility.tolist(), "ci95": self.bidder_utility_ci.tolist()},
            "bidder_value": {"mean": self.bidder_value.tolist(), "ci95": self.bidder_value_ci.tolist()},
            "clamp_events": self.clamp_events,
        }


@dataclass(frozen=True)
class SummaryStats:
    label: str
    setting: str
    n_bidders: int
    horizon: int
    replications: int
    scenarios: dict

    def __getitem__(self, tag):
        return self.scenarios[tag]


def summarize_scenario(series):
    """Normalized coalition and per-bidder totals over replications."""
    if len(series) < 2:
        raise ConfigError("a confidence interval needs at least 2 replications")
    shapes = {(s.horizon, s.n_bidders) for s in series}
    if len(shapes) != 1:
        raise ValueError(f"mismatched replication shapes {shapes}")
    T = series[0].horizon
    u = np.array([s.total_utility for s in series]) / T
    v = np.array([s.total_value for s in series]) / T
    bu, bu_ci = columnwise(u)
    bv, bv_ci = columnwise(v)
    first = series[0]
    return ScenarioSummary(
        scenario=first.scenario,
        mechanism=first.mechanism,
        algorithm=first.algorithm,
        utility=estimate(u.sum(axis=1)),
        value=estimate(v.sum(axis=1)),
        bidder_utility=bu,
        bidder_utility_ci=bu_ci,
        bidder_value=bv,
        bidder_value_ci=bv_ci,
        clamp_events=sum(s.clamp_events for s in series),
    )


def run_replications(config, M=None, jobs=1, every=None, return_series=False):
    """``M`` paired replications (run indices 1..M) of Independent vs ``config.mechanism``."""
    M = config.replications if M is None else M
    if M < 2:
        raise ConfigError("run_replications needs M >= 2 for confidence intervals")
    res = run_scenarios(
        config,
        [("I", INDEPENDENT, None), ("C", config.mechanism, None)],
        run_indices=range(1, M + 1),
        every=every,
        jobs=jobs,
    )
    stats = SummaryStats(
        label=config.label,
        setting=config.setting,
        n_bidders=config.n_bidders,
        horizon=config.horizon,
        replications=M,
        scenarios={tag: summarize_scenario(s) for tag, s in res.items()},
    )
    return (stats, res) if return_series else stats

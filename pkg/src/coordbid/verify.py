"""Numerical checks of the coordination guarantees, shared by the CLI and the test suite.

Each check returns a :class:`CheckResult` with the measured and predicted
numbers and a pass flag.  All checks use paired runs (identical draws for
the independent and coordinated scenarios).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import assumption as asm
from .bidders import MD_ROS, TRIGGER_OVERBID, TRUTHFUL
from .config import REFERENCE_TABLE, builtin_config
from .coordination import HIGHEST_VALUE, INDEPENDENT, ALL_TRUTHFUL, baseline_family
from .distributions import RandomStream, Uniform
from .simulator import draw_run, run_replications, run_scenarios
from .stats import estimate

U01 = Uniform(0.0, 1.0)
REPRODUCE_TOL = 0.015


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    predicted: float
    se: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"

    def report(self):
        extra = "".join(f"\n  {k}: {v}" for k, v in self.detail.items())
        return (
            f"{self.status} {self.name}: measured {self.measured:.6g} (SE {self.se:.3g}), "
            f"predicted {self.predicted:.6g}{extra}"
        )


def _pair(config, algorithm, reps, labels=("I", "C"), mechanism=HIGHEST_VALUE, jobs=1):
    cfg = config.with_(algorithm=algorithm, replications=reps)
    res = run_scenarios(cfg, [(labels[0], INDEPENDENT, algorithm), (labels[1], mechanism, algorithm)], jobs=jobs)
    return res[labels[0]], res[labels[1]]


def per_bidder_gaps(I, C):
    """``(reps, N)`` array of ``U^C_i - U^I_i`` totals."""
    return np.array([c.total_utility - i.total_utility for i, c in zip(I, C)])


def check_exact_gap(n_bidders, horizon=200, reps=500, value_spec=U01, outside_spec=U01, seed=0, jobs=1):
    """Trigger-overbid gap against ``(T/N) Delta + (1 - N^-T)/(N - 1) L``.

    The per-replication statistic is the gap averaged over bidders
    (bidders in one run are not independent), and the test is |diff| <= 3 SE.
    """
    cfg = builtin_config("fig-i2").with_(
        n_bidders=n_bidders, horizon=horizon, value_specs=(value_spec,), outside_spec=outside_spec, base_seed=seed
    )
    I, C = _pair(cfg, TRIGGER_OVERBID, reps, jobs=jobs)
    gaps = per_bidder_gaps(I, C)
    est = estimate(gaps.mean(axis=1))
    delta = asm.delta_quadrature(value_spec, outside_spec, n_bidders)
    L = asm.L_quadrature(value_spec, outside_spec, n_bidders)
    pred = asm.exact_gap(delta, L, n_bidders, horizon)
    ok = abs(est.mean - pred) <= 3 * est.se
    return CheckResult(
        f"exact gap N={n_bidders} T={horizon}",
        ok,
        est.mean,
        pred,
        est.se,
        {"delta": round(delta, 10), "L": round(L, 10), "per_bidder_mean": np.round(gaps.mean(axis=0), 4).tolist()},
    )


def check_per_bidder_bound(algorithm, config=None, horizon=1000, reps=200, seed=0, jobs=1):
    """Per-bidder gap at least ``T Delta / N`` (minus 3 SE); every bidder is checked."""
    cfg = (config or builtin_config("fig-i2")).with_(horizon=horizon, base_seed=seed)
    I, C = _pair(cfg, algorithm, reps, jobs=jobs)
    gaps = per_bidder_gaps(I, C)
    delta = asm.delta_quadrature(cfg.value_specs, cfg.outside_spec, cfg.n_bidders)
    bound = horizon * delta / cfg.n_bidders
    ests = [estimate(gaps[:, i]) for i in range(cfg.n_bidders)]
    worst = min(ests, key=lambda e: e.mean - 3 * e.se - bound)
    ok = all(e.mean >= bound - 3 * e.se for e in ests)
    return CheckResult(
        f"per-bidder gap lower bound ({algorithm})",
        ok,
        worst.mean,
        bound,
        worst.se,
        {"per_bidder_gap": [round(e.mean, 4) for e in ests], "delta": round(delta, 10)},
    )


def check_gmono(config=None, n_grid=20, lam_range=(1e-3, 1e3), n_samples=100_000, seed=0):
    cfg = config or builtin_config("fig-i2")
    grid = np.logspace(math.log10(lam_range[0]), math.log10(lam_range[1]), n_grid)
    stream = RandomStream(seed, role="gmono")
    ests = asm.estimate_G_grid(cfg.value_specs, cfg.outside_spec, cfg.n_bidders, list(grid), n_samples, stream)
    means = np.array([e.mean for e in ests])
    steps = np.diff(means)
    ok = bool(np.all(steps >= 0))
    return CheckResult(
        "G nondecreasing on a common-random-numbers grid",
        ok,
        float(steps.min()),
        0.0,
        0.0,
        {"lambda": np.round(grid, 6).tolist(), "G": np.round(means, 6).tolist()},
    )


def check_convergence(config=None, horizon=20000, reps=100, seed=0, slack=0.05, jobs=1):
    """Fraction of final multipliers above ``exp(-Delta sqrt(T) / (2N))``."""
    cfg = (config or builtin_config("fig-i2")).with_(horizon=horizon, base_seed=seed, replications=reps)
    res = run_scenarios(cfg, [("C", HIGHEST_VALUE, MD_ROS)], jobs=jobs)["C"]
    N = cfg.n_bidders
    delta = asm.delta_quadrature(cfg.value_specs, cfg.outside_spec, N)
    lam_bound = math.exp(-delta * math.sqrt(horizon) / (2 * N))
    allowed = math.exp(-(delta**2) * horizon / (32 * cfg.max_value**2 * N**2))
    final = np.array([s.final_lambda for s in res])
    frac = float(np.mean(final > lam_bound))
    return CheckResult(
        f"multiplier convergence T={horizon}",
        frac <= allowed + slack,
        frac,
        allowed + slack,
        0.0,
        {"lambda_bound": lam_bound, "max_final_lambda": float(final.max()), "median_final_lambda": float(np.median(final))},
    )


def value_ceiling_family(n_bidders):
    """Baseline mechanisms plus the HighestValue and Independent learners, as (tag, mechanism, algorithm)."""
    out = [(str(m), m, MD_ROS) for m in baseline_family(n_bidders)]
    out.append(("highest-value+truthful", HIGHEST_VALUE, TRUTHFUL))
    out.append(("highest-value+md-ros", HIGHEST_VALUE, MD_ROS))
    out.append(("independent+md-ros", INDEPENDENT, MD_ROS))
    return out


def check_value_ceiling(config=None, reps=100, seed=0, n_samples=1_000_000, jobs=1):
    """Each mechanism's mean time-average coalition value against ``E[v_(N)]``.

    The ceiling is computed by quadrature; the test allows 3 SE of the
    replication mean.  A stricter, noise-free check is also applied: in
    every run the time-average coalition value cannot exceed that run's
    own average of the realized maxima.
    """
    cfg = (config or builtin_config("fig-i2")).with_(base_seed=seed, replications=reps)
    family = value_ceiling_family(cfg.n_bidders)
    res = run_scenarios(cfg, family, jobs=jobs)
    ceiling = asm.expected_max_quadrature(cfg.value_specs, cfg.n_bidders)
    mc = asm.estimate_value_curve(
        cfg.value_specs, cfg.outside_spec, cfg.n_bidders, asm.ZERO_PLUS, n_samples, RandomStream(seed, role="ceiling")
    )
    # realized per-run maxima for the pointwise check
    vmax_avg = np.array([draw_run(cfg, r)[0].max(axis=1).mean() for r in range(1, reps + 1)])
    T = cfg.horizon
    ok, worst, worst_se, rows, pointwise_viol = True, -math.inf, 0.0, {}, 0
    for tag, _, _ in family:
        tv = np.array([s.coalition_value_total / T for s in res[tag]])
        e = estimate(tv)
        ok &= e.mean <= ceiling + 3 * e.se
        pointwise_viol += int(np.sum(tv > vmax_avg * (1 + 1e-12)))
        rows[tag] = round(e.mean, 4)
        if e.mean - ceiling > worst:
            worst, worst_se = e.mean - ceiling, e.se
    ok &= pointwise_viol == 0
    return CheckResult(
        "value ceiling",
        bool(ok),
        worst + ceiling,
        ceiling,
        worst_se,
        {"mechanism_values": rows, "pointwise_violations": pointwise_viol, "E[v_(N)] (MC)": f"{mc:.5f}"},
    )


def check_truthful_dominance(config=None, reps=100, seed=0, jobs=1):
    """All-truthful replay vs independent MD-ROS: zero per-bidder, per-run violations."""
    cfg = (config or builtin_config("fig-i1")).with_(base_seed=seed, replications=reps)
    res = run_scenarios(cfg, [("truth", ALL_TRUTHFUL, MD_ROS), ("I", INDEPENDENT, MD_ROS)], jobs=jobs)
    diff = np.array([t.total_utility - i.total_utility for t, i in zip(res["truth"], res["I"])])
    viol = int(np.sum(diff < 0))
    return CheckResult(
        "truthful dominance",
        viol == 0,
        float(diff.min()),
        0.0,
        0.0,
        {"violations": viol, "pairs": int(diff.size)},
    )


def check_total_gap(config=None, reps=100, seed=0, jobs=1, algorithm=MD_ROS):
    """Coalition-total utility gap at least ``Delta T`` (minus 3 SE), non-i.i.d. values."""
    cfg = (config or builtin_config("fig-ni1")).with_(base_seed=seed)
    I, C = _pair(cfg, algorithm, reps, jobs=jobs)
    total = per_bidder_gaps(I, C).sum(axis=1)
    est = estimate(total)
    delta = asm.delta_quadrature(cfg.value_specs, cfg.outside_spec, cfg.n_bidders)
    bound = delta * cfg.horizon
    return CheckResult(
        f"total utility gap ({cfg.label or 'custom'})",
        est.mean >= bound - 3 * est.se,
        est.mean,
        bound,
        est.se,
        {"delta": delta, "gap_per_round": est.mean / cfg.horizon},
    )


@dataclass
class ReproduceResult:
    label: str
    reference: tuple
    measured: object  # SummaryRow
    tol: float = REPRODUCE_TOL

    @property
    def diffs(self):
        return tuple(abs(e.mean - p) for e, p in zip(self.measured.cells(), self.reference))

    @property
    def passed(self):
        return all(d <= self.tol for d in self.diffs)

    def table(self):
        names = ("utility I", "utility C", "value I", "value C")
        lines = [f"{self.label}  (N={self.measured.n_bidders}, T={self.measured.horizon}, M={self.measured.utility_I.n_samples})"]
        lines.append(f"  {'cell':<10} {'reference':>9} {'measured':>18} {'|diff|':>8}")
        for n, p, e, d in zip(names, self.reference, self.measured.cells(), self.diffs):
            flag = "" if d <= self.tol else "  <-- outside tolerance"
            lines.append(f"  {n:<10} {p:>9.3f} {e.mean:>9.4f} ± {e.half_width_95:.4f} {d:>8.4f}{flag}")
        return "\n".join(lines)


def reproduce(label, reps=100, seed=0, data=None, jobs=1, tol=REPRODUCE_TOL):
    from .reporting import summary_from_stats

    cfg = builtin_config(label, data=data, replications=reps, seed=seed)
    stats = run_replications(cfg, reps, jobs=jobs)
    return ReproduceResult(label, REFERENCE_TABLE[label], summary_from_stats(stats), tol)

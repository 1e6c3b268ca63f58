"""``coord-bid-sim`` command line.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 a ``verify`` or ``reproduce`` check ran but did not pass.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from . import assumption as asm
from . import verify as vf
from .bidders import Algorithm
from .config import REFERENCE_TABLE, REAL, SYNTHETIC, builtin_config, load_config, resolve_distribution, scenario_to_dict
from .coordination import INDEPENDENT
from .distributions import RandomStream, format_distribution
from .exceptions import ConfigError, NoRootInBracket, SimulationError
from .reporting import summary_from_stats, write_long_csv, write_summary_json, write_trace_csv
from .simulator import SummaryStats, default_jobs, run_scenarios, summarize_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK_FAILED = 0, 1, 2, 3

log = logging.getLogger("coordbid")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _jobs(args):
    return args.jobs if args.jobs is not None else default_jobs()


def _meta(config, argv):
    return {"scenario": scenario_to_dict(config), "argv": list(argv), "version": __version__}


def cmd_simulate(args, argv):
    rc = load_config(args.config)
    scen = rc.scenario
    over = {}
    if args.reps is not None:
        over["replications"] = args.reps
    if args.seed is not None:
        over["base_seed"] = args.seed
    if over:
        scen = scen.with_(**over)
    out = rc.output
    if args.out_dir is not None:
        out.dir = Path(args.out_dir)
    if args.full_trace:
        out.full_trace = True
    jobs = args.jobs if args.jobs is not None else (rc.jobs or default_jobs())
    meta = _meta(scen, argv)
    pairs = [("I", INDEPENDENT, None), ("C", scen.mechanism, None)]
    M = scen.replications

    if out.trace:
        runs = list(range(1, M + 1)) if out.trace_runs == "all" else [r for r in out.trace_runs if r <= M]
        traced = run_scenarios(scen, pairs, run_indices=runs, record="full", jobs=jobs)
        series = [s for r in range(len(runs)) for s in (traced["I"][r], traced["C"][r])]
        path = write_trace_csv(out.path(out.trace), series, meta)
        print(f"trace: {path}")
    if M < 2:
        print("error: a summary needs at least 2 replications (confidence intervals); only the trace was written", file=sys.stderr)
        return EXIT_CONFIG
    every = 1 if out.full_trace else out.every
    res = run_scenarios(scen, pairs, every=every, jobs=jobs)
    stats = SummaryStats(
        scen.label, scen.setting, scen.n_bidders, scen.horizon, M, {t: summarize_scenario(s) for t, s in res.items()}
    )
    if out.summary:
        print(f"summary: {write_summary_json(out.path(out.summary), stats, meta)}")
    if out.long:
        print(f"long: {write_long_csv(out.path(out.long), res, meta)}")
    print(_table_header())
    print(summary_from_stats(stats).format())
    return EXIT_OK


def _table_header():
    return f"{'label':<12} {'setting':<8} {'N':>2} {'T':>6}  {'utility I':<16} {'utility C':<16} {'value I':<16} value C"


def _print_estimate(name, e, verdict=None):
    tail = f"  {verdict}" if verdict else ""
    print(f"{name:<10} {e.mean:+.5f} ± {e.half_width_95:.5f}  (n={e.n_samples}){tail}")


def _parse_sweep(text):
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError:
        raise ConfigError(f"--sweep-n expects lo..hi, got {text!r}") from None
    if not 2 <= lo <= hi:
        raise ConfigError(f"--sweep-n needs 2 <= lo <= hi, got {text!r}")
    return range(lo, hi + 1)


def cmd_check(args, argv):
    F = [resolve_distribution(f) for f in args.F]
    D = resolve_distribution(args.D)
    stream = RandomStream(args.seed, role="check")
    print(f"F = {', '.join(format_distribution(f) for f in F)}; D = {format_distribution(D)}")
    if args.sweep_n:
        if len(F) != 1:
            raise ConfigError("--sweep-n needs a single (i.i.d.) --F")
        points, crossover = asm.delta_sweep(F[0], D, _parse_sweep(args.sweep_n), args.samples, stream)
        for p in points:
            _print_estimate(f"N={p.n_bidders}", p.delta, p.verdict)
        print(f"crossover: {'none in range' if crossover is None else f'HOLDS from N={crossover}'}")
        return EXIT_OK
    N = args.N if args.N is not None else len(F)
    if N < 2:
        raise ConfigError("check needs N >= 2")
    if len(F) not in (1, N):
        raise ConfigError(f"{len(F)} --F values for N={N}; give 1 (i.i.d.) or N")
    delta = asm.estimate_delta(F, D, N, args.samples, stream)
    print(f"N = {N}")
    _print_estimate("Delta", delta, asm.verdict(delta))
    if len(F) > 1:
        for i, e in enumerate(asm.estimate_all_delta_i(F, D, args.samples, stream)):
            _print_estimate(f"Delta_{i + 1}", e, asm.verdict(e))
    if args.lambda_star:
        try:
            ls = asm.find_lambda_star(F, D, N, min(args.samples, 200_000), stream=stream)
            print(f"lambda*  {'0 (boundary case)' if ls.boundary else f'{ls.value:.6g}'}")
        except NoRootInBracket as e:
            print(f"lambda*  {e}")
    return EXIT_OK


_VERIFY_DEFAULT = {
    "theorem1": "fig-i2",
    "gmono": "fig-i2",
    "convergence": "fig-i2",
    "value-ceiling": "fig-i2",
    "dominance": "fig-i1",
    "total-gap": "fig-ni1",
}


def _verify_config(args):
    cfg = builtin_config(args.config or _VERIFY_DEFAULT[args.which])
    over = {}
    if args.N is not None:
        over["n_bidders"] = args.N
    if args.F:
        over["value_specs"] = tuple(resolve_distribution(f) for f in args.F)
    if args.D:
        over["outside_spec"] = resolve_distribution(args.D)
    if args.T is not None and args.which in ("value-ceiling", "dominance", "total-gap"):
        over["horizon"] = args.T
    return cfg.with_(**over) if over else cfg


def cmd_verify(args, argv):
    jobs = _jobs(args)
    kw = {"seed": args.seed}
    if args.reps is not None:
        kw["reps"] = args.reps
    which = args.which
    if which == "gap":
        ns = [args.N] if args.N is not None else [2, 3, 4]
        F = resolve_distribution(args.F[0]) if args.F else vf.U01
        D = resolve_distribution(args.D) if args.D else vf.U01
        results = [vf.check_exact_gap(n, horizon=args.T or 200, value_spec=F, outside_spec=D, jobs=jobs, **kw) for n in ns]
    else:
        cfg = _verify_config(args)
        if which == "theorem1":
            algs = [Algorithm.parse(a) for a in (args.algorithm or ["truthful", "md-ros"])]
            results = [vf.check_per_bidder_bound(a, cfg, horizon=args.T or 1000, jobs=jobs, **kw) for a in algs]
        elif which == "gmono":
            results = [vf.check_gmono(cfg, n_samples=args.samples or 100_000, seed=args.seed)]
        elif which == "convergence":
            results = [vf.check_convergence(cfg, horizon=args.T or 20000, jobs=jobs, **kw)]
        elif which == "value-ceiling":
            results = [vf.check_value_ceiling(cfg, jobs=jobs, **kw)]
        elif which == "dominance":
            results = [vf.check_truthful_dominance(cfg, jobs=jobs, **kw)]
        else:
            results = [vf.check_total_gap(cfg, jobs=jobs, **kw)]
    for r in results:
        print(r.report())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def cmd_reproduce(args, argv):
    label = args.row.lower()
    if label == "all-synthetic":
        labels = list(SYNTHETIC)
    elif label == "all":
        labels = list(SYNTHETIC) + list(REAL)
    elif label in REFERENCE_TABLE:
        labels = [label]
    else:
        raise ConfigError(f"unknown row {args.row!r}; known: {', '.join(REFERENCE_TABLE)}, all-synthetic, all")
    ok = True
    for lab in labels:
        if lab in REAL and args.data is None:
            print(f"{lab}: SKIPPED (needs the external price log; pass --data PATH)")
            continue
        res = vf.reproduce(lab, reps=args.reps, seed=args.seed, data=args.data, jobs=_jobs(args))
        print(res.table())
        print(f"  {'PASS' if res.passed else 'FAIL'} (tolerance ±{res.tol})")
        ok &= res.passed
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser():
    p = _Parser(prog="coord-bid-sim", description="Coordinated vs independent auto-bidding simulations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, reps_default=None, seed_default=0):
        sp.add_argument("--reps", type=int, default=reps_default, help="replications")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: $COORDBID_JOBS or CPU count)")

    s = sub.add_parser("simulate", help="run a scenario from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=None)
    s.add_argument("--full-trace", action="store_true", help="long CSV at every round instead of every ceil(T/1000)")
    common(s, seed_default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="estimate Delta (and Delta_i) and report whether the condition holds")
    c.add_argument("--F", action="append", required=True, help="value law; repeat once per bidder for non-i.i.d.")
    c.add_argument("--D", required=True, help="outside-bid law")
    c.add_argument("--N", type=int, default=None)
    c.add_argument("--samples", type=int, default=1_000_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--sweep-n", default=None, metavar="LO..HI")
    c.add_argument("--lambda-star", action="store_true", help="also locate lambda*")
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("verify", help="run one of the numerical checks")
    v.add_argument("which", choices=["gap", "theorem1", "gmono", "convergence", "value-ceiling", "dominance", "total-gap"])
    v.add_argument("--config", default=None, help="built-in scenario label")
    v.add_argument("--N", type=int, default=None)
    v.add_argument("--T", type=int, default=None)
    v.add_argument("--F", action="append", default=None)
    v.add_argument("--D", default=None)
    v.add_argument("--algorithm", action="append", default=None)
    v.add_argument("--samples", type=int, default=None)
    common(v)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("reproduce", help="reproduce rows of the reference results table")
    r.add_argument("row", help=f"one of {', '.join(REFERENCE_TABLE)}, all-synthetic, all")
    r.add_argument("--data", default=None, help="price log for the real-data rows ('fixture' for the bundled one)")
    common(r, reps_default=100)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, NoRootInBracket, OSError, ArithmeticError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

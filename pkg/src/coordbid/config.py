"""Built-in experiment configurations and the TOML config-file loader."""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import distributions as dist
from .bidders import Algorithm
from .coordination import MechanismSpec
from .data_ingest import fixture_path, load_price_pool, outside_spec_from_pool
from .exceptions import ConfigError
from .simulator import ScenarioConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

U01 = dist.Uniform(0.0, 1.0)

# (utility I, utility C, value I, value C), totals normalized by T
REFERENCE_TABLE = {
    "fig-i1": (-0.011, 0.220, 0.643, 0.666),
    "fig-i2": (-0.077, 0.302, 0.774, 0.800),
    "fig-i3": (-0.049, 0.153, 0.712, 0.748),
    "fig-ni1": (0.049, 0.219, 0.715, 0.718),
    "fig-ni2": (-0.014, 0.258, 0.619, 0.633),
    "fig-ni3": (-0.062, 0.619, 0.814, 0.819),
    "fig-real-k4": (-0.040, 0.155, 0.620, 0.928),
    "fig-real-k5": (-0.065, 0.172, 0.608, 0.958),
}
SYNTHETIC = ("fig-i1", "fig-i2", "fig-i3", "fig-ni1", "fig-ni2", "fig-ni3")
REAL = ("fig-real-k4", "fig-real-k5")
CELLS = ("utility_I", "utility_C", "value_I", "value_C")


def _cn(mu, sigma):
    return dist.CappedNormal(mu, sigma, 0.0, 1.0)


_SYNTH = {
    "fig-i1": dict(setting="iid", n_bidders=2, horizon=4000, value_specs=(U01,), outside_spec=dist.Uniform(0.0, 0.9)),
    "fig-i2": dict(setting="iid", n_bidders=4, horizon=4000, value_specs=(U01,), outside_spec=U01),
    "fig-i3": dict(setting="iid", n_bidders=3, horizon=4000, value_specs=(U01,), outside_spec=dist.Beta(3, 2)),
    "fig-ni1": dict(
        setting="non-iid",
        n_bidders=2,
        horizon=10000,
        value_specs=(dist.Beta(2, 5), dist.Beta(5, 2)),
        outside_spec=dist.Uniform(0.2, 0.8),
    ),
    "fig-ni2": dict(
        setting="non-iid",
        n_bidders=3,
        horizon=20000,
        value_specs=(dist.Beta(2, 6), _cn(0.6, 0.15), _cn(0.4, 0.2)),
        outside_spec=dist.Beta(3, 5),
    ),
    "fig-ni3": dict(
        setting="non-iid",
        n_bidders=5,
        horizon=20000,
        value_specs=(dist.Uniform(0.2, 0.8), dist.Beta(4, 3), dist.Beta(6, 2), _cn(0.5, 0.1), _cn(0.7, 0.12)),
        outside_spec=dist.Beta(2, 8),
    ),
}


def builtin_labels():
    return list(REFERENCE_TABLE)


def builtin_config(label, data=None, column="payprice", delimiter="\t", replications=100, seed=0):
    """A built-in reference scenario.  Real-data rows need ``data`` (a price file path, or ``"fixture"``)."""
    label = label.lower()
    if label in _SYNTH:
        return ScenarioConfig(label=label, replications=replications, base_seed=seed, **_SYNTH[label])
    if label in REAL:
        if data is None:
            raise ConfigError(f"{label} needs a price file (--data)")
        path = fixture_path() if str(data) == "fixture" else Path(data)
        pool = load_price_pool(path, column=column, delimiter=delimiter)
        outside, scale = outside_spec_from_pool(pool)
        return ScenarioConfig(
            n_bidders=4 if label.endswith("k4") else 5,
            horizon=20000,
            value_specs=(outside,),
            outside_spec=outside,
            outside_scale=scale,
            label=label,
            setting="real",
            replications=replications,
            base_seed=seed,
        )
    raise ConfigError(f"unknown built-in config {label!r}; known: {', '.join(REFERENCE_TABLE)}")


# config files

_KNOWN = {
    "scenario": {
        "label",
        "setting",
        "n_bidders",
        "horizon",
        "values",
        "outside",
        "outside_scale",
        "mechanism",
        "algorithm",
        "mirror_map",
        "alpha",
        "max_value",
    },
    "run": {"replications", "seed", "jobs"},
    "output": {"dir", "trace", "summary", "long", "trace_runs", "full_trace", "every"},
}
_REQUIRED = ("n_bidders", "horizon", "values", "outside")


@dataclass
class OutputSpec:
    dir: Path = Path(".")
    trace: Optional[str] = "trace.csv"
    summary: Optional[str] = "summary.json"
    long: Optional[str] = "long.csv"
    trace_runs: list = field(default_factory=lambda: [1])
    full_trace: bool = False
    every: Optional[int] = None

    def path(self, name):
        return None if not name else self.dir / name


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    output: OutputSpec
    jobs: Optional[int] = None
    source: dict = field(default_factory=dict)


_KV = re.compile(r"^\s*(\w+)\s*=\s*(.*?)\s*$")


def resolve_distribution(text, base_dir=Path(".")):
    """Like :func:`distributions.parse_distribution`, plus file-backed
    ``empirical(path=..., column=..., delimiter=..., header=...)``."""
    text = str(text).strip()
    m = re.fullmatch(r"empirical\((.*)\)", text, flags=re.IGNORECASE | re.DOTALL)
    if m and "=" in m.group(1):
        opts = {}
        for part in m.group(1).split(","):
            kv = _KV.match(part)
            if not kv:
                raise ConfigError(f"cannot parse empirical option {part!r} in {text!r}")
            opts[kv.group(1)] = kv.group(2).strip("'\"")
        unknown = set(opts) - {"path", "column", "delimiter", "header"}
        if unknown:
            raise ConfigError(f"unknown empirical option(s) {sorted(unknown)} in {text!r}")
        if "path" not in opts:
            raise ConfigError(f"empirical(...) needs path= in {text!r}")
        path = fixture_path() if opts["path"] == "fixture" else Path(base_dir) / opts["path"]
        delim = {"tab": "\t", "\\t": "\t", "comma": ","}.get(opts.get("delimiter", "\t"), opts.get("delimiter", "\t"))
        header = opts.get("header", "true").lower() not in ("false", "0", "no")
        column = opts.get("column", "payprice")
        pool = load_price_pool(path, column=int(column) if column.isdigit() else column, delimiter=delim, header=header)
        return outside_spec_from_pool(pool)[0]
    return dist.parse_distribution(text)


def _get(table, key, kind, where):
    val = table[key]
    if kind is int and isinstance(val, bool) or not isinstance(val, kind):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def parse_config(data, base_dir=Path(".")):
    """Build a :class:`RunConfig` from a parsed TOML tree; unknown keys are errors."""
    for section, body in data.items():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        bad = set(body) - _KNOWN[section]
        if bad:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(bad))}")
    sc = data.get("scenario", {})
    for key in _REQUIRED:
        if key not in sc:
            raise ConfigError(f"missing required key scenario.{key}")
    run = data.get("run", {})
    out = data.get("output", {})
    n = _get(sc, "n_bidders", int, "scenario")
    values = sc["values"]
    values = [values] if isinstance(values, str) else values
    if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
        raise ConfigError("scenario.values: expected a distribution string or a list of them")

    def spec(key, text):
        try:
            return resolve_distribution(text, base_dir)
        except ConfigError as e:
            raise ConfigError(f"scenario.{key}: {e}") from None

    kw = dict(
        n_bidders=n,
        horizon=_get(sc, "horizon", int, "scenario"),
        value_specs=tuple(spec("values", v) for v in values),
        outside_spec=spec("outside", _get(sc, "outside", str, "scenario")),
        label=str(sc.get("label", "")),
        setting=str(sc.get("setting", "")),
    )
    if "outside_scale" in sc:
        kw["outside_scale"] = spec("outside_scale", _get(sc, "outside_scale", str, "scenario"))
    try:
        if "mechanism" in sc:
            kw["mechanism"] = MechanismSpec.parse(sc["mechanism"])
        if "algorithm" in sc:
            kw["algorithm"] = Algorithm.parse(sc["algorithm"])
    except ConfigError as e:
        raise ConfigError(f"scenario: {e}") from None
    if "mirror_map" in sc:
        kw["mirror_map"] = _get(sc, "mirror_map", str, "scenario")
    if "alpha" in sc:
        kw["alpha"] = float(_get(sc, "alpha", (int, float), "scenario"))
    if "max_value" in sc:
        kw["max_value"] = float(_get(sc, "max_value", (int, float), "scenario"))
    if "replications" in run:
        kw["replications"] = _get(run, "replications", int, "run")
    if "seed" in run:
        kw["base_seed"] = _get(run, "seed", int, "run")
    scenario = ScenarioConfig(**kw)

    o = OutputSpec(dir=Path(base_dir) / out.get("dir", "."))
    for key in ("trace", "summary", "long"):
        if key in out:
            val = out[key]
            setattr(o, key, val if val else None)
    if "trace_runs" in out:
        tr = out["trace_runs"]
        if tr == "all":
            o.trace_runs = "all"
        elif isinstance(tr, list) and all(isinstance(r, int) and r >= 1 for r in tr):
            o.trace_runs = tr
        else:
            raise ConfigError("output.trace_runs: expected \"all\" or a list of run indices >= 1")
    if "full_trace" in out:
        o.full_trace = bool(_get(out, "full_trace", bool, "output"))
    if "every" in out:
        o.every = _get(out, "every", int, "output")
    jobs = _get(run, "jobs", int, "run") if "jobs" in run else None
    return RunConfig(scenario, o, jobs, data)


def load_config(path):
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(data, path.parent)


def scenario_to_dict(config):
    """A JSON-ready description of every resolved scenario field."""
    return {
        "label": config.label,
        "setting": config.setting,
        "n_bidders": config.n_bidders,
        "horizon": config.horizon,
        "values": [dist.format_distribution(s) for s in config.value_specs],
        "outside": dist.format_distribution(config.outside_spec),
        "outside_scale": None if config.outside_scale is None else dist.format_distribution(config.outside_scale),
        "mechanism": str(config.mechanism),
        "algorithm": str(config.algorithm),
        "mirror_map": config.mirror_map,
        "alpha": config.learning_rate,
        "alpha_override": config.alpha is not None,
        "max_value": config.max_value,
        "replications": config.replications,
        "seed": config.base_seed,
    }

"""Trace CSV, summary JSON and long-format CSV writers, plus the I-vs-C summary row.

Every file starts with the schema line ``# coord-bid-sim schema v1``.
CSV floats are written with 9 significant digits; bidder indices in files
are 1-based.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .auction import competing_bids
from .exceptions import SimulationError
from .simulator import DRAW_ORDER, summarize_scenario
from .stats import EstimateWithCI

SCHEMA_LINE = "# coord-bid-sim schema v1"
TRACE_COLUMNS = (
    "run_id",
    "t",
    "scenario",
    "bidder",
    "value",
    "bid",
    "outside",
    "competing",
    "active",
    "won",
    "payment",
    "utility",
    "lambda",
    "cum_utility",
    "coalition_value",
)
LONG_COLUMNS = ("scenario", "metric", "t", "mean", "ci_lo", "ci_hi")
LONG_METRICS = ("cum_utility", "cum_value", "mean_lambda")
_INT_COLS = {"run_id", "t", "bidder", "active", "won"}


def fmt(x):
    return f"{x:.9g}"


@dataclass(frozen=True)
class SummaryRow:
    label: str
    setting: str
    n_bidders: int
    horizon: int
    utility_I: EstimateWithCI
    utility_C: EstimateWithCI
    value_I: EstimateWithCI
    value_C: EstimateWithCI

    def cells(self):
        return (self.utility_I, self.utility_C, self.value_I, self.value_C)

    def to_dict(self):
        d = {"label": self.label, "setting": self.setting, "N": self.n_bidders, "T": self.horizon}
        for name, e in zip(("utility_I", "utility_C", "value_I", "value_C"), self.cells()):
            d[name] = e.to_dict()
        return d

    def format(self):
        cells = " ".join(f"{format(e, '.3f'):<16}" for e in self.cells())
        return f"{self.label:<12} {self.setting:<8} {self.n_bidders:>2} {self.horizon:>6}  {cells}".rstrip()


def summarize(series_by_scenario, label="", setting=""):
    """Summary row from ``{"I": [...], "C": [...]}`` replication series.

    Coalition totals are per-bidder final totals summed, divided by T and
    averaged over replications.
    """
    if set(series_by_scenario) < {"I", "C"}:
        raise ValueError("summarize needs both 'I' and 'C' scenarios")
    I, C = series_by_scenario["I"], series_by_scenario["C"]
    if len(I) != len(C):
        raise ValueError(f"scenario replication counts differ: {len(I)} vs {len(C)}")
    si, sc = summarize_scenario(I), summarize_scenario(C)
    if (I[0].horizon, I[0].n_bidders) != (C[0].horizon, C[0].n_bidders):
        raise ValueError("scenario shapes differ")
    return SummaryRow(label, setting, I[0].n_bidders, I[0].horizon, si.utility, sc.utility, si.value, sc.value)


def summary_from_stats(stats):
    I, C = stats["I"], stats["C"]
    return SummaryRow(stats.label, stats.setting, stats.n_bidders, stats.horizon, I.utility, C.utility, I.value, C.value)


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as e:
        raise SimulationError(f"cannot write {path}: {e}") from None


def _header_lines(meta):
    lines = [SCHEMA_LINE]
    if meta:
        lines.append("# config: " + json.dumps(meta, sort_keys=True))
    lines.append("# draw_order: " + DRAW_ORDER)
    return lines


def trace_rows(series):
    """Yield trace rows (as lists of strings) for full-record series."""
    for s in series:
        tr = s.trace
        if tr is None:
            raise ValueError(f"run {s.run_index} ({s.scenario}) was not recorded with record='full'")
        comp = competing_bids(tr["bids"], tr["outside"])
        cum = np.cumsum(tr["utilities"], axis=0)
        coal = (tr["values"] * tr["won"]).sum(axis=1)
        for t in range(s.horizon):
            for i in range(s.n_bidders):
                yield [
                    str(s.run_index),
                    str(t + 1),
                    s.scenario,
                    str(i + 1),
                    fmt(tr["values"][t, i]),
                    fmt(tr["bids"][t, i]),
                    fmt(tr["outside"][t]),
                    fmt(comp[t, i]),
                    str(int(tr["active"][t, i])),
                    str(int(tr["won"][t, i])),
                    fmt(tr["payments"][t, i]),
                    fmt(tr["utilities"][t, i]),
                    fmt(tr["lambdas"][t, i]),
                    fmt(cum[t, i]),
                    fmt(coal[t]),
                ]


def write_trace_csv(path, series, meta=None):
    with _open(path) as fh:
        for line in _header_lines(meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(series):
            w.writerow(row)
    return Path(path)


def _read_data(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SimulationError(f"cannot read {path}: {e}") from None
    lines = text.splitlines()
    if not lines or lines[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: missing schema line")
    meta = {}
    body = []
    for line in lines:
        if line.startswith("# config: "):
            meta = json.loads(line[len("# config: ") :])
        elif not line.startswith("#"):
            body.append(line)
    return meta, body


def parse_trace_csv(path):
    """``(meta, rows)`` with typed row dicts."""
    meta, body = _read_data(path)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"{path}: unexpected trace columns {reader.fieldnames}")
    rows = []
    for r in reader:
        rows.append({k: (r[k] if k == "scenario" else int(r[k]) if k in _INT_COLS else float(r[k])) for k in TRACE_COLUMNS})
    return meta, rows


def long_rows(series_by_scenario, metrics=LONG_METRICS):
    """Cross-replication mean and 95% band of each trajectory at each checkpoint."""
    for tag, series in series_by_scenario.items():
        if not series:
            continue
        cps = series[0].checkpoints
        data = {
            "cum_utility": np.array([s.cum_utility.sum(axis=1) for s in series]),
            "cum_value": np.array([s.cum_value.sum(axis=1) for s in series]),
            "mean_lambda": np.array([s.lam.mean(axis=1) for s in series]),
        }
        for metric in metrics:
            x = data[metric]
            m = x.mean(axis=0)
            if len(series) > 1:
                hw = 1.96 * x.std(axis=0, ddof=1) / math.sqrt(len(series))
            else:
                hw = np.full_like(m, np.nan)
            for k, t in enumerate(cps):
                yield [tag, metric, str(int(t)), fmt(m[k]), fmt(m[k] - hw[k]), fmt(m[k] + hw[k])]


def write_long_csv(path, series_by_scenario, meta=None, metrics=LONG_METRICS):
    with _open(path) as fh:
        for line in _header_lines(meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_COLUMNS)
        for row in long_rows(series_by_scenario, metrics):
            w.writerow(row)
    return Path(path)


def parse_long_csv(path):
    meta, body = _read_data(path)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    rows = [
        {"scenario": r["scenario"], "metric": r["metric"], "t": int(r["t"]), **{k: float(r[k]) for k in ("mean", "ci_lo", "ci_hi")}}
        for r in reader
    ]
    return meta, rows


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def summary_document(stats=None, meta=None, extra=None):
    doc = {"schema": SCHEMA_LINE[2:], "config": meta or {}, "draw_order": DRAW_ORDER}
    if stats is not None:
        doc["summary"] = summary_from_stats(stats).to_dict()
        doc["scenarios"] = {tag: s.to_dict() for tag, s in stats.scenarios.items()}
    if extra:
        doc.update(extra)
    return _jsonable(doc)


def write_summary_json(path, stats=None, meta=None, extra=None):
    doc = summary_document(stats, meta, extra)
    with _open(path) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return Path(path)

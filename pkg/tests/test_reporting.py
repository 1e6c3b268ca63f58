import json

import numpy as np
import pytest

from coordbid.coordination import HIGHEST_VALUE, INDEPENDENT
from coordbid.distributions import Uniform
from coordbid.reporting import (
    LONG_METRICS,
    SCHEMA_LINE,
    TRACE_COLUMNS,
    long_rows,
    parse_long_csv,
    parse_trace_csv,
    summarize,
    write_long_csv,
    write_summary_json,
    write_trace_csv,
)
from coordbid.simulator import MetricsSeries, ScenarioConfig, run_replications, run_scenarios

U = Uniform(0, 1)
CFG = ScenarioConfig(2, 50, (U,), Uniform(0, 0.9), replications=4, base_seed=5)
PAIRS = [("I", INDEPENDENT, None), ("C", HIGHEST_VALUE, None)]


def fake(tag, utility, value, horizon=10):
    n = len(utility)
    return MetricsSeries(
        run_index=1,
        scenario=tag,
        mechanism=tag,
        algorithm="md-ros",
        horizon=horizon,
        n_bidders=n,
        checkpoints=np.array([horizon]),
        cum_utility=np.array([utility], float),
        cum_value=np.array([value], float),
        lam=np.ones((1, n)),
        coalition_value=np.array([sum(value)], float),
        total_utility=np.array(utility, float),
        total_value=np.array(value, float),
        final_lambda=np.ones(n),
        clamp_events=0,
    )


def test_identical_replications_zero_width():
    row = summarize({"I": [fake("I", [1, 2], [3, 3])] * 3, "C": [fake("C", [2, 2], [4, 4])] * 3})
    assert row.utility_I.mean == pytest.approx(0.3) and row.utility_I.half_width_95 == 0
    assert row.value_C.mean == pytest.approx(0.8)


def test_hand_computed_summary():
    # coalition utilities per T: 0.3, 0.5, 0.7 -> mean 0.5, sd 0.2
    I = [fake("I", [u, 0], [1, 0]) for u in (3, 5, 7)]
    row = summarize({"I": I, "C": I})
    assert row.utility_I.mean == pytest.approx(0.5)
    assert row.utility_I.half_width_95 == pytest.approx(1.96 * 0.2 / np.sqrt(3))
    assert format(row.utility_I, ".3f") == "0.500 ± 0.226"


def test_summarize_needs_both_and_matching():
    with pytest.raises(ValueError):
        summarize({"I": [fake("I", [1], [1])] * 2})
    with pytest.raises(ValueError):
        summarize({"I": [fake("I", [1], [1])] * 2, "C": [fake("C", [1], [1])] * 3})


def test_permutation_invariance():
    I = [fake("I", [u, 1], [2, 1]) for u in (1, 4, 9, 2)]
    a = summarize({"I": I, "C": I})
    b = summarize({"I": I[::-1], "C": I[::-1]})
    assert a.utility_I.mean == pytest.approx(b.utility_I.mean, abs=1e-15)
    assert a.utility_I.half_width_95 == pytest.approx(b.utility_I.half_width_95, abs=1e-15)


def test_trace_round_trip(tmp_path):
    res = run_scenarios(CFG, PAIRS, run_indices=[1], record="full")
    series = [res["I"][0], res["C"][0]]
    path = write_trace_csv(tmp_path / "t.csv", series, {"seed": 5})
    lines = path.read_text().splitlines()
    assert lines[0] == SCHEMA_LINE and lines[1].startswith("# config: ")
    meta, rows = parse_trace_csv(path)
    assert meta == {"seed": 5}
    assert len(rows) == 2 * 50 * 2 and tuple(rows[0]) == TRACE_COLUMNS
    c_rows = [r for r in rows if r["scenario"] == "C"]
    util = np.array([r["utility"] for r in c_rows]).reshape(50, 2)
    assert np.allclose(util.sum(axis=0), series[1].total_utility, atol=1e-6)
    # per-bidder cumulative utility sums to the coalition total
    last = [r for r in c_rows if r["t"] == 50]
    assert sum(r["cum_utility"] for r in last) == pytest.approx(series[1].coalition_utility_total, abs=1e-6)
    assert max(r["bidder"] for r in rows) == 2 and min(r["bidder"] for r in rows) == 1


def test_empty_trace_has_header(tmp_path):
    path = write_trace_csv(tmp_path / "e.csv", [])
    meta, rows = parse_trace_csv(path)
    assert rows == [] and ",".join(TRACE_COLUMNS) in path.read_text()


def test_long_rows(tmp_path):
    res = run_scenarios(CFG, PAIRS)
    rows = list(long_rows(res))
    K = len(res["I"][0].checkpoints)
    assert len(rows) == 2 * len(LONG_METRICS) * K
    path = write_long_csv(tmp_path / "l.csv", res)
    _, parsed = parse_long_csv(path)
    assert len(parsed) == len(rows)
    final = [r for r in parsed if r["scenario"] == "C" and r["metric"] == "cum_utility" and r["t"] == 50][0]
    m = np.mean([s.coalition_utility_total for s in res["C"]])
    assert final["mean"] == pytest.approx(m, rel=1e-8)
    assert final["ci_lo"] <= final["mean"] <= final["ci_hi"]


def test_summary_json(tmp_path):
    stats = run_replications(CFG)
    path = write_summary_json(tmp_path / "s.json", stats, {"label": "x"})
    doc = json.loads(path.read_text())
    assert doc["config"] == {"label": "x"}
    assert doc["summary"]["utility_C"]["mean"] == pytest.approx(stats["C"].utility.mean)
    assert set(doc["scenarios"]) == {"I", "C"}

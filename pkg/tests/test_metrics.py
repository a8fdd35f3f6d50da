"""Histogram math, run accounting, report serialization, paired-run scores."""

import numpy as np
import pytest

from pagurus.errors import (
    EmptyHistogramError,
    EmptyWindowError,
    InvalidParamError,
    MismatchedRunsError,
    MissingBaselineError,
)
from pagurus.metrics import (
    Histogram,
    MetricsCollector,
    MetricsReport,
    elimination_rate,
    memory_saving,
    percentile,
    windowed_r_real,
)


def test_raw_percentile_uses_ceiling_rank():
    hist = Histogram()
    hist.add_many(float(v) for v in range(1, 101))
    assert hist.percentile(0.95) == 95.0
    assert hist.percentile(0.50) == 50.0
    assert hist.percentile(0.99) == 99.0


def test_raw_percentile_small_samples():
    hist = Histogram()
    hist.add_many([4.0, 1.0, 3.0, 2.0])
    assert hist.percentile(0.5) == 2.0
    assert hist.percentile(0.75) == 3.0
    assert hist.percentile(0.76) == 4.0
    assert hist.percentile(0.01) == 1.0


def test_bucketed_percentile_interpolates_within_bucket():
    hist = Histogram(raw=False)
    for _ in range(1000):
        hist.add(0.0123)
    lo = hist.percentile(0.5)
    edges = hist.edges
    idx = int(np.searchsorted(edges, 0.0123, side="right")) - 1
    assert edges[idx] <= lo <= edges[idx + 1]
    assert lo == pytest.approx(0.0123, rel=0.05)


def test_bucketed_percentile_across_buckets():
    hist = Histogram(raw=False)
    hist.add_many([0.001] * 50 + [1.0] * 50)
    assert hist.percentile(0.25) < 0.01
    assert hist.percentile(0.9) > 0.5


def test_histogram_edge_cases():
    hist = Histogram()
    with pytest.raises(EmptyHistogramError):
        hist.percentile(0.5)
    with pytest.raises(InvalidParamError):
        Histogram(low=1.0, high=0.5)
    hist.add(1e-9)   # below range clamps into first bucket
    hist.add(1e9)    # above range clamps into last bucket
    assert hist.total == 2
    with pytest.raises(InvalidParamError):
        hist.percentile(0.0)
    with pytest.raises(InvalidParamError):
        hist.percentile(1.0)


def test_exponential_tail_quantile_matches_theory():
    rng = np.random.default_rng(20230823)
    hist = Histogram()
    hist.add_many(rng.exponential(1.0, size=100_000))
    assert hist.percentile(0.95) == pytest.approx(np.log(20.0), rel=0.02)
    bucketed = Histogram(raw=False)
    bucketed.add_many(hist.raw)
    assert bucketed.percentile(0.95) == pytest.approx(np.log(20.0), rel=0.02)


def test_histogram_roundtrip_preserves_percentiles():
    hist = Histogram()
    rng = np.random.default_rng(5)
    hist.add_many(rng.lognormal(mean=-1.0, sigma=1.0, size=500))
    clone = Histogram.from_dict(hist.to_dict())
    for q in (0.5, 0.9, 0.99):
        assert percentile(clone, q) == percentile(hist, q)
    bucketed = Histogram(raw=False)
    bucketed.add_many(hist.raw)
    clone2 = Histogram.from_dict(bucketed.to_dict())
    assert clone2.raw is None
    assert clone2.percentile(0.5) == bucketed.percentile(0.5)


def _small_run(policy="pagurus", seed=7, paths=("cold", "warm", "warm", "rent")):
    coll = MetricsCollector(policy, seed, duration=100.0)
    latencies = {"cold": 2.5, "warm": 0.51, "rent": 0.52, "restore": 0.55}
    for i, path in enumerate(paths):
        coll.record_arrival("vid")
        if path == "cold":
            coll.container_launched(10.0 * i, "cold")
        coll.observe("vid", i, path, 10.0 * i, latencies[path],
                     latencies[path] <= 2.0)
    return coll


def test_collector_path_counts_and_qos():
    report = _small_run().finalize(audit_lines=[], isolation_violations=0)
    stats = report.per_action["vid"]
    assert stats["paths"] == {"warm": 2, "rent": 1, "restore": 0, "cold": 1}
    assert stats["arrivals"] == 4 and stats["completed"] == 4
    assert stats["r_real"] == pytest.approx(0.75)
    assert stats["path_sequence"] == ["cold", "warm", "warm", "rent"]
    assert report.path_counts("vid")["warm"] == 2
    assert report.r_real("vid") == pytest.approx(0.75)
    assert report.mean_latency("vid", "warm") == pytest.approx(0.51)


def test_memory_time_integral_by_hand():
    coll = MetricsCollector("openwhisk", 1, duration=100.0)
    coll.container_launched(10.0, "cold")     # 1 container from t=10
    coll.container_launched(30.0, "cold")     # 2 from t=30
    coll.container_recycled(50.0)             # back to 1 at t=50
    report = coll.finalize(audit_lines=[], isolation_violations=0)
    # 256*(20*1 + 20*2 + 50*1) = 256*110
    assert report.memory_mb_s == pytest.approx(256 * 110.0)
    assert report.peak_containers == 2
    assert report.peak_memory_mb == 512
    assert report.launches == {"cold": 2, "prewarm": 0}


def test_peak_rented_tracking():
    coll = MetricsCollector("pagurus", 1, duration=10.0)
    coll.rented_delta("md", +1)
    coll.rented_delta("md", +1)
    coll.rented_delta("vid", +1)
    coll.rented_delta("md", -1)
    coll.rented_delta("md", +1)
    report = coll.finalize(audit_lines=[], isolation_violations=0)
    assert report.peak_rented == {"md": 2, "vid": 1}
    assert report.peak_global_rented == 3


def test_report_json_roundtrip_and_equality():
    report = _small_run().finalize(audit_lines=["1.000000 promote ctrl 3 x"],
                                   isolation_violations=0)
    clone = MetricsReport.from_json(report.to_json())
    assert clone == report
    assert clone.trace_hash == report.trace_hash
    assert clone.audit_counts == {"promote": 1}
    other = _small_run(seed=8).finalize(audit_lines=[], isolation_violations=0)
    assert other != report


def test_trace_hash_sensitive_to_any_line():
    a = _small_run().finalize(audit_lines=[], isolation_violations=0)
    b = _small_run().finalize(audit_lines=["0.5 match ctrl 1 x"],
                              isolation_violations=0)
    c = _small_run(paths=("cold", "warm", "rent", "warm")).finalize(
        audit_lines=[], isolation_violations=0)
    assert a.trace_hash != b.trace_hash
    assert a.trace_hash != c.trace_hash
    again = _small_run().finalize(audit_lines=[], isolation_violations=0)
    assert a.trace_hash == again.trace_hash


def test_records_and_table_shapes():
    report = _small_run().finalize(audit_lines=[], isolation_violations=0)
    rows = report.records()
    assert any(r.startswith("vid,warm,2,") for r in rows)
    assert all(len(r.split(",")) == 7 for r in rows)
    table = report.table()
    assert "action" in table.splitlines()[0]
    assert "vid" in table


def _paired_reports(base_paths, new_paths, *, seed=3, action="vid"):
    def build(policy, paths):
        coll = MetricsCollector(policy, seed, duration=50.0)
        for i, p in enumerate(paths):
            coll.record_arrival(action)
            coll.observe(action, i, p, float(i), 1.0, True)
        return coll.finalize(audit_lines=[], isolation_violations=0)
    return build("pagurus", new_paths), build("openwhisk", base_paths)


def test_elimination_rate_pairs_by_query():
    new, base = _paired_reports(
        ["cold", "warm", "cold", "warm", "cold"],
        ["rent", "warm", "warm", "warm", "cold"])
    assert elimination_rate(new, base, "vid") == pytest.approx(2.0 / 3.0)
    assert elimination_rate(new, base) == {"vid": pytest.approx(2.0 / 3.0)}


def test_elimination_rate_full_and_vacuous():
    new, base = _paired_reports(["cold", "cold"], ["rent", "warm"])
    assert elimination_rate(new, base, "vid") == 1.0
    new2, base2 = _paired_reports(["warm", "warm"], ["warm", "warm"])
    assert elimination_rate(new2, base2, "vid") == 1.0  # nothing to eliminate


def test_elimination_rate_counts_restore_as_boot():
    new, base = _paired_reports(["restore", "restore"], ["rent", "restore"])
    assert elimination_rate(new, base, "vid") == pytest.approx(0.5)


def test_paired_run_validation():
    new, base = _paired_reports(["cold"], ["warm"])
    with pytest.raises(MissingBaselineError):
        elimination_rate(new, None)
    other = _paired_reports(["cold"], ["warm"], seed=4)[1]
    with pytest.raises(MismatchedRunsError):
        elimination_rate(new, other)
    short = _paired_reports(["cold", "cold"], ["warm", "warm"])[1]
    with pytest.raises(MismatchedRunsError):
        elimination_rate(new, short)


def test_windowed_r_real_filters_by_arrival():
    coll = MetricsCollector("pagurus", 1, duration=100.0)
    rows = [(5.0, True), (15.0, False), (25.0, False), (35.0, True)]
    for i, (arrival, ok) in enumerate(rows):
        coll.record_arrival("a")
        coll.observe("a", i, "warm", arrival, 1.0, ok)
    report = coll.finalize(audit_lines=[], isolation_violations=0)
    assert windowed_r_real(report, "a", (10.0, 30.0)) == pytest.approx(0.0)
    assert windowed_r_real(report, "a", (0.0, 100.0)) == pytest.approx(0.5)
    assert windowed_r_real(report, "a", (30.0, 40.0)) == pytest.approx(1.0)
    with pytest.raises(EmptyWindowError):
        windowed_r_real(report, "a", (90.0, 99.0))
    with pytest.raises(InvalidParamError):
        windowed_r_real(report, "a", (50.0, 50.0))


def test_memory_saving_uses_peak_footprint():
    coll_a = MetricsCollector("openwhisk", 2, duration=10.0)
    for t in range(5):
        coll_a.container_launched(float(t), "cold")
    base = coll_a.finalize(audit_lines=[], isolation_violations=0)
    coll_b = MetricsCollector("pagurus", 2, duration=10.0)
    for t in range(3):
        coll_b.container_launched(float(t), "cold")
    new = coll_b.finalize(audit_lines=[], isolation_violations=0)
    assert memory_saving(new, base) == (5 - 3) * 256
    assert memory_saving(base, base) == 0
    with pytest.raises(MissingBaselineError):
        memory_saving(new, None)

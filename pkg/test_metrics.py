"""메트릭: 타임라인/무응답 구간, 트래픽 행렬, 정규화, export"""
import json

import pytest

from fragsim.metrics import (
    MetricsError, OpLog, OpRecord, RunResult, RunSummary, SettleEvent, ThroughputTimeline, TrafficDotBuilder,
    TrafficMatrix, export, normalized_throughput, normalized_transferred, summaries_frame,
)
from fragsim.result_store import ResultStore


# ============================================================
# 타임라인
# ============================================================

def test_timeline_buckets_and_throughput():
    tl = ThroughputTimeline()
    for t in (10, 500, 999.9, 1000, 3500):
        tl.add(t)
    assert tl.counts == [3, 1, 0, 1]
    assert tl.total == 5
    assert tl.throughput() == pytest.approx(5 / 4)
    assert tl.throughput(0, 2000) == pytest.approx(2.0)
    tl.extend_to(6000)
    assert len(tl.counts) == 6
    assert list(tl.to_frame()["bucket_start_ms"])[:2] == [0, 1000]


def test_unresponsive_windows_need_threshold():
    tl = ThroughputTimeline()
    tl.add(500)
    tl.add(6500)     # 1..5 버킷 0 → 5초
    tl.add(9500)     # 7..8 버킷 0 → 2초
    assert tl.unresponsive_windows(5000) == [(1000.0, 5000.0)]
    assert tl.unresponsive_windows(2000) == [(1000.0, 5000.0), (7000.0, 2000.0)]
    assert tl.unresponsive_windows(5000, start_ms=2000) == []


def test_trailing_zero_run_counts():
    tl = ThroughputTimeline()
    tl.add(100)
    tl.extend_to(8000)
    assert tl.unresponsive_windows(5000) == [(1000.0, 7000.0)]


def test_bucket_must_be_positive():
    with pytest.raises(MetricsError):
        ThroughputTimeline(0)


# ============================================================
# 트래픽 행렬
# ============================================================

def test_traffic_matrix_accounting():
    tm = TrafficMatrix()
    tm.record_hop("x", "a", "b", 100)
    tm.record_hop("y", "b", "c", 100)
    tm.record_delivery("c", "write.sync", 100)
    tm.record_hop("y", "b", "c", 50, delivered=False)
    assert tm.total_bytes == 200
    assert tm.node_received() == {"b": 100, "c": 100}
    assert tm.node_received(["a", "c"]) == {"a": 0, "c": 100}
    assert tm.conserved()
    assert tm.to_dict()["links"]["y"] == {"sent": 150, "delivered": 100, "lost": 50}
    assert tm.tag_share("write.sync", ["c", "d"]) == {"c": 1.0, "d": 0.0}
    assert tm.coefficient_of_variation(["b", "c"]) == 0.0


# ============================================================
# 정규화
# ============================================================

def _summary(lsf, tput, mb=1.0, **kw):
    return RunSummary("lsf_sweep", "cassandra", "A", lsf, label=f"lsf-{lsf:g}",
                      throughput_ops_s=tput, total_mb_transferred=mb, **kw)


def test_normalized_ratios_against_baseline():
    runs = [_summary(0.2, 500.0, 4.0), _summary(1.0, 100.0, 2.0), _summary(0.6, 200.0, 2.0)]
    ratios = normalized_throughput(runs)
    assert ratios[1.0] == 1.0
    assert ratios[0.2] == pytest.approx(5.0)
    assert list(ratios) == [0.2, 0.6, 1.0]
    assert normalized_transferred([RunResult(s) for s in runs])[0.2] == pytest.approx(2.0)


def test_normalization_needs_baseline():
    with pytest.raises(MetricsError):
        normalized_throughput([_summary(0.2, 10.0)])
    with pytest.raises(MetricsError):
        normalized_throughput({1.0: _summary(1.0, 0.0)})


# ============================================================
# 요약 / export
# ============================================================

def test_summary_round_trip_and_line():
    s = _summary(0.4, 12.5, settle_events=[SettleEvent("pune", "remove", 1000.0, 50.0, 400.0, 2048)],
                 unresponsive_windows=[(1000.0, 6000.0)], total_ops=10, completed_ops=9, failed_ops=1)
    doc = json.loads(json.dumps(s.to_dict()))
    assert RunSummary.from_dict(doc) == s
    line = s.one_line()
    assert "lsf=0.4 [lsf-0.4]" in line and "9/10 ok" in line
    with pytest.raises(MetricsError):
        RunSummary("x", "redis", "A", 1.0, total_ops=1, failed_ops=2)


def test_export_writes_files(tmp_path):
    tl = ThroughputTimeline()
    tl.add(100)
    tm = TrafficMatrix()
    tm.record_hop("x", "client", "pune", 2048)
    log = OpLog()
    log.append(OpRecord(0, "read", "user1", 0.0, 12.0, "ok", 256))
    s = _summary(1.0, 1.0, received_bytes_by_node={"pune": 2048})
    written = export([RunResult(s, tl, tm, log)], outdir=str(tmp_path))
    names = sorted(p.name for p in written)
    assert names == ["oplog.csv", "summary.json", "timeline.csv", "traffic.dot"]
    base = tmp_path / "lsf_sweep" / "cassandra" / "A" / "lsf-1"
    assert json.loads((base / "summary.json").read_text())["throughput_ops_s"] == 1.0
    assert "\"pune\"" in (base / "traffic.dot").read_text()
    assert ResultStore(tmp_path).load_summary(["lsf_sweep", "cassandra", "A", "lsf-1"])["lsf"] == 1.0

    with pytest.raises(MetricsError):
        export([], formats=("xml",), outdir=str(tmp_path))


def test_dot_builder_renders_edges(tmp_path):
    tm = TrafficMatrix()
    tm.record_hop("x", "a", "b", 1024)
    tm.record_hop("y", "b", "a", 512)
    dot = TrafficDotBuilder().build(tm, "demo")
    assert dot.count("->") == 2
    assert "\"a\" -> \"b\"" in dot and "1.0" in dot
    # 템플릿이 없으면 인라인 템플릿
    inline = TrafficDotBuilder(str(tmp_path)).build(tm)
    assert inline.startswith("digraph traffic {")


def test_summaries_frame():
    frame = summaries_frame([_summary(0.2, 5.0), _summary(1.0, 1.0)])
    assert list(frame["lsf"]) == [0.2, 1.0]
    assert "unresponsive_windows" in frame.columns

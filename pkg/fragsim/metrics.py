"""
메트릭 (Metrics)
================
처리량 타임라인, 링크별 트래픽 행렬, op 로그, run 요약, 정규화 지표, 결과 export.

- ThroughputTimeline  → 1초 버킷 완료 op 수 + 무응답 구간(0 op 가 5초 이상 연속)
- TrafficMatrix       → 홉(링크 통과) 단위 바이트: 링크별 sent/delivered/lost, 노드쌍 행렬, 태그별 수신량
- OpLog               → op 단위 기록 (CSV: op_id,kind,key,issued_ms,completed_ms,outcome,bytes_moved)
- RunSummary          → summary.json 한 건 (타임스탬프 없음 → 같은 시드면 바이트 동일)
- normalized_*()      → LSF=1.0(5X) 대비 비율
- export()            → <outdir>/<scenario>/<engine>/<workload>/[label]/{timeline.csv, summary.json, traffic.dot, oplog.csv}

사용법:
    from fragsim.metrics import normalized_throughput, export
    ratios = normalized_throughput(summaries_by_lsf)
    export(results, formats=("csv", "json", "dot"), outdir="results")
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader

from fragsim.result_store import ResultStore, ResultStoreError
from fragsim.utils.logger import logger

BASELINE_LSF = 1.0
OPLOG_COLUMNS = ["op_id", "kind", "key", "issued_ms", "completed_ms", "outcome", "bytes_moved"]


class MetricsError(ValueError):
    pass


# ============================================================
# 처리량 타임라인
# ============================================================

class ThroughputTimeline:
    def __init__(self, bucket_ms: int = 1000):
        if bucket_ms <= 0:
            raise MetricsError("bucket_ms must be > 0")
        self.bucket_ms = bucket_ms
        self.counts: list[int] = []

    def _bucket(self, t_ms: float) -> int:
        return int(t_ms // self.bucket_ms)

    def extend_to(self, t_ms: float) -> None:
        """Pad with zero buckets so the timeline covers [0, t_ms)."""
        n = -(-int(t_ms) // self.bucket_ms)
        if n > len(self.counts):
            self.counts.extend([0] * (n - len(self.counts)))

    def add(self, t_ms: float, n: int = 1) -> None:
        idx = self._bucket(t_ms)
        if idx >= len(self.counts):
            self.counts.extend([0] * (idx + 1 - len(self.counts)))
        self.counts[idx] += n

    @property
    def total(self) -> int:
        return sum(self.counts)

    def throughput(self, start_ms: float = 0.0, end_ms: Optional[float] = None) -> float:
        """Mean ops/sec over whole buckets in [start_ms, end_ms)."""
        lo = self._bucket(start_ms)
        hi = len(self.counts) if end_ms is None else min(len(self.counts), -(-int(end_ms) // self.bucket_ms))
        if hi <= lo:
            return 0.0
        return sum(self.counts[lo:hi]) / ((hi - lo) * self.bucket_ms / 1000.0)

    def unresponsive_windows(self, threshold_ms: int = 5000, start_ms: float = 0.0,
                             end_ms: Optional[float] = None) -> list[tuple[float, float]]:
        """Maximal runs of zero buckets at least `threshold_ms` long inside the active span."""
        lo = self._bucket(start_ms)
        hi = len(self.counts) if end_ms is None else min(len(self.counts), self._bucket(end_ms))
        windows = []
        run_start = None
        for i in range(lo, hi + 1):
            zero = i < hi and self.counts[i] == 0
            if zero and run_start is None:
                run_start = i
            elif not zero and run_start is not None:
                length = (i - run_start) * self.bucket_ms
                if length >= threshold_ms:
                    windows.append((float(run_start * self.bucket_ms), float(length)))
                run_start = None
        return windows

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bucket_start_ms": [i * self.bucket_ms for i in range(len(self.counts))],
            "ops": self.counts,
        })


# ============================================================
# 트래픽 행렬
# ============================================================

class TrafficMatrix:
    """Per-traversal byte accounting (a multi-hop message counts on every link it crosses)."""

    def __init__(self):
        self.link_sent: dict[str, int] = defaultdict(int)
        self.link_delivered: dict[str, int] = defaultdict(int)
        self.link_lost: dict[str, int] = defaultdict(int)
        self.pair_bytes: dict[tuple[str, str], int] = defaultdict(int)
        self.tag_bytes: dict[tuple[str, str], int] = defaultdict(int)

    def record_hop(self, link_id: str, frm: str, to: str, size: int, delivered: bool = True) -> None:
        self.link_sent[link_id] += size
        if delivered:
            self.link_delivered[link_id] += size
            self.pair_bytes[(frm, to)] += size
        else:
            self.link_lost[link_id] += size

    def record_delivery(self, dst: str, tag: str, size: int) -> None:
        self.tag_bytes[(dst, tag or "untagged")] += size

    @property
    def total_bytes(self) -> int:
        return sum(self.pair_bytes.values())

    def node_received(self, nodes: Optional[Iterable[str]] = None) -> dict[str, int]:
        received: dict[str, int] = defaultdict(int)
        for (_, dst), size in self.pair_bytes.items():
            received[dst] += size
        if nodes is None:
            return dict(sorted(received.items()))
        return {n: received.get(n, 0) for n in nodes}

    def coefficient_of_variation(self, nodes: Iterable[str]) -> float:
        values = np.array(list(self.node_received(nodes).values()), dtype=float)
        if values.size == 0 or values.mean() == 0:
            return 0.0
        return float(values.std() / values.mean())

    def tag_share(self, tag: str, nodes: Optional[Iterable[str]] = None) -> dict[str, float]:
        """Share of the `tag` bytes received by each node (end-to-end deliveries)."""
        per_node = {n: b for (n, t), b in self.tag_bytes.items() if t == tag}
        if nodes is not None:
            per_node = {n: per_node.get(n, 0) for n in nodes}
        total = sum(per_node.values())
        if total == 0:
            return {n: 0.0 for n in per_node}
        return {n: b / total for n, b in sorted(per_node.items())}

    def conserved(self) -> bool:
        return all(self.link_sent[l] == self.link_delivered.get(l, 0) + self.link_lost.get(l, 0)
                   for l in self.link_sent)

    def to_dict(self) -> dict:
        return {
            "links": {l: {"sent": self.link_sent[l], "delivered": self.link_delivered.get(l, 0),
                          "lost": self.link_lost.get(l, 0)} for l in sorted(self.link_sent)},
            "pairs": [{"src": s, "dst": d, "bytes": b} for (s, d), b in sorted(self.pair_bytes.items())],
            "tags": [{"node": n, "tag": t, "bytes": b} for (n, t), b in sorted(self.tag_bytes.items())],
        }


# ============================================================
# op 로그
# ============================================================

@dataclass
class OpRecord:
    op_id: int
    kind: str
    key: str
    issued_ms: float
    completed_ms: Optional[float] = None
    outcome: str = "pending"
    bytes_moved: int = 0


class OpLog:
    def __init__(self):
        self.records: list[OpRecord] = []

    def append(self, record: OpRecord) -> None:
        self.records.append(record)

    def count(self, outcome: Optional[str] = None) -> int:
        if outcome is None:
            return len(self.records)
        return sum(1 for r in self.records if r.outcome == outcome)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=OPLOG_COLUMNS)


# ============================================================
# run 요약
# ============================================================

@dataclass
class SettleEvent:
    node: str
    kind: str               # "remove" | "add"
    t_ms: float
    accept_ms: float
    duration_ms: float
    bulk_bytes: int = 0


@dataclass
class RunSummary:
    scenario: str
    engine: str
    workload: str
    lsf: float
    label: str = ""
    seed: int = 0
    total_ops: int = 0
    completed_ops: int = 0
    failed_ops: int = 0
    timed_out_ops: int = 0
    wall_virtual_ms: float = 0.0
    throughput_ops_s: float = 0.0
    total_mb_transferred: float = 0.0
    batch_throughput: list = field(default_factory=list)
    received_bytes_by_node: dict = field(default_factory=dict)
    received_cv: float = 0.0
    write_path_share: dict = field(default_factory=dict)
    settle_events: list = field(default_factory=list)
    unresponsive_windows: list = field(default_factory=list)
    latency_trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    trace_hash: str = ""

    def __post_init__(self):
        if self.failed_ops > self.total_ops:
            raise MetricsError("failed_ops cannot exceed total_ops")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["unresponsive_windows"] = [list(w) for w in self.unresponsive_windows]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunSummary":
        doc = dict(doc)
        doc["settle_events"] = [e if isinstance(e, SettleEvent) else SettleEvent(**e)
                                for e in doc.get("settle_events", [])]
        doc["unresponsive_windows"] = [tuple(w) for w in doc.get("unresponsive_windows", [])]
        return cls(**doc)

    def one_line(self) -> str:
        tag = f" [{self.label}]" if self.label else ""
        return (f"{self.scenario}/{self.engine}/{self.workload} lsf={self.lsf:g}{tag}: "
                f"{self.throughput_ops_s:.1f} ops/s, {self.completed_ops}/{self.total_ops} ok, "
                f"{self.failed_ops} failed, {self.total_mb_transferred:.2f} MB, "
                f"{len(self.unresponsive_windows)} unresponsive windows")


@dataclass
class RunResult:
    """Everything one simulation instance produced."""
    summary: RunSummary
    timeline: Optional[ThroughputTimeline] = None
    traffic: Optional[TrafficMatrix] = None
    oplog: Optional[OpLog] = None


# ============================================================
# 정규화 지표
# ============================================================

def _by_lsf(results) -> dict[float, RunSummary]:
    if isinstance(results, Mapping):
        items = ((lsf, r.summary if isinstance(r, RunResult) else r) for lsf, r in results.items())
    else:
        summaries = (r.summary if isinstance(r, RunResult) else r for r in results)
        items = ((s.lsf, s) for s in summaries)
    return {round(float(lsf), 6): s for lsf, s in items}


def _normalized(results, metric: str) -> dict[float, float]:
    by_lsf = _by_lsf(results)
    base = by_lsf.get(BASELINE_LSF)
    if base is None:
        raise MetricsError("baseline run (LSF=1.0) missing")
    base_value = getattr(base, metric)
    if not base_value:
        raise MetricsError(f"baseline {metric} is zero")
    return {lsf: getattr(s, metric) / base_value for lsf, s in sorted(by_lsf.items())}


def normalized_throughput(results) -> dict[float, float]:
    """Throughput at each LSF divided by throughput at LSF=1.0 (5X)."""
    return _normalized(results, "throughput_ops_s")


def normalized_transferred(results) -> dict[float, float]:
    """Transferred MB at each LSF divided by transferred MB at LSF=1.0 (5X)."""
    return _normalized(results, "total_mb_transferred")


# ============================================================
# DOT 렌더링 (Jinja2)
# ============================================================

class TrafficDotBuilder:
    """트래픽 행렬 → Graphviz DOT (Jinja2 템플릿)"""

    INLINE_TEMPLATE = (
        "digraph traffic {\n"
        "{% for node in nodes %}  \"{{ node.id }}\";\n{% endfor %}"
        "{% for edge in edges %}  \"{{ edge.src }}\" -> \"{{ edge.dst }}\" "
        "[label=\"{{ '%.1f'|format(edge.kb) }}\", penwidth={{ '%.2f'|format(edge.penwidth) }}];\n"
        "{% endfor %}}\n"
    )

    def __init__(self, template_dir: str = ""):
        if not template_dir:
            template_dir = str(Path(__file__).parent.parent / "templates")
        self.template_dir = Path(template_dir)
        self.jinja_env = Environment(loader=FileSystemLoader(str(self.template_dir)), autoescape=False)

    def build(self, traffic: TrafficMatrix, title: str = "traffic",
              nodes: Optional[Iterable[str]] = None, template_name: str = "traffic.dot.j2") -> str:
        received = traffic.node_received(nodes)
        node_ids = list(received) if nodes is not None else sorted(
            {n for pair in traffic.pair_bytes for n in pair})
        max_kb = max((b / 1024 for b in traffic.pair_bytes.values()), default=0.0) or 1.0
        edges = [
            {"src": s, "dst": d, "kb": b / 1024, "penwidth": 1.0 + 7.0 * (b / 1024) / max_kb}
            for (s, d), b in sorted(traffic.pair_bytes.items())
            if s in node_ids and d in node_ids
        ]
        context = {
            "title": title,
            "nodes": [{"id": n, "received_kb": received.get(n, 0) / 1024} for n in node_ids],
            "edges": edges,
        }
        if (self.template_dir / template_name).exists():
            template = self.jinja_env.get_template(template_name)
        else:
            logger.warning(f"DOT 템플릿 없음, 인라인 템플릿 사용: {self.template_dir / template_name}")
            template = self.jinja_env.from_string(self.INLINE_TEMPLATE)
        return template.render(**context)


# ============================================================
# export
# ============================================================

EXPORT_FORMATS = ("csv", "json", "dot")


def result_dir_parts(summary: RunSummary) -> list[str]:
    parts = [summary.scenario, summary.engine, summary.workload]
    if summary.label:
        parts.append(summary.label)
    return parts


def export(results: Iterable[RunResult], formats: Iterable[str] = EXPORT_FORMATS,
           outdir: str = "results", store: Optional[ResultStore] = None) -> list[Path]:
    """Write timeline/oplog CSV, summary JSON and traffic DOT for every result."""
    formats = set(formats)
    unknown = formats - set(EXPORT_FORMATS)
    if unknown:
        raise MetricsError(f"unknown export formats: {sorted(unknown)}")
    try:
        store = store or ResultStore(Path(outdir))
    except OSError as e:
        raise ResultStoreError(f"output path not writable: {outdir} ({e})") from e

    dot = TrafficDotBuilder()
    written: list[Path] = []
    for result in results:
        s = result.summary
        parts = result_dir_parts(s)
        if "json" in formats:
            written.append(store.write_json(parts, "summary.json", s.to_dict()))
        if "csv" in formats:
            if result.timeline is not None:
                written.append(store.write_frame(parts, "timeline.csv", result.timeline.to_frame()))
            if result.oplog is not None:
                written.append(store.write_frame(parts, "oplog.csv", result.oplog.to_frame()))
        if "dot" in formats and result.traffic is not None:
            nodes = list(s.received_bytes_by_node) or None
            title = f"{s.engine} workload {s.workload} lsf={s.lsf:g}"
            written.append(store.write_text(parts, "traffic.dot", dot.build(result.traffic, title, nodes)))
    logger.info(f"export 완료: {len(written)}개 파일 → {store.base_dir}")
    return written


def summaries_frame(summaries: Iterable[RunSummary]) -> pd.DataFrame:
    """Flat table of summaries (one row per run) for summaries.csv."""
    rows = []
    for s in summaries:
        rows.append({
            "scenario": s.scenario, "engine": s.engine, "workload": s.workload, "lsf": s.lsf,
            "label": s.label, "total_ops": s.total_ops, "completed_ops": s.completed_ops,
            "failed_ops": s.failed_ops, "timed_out_ops": s.timed_out_ops,
            "wall_virtual_ms": s.wall_virtual_ms, "throughput_ops_s": s.throughput_ops_s,
            "total_mb_transferred": s.total_mb_transferred,
            "unresponsive_windows": len(s.unresponsive_windows),
        })
    return pd.DataFrame(rows)

"""
DB 클러스터 모델 공통 타입
==========================
- Call / OperationPlan  → 한 op 의 요청/응답 메시지 흐름 (단계별 병렬 호출 트리)
- Transfer / ChurnPlan  → 노드 추가/제거 시 벌크 전송과 수락/완료(settle) 시간
- Placement             → 레코드 배치 결과 (노드별 레코드 수)
- DbClusterModel        → 엔진별 모델의 추상 기반 클래스
"""

from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

if TYPE_CHECKING:
    from fragsim.router import OverlayNetwork
    from fragsim.workload import Operation


# ============================================================
# 에러
# ============================================================

class DbModelError(RuntimeError):
    pass


class InsufficientNodesError(DbModelError):
    pass


class MembershipError(DbModelError):
    pass


class UnsupportedOperationError(DbModelError):
    pass


class OwnersUnreachableError(DbModelError):
    pass


# ============================================================
# 페이로드 크기
# ============================================================

@dataclass(frozen=True)
class PayloadSizes:
    record_bytes: int = 1000
    envelope_bytes: int = 128
    ack_bytes: int = 64
    gossip_bytes: int = 128
    gossip_interval_ms: float = 1000.0

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "PayloadSizes":
        doc = doc or {}
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


def key_name(index: int) -> str:
    return f"user{index}"


def md5_int(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:8], "big")


# ============================================================
# op 메시지 흐름
# ============================================================

@dataclass
class Call:
    """
    Request src→dst, service at dst, then sync children (waiting for `quorum`
    acks, default all) while async children are fired and forgotten, then the
    response dst→src. response_bytes=None makes the call one-way.
    """
    src: str
    dst: str
    request_bytes: int
    response_bytes: Optional[int]
    service_ms: float = 0.0
    children: list = field(default_factory=list)
    quorum: Optional[int] = None
    async_children: list = field(default_factory=list)
    tag: str = ""

    @property
    def required(self) -> int:
        return len(self.children) if self.quorum is None else min(self.quorum, len(self.children))

    def message_count(self) -> int:
        n = 1 + (self.response_bytes is not None)
        return n + sum(c.message_count() for c in self.children) + sum(c.message_count() for c in self.async_children)

    def estimate_ms(self, net: "OverlayNetwork") -> float:
        t = _one_way_ms(net, self.src, self.dst, self.request_bytes) + self.service_ms
        if self.children:
            child_times = sorted(c.estimate_ms(net) for c in self.children)
            t += child_times[max(self.required, 1) - 1]
        if self.response_bytes is not None:
            t += _one_way_ms(net, self.dst, self.src, self.response_bytes)
        return t


def _one_way_ms(net: "OverlayNetwork", src: str, dst: str, size: int) -> float:
    if src == dst:
        return 0.0
    return net.latency_ms(src, dst) + size * 8 / net.bandwidth_mbps(src, dst) / 1000.0


@dataclass
class OperationPlan:
    """Stages run in sequence; calls within a stage run in parallel and must all succeed."""
    kind: str
    stages: list

    def estimate_ms(self, net: "OverlayNetwork") -> float:
        return sum(max(c.estimate_ms(net) for c in stage) for stage in self.stages if stage)

    def message_count(self) -> int:
        return sum(c.message_count() for stage in self.stages for c in stage)

    @property
    def targets(self) -> list[str]:
        return [c.dst for stage in self.stages for c in stage]


# ============================================================
# 멤버십 변경
# ============================================================

@dataclass
class Transfer:
    src: str
    dst: str
    records: int
    bytes: int


@dataclass
class ChurnPlan:
    node: str
    kind: str                   # "remove" | "add"
    accept_ms: float
    settle_ms: float
    transfers: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def bulk_bytes(self) -> int:
        return sum(t.bytes for t in self.transfers)

    def bytes_out_of(self, node: str) -> int:
        return sum(t.bytes for t in self.transfers if t.src == node)

    def bytes_into(self, node: str) -> int:
        return sum(t.bytes for t in self.transfers if t.dst == node)


def stream_time_ms(net: "OverlayNetwork", src: str, dst: str, nbytes: int, chunk_bytes: int) -> float:
    """Windowed streaming: one chunk per round trip plus its serialization time."""
    if nbytes <= 0 or src == dst:
        return 0.0
    chunks = math.ceil(nbytes / chunk_bytes)
    chunk_tx_ms = chunk_bytes * 8 / net.bandwidth_mbps(src, dst) / 1000.0
    return chunks * (net.rtt_ms(src, dst) + chunk_tx_ms)


@dataclass
class Placement:
    record_count: int
    records_by_node: dict
    detail: dict = field(default_factory=dict)


# ============================================================
# 기반 클래스
# ============================================================

class DbClusterModel(ABC):
    engine = ""

    def __init__(self, members: Iterable[str], payload: Optional[PayloadSizes] = None,
                 profile: Optional[dict] = None, protected: Iterable[str] = ()):
        self.members: list[str] = sorted(members)
        if not self.members:
            raise InsufficientNodesError(f"{self.engine}: cluster needs at least one data node")
        self.payload = payload or PayloadSizes()
        self.profile = dict(profile or {})
        self.protected = set(protected)
        self.record_count = 0
        self.net: Optional["OverlayNetwork"] = None

    def bind(self, net: "OverlayNetwork") -> "DbClusterModel":
        self.net = net
        return self

    def _require_net(self) -> "OverlayNetwork":
        if self.net is None:
            raise DbModelError(f"{self.engine}: model is not bound to a network")
        return self.net

    # ── 공통 헬퍼 ──

    @property
    def env(self) -> int:
        return self.payload.envelope_bytes

    @property
    def rec(self) -> int:
        return self.payload.record_bytes

    @property
    def ack(self) -> int:
        return self.payload.ack_bytes

    def scan_keys(self, op: "Operation") -> list[int]:
        end = min(op.key_index + max(op.scan_len, 1), max(self.record_count, op.key_index + 1))
        return list(range(op.key_index, end))

    def register_insert(self, key_index: int) -> None:
        self.record_count = max(self.record_count, key_index + 1)

    def nearest(self, src: str, candidates: Iterable[str]) -> Optional[str]:
        """Closest reachable candidate by current route latency (ties by id)."""
        net = self._require_net()
        best = None
        for node in sorted(candidates):
            if not net.reachable(src, node):
                continue
            lat = net.latency_ms(src, node)
            if best is None or lat < best[0]:
                best = (lat, node)
        return None if best is None else best[1]

    def protection_reason(self, node: str) -> Optional[str]:
        if node in self.protected:
            return f"{node} is a protected node"
        return None

    def check_removable(self, node: str) -> None:
        if node not in self.members:
            raise MembershipError(f"{self.engine}: {node} is not a member")
        reason = self.protection_reason(node)
        if reason:
            raise MembershipError(f"{self.engine}: cannot remove {node}: {reason}")

    def check_addable(self, node: str) -> None:
        if node in self.members:
            raise MembershipError(f"{self.engine}: {node} is already a member")

    def background_pairs(self) -> list[tuple[str, str]]:
        return [(a, b) for a in self.members for b in self.members if a != b]

    # ── 엔진별 ──

    @abstractmethod
    def place_records(self, n_records: int, rng=None) -> Placement:
        ...

    @abstractmethod
    def plan_operation(self, op: "Operation", client: str, t_ms: float) -> OperationPlan:
        ...

    @abstractmethod
    def remove_node(self, node: str, t_ms: float) -> ChurnPlan:
        ...

    @abstractmethod
    def add_node(self, node: str, t_ms: float) -> ChurnPlan:
        ...

    def describe(self) -> dict:
        return {"engine": self.engine, "members": list(self.members), "record_count": self.record_count}

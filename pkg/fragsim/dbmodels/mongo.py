"""
MongoDB 레플리카셋 모델
=======================
- 모든 데이터 노드가 전체 데이터셋을 보유 (full replication)
- 쓰기: client → primary 동기, primary → 각 secondary 로 oplog 비동기 전파
- 읽기: read_preference=nearest_secondary 면 현재 경로 지연 기준 가장 가까운 도달 가능한 secondary
  (non_voting 은 읽기 가능, hidden 은 불가). 없으면 primary 로 폴백
- 제거: 멤버십 변경만 (벌크 전송 0), 추가: 가장 가까운 멤버로부터 initial sync (전체 데이터셋)
- primary 선출(election)은 모델링하지 않는다
"""

from __future__ import annotations

from typing import Iterable, Optional

from fragsim.dbmodels.base import (
    Call, ChurnPlan, DbClusterModel, MembershipError, OperationPlan, OwnersUnreachableError,
    PayloadSizes, Placement, Transfer, stream_time_ms,
)
from fragsim.utils.logger import logger

DEFAULT_PROFILE = {
    "primary_ms": 2.0,
    "secondary_ms": 2.0,
    "stream_chunk_bytes": 65536,
}

READ_PREFERENCES = ("primary", "nearest_secondary")


class MongoModel(DbClusterModel):
    engine = "mongodb"

    def __init__(self, members: Iterable[str], primary: str, non_voting: Iterable[str] = (),
                 hidden: Iterable[str] = (), read_preference: str = "nearest_secondary",
                 payload: Optional[PayloadSizes] = None, profile: Optional[dict] = None,
                 protected: Iterable[str] = ()):
        super().__init__(members, payload, {**DEFAULT_PROFILE, **(profile or {})}, protected)
        if primary not in self.members:
            raise MembershipError(f"mongodb: primary {primary} is not a member")
        if read_preference not in READ_PREFERENCES:
            raise MembershipError(f"mongodb: unknown read_preference {read_preference}")
        self.primary = primary
        self.non_voting = set(non_voting) & set(self.members)
        self.hidden = set(hidden) & set(self.members)
        self.read_preference = read_preference

    @property
    def secondaries(self) -> list[str]:
        return [m for m in self.members if m != self.primary]

    @property
    def readable_secondaries(self) -> list[str]:
        return [m for m in self.secondaries if m not in self.hidden]

    def place_records(self, n_records: int, rng=None) -> Placement:
        self.record_count = n_records
        return Placement(n_records, {m: n_records for m in self.members})

    def oplog_lag_ms(self, node: str) -> float:
        """Asynchronous replication delay of a secondary: one-way route latency from the primary."""
        return self._require_net().latency_ms(self.primary, node)

    # ── op 계획 ──

    def read_target(self, client: str) -> str:
        net = self._require_net()
        if self.read_preference == "nearest_secondary":
            target = self.nearest(client, self.readable_secondaries)
            if target is not None:
                return target
        if net.reachable(client, self.primary):
            return self.primary
        raise OwnersUnreachableError(f"mongodb: no readable member reachable from {client}")

    def _write(self, client: str) -> Call:
        p = self.profile
        oplog = [Call(self.primary, s, self.env + self.rec, None, p["secondary_ms"], tag="write.async")
                 for s in self.secondaries]
        return Call(client, self.primary, self.env + self.rec, self.ack, p["primary_ms"],
                    async_children=oplog, tag="write.sync")

    def _read(self, client: str, n_records: int = 1, tag: str = "read.sync") -> Call:
        target = self.read_target(client)
        service = self.profile["primary_ms"] if target == self.primary else self.profile["secondary_ms"]
        return Call(client, target, self.env, self.env + n_records * self.rec, service, tag=tag)

    def plan_operation(self, op, client: str, t_ms: float) -> OperationPlan:
        if op.kind == "insert":
            self.register_insert(op.key_index)
        if op.kind == "read":
            return OperationPlan(op.kind, [[self._read(client)]])
        if op.kind in ("update", "insert"):
            return OperationPlan(op.kind, [[self._write(client)]])
        if op.kind == "rmw":
            return OperationPlan(op.kind, [[self._read(client)], [self._write(client)]])
        return OperationPlan(op.kind, [[self._read(client, len(self.scan_keys(op)), "scan.sync")]])

    # ── 멤버십 ──

    def protection_reason(self, node: str) -> Optional[str]:
        if node == self.primary:
            return "primary is never removed"
        if node in self.non_voting:
            return "non-voting member is never removed"
        return super().protection_reason(node)

    def _confirmation_ms(self) -> float:
        net = self._require_net()
        return max((net.rtt_ms(self.primary, m) for m in self.members if m != self.primary), default=0.0)

    def remove_node(self, node: str, t_ms: float) -> ChurnPlan:
        self.check_removable(node)
        net = self._require_net()
        accept = net.rtt_ms(node, self.primary)
        self.members.remove(node)
        self.hidden.discard(node)
        settle = accept + self._confirmation_ms()
        logger.info(f"mongodb rs.remove {node}: settle {settle:.0f}ms, no data movement")
        return ChurnPlan(node, "remove", accept, settle, [])

    def add_node(self, node: str, t_ms: float, hidden: bool = False) -> ChurnPlan:
        self.check_addable(node)
        net = self._require_net()
        accept = net.rtt_ms(node, self.primary)
        source = self.nearest(node, self.members) or self.primary
        nbytes = self.record_count * self.rec
        transfers = [Transfer(source, node, self.record_count, nbytes)] if nbytes else []
        sync_ms = stream_time_ms(net, source, node, nbytes, int(self.profile["stream_chunk_bytes"]))
        self.members.append(node)
        self.members.sort()
        if hidden:
            self.hidden.add(node)
        settle = accept + sync_ms + self._confirmation_ms()
        logger.info(f"mongodb rs.add {node}: initial sync {nbytes} B from {source}, settle {settle:.0f}ms")
        return ChurnPlan(node, "add", accept, settle, transfers, {"sync_source": source})

    def describe(self) -> dict:
        return {**super().describe(), "primary": self.primary, "non_voting": sorted(self.non_voting),
                "hidden": sorted(self.hidden), "read_preference": self.read_preference}

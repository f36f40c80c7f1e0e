"""
MySQL Cluster (NDB) 모델
========================
- 데이터 노드를 정렬 순서대로 replicas_per_shard 개씩 묶어 node group 을 만든다
  (6 노드, 2 복제 → 3 그룹). 그룹 안의 모든 노드가 해당 샤드를 보유
- 파티션 = md5(key) % 그룹 수
- 읽기: client → sql_node → 그룹 안에서 가장 가까운 도달 가능한 복제본
- 쓰기: client → sql_node → 도달 가능한 그룹 복제본 전부 (모두 ack)
- node group 추가/제거는 지원하지 않는다 (UnsupportedOperationError)
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional

from fragsim.dbmodels.base import (
    Call, ChurnPlan, DbClusterModel, InsufficientNodesError, MembershipError, OperationPlan,
    OwnersUnreachableError, PayloadSizes, Placement, UnsupportedOperationError, key_name, md5_int,
)

DEFAULT_PROFILE = {
    "sql_ms": 1.5,
    "data_ms": 1.0,
}


class MySqlModel(DbClusterModel):
    engine = "mysql"

    def __init__(self, members: Iterable[str], sql_node: str, mgmt_node: Optional[str] = None,
                 replicas_per_shard: int = 2, payload: Optional[PayloadSizes] = None,
                 profile: Optional[dict] = None, protected: Iterable[str] = ()):
        super().__init__(members, payload, {**DEFAULT_PROFILE, **(profile or {})}, protected)
        if replicas_per_shard < 1:
            raise MembershipError("mysql: replicas_per_shard must be ≥ 1")
        if len(self.members) < replicas_per_shard:
            raise InsufficientNodesError(
                f"mysql: {len(self.members)} data nodes < replicas_per_shard {replicas_per_shard}")
        if len(self.members) % replicas_per_shard:
            raise MembershipError(
                f"mysql: {len(self.members)} data nodes are not divisible by replicas_per_shard {replicas_per_shard}")
        self.replicas_per_shard = replicas_per_shard
        self.sql_node = sql_node
        self.mgmt_node = mgmt_node
        self.node_groups: list[list[str]] = [self.members[i:i + replicas_per_shard]
                                             for i in range(0, len(self.members), replicas_per_shard)]
        self._group_of: dict[int, int] = {}

    def group_of(self, key_index: int) -> int:
        g = self._group_of.get(key_index)
        if g is None:
            g = md5_int(key_name(key_index)) % len(self.node_groups)
            self._group_of[key_index] = g
        return g

    def place_records(self, n_records: int, rng=None) -> Placement:
        self.record_count = n_records
        per_group = [0] * len(self.node_groups)
        for k in range(n_records):
            per_group[self.group_of(k)] += 1
        per_node = {m: per_group[i] for i, group in enumerate(self.node_groups) for m in group}
        return Placement(n_records, per_node, {"node_groups": [list(g) for g in self.node_groups]})

    # ── op 계획 ──

    def _read_child(self, group: int, n_records: int, tag: str) -> Call:
        replica = self.nearest(self.sql_node, self.node_groups[group])
        if replica is None:
            raise OwnersUnreachableError(f"mysql: node group {group} unreachable from {self.sql_node}")
        return Call(self.sql_node, replica, self.env, self.env + n_records * self.rec,
                    self.profile["data_ms"], tag=tag)

    def _write_children(self, group: int) -> list[Call]:
        net = self._require_net()
        reachable = [m for m in self.node_groups[group] if net.reachable(self.sql_node, m)]
        if not reachable:
            raise OwnersUnreachableError(f"mysql: node group {group} unreachable from {self.sql_node}")
        return [Call(self.sql_node, m, self.env + self.rec, self.ack, self.profile["data_ms"], tag="write.sync")
                for m in reachable]

    def _read(self, client: str, key_index: int) -> Call:
        child = self._read_child(self.group_of(key_index), 1, "read.sync")
        return Call(client, self.sql_node, self.env, self.env + self.rec, self.profile["sql_ms"], [child],
                    tag="read.sync")

    def _write(self, client: str, key_index: int) -> Call:
        return Call(client, self.sql_node, self.env + self.rec, self.ack, self.profile["sql_ms"],
                    self._write_children(self.group_of(key_index)), tag="write.sync")

    def plan_operation(self, op, client: str, t_ms: float) -> OperationPlan:
        if op.kind == "insert":
            self.register_insert(op.key_index)
        if op.kind == "read":
            return OperationPlan(op.kind, [[self._read(client, op.key_index)]])
        if op.kind in ("update", "insert"):
            return OperationPlan(op.kind, [[self._write(client, op.key_index)]])
        if op.kind == "rmw":
            return OperationPlan(op.kind, [[self._read(client, op.key_index)], [self._write(client, op.key_index)]])
        groups: dict[int, int] = defaultdict(int)
        for k in self.scan_keys(op):
            groups[self.group_of(k)] += 1
        children = [self._read_child(g, n, "scan.sync") for g, n in sorted(groups.items())]
        total = sum(groups.values())
        return OperationPlan(op.kind, [[Call(client, self.sql_node, self.env, self.env + total * self.rec,
                                             self.profile["sql_ms"], children, tag="scan.sync")]])

    # ── 멤버십 ──

    def protection_reason(self, node: str) -> Optional[str]:
        if node == self.mgmt_node:
            return "management node is never removed"
        return super().protection_reason(node)

    def remove_node(self, node: str, t_ms: float) -> ChurnPlan:
        raise UnsupportedOperationError("mysql: node group changes are not supported")

    def add_node(self, node: str, t_ms: float) -> ChurnPlan:
        raise UnsupportedOperationError("mysql: node group changes are not supported")

    def describe(self) -> dict:
        return {**super().describe(), "sql_node": self.sql_node, "mgmt_node": self.mgmt_node,
                "node_groups": [list(g) for g in self.node_groups]}

"""
Cassandra 모델
==============
- 링: 노드마다 num_tokens 개의 md5 토큰 (SortedDict token → node)
- 키의 복제본: 키 해시 다음 토큰부터 시계방향으로 서로 다른 노드 replication_factor 개
- 코디네이터: up 멤버 라운드로빈, 코디네이터 → RF 복제본 팬아웃, consistency_level 개 ack 로 완료
- 제거(decommission): 떠나는 노드가 자기 몫을 새 소유자에게 스트리밍
- 추가(bootstrap): 범위에서 밀려나는 노드가 새 노드로 스트리밍
- settle = ring_delay + 쌍별 청크 스트리밍 시간의 최대값
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional

from sortedcontainers import SortedDict

from fragsim.dbmodels.base import (
    Call, ChurnPlan, DbClusterModel, InsufficientNodesError, MembershipError, OperationPlan,
    PayloadSizes, Placement, Transfer, key_name, md5_int, stream_time_ms,
)
from fragsim.utils.logger import logger

DEFAULT_PROFILE = {
    "coordinator_ms": 60.0,
    "replica_ms": 25.0,
    "ring_delay_ms": 30000.0,
    "stream_chunk_bytes": 65536,
    "num_tokens": 32,
}

MEMBER_UP = "up"
MEMBER_DRAINED = "drained"


class CassandraModel(DbClusterModel):
    engine = "cassandra"

    def __init__(self, members: Iterable[str], seed_node: str, replication_factor: int = 3,
                 consistency_level: int = 1, payload: Optional[PayloadSizes] = None,
                 profile: Optional[dict] = None, protected: Iterable[str] = ()):
        super().__init__(members, payload, {**DEFAULT_PROFILE, **(profile or {})}, protected)
        if seed_node not in self.members:
            raise MembershipError(f"cassandra: seed {seed_node} is not a member")
        if not 1 <= consistency_level <= replication_factor:
            raise MembershipError("cassandra: consistency_level must be within 1..replication_factor")
        self.seed_node = seed_node
        self.replication_factor = replication_factor
        self.consistency_level = consistency_level
        self.member_states: dict[str, str] = {m: MEMBER_UP for m in self.members}
        self.ring: SortedDict = SortedDict()
        for m in self.members:
            self._add_tokens(m)
        self._replica_cache: dict[int, tuple[str, ...]] = {}
        self._rr = 0

    # ── 링 ──

    def _tokens_of(self, node: str) -> list[int]:
        return [md5_int(f"{node}#{i}") for i in range(int(self.profile["num_tokens"]))]

    def _add_tokens(self, node: str) -> None:
        for token in self._tokens_of(node):
            self.ring[token] = node

    def _remove_tokens(self, node: str) -> None:
        for token in self._tokens_of(node):
            self.ring.pop(token, None)

    def _walk(self, key_index: int, ring: SortedDict) -> tuple[str, ...]:
        h = md5_int(key_name(key_index))
        start = ring.bisect_left(h)
        tokens = ring.keys()
        owners: list[str] = []
        for i in range(len(tokens)):
            node = ring[tokens[(start + i) % len(tokens)]]
            if node not in owners:
                owners.append(node)
                if len(owners) == self.replication_factor:
                    break
        return tuple(owners)

    def replicas_for(self, key_index: int) -> tuple[str, ...]:
        owners = self._replica_cache.get(key_index)
        if owners is None:
            owners = self._walk(key_index, self.ring)
            self._replica_cache[key_index] = owners
        return owners

    def place_records(self, n_records: int, rng=None) -> Placement:
        if len(self.members) < self.replication_factor:
            raise InsufficientNodesError(
                f"cassandra: {len(self.members)} nodes < replication_factor {self.replication_factor}")
        self.record_count = n_records
        counts = {m: 0 for m in self.members}
        for k in range(n_records):
            for node in self.replicas_for(k):
                counts[node] += 1
        return Placement(n_records, counts, {"replication_factor": self.replication_factor})

    # ── op 계획 ──

    def _coordinator(self) -> str:
        up = [m for m in self.members if self.member_states.get(m) == MEMBER_UP]
        coord = up[self._rr % len(up)]
        self._rr += 1
        return coord

    def _single(self, kind: str, key_index: int, client: str) -> Call:
        coord = self._coordinator()
        replicas = self.replicas_for(key_index)
        p = self.profile
        if kind == "read":
            children = [Call(coord, r, self.env, self.env + self.rec, p["replica_ms"], tag="read.sync")
                        for r in replicas]
            return Call(client, coord, self.env, self.env + self.rec, p["coordinator_ms"], children,
                        quorum=self.consistency_level, tag="read.sync")
        children = [Call(coord, r, self.env + self.rec, self.ack, p["replica_ms"], tag="write.sync")
                    for r in replicas]
        return Call(client, coord, self.env + self.rec, self.ack, p["coordinator_ms"], children,
                    quorum=self.consistency_level, tag="write.sync")

    def plan_operation(self, op, client: str, t_ms: float) -> OperationPlan:
        if op.kind == "insert":
            self.register_insert(op.key_index)
        if op.kind in ("read", "update", "insert"):
            return OperationPlan(op.kind, [[self._single("read" if op.kind == "read" else "write",
                                                         op.key_index, client)]])
        if op.kind == "rmw":
            return OperationPlan(op.kind, [[self._single("read", op.key_index, client)],
                                           [self._single("write", op.key_index, client)]])
        # scan: 범위의 키를 첫 번째 소유자별로 묶는다
        coord = self._coordinator()
        groups: dict[str, int] = defaultdict(int)
        for k in self.scan_keys(op):
            groups[self.replicas_for(k)[0]] += 1
        children = [Call(coord, owner, self.env, self.env + n * self.rec, self.profile["replica_ms"],
                         tag="scan.sync") for owner, n in sorted(groups.items())]
        total = sum(groups.values())
        return OperationPlan(op.kind, [[Call(client, coord, self.env, self.env + total * self.rec,
                                             self.profile["coordinator_ms"], children, tag="scan.sync")]])

    # ── 멤버십 ──

    def protection_reason(self, node: str) -> Optional[str]:
        if node == self.seed_node:
            return "seed node is never removed"
        return super().protection_reason(node)

    def check_removable(self, node: str) -> None:
        super().check_removable(node)
        if len(self.members) - 1 < self.replication_factor:
            raise MembershipError(
                f"cassandra: removing {node} would leave fewer than {self.replication_factor} nodes")

    def _settle(self, transfers: list[Transfer]) -> float:
        net = self._require_net()
        chunk = int(self.profile["stream_chunk_bytes"])
        longest = max((stream_time_ms(net, t.src, t.dst, t.bytes, chunk) for t in transfers), default=0.0)
        return float(self.profile["ring_delay_ms"]) + longest

    def _diff_transfers(self, old: dict[int, tuple], new: dict[int, tuple]) -> list[Transfer]:
        moved: dict[tuple[str, str], int] = defaultdict(int)
        for k in range(self.record_count):
            gained = [n for n in new[k] if n not in old[k]]
            lost = [n for n in old[k] if n not in new[k]]
            for src, dst in zip(lost, gained):
                moved[(src, dst)] += 1
        return [Transfer(s, d, n, n * self.rec) for (s, d), n in sorted(moved.items())]

    def _rebuild(self) -> dict[int, tuple]:
        self._replica_cache = {}
        return {k: self.replicas_for(k) for k in range(self.record_count)}

    def remove_node(self, node: str, t_ms: float) -> ChurnPlan:
        self.check_removable(node)
        old = {k: self.replicas_for(k) for k in range(self.record_count)}
        self.member_states[node] = MEMBER_DRAINED
        self._remove_tokens(node)
        self.members.remove(node)
        transfers = self._diff_transfers(old, self._rebuild())
        accept = self._require_net().rtt_ms(node, self.seed_node)
        plan = ChurnPlan(node, "remove", accept, self._settle(transfers), transfers,
                         {"owned_records": sum(1 for k in old if node in old[k])})
        logger.info(f"cassandra decommission {node}: {plan.bulk_bytes} B streamed, settle {plan.settle_ms:.0f}ms")
        return plan

    def add_node(self, node: str, t_ms: float) -> ChurnPlan:
        self.check_addable(node)
        old = {k: self.replicas_for(k) for k in range(self.record_count)}
        self.members.append(node)
        self.members.sort()
        self.member_states[node] = MEMBER_UP
        self._add_tokens(node)
        transfers = self._diff_transfers(old, self._rebuild())
        accept = self._require_net().rtt_ms(node, self.seed_node)
        plan = ChurnPlan(node, "add", accept, self._settle(transfers), transfers)
        logger.info(f"cassandra bootstrap {node}: {plan.bulk_bytes} B streamed, settle {plan.settle_ms:.0f}ms")
        return plan

    def describe(self) -> dict:
        return {**super().describe(), "seed": self.seed_node, "rf": self.replication_factor,
                "cl": self.consistency_level}

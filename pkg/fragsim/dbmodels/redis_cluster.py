"""
Redis Cluster 모델
==================
- 16384 해시 슬롯, key → CRC16(XMODEM) % 16384, 슬롯 소유자 = 마스터 한 개
- 슬롯 맵은 연속 구간(SlotRange) 목록으로 보관, 조회는 슬롯별 소유자 배열
- 초기 할당: 100 슬롯 단위로 자른 구간 (3 마스터 → 0-5500, 5501-11000, 11001-16383)
- 제거: 떠나는 노드의 슬롯을 가장 적게 가진 노드로 reshard → rebalance
- 추가: 빈 마스터로 join → rebalance
- rebalance 후 노드 간 슬롯 수 차이 ≤ 1
- settle = 수락(~2초) + 슬롯마다 제어 왕복(오케스트레이터 ↔ src/dst) + 키 배치마다 src ↔ dst 왕복
"""

from __future__ import annotations

import binascii
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from fragsim.dbmodels.base import (
    Call, ChurnPlan, DbClusterModel, DbModelError, InsufficientNodesError, MembershipError, OperationPlan,
    PayloadSizes, Placement, Transfer, key_name,
)
from fragsim.utils.logger import logger

SLOT_COUNT = 16384

DEFAULT_PROFILE = {
    "node_ms": 0.3,
    "accept_ms": 2000.0,
    "slot_control_rtts": 4,
    "migrate_batch_keys": 10,
    "allocation": "rounded",
}

ALLOCATIONS = ("rounded", "even")


def key_slot(key: str) -> int:
    """Hash slot of a key (hash tags `{...}` honored)."""
    start = key.find("{")
    if start != -1:
        end = key.find("}", start + 1)
        if end > start + 1:
            key = key[start + 1:end]
    return binascii.crc_hqx(key.encode("utf-8"), 0) % SLOT_COUNT


@dataclass(frozen=True)
class SlotRange:
    start: int
    end: int        # inclusive
    owner: str

    @property
    def count(self) -> int:
        return self.end - self.start + 1


def initial_ranges(masters: list[str], allocation: str = "rounded") -> list[SlotRange]:
    n = len(masters)
    if allocation == "rounded":
        step = math.ceil(SLOT_COUNT / n / 100) * 100
        if (n - 1) * step + 1 <= SLOT_COUNT - 1:
            bounds = [(0 if i == 0 else i * step + 1, (i + 1) * step if i < n - 1 else SLOT_COUNT - 1)
                      for i in range(n)]
            return [SlotRange(s, e, m) for (s, e), m in zip(bounds, masters)]
    base, extra = divmod(SLOT_COUNT, n)
    ranges, start = [], 0
    for i, m in enumerate(masters):
        size = base + (1 if i < extra else 0)
        ranges.append(SlotRange(start, start + size - 1, m))
        start += size
    return ranges


def ranges_from_owners(owners: list[str]) -> list[SlotRange]:
    ranges = []
    start = 0
    for slot in range(1, SLOT_COUNT + 1):
        if slot == SLOT_COUNT or owners[slot] != owners[start]:
            ranges.append(SlotRange(start, slot - 1, owners[start]))
            start = slot
    return ranges


class RedisModel(DbClusterModel):
    engine = "redis"

    def __init__(self, members: Iterable[str], payload: Optional[PayloadSizes] = None,
                 profile: Optional[dict] = None, protected: Iterable[str] = ()):
        super().__init__(members, payload, {**DEFAULT_PROFILE, **(profile or {})}, protected)
        if self.profile["allocation"] not in ALLOCATIONS:
            raise DbModelError(f"redis: unknown slot allocation '{self.profile['allocation']}' "
                               f"(expected one of {', '.join(ALLOCATIONS)})")
        self.slot_map: list[SlotRange] = initial_ranges(self.members, self.profile["allocation"])
        self._owners: list[str] = []
        self._sync_owners()
        self.records_per_slot: list[int] = [0] * SLOT_COUNT
        self._slot_of: dict[int, int] = {}

    # ── 슬롯 맵 ──

    def _sync_owners(self) -> None:
        owners = [""] * SLOT_COUNT
        for r in self.slot_map:
            owners[r.start:r.end + 1] = [r.owner] * r.count
        self._owners = owners

    def _set_owners(self, owners: list[str]) -> None:
        self._owners = owners
        self.slot_map = ranges_from_owners(owners)

    def slot_of(self, key_index: int) -> int:
        slot = self._slot_of.get(key_index)
        if slot is None:
            slot = key_slot(key_name(key_index))
            self._slot_of[key_index] = slot
        return slot

    def owner_of_slot(self, slot: int) -> str:
        return self._owners[slot]

    def owner_of(self, key_index: int) -> str:
        return self._owners[self.slot_of(key_index)]

    def slot_counts(self) -> dict[str, int]:
        counts = {m: 0 for m in self.members}
        for r in self.slot_map:
            counts[r.owner] = counts.get(r.owner, 0) + r.count
        return counts

    def place_records(self, n_records: int, rng=None) -> Placement:
        self.record_count = 0
        self.records_per_slot = [0] * SLOT_COUNT
        for k in range(n_records):
            self.register_insert(k)
        per_node: dict[str, int] = {m: 0 for m in self.members}
        for slot, n in enumerate(self.records_per_slot):
            per_node[self._owners[slot]] += n
        return Placement(n_records, per_node, {"slot_ranges": [(r.start, r.end, r.owner) for r in self.slot_map]})

    def register_insert(self, key_index: int) -> None:
        if key_index >= self.record_count:
            for k in range(self.record_count, key_index + 1):
                self.records_per_slot[self.slot_of(k)] += 1
        super().register_insert(key_index)

    # ── op 계획 ──

    def _call(self, client: str, owner: str, kind: str, n_records: int = 1) -> Call:
        svc = self.profile["node_ms"]
        if kind == "write":
            return Call(client, owner, self.env + self.rec, self.ack, svc, tag="write.sync")
        return Call(client, owner, self.env, self.env + n_records * self.rec, svc,
                    tag="scan.sync" if kind == "scan" else "read.sync")

    def plan_operation(self, op, client: str, t_ms: float) -> OperationPlan:
        if op.kind == "insert":
            self.register_insert(op.key_index)
        owner = self.owner_of(op.key_index)
        if op.kind == "read":
            return OperationPlan(op.kind, [[self._call(client, owner, "read")]])
        if op.kind in ("update", "insert"):
            return OperationPlan(op.kind, [[self._call(client, owner, "write")]])
        if op.kind == "rmw":
            return OperationPlan(op.kind, [[self._call(client, owner, "read")],
                                           [self._call(client, owner, "write")]])
        groups: dict[str, int] = defaultdict(int)
        for k in self.scan_keys(op):
            groups[self.owner_of(k)] += 1
        return OperationPlan(op.kind, [[self._call(client, o, "scan", n) for o, n in sorted(groups.items())]])

    # ── reshard / rebalance ──

    def rebalance_moves(self, owners: list[str], members: list[str]) -> list[tuple[int, str, str]]:
        """Slot moves (slot, src, dst) that bring every member within one slot of the others."""
        counts = {m: 0 for m in members}
        for o in owners:
            counts[o] += 1
        base, extra = divmod(SLOT_COUNT, len(members))
        ranked = sorted(members, key=lambda m: (-counts[m], m))
        target = {m: base + (1 if i < extra else 0) for i, m in enumerate(ranked)}

        donors = sorted((m for m in members if counts[m] > target[m]), key=lambda m: (counts[m] - target[m], m),
                        reverse=True)
        recipients = sorted((m for m in members if counts[m] < target[m]),
                            key=lambda m: (-(target[m] - counts[m]), m))
        # 각 donor 는 자기 구간의 끝(높은 슬롯)부터 내준다
        donor_slots = {m: (s for s in range(SLOT_COUNT - 1, -1, -1) if owners[s] == m) for m in donors}
        moves = []
        for dst in recipients:
            need = target[dst] - counts[dst]
            for src in donors:
                while need > 0 and counts[src] > target[src]:
                    slot = next(donor_slots[src])
                    moves.append((slot, src, dst))
                    counts[src] -= 1
                    counts[dst] += 1
                    need -= 1
        return moves

    def _migration_ms(self, moves: list[tuple[int, str, str]], orchestrator: str) -> float:
        net = self._require_net()
        p = self.profile
        half = p["slot_control_rtts"] / 2.0
        batch = int(p["migrate_batch_keys"])
        rtt = {}

        def rtt_of(a: str, b: str) -> float:
            if (a, b) not in rtt:
                rtt[(a, b)] = net.rtt_ms(a, b)
            return rtt[(a, b)]

        total = 0.0
        for slot, src, dst in moves:
            total += half * (rtt_of(orchestrator, src) + rtt_of(orchestrator, dst))
            keys = self.records_per_slot[slot]
            if keys:
                batches = math.ceil(keys / batch)
                batch_bytes = min(keys, batch) * self.rec
                total += batches * (rtt_of(src, dst) + batch_bytes * 8 / net.bandwidth_mbps(src, dst) / 1000.0)
        return total

    def _transfers(self, moves: list[tuple[int, str, str]]) -> list[Transfer]:
        moved: dict[tuple[str, str], int] = defaultdict(int)
        for slot, src, dst in moves:
            moved[(src, dst)] += self.records_per_slot[slot]
        return [Transfer(s, d, n, n * self.rec) for (s, d), n in sorted(moved.items()) if n]

    def _apply(self, moves: list[tuple[int, str, str]]) -> None:
        owners = list(self._owners)
        for slot, _, dst in moves:
            owners[slot] = dst
        self._set_owners(owners)

    def check_removable(self, node: str) -> None:
        super().check_removable(node)
        if len(self.members) - 1 < 2:
            raise MembershipError("redis: cluster needs at least 2 remaining masters")

    def remove_node(self, node: str, t_ms: float) -> ChurnPlan:
        self.check_removable(node)
        remaining = [m for m in self.members if m != node]
        counts = self.slot_counts()
        receiver = min(remaining, key=lambda m: (counts.get(m, 0), m))
        reshard = [(s, node, receiver) for s in range(SLOT_COUNT) if self._owners[s] == node]
        owners = list(self._owners)
        for slot, _, dst in reshard:
            owners[slot] = dst
        rebalance = self.rebalance_moves(owners, remaining)
        moves = reshard + rebalance
        settle = self.profile["accept_ms"] + self._migration_ms(moves, node)
        transfers = self._transfers(moves)
        self._apply(moves)
        self.members = remaining
        logger.info(f"redis del-node {node}: {len(moves)} slot moves, settle {settle:.0f}ms")
        return ChurnPlan(node, "remove", self.profile["accept_ms"], settle, transfers,
                         {"slot_moves": len(moves), "reshard_moves": len(reshard)})

    def add_node(self, node: str, t_ms: float) -> ChurnPlan:
        self.check_addable(node)
        members = sorted(self.members + [node])
        moves = self.rebalance_moves(self._owners, members)
        settle = self.profile["accept_ms"] + self._migration_ms(moves, node)
        transfers = self._transfers(moves)
        self.members = members
        self._apply(moves)
        logger.info(f"redis add-node {node}: {len(moves)} slot moves, settle {settle:.0f}ms")
        return ChurnPlan(node, "add", self.profile["accept_ms"], settle, transfers, {"slot_moves": len(moves)})

    def rebuild(self, members: Iterable[str]) -> "RedisModel":
        """Offline resize: a fresh cluster over `members` holding the same records."""
        members = sorted(members)
        if len(members) < 1:
            raise InsufficientNodesError("redis: no members")
        fresh = RedisModel(members, self.payload, self.profile, self.protected)
        fresh.place_records(self.record_count)
        if self.net is not None:
            fresh.bind(self.net)
        return fresh

    def describe(self) -> dict:
        return {**super().describe(), "slot_ranges": [(r.start, r.end, r.owner) for r in self.slot_map]}

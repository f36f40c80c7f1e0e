"""
오버레이 라우터 (Overlay router)
================================
자가 라우팅 오버레이 계층:
  1) 최소 홉 경로 → 2) 총 지연 최소 → 3) link_id 사전순 으로 경로 선택
  링크 down/up 이 발생하면 영향받는 쌍을 stale 로 표시하고 reroute_delay_ms(기본 30초) 뒤에 재계산.
  재계산 전까지는 기존 경로가 살아 있으면 그대로 쓰고, 아니면 "rerouting" 으로 실패.

- shortest_path()       → 단발 경로 계산 (networkx BFS + 지연 DP)
- RouteTable            → 경로 캐시 + failover 지연 관리
- OverlayNetwork        → DB 모델이 쓰는 네트워크 뷰 (지연/대역폭 조회, send)
- route_and_transmit()  → RouteTable + SimKernel 연결

사용법:
    table = RouteTable(topology, reroute_delay_ms=30_000)
    plan = table.get_route("vm0", "vm2", t_ms=0)
    print(plan.path, plan.total_latency_ms)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import networkx as nx
import numpy as np

from fragsim.simkernel import DeliveryCallback, Message, SimKernel, ms_to_us, us_to_ms
from fragsim.topology import LINK_DOWN, ClusterTopology, LinkStateEvent
from fragsim.utils.logger import logger


class RouteError(RuntimeError):
    pass


class UnreachableError(RouteError):
    def __init__(self, src: str, dst: str):
        super().__init__(f"unreachable: {src} → {dst}")
        self.src, self.dst = src, dst


class ReroutingError(RouteError):
    def __init__(self, src: str, dst: str, ready_at_ms: float):
        super().__init__(f"no route (rerouting) {src} → {dst} until {ready_at_ms:.0f}ms")
        self.src, self.dst = src, dst
        self.ready_at_ms = ready_at_ms


@dataclass(frozen=True)
class RoutePlan:
    src: str
    dst: str
    path: tuple
    nodes: tuple
    total_latency_ms: float
    computed_at_ms: float

    @property
    def hop_count(self) -> int:
        return len(self.path)


# ============================================================
# 최단 경로
# ============================================================

def _usable_graph(topology: ClusterTopology, exclude: Iterable[str]) -> nx.MultiGraph:
    g = topology.graph()
    for lid in exclude:
        link = topology.links.get(lid)
        if link is not None and g.has_edge(link.a, link.b, key=lid):
            g.remove_edge(link.a, link.b, key=lid)
    return g


def shortest_path(topology: ClusterTopology, src: str, dst: str, t_ms: float,
                  exclude: Iterable[str] = ()) -> RoutePlan:
    """Min-hop path over up links; ties by total latency at t, then by link-id sequence."""
    if src == dst:
        raise RouteError("src and dst must differ")
    topology.node(src)
    topology.node(dst)
    g = _usable_graph(topology, exclude)
    dist = nx.single_source_shortest_path_length(g, dst)
    if src not in dist:
        raise UnreachableError(src, dst)

    # best[node] = (latency_us, link ids, nodes) 로 dst 까지
    best: dict[str, tuple[int, tuple, tuple]] = {dst: (0, (), (dst,))}
    for node in sorted((n for n, d in dist.items() if d <= dist[src]), key=lambda n: dist[n]):
        if node == dst:
            continue
        candidates = []
        for v, edges in g[node].items():
            if dist.get(v) != dist[node] - 1 or v not in best:
                continue
            v_lat, v_ids, v_nodes = best[v]
            for lid in edges:
                lat_ms, _ = topology.qos(lid, t_ms)
                candidates.append((ms_to_us(lat_ms) + v_lat, (lid,) + v_ids, (node,) + v_nodes))
        best[node] = min(candidates)

    lat_us, path, nodes = best[src]
    return RoutePlan(src, dst, path, nodes, us_to_ms(lat_us), float(t_ms))


# ============================================================
# 라우팅 테이블 (failover)
# ============================================================

class RouteTable:
    def __init__(self, topology: ClusterTopology, reroute_delay_ms: float = 30000.0,
                 jitter_ms: Optional[tuple[float, float]] = None, rng_seed: int = 0,
                 trace: Optional[Callable[..., None]] = None):
        if reroute_delay_ms < 0:
            raise RouteError("reroute_delay_ms must be ≥ 0")
        self.topology = topology
        self.reroute_delay_ms = float(reroute_delay_ms)
        self.jitter_ms = jitter_ms
        self._rng = np.random.default_rng(rng_seed)
        self.trace = trace
        self.routes: dict[tuple[str, str], Optional[RoutePlan]] = {}
        self.pending_recomputes: dict[tuple[str, str], float] = {}
        self._hidden_until: dict[str, float] = {}
        topology.subscribe(self._on_event)

    def _delay(self) -> float:
        if self.jitter_ms:
            lo, hi = self.jitter_ms
            return float(self._rng.uniform(lo, hi))
        return self.reroute_delay_ms

    def _mark(self, pair: tuple[str, str], ready_at: float) -> None:
        self.pending_recomputes[pair] = max(ready_at, self.pending_recomputes.get(pair, ready_at))

    def _on_event(self, event: LinkStateEvent) -> None:
        self.on_link_state_change(event.link_id, event.state, event.t_ms)

    def on_link_state_change(self, link_id: str, new_state: str, t_ms: float) -> None:
        ready_at = t_ms + self._delay()
        if new_state == LINK_DOWN:
            affected = [p for p, plan in self.routes.items() if plan is not None and link_id in plan.path]
        else:
            self._hidden_until[link_id] = ready_at
            affected = list(self.routes)
        for pair in affected:
            self._mark(pair, ready_at)
        if affected:
            logger.debug(f"link {link_id} {new_state}: {len(affected)} routes stale until {ready_at:.0f}ms")
        self._note("reroute_scheduled", link=link_id, state=new_state, ready_at_ms=ready_at,
                   pairs=len(affected))

    def _hidden_at(self, t_ms: float) -> dict[str, float]:
        return {lid: until for lid, until in self._hidden_until.items() if until > t_ms}

    def _compute(self, src: str, dst: str, t_ms: float, reason: str) -> Optional[RoutePlan]:
        hidden = self._hidden_at(t_ms)
        try:
            plan = shortest_path(self.topology, src, dst, t_ms, exclude=hidden)
        except UnreachableError:
            plan = None
        self.routes[(src, dst)] = plan
        if hidden:
            # 복구된 링크가 보이게 되는 시점에 다시 계산
            self._mark((src, dst), max(hidden.values()))
        self._note("route", pair=f"{src}>{dst}", path=list(plan.path) if plan else None, reason=reason)
        return plan

    def viable(self, plan: RoutePlan) -> bool:
        return all(self.topology.links[lid].is_up for lid in plan.path)

    def get_route(self, src: str, dst: str, t_ms: float) -> RoutePlan:
        pair = (src, dst)
        ready_at = self.pending_recomputes.get(pair)
        if ready_at is not None:
            if t_ms >= ready_at:
                del self.pending_recomputes[pair]
                plan = self._compute(src, dst, t_ms, "recompute")
            else:
                old = self.routes.get(pair)
                if old is not None and self.viable(old):
                    return old
                raise ReroutingError(src, dst, ready_at)
        elif pair in self.routes:
            plan = self.routes[pair]
        else:
            plan = self._compute(src, dst, t_ms, "computed")
        if plan is None:
            raise UnreachableError(src, dst)
        return plan

    def pending_ready_ms(self, src: str, dst: str) -> Optional[float]:
        return self.pending_recomputes.get((src, dst))

    def _note(self, kind: str, **fields) -> None:
        if self.trace is not None:
            self.trace(kind, **fields)


def mean_pair_latency(topology: ClusterTopology, t_ms: float,
                      nodes: Optional[Iterable[str]] = None) -> tuple[float, int]:
    """Mean one-way route latency over all reachable ordered node pairs, and the pair count."""
    ids = list(nodes) if nodes is not None else list(topology.nodes)
    total, count = 0.0, 0
    for a in ids:
        for b in ids:
            if a == b:
                continue
            try:
                total += shortest_path(topology, a, b, t_ms).total_latency_ms
                count += 1
            except UnreachableError:
                continue
    return (total / count if count else float("inf")), count


# ============================================================
# 커널 연결
# ============================================================

def route_and_transmit(msg: Message, route_table: RouteTable, kernel: SimKernel,
                       t_ms: Optional[float] = None,
                       on_delivery: Optional[DeliveryCallback] = None,
                       on_loss: Optional[DeliveryCallback] = None) -> Message:
    """Resolve the pair's route and hand the message to the kernel (raises Unreachable/Rerouting)."""
    t = kernel.now_ms if t_ms is None else t_ms
    if msg.src != msg.dst:
        msg.path = route_table.get_route(msg.src, msg.dst, t).path
    else:
        msg.path = ()
    return kernel.transmit(msg, t, on_delivery, on_loss)


class OverlayNetwork:
    """Network view handed to database models: route latency, bottleneck bandwidth, send."""

    def __init__(self, topology: ClusterTopology, kernel: SimKernel, route_table: RouteTable):
        self.topology = topology
        self.kernel = kernel
        self.routes = route_table
        if route_table.trace is None:
            route_table.trace = kernel.note

    @property
    def now_ms(self) -> float:
        return self.kernel.now_ms

    def plan(self, src: str, dst: str, t_ms: Optional[float] = None) -> RoutePlan:
        return self.routes.get_route(src, dst, self.now_ms if t_ms is None else t_ms)

    def latency_ms(self, src: str, dst: str, t_ms: Optional[float] = None) -> float:
        if src == dst:
            return 0.0
        t = self.now_ms if t_ms is None else t_ms
        plan = self.plan(src, dst, t)
        return sum(self.topology.qos(lid, t)[0] for lid in plan.path)

    def rtt_ms(self, src: str, dst: str, t_ms: Optional[float] = None) -> float:
        return self.latency_ms(src, dst, t_ms) + self.latency_ms(dst, src, t_ms)

    def bandwidth_mbps(self, src: str, dst: str, t_ms: Optional[float] = None) -> float:
        if src == dst:
            return float("inf")
        t = self.now_ms if t_ms is None else t_ms
        plan = self.plan(src, dst, t)
        return min(self.topology.qos(lid, t, towards=to)[1]
                   for lid, to in zip(plan.path, plan.nodes[1:]))

    def reachable(self, src: str, dst: str, t_ms: Optional[float] = None) -> bool:
        if src == dst:
            return True
        try:
            self.plan(src, dst, t_ms)
            return True
        except RouteError:
            return False

    def send(self, src: str, dst: str, size_bytes: int, tag: str = "",
             on_delivery: Optional[DeliveryCallback] = None,
             on_loss: Optional[DeliveryCallback] = None) -> Message:
        msg = self.kernel.new_message(src, dst, size_bytes, [], tag)
        return route_and_transmit(msg, self.routes, self.kernel, None, on_delivery, on_loss)

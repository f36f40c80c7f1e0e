"""
토폴로지 (Topology)
===================
데이터센터 노드, 중복 링크 메쉬(multigraph), 링크별 시간가변 QoS(지연/대역폭) 스케줄.

- NodeSpec / LinkSpec      → 노드와 링크 (같은 노드 쌍에 conn_type 이 다른 링크 여러 개 허용)
- QosSchedule              → epoch 별 지연/대역폭 배율 (LSF = 지연 배율)
- ReferenceMatrix          → 8개 리전 기준값(RV) 지연/다운로드 대역폭 표
- build_mesh()             → 시드 고정 랜덤 메쉬 (링크 제거 시나리오용)
- reference_topology()     → 8 리전 풀메쉬 + 싱가포르 클라이언트 프리셋

사용법:
    from fragsim.topology import reference_topology, effective_qos

    topo = reference_topology(lsf=0.2)
    lat_ms, bw_mbps = topo.qos("melbourne-sydney", t_ms=0)

    topo.subscribe(lambda ev: print(ev))
    topo.set_link_state("melbourne-sydney", "down", t_ms=1000)
"""

from __future__ import annotations

import bisect
import copy
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import networkx as nx
import numpy as np

from fragsim.utils.logger import logger


# ============================================================
# 에러
# ============================================================

class TopologyError(ValueError):
    """Invalid topology document or operation"""


class LinkUnavailableError(TopologyError):
    def __init__(self, link_id: str):
        super().__init__(f"link unavailable: {link_id}")
        self.link_id = link_id


class UnknownLinkError(TopologyError):
    def __init__(self, link_id: str):
        super().__init__(f"unknown link_id: {link_id}")
        self.link_id = link_id


# ============================================================
# 노드 / 링크
# ============================================================

ROLES = frozenset({"client", "data", "seed", "primary", "non_voting", "hidden", "sql", "mgmt"})

LINK_UP = "up"
LINK_DOWN = "down"


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    region: str
    roles: frozenset = frozenset({"data"})

    def __post_init__(self):
        object.__setattr__(self, "roles", frozenset(self.roles))
        unknown = self.roles - ROLES
        if unknown:
            raise TopologyError(f"node {self.node_id}: unknown roles {sorted(unknown)}")
        if not self.node_id:
            raise TopologyError("node_id must be non-empty")

    def has(self, role: str) -> bool:
        return role in self.roles


@dataclass
class LinkSpec:
    """
    One physical/overlay link. Traversal towards `b` uses down_bw_mbps,
    traversal towards `a` uses up_bw_mbps (defaults to the download value).
    """
    link_id: str
    a: str
    b: str
    base_latency_ms: float
    down_bw_mbps: float
    conn_type: int = 0
    up_bw_mbps: Optional[float] = None
    state: str = LINK_UP

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError(f"link {self.link_id}: self-loop on {self.a}")
        if self.base_latency_ms <= 0:
            raise TopologyError(f"link {self.link_id}: base_latency_ms must be > 0")
        if self.up_bw_mbps is None:
            self.up_bw_mbps = self.down_bw_mbps
        if self.down_bw_mbps <= 0 or self.up_bw_mbps <= 0:
            raise TopologyError(f"link {self.link_id}: bandwidth must be > 0")
        if self.state not in (LINK_UP, LINK_DOWN):
            raise TopologyError(f"link {self.link_id}: state must be up|down")

    @property
    def endpoints(self) -> frozenset:
        return frozenset((self.a, self.b))

    @property
    def is_up(self) -> bool:
        return self.state == LINK_UP

    def other(self, node_id: str) -> str:
        if node_id == self.a:
            return self.b
        if node_id == self.b:
            return self.a
        raise TopologyError(f"{node_id} is not an endpoint of {self.link_id}")

    def bandwidth_towards(self, node_id: Optional[str]) -> float:
        if node_id == self.a:
            return self.up_bw_mbps
        return self.down_bw_mbps


# ============================================================
# QoS 스케줄
# ============================================================

@dataclass(frozen=True)
class QosEpoch:
    start_ms: float
    latency_multiplier: float = 1.0
    bandwidth_multiplier: float = 1.0


@dataclass(frozen=True)
class QosSchedule:
    epochs: tuple = (QosEpoch(0.0),)
    inverse_bandwidth: bool = False

    def __post_init__(self):
        epochs = tuple(self.epochs)
        object.__setattr__(self, "epochs", epochs)
        if not epochs or epochs[0].start_ms != 0:
            raise TopologyError("first QoS epoch must start at 0")
        for prev, cur in zip(epochs, epochs[1:]):
            if cur.start_ms <= prev.start_ms:
                raise TopologyError("QoS epochs must be strictly increasing in start_ms")
        for e in epochs:
            if e.latency_multiplier <= 0 or e.bandwidth_multiplier <= 0:
                raise TopologyError("QoS multipliers must be > 0")

    @classmethod
    def constant(cls) -> "QosSchedule":
        return cls()

    @classmethod
    def from_lsf(cls, lsf: float, inverse_bandwidth: bool = False) -> "QosSchedule":
        return cls((QosEpoch(0.0, lsf, 1.0),), inverse_bandwidth)

    def scaled(self, factor: float) -> "QosSchedule":
        """Multiply every epoch's latency multiplier by `factor`."""
        return QosSchedule(
            tuple(QosEpoch(e.start_ms, e.latency_multiplier * factor, e.bandwidth_multiplier)
                  for e in self.epochs),
            self.inverse_bandwidth,
        )

    def epoch_at(self, t_ms: float) -> QosEpoch:
        idx = bisect.bisect_right(self.epochs, t_ms, key=lambda e: e.start_ms) - 1
        return self.epochs[max(idx, 0)]

    def multipliers_at(self, t_ms: float) -> tuple[float, float]:
        e = self.epoch_at(t_ms)
        bw_mult = e.bandwidth_multiplier
        if self.inverse_bandwidth:
            # 링크 용량(기준 대역폭) 이상으로는 늘지 않는다
            bw_mult = min(bw_mult / e.latency_multiplier, 1.0)
        return e.latency_multiplier, bw_mult

    def to_list(self) -> list[dict]:
        return [{"t_ms": e.start_ms, "lat_mult": e.latency_multiplier, "bw_mult": e.bandwidth_multiplier}
                for e in self.epochs]

    @classmethod
    def from_list(cls, rows: list[dict], inverse_bandwidth: bool = False) -> "QosSchedule":
        return cls(tuple(QosEpoch(float(r["t_ms"]), float(r.get("lat_mult", 1.0)),
                                  float(r.get("bw_mult", 1.0))) for r in rows),
                   inverse_bandwidth)


def effective_qos(link: LinkSpec, schedule: QosSchedule, t_ms: float,
                  towards: Optional[str] = None) -> tuple[float, float]:
    """(latency_ms, bw_mbps) of an up link at time t_ms."""
    if not link.is_up:
        raise LinkUnavailableError(link.link_id)
    lat_mult, bw_mult = schedule.multipliers_at(t_ms)
    return link.base_latency_ms * lat_mult, link.bandwidth_towards(towards) * bw_mult


# ============================================================
# 기준값 행렬 (8개 리전)
# ============================================================

REFERENCE_REGIONS = ("Melbourne", "Sydney", "Canberra", "Pune", "Singapore", "Seoul", "Dubai", "Virginia")

# 하삼각: 지연(ms), 행 i 의 앞 i 개 열
_LATENCY_LOWER = (
    (),
    (189,),
    (181, 142),
    (223, 81, 64),
    (195, 35, 109, 49),
    (207, 172, 156, 93, 153),
    (208, 168, 152, 149, 147, 7),
    (219, 165, 148, 109, 142, 12, 14),
)

# 상삼각: 다운로드 대역폭(Mb/s), 행 i 의 i+1 번째 열부터
_BANDWIDTH_UPPER = (
    (948, 990, 171, 192, 164, 151, 114),
    (995, 167, 206, 163, 140, 121),
    (173, 255, 157, 138, 117),
    (489, 220, 625, 119),
    (372, 271, 111),
    (174, 127),
    (128,),
    (),
)

UPLOAD_RANGE_MBPS = (97.0, 992.0)


@dataclass(frozen=True)
class RefEntry:
    latency_ms: float
    down_bw_mbps: float


@dataclass(frozen=True)
class ReferenceMatrix:
    regions: tuple
    latency_ms: tuple
    down_bw_mbps: tuple

    def index(self, region: str) -> Optional[int]:
        lowered = [r.lower() for r in self.regions]
        try:
            return lowered.index(region.lower())
        except ValueError:
            return None

    def knows(self, region: str) -> bool:
        return self.index(region) is not None

    def lookup(self, a: str, b: str) -> RefEntry:
        i, j = self.index(a), self.index(b)
        if i is None or j is None:
            raise TopologyError(f"region not in reference matrix: {a if i is None else b}")
        return RefEntry(float(self.latency_ms[i][j]), float(self.down_bw_mbps[i][j]))

    def off_diagonal_latencies(self) -> list[float]:
        n = len(self.regions)
        return [self.latency_ms[i][j] for i in range(n) for j in range(i)]

    def to_dict(self) -> dict:
        return {
            "regions": list(self.regions),
            "latency_ms": [list(r) for r in self.latency_ms],
            "down_bw_mbps": [list(r) for r in self.down_bw_mbps],
        }


def builtin_reference_matrix() -> ReferenceMatrix:
    """Reference-value latency / download bandwidth between the 8 datacenters."""
    n = len(REFERENCE_REGIONS)
    lat = [[0.0] * n for _ in range(n)]
    bw = [[0.0] * n for _ in range(n)]
    for i, row in enumerate(_LATENCY_LOWER):
        for j, v in enumerate(row):
            lat[i][j] = lat[j][i] = float(v)
    for i, row in enumerate(_BANDWIDTH_UPPER):
        for k, v in enumerate(row):
            j = i + 1 + k
            bw[i][j] = bw[j][i] = float(v)
    return ReferenceMatrix(REFERENCE_REGIONS, tuple(map(tuple, lat)), tuple(map(tuple, bw)))


# ============================================================
# 클러스터 토폴로지
# ============================================================

@dataclass(frozen=True)
class LinkStateEvent:
    link_id: str
    state: str
    t_ms: float
    endpoints: tuple


class ClusterTopology:
    """Nodes plus a multigraph of redundant links, each with its own QoS schedule."""

    def __init__(self, nodes: Iterable[NodeSpec], links: Iterable[LinkSpec],
                 schedules: Optional[dict[str, QosSchedule]] = None):
        self.nodes: dict[str, NodeSpec] = {}
        for n in nodes:
            if n.node_id in self.nodes:
                raise TopologyError(f"duplicate node_id: {n.node_id}")
            self.nodes[n.node_id] = n

        self.links: dict[str, LinkSpec] = {}
        self._adjacency: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        seen_types: set[tuple] = set()
        for link in links:
            if link.link_id in self.links:
                raise TopologyError(f"duplicate link_id: {link.link_id}")
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise TopologyError(f"link {link.link_id}: unknown node {end}")
            key = (link.endpoints, link.conn_type)
            if key in seen_types:
                raise TopologyError(
                    f"link {link.link_id}: conn_type {link.conn_type} already used between {link.a} and {link.b}")
            seen_types.add(key)
            self.links[link.link_id] = link
            self._adjacency[link.a].append(link.link_id)
            self._adjacency[link.b].append(link.link_id)

        self.schedules: dict[str, QosSchedule] = dict(schedules or {})
        for lid in self.schedules:
            if lid not in self.links:
                raise UnknownLinkError(lid)
        self._listeners: list[Callable[[LinkStateEvent], None]] = []

    # ── 조회 ──

    def node(self, node_id: str) -> NodeSpec:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise TopologyError(f"unknown node_id: {node_id}") from None

    def link(self, link_id: str) -> LinkSpec:
        try:
            return self.links[link_id]
        except KeyError:
            raise UnknownLinkError(link_id) from None

    def schedule_for(self, link_id: str) -> QosSchedule:
        return self.schedules.get(link_id) or QosSchedule.constant()

    def qos(self, link_id: str, t_ms: float, towards: Optional[str] = None) -> tuple[float, float]:
        return effective_qos(self.link(link_id), self.schedule_for(link_id), t_ms, towards)

    def incident(self, node_id: str) -> list[LinkSpec]:
        return [self.links[lid] for lid in self._adjacency[node_id]]

    def links_between(self, a: str, b: str) -> list[LinkSpec]:
        pair = frozenset((a, b))
        return sorted((self.links[lid] for lid in self._adjacency.get(a, ())
                       if self.links[lid].endpoints == pair), key=lambda l: l.conn_type)

    def nodes_with(self, role: str) -> list[str]:
        return [nid for nid, n in self.nodes.items() if n.has(role)]

    def data_nodes(self) -> list[str]:
        return self.nodes_with("data")

    @property
    def client_node(self) -> str:
        clients = self.nodes_with("client")
        if len(clients) != 1:
            raise TopologyError(f"exactly one client node required, found {len(clients)}")
        return clients[0]

    def graph(self, include_down: bool = False) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(self.nodes)
        for lid, link in self.links.items():
            if include_down or link.is_up:
                g.add_edge(link.a, link.b, key=lid, latency=link.base_latency_ms)
        return g

    def is_connected(self, without: Iterable[str] = ()) -> bool:
        g = self.graph()
        for lid in without:
            link = self.link(lid)
            if g.has_edge(link.a, link.b, key=lid):
                g.remove_edge(link.a, link.b, key=lid)
        return g.number_of_nodes() <= 1 or nx.is_connected(g)

    # ── 상태 변경 ──

    def subscribe(self, listener: Callable[[LinkStateEvent], None]) -> None:
        self._listeners.append(listener)

    def set_link_state(self, link_id: str, state: str, t_ms: float) -> Optional[LinkStateEvent]:
        """Update a link's state; returns the emitted event, or None when unchanged."""
        link = self.link(link_id)
        if state not in (LINK_UP, LINK_DOWN):
            raise TopologyError(f"invalid link state: {state}")
        if link.state == state:
            return None
        link.state = state
        event = LinkStateEvent(link_id, state, float(t_ms), (link.a, link.b))
        logger.debug(f"link {link_id} → {state} @ {t_ms:.0f}ms")
        for listener in self._listeners:
            listener(event)
        return event

    # ── 복사 / 직렬화 ──

    def copy(self) -> "ClusterTopology":
        return ClusterTopology(self.nodes.values(), [copy.copy(l) for l in self.links.values()],
                               dict(self.schedules))

    def with_lsf(self, lsf: float, inverse_bandwidth: Optional[bool] = None) -> "ClusterTopology":
        """Copy with every link's latency multipliers scaled by `lsf`."""
        if lsf <= 0:
            raise TopologyError("LSF must be > 0")
        scheduled = {}
        for lid in self.links:
            sched = self.schedule_for(lid).scaled(lsf)
            if inverse_bandwidth is not None:
                sched = QosSchedule(sched.epochs, inverse_bandwidth)
            scheduled[lid] = sched
        return ClusterTopology(self.nodes.values(), [copy.copy(l) for l in self.links.values()], scheduled)

    def to_dict(self) -> dict:
        links = []
        for l in self.links.values():
            row = {"id": l.link_id, "a": l.a, "b": l.b, "conn_type": l.conn_type,
                   "latency_ms": l.base_latency_ms, "down_mbps": l.down_bw_mbps, "up_mbps": l.up_bw_mbps}
            if not l.is_up:
                row["state"] = l.state
            links.append(row)
        return {
            "nodes": [{"id": n.node_id, "region": n.region, "roles": sorted(n.roles)}
                      for n in self.nodes.values()],
            "links": links,
            "schedules": {lid: s.to_list() for lid, s in self.schedules.items()
                          if s != QosSchedule.constant()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterTopology":
        nodes = [NodeSpec(n["id"], n.get("region", n["id"]), frozenset(n.get("roles", ["data"])))
                 for n in doc.get("nodes", [])]
        links = [LinkSpec(l["id"], l["a"], l["b"], float(l["latency_ms"]), float(l["down_mbps"]),
                          int(l.get("conn_type", 0)),
                          None if l.get("up_mbps") is None else float(l["up_mbps"]),
                          l.get("state", LINK_UP))
                 for l in doc.get("links", [])]
        schedules = {lid: QosSchedule.from_list(rows) for lid, rows in (doc.get("schedules") or {}).items()}
        return cls(nodes, links, schedules)


def set_link_state(topology: ClusterTopology, link_id: str, state: str, t_ms: float) -> ClusterTopology:
    topology.set_link_state(link_id, state, t_ms)
    return topology


# ============================================================
# 메쉬 생성
# ============================================================

DEFAULT_QOS_RANGE = ((7.0, 223.0), (111.0, 995.0))


def _first_link_qos(a: NodeSpec, b: NodeSpec, reference: Optional[ReferenceMatrix],
                    intra_region: tuple[float, float]) -> Optional[tuple[float, float]]:
    if a.region.lower() == b.region.lower():
        return intra_region
    if reference is not None and reference.knows(a.region) and reference.knows(b.region):
        ref = reference.lookup(a.region, b.region)
        return ref.latency_ms, ref.down_bw_mbps
    return None


def build_mesh(nodes: list[NodeSpec], link_count: int, rng_seed: int,
               qos_range: tuple = DEFAULT_QOS_RANGE,
               reference: Optional[ReferenceMatrix] = None,
               intra_region: tuple[float, float] = (10.0, 1000.0),
               upload_range: tuple[float, float] = UPLOAD_RANGE_MBPS) -> ClusterTopology:
    """
    Seeded random connected multigraph with exactly `link_count` links.

    A random spanning tree comes first, then every remaining node pair once
    (shuffled), then redundant links on random pairs. First links per pair use
    reference values when both regions are known; redundant links sample
    latency/bandwidth uniformly from `qos_range`.
    """
    n = len(nodes)
    if n == 0:
        raise TopologyError("build_mesh needs at least one node")
    if link_count < n - 1:
        raise TopologyError(f"link_count {link_count} cannot connect {n} nodes (need ≥ {n - 1})")
    if n == 1 and link_count > 0:
        raise TopologyError("a single node cannot carry links")

    reference = reference if reference is not None else builtin_reference_matrix()
    (lat_lo, lat_hi), (bw_lo, bw_hi) = qos_range
    rng = np.random.default_rng(rng_seed)
    by_id = {nd.node_id: nd for nd in nodes}
    ids = [nd.node_id for nd in nodes]

    order = [ids[i] for i in rng.permutation(n)]
    tree = [(order[i], order[int(rng.integers(0, i))]) for i in range(1, n)]
    tree_keys = {frozenset(p) for p in tree}
    rest = [p for p in itertools.combinations(ids, 2) if frozenset(p) not in tree_keys]
    rest = [rest[i] for i in rng.permutation(len(rest))]
    all_pairs = list(itertools.combinations(ids, 2))

    def sampled() -> tuple[float, float, float]:
        return (round(float(rng.uniform(lat_lo, lat_hi)), 3),
                round(float(rng.uniform(bw_lo, bw_hi)), 3),
                round(float(rng.uniform(*upload_range)), 3))

    links: list[LinkSpec] = []
    per_pair: dict[frozenset, int] = {}
    for a, b in (tree + rest)[:link_count]:
        qos = _first_link_qos(by_id[a], by_id[b], reference, intra_region)
        if qos is None:
            lat, down, up = sampled()
        else:
            (lat, down), up = qos, None
        links.append(LinkSpec(f"l{len(links):02d}", a, b, lat, down, 0, up))
        per_pair[frozenset((a, b))] = 1

    while len(links) < link_count:
        a, b = all_pairs[int(rng.integers(0, len(all_pairs)))]
        key = frozenset((a, b))
        conn_type = per_pair.get(key, 0)
        lat, down, up = sampled()
        links.append(LinkSpec(f"l{len(links):02d}", a, b, lat, down, conn_type, up))
        per_pair[key] = conn_type + 1

    topo = ClusterTopology(nodes, links)
    logger.debug(f"mesh built: {n} nodes, {len(links)} links, seed={rng_seed}")
    return topo


# ============================================================
# 기준 프리셋 (8 리전 + 싱가포르 클라이언트)
# ============================================================

CLIENT_NODE_ID = "client"
DEFAULT_CLIENT_REGION = "Singapore"
DEFAULT_ROLE_MAP = {
    "melbourne": {"seed", "primary", "mgmt"},
    "virginia": {"non_voting"},
    "singapore": {"sql"},
}


def reference_nodes(reference: Optional[ReferenceMatrix] = None,
                    role_map: Optional[dict[str, set]] = None,
                    client_region: Optional[str] = DEFAULT_CLIENT_REGION) -> list[NodeSpec]:
    reference = reference or builtin_reference_matrix()
    role_map = DEFAULT_ROLE_MAP if role_map is None else role_map
    nodes = [NodeSpec(r.lower(), r, frozenset({"data"} | set(role_map.get(r.lower(), ()))))
             for r in reference.regions]
    if client_region:
        nodes.append(NodeSpec(CLIENT_NODE_ID, client_region, frozenset({"client"})))
    return nodes


def reference_topology(lsf: float = 1.0,
                       reference: Optional[ReferenceMatrix] = None,
                       client_region: str = DEFAULT_CLIENT_REGION,
                       intra_region: tuple[float, float] = (10.0, 1000.0),
                       role_map: Optional[dict[str, set]] = None,
                       inverse_bandwidth: bool = False) -> ClusterTopology:
    """
    Full mesh between the reference datacenters plus a client node with a
    direct link to every datacenter (the client region's row of the matrix;
    the co-located datacenter is reached over an intra-region link).
    """
    reference = reference or builtin_reference_matrix()
    nodes = reference_nodes(reference, role_map, client_region)
    data = [n for n in nodes if n.has("data")]
    links: list[LinkSpec] = []
    for a, b in itertools.combinations(data, 2):
        ref = reference.lookup(a.region, b.region)
        links.append(LinkSpec(f"{a.node_id}-{b.node_id}", a.node_id, b.node_id,
                              ref.latency_ms, ref.down_bw_mbps))
    for d in data:
        if d.region.lower() == client_region.lower():
            lat, bw = intra_region
        else:
            ref = reference.lookup(client_region, d.region)
            lat, bw = ref.latency_ms, ref.down_bw_mbps
        links.append(LinkSpec(f"{CLIENT_NODE_ID}-{d.node_id}", CLIENT_NODE_ID, d.node_id, lat, bw))
    schedules = {l.link_id: QosSchedule.from_lsf(lsf, inverse_bandwidth) for l in links}
    return ClusterTopology(nodes, links, schedules)

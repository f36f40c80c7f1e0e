"""오버레이 라우터: 경로 선택 규칙, failover 지연, BFS 오라클"""
from collections import deque

import networkx as nx
import numpy as np
import pytest

from fragsim.router import (
    OverlayNetwork, ReroutingError, RouteError, RouteTable, UnreachableError, mean_pair_latency,
    shortest_path,
)
from fragsim.simkernel import SimKernel
from fragsim.topology import LINK_DOWN, LINK_UP, ClusterTopology, LinkSpec, NodeSpec


def diamond():
    """vm0 ⇉ vm2 직접 링크 두 개(a, b) + vm1 경유 두 홉(c, d)."""
    nodes = [NodeSpec(f"vm{i}", f"r{i}") for i in range(3)]
    links = [
        LinkSpec("a", "vm0", "vm2", 210.0, 100.0, conn_type=0),
        LinkSpec("b", "vm0", "vm2", 140.0, 100.0, conn_type=1),
        LinkSpec("c", "vm0", "vm1", 40.0, 100.0),
        LinkSpec("d", "vm1", "vm2", 50.0, 100.0),
    ]
    return ClusterTopology(nodes, links)


# ============================================================
# 경로 선택
# ============================================================

def test_min_hops_beats_lower_latency():
    plan = shortest_path(diamond(), "vm0", "vm2", 0)
    # c+d 는 90 ms 로 더 빠르지만 두 홉
    assert plan.path == ("b",)
    assert plan.nodes == ("vm0", "vm2")
    assert plan.total_latency_ms == pytest.approx(140.0)


def test_latency_tie_broken_by_link_ids():
    nodes = [NodeSpec("vm0", "r0"), NodeSpec("vm1", "r1")]
    links = [LinkSpec("q", "vm0", "vm1", 50.0, 10.0, conn_type=0),
             LinkSpec("p", "vm0", "vm1", 50.0, 10.0, conn_type=1)]
    assert shortest_path(ClusterTopology(nodes, links), "vm0", "vm1", 0).path == ("p",)


def test_excluded_and_down_links_are_skipped():
    topo = diamond()
    assert shortest_path(topo, "vm0", "vm2", 0, exclude=["b"]).path == ("a",)
    topo.set_link_state("a", LINK_DOWN, 0)
    topo.set_link_state("b", LINK_DOWN, 0)
    assert shortest_path(topo, "vm0", "vm2", 0).path == ("c", "d")


def test_unreachable_and_same_node():
    topo = diamond()
    for lid in ("a", "b", "d"):
        topo.set_link_state(lid, LINK_DOWN, 0)
    with pytest.raises(UnreachableError):
        shortest_path(topo, "vm0", "vm2", 0)
    with pytest.raises(RouteError):
        shortest_path(topo, "vm0", "vm0", 0)


# ============================================================
# failover 지연
# ============================================================

def test_failover_sequence_waits_reroute_delay():
    topo = diamond()
    table = RouteTable(topo, reroute_delay_ms=30_000)
    assert table.get_route("vm0", "vm2", 0).path == ("b",)

    topo.set_link_state("b", LINK_DOWN, 1_000)
    with pytest.raises(ReroutingError) as err:
        table.get_route("vm0", "vm2", 2_000)
    assert err.value.ready_at_ms == pytest.approx(31_000)
    assert table.pending_ready_ms("vm0", "vm2") == pytest.approx(31_000)
    assert table.get_route("vm0", "vm2", 31_000).path == ("a",)

    topo.set_link_state("a", LINK_DOWN, 40_000)
    with pytest.raises(ReroutingError):
        table.get_route("vm0", "vm2", 69_999)
    assert table.get_route("vm0", "vm2", 70_000).path == ("c", "d")

    # 복구된 링크는 재계산 지연이 지나야 보인다
    topo.set_link_state("b", LINK_UP, 80_000)
    assert table.get_route("vm0", "vm2", 90_000).path == ("c", "d")
    assert table.get_route("vm0", "vm2", 110_000).path == ("b",)


def test_down_link_only_marks_pairs_using_it():
    topo = diamond()
    table = RouteTable(topo, reroute_delay_ms=30_000)
    table.get_route("vm0", "vm2", 0)
    table.get_route("vm0", "vm1", 0)
    topo.set_link_state("b", LINK_DOWN, 100)
    assert table.pending_ready_ms("vm0", "vm2") is not None
    assert table.pending_ready_ms("vm0", "vm1") is None
    assert table.get_route("vm0", "vm1", 200).path == ("c",)


def test_jitter_bounds_ready_time():
    topo = diamond()
    table = RouteTable(topo, jitter_ms=(10_000.0, 20_000.0), rng_seed=5)
    table.get_route("vm0", "vm2", 0)
    topo.set_link_state("b", LINK_DOWN, 0)
    assert 10_000 <= table.pending_ready_ms("vm0", "vm2") <= 20_000


def test_negative_delay_rejected():
    with pytest.raises(RouteError):
        RouteTable(diamond(), reroute_delay_ms=-1)


# ============================================================
# BFS 오라클 (랜덤 멀티그래프)
# ============================================================

ORACLE_SEEDS = range(500)


def random_multigraph(seed):
    """2..8 nodes, 1..64 links; every tenth seed is a full 8-node, 64-link multigraph."""
    rng = np.random.default_rng(seed)
    n = 8 if seed % 10 == 0 else int(rng.integers(2, 9))
    link_count = 64 if seed % 10 == 0 else int(rng.integers(1, 65))
    nodes = [NodeSpec(f"vm{i}", f"r{i}") for i in range(n)]
    per_pair, links = {}, []
    for k in range(link_count):
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        key = frozenset((a, b))
        conn_type = per_pair.get(key, 0)
        per_pair[key] = conn_type + 1
        links.append(LinkSpec(f"l{k:02d}", f"vm{a}", f"vm{b}", float(rng.integers(1, 300)), 100.0, conn_type))
    return ClusterTopology(nodes, links)


def bfs_hops(topo, src, dst):
    adj = {nid: set() for nid in topo.nodes}
    for link in topo.links.values():
        adj[link.a].add(link.b)
        adj[link.b].add(link.a)
    seen, queue = {src: 0}, deque([src])
    while queue:
        cur = queue.popleft()
        for nxt in sorted(adj[cur]):
            if nxt not in seen:
                seen[nxt] = seen[cur] + 1
                queue.append(nxt)
    return seen.get(dst)


def best_min_hop_latency(topo, src, dst):
    simple = nx.Graph(topo.graph())
    best = float("inf")
    for nodes in nx.all_shortest_paths(simple, src, dst):
        total = sum(min(l.base_latency_ms for l in topo.links_between(u, v))
                    for u, v in zip(nodes, nodes[1:]))
        best = min(best, total)
    return best


def test_oracle_graphs_cover_full_size():
    sizes = [(len(g.nodes), len(g.links)) for g in map(random_multigraph, ORACLE_SEEDS)]
    assert max(n for n, _ in sizes) == 8
    assert max(m for _, m in sizes) == 64
    assert min(n for n, _ in sizes) == 2


@pytest.mark.parametrize("seed", ORACLE_SEEDS)
def test_route_matches_bfs_oracle(seed):
    topo = random_multigraph(seed)
    ids = sorted(topo.nodes)
    for src in ids:
        for dst in ids:
            if src == dst:
                continue
            hops = bfs_hops(topo, src, dst)
            if hops is None:
                with pytest.raises(UnreachableError):
                    shortest_path(topo, src, dst, 0)
                continue
            plan = shortest_path(topo, src, dst, 0)
            assert plan.hop_count == hops
            assert plan.nodes[0] == src and plan.nodes[-1] == dst
            for lid, u, v in zip(plan.path, plan.nodes, plan.nodes[1:]):
                assert topo.link(lid).endpoints == frozenset((u, v))
            assert plan.total_latency_ms == pytest.approx(best_min_hop_latency(topo, src, dst))


# ============================================================
# 네트워크 뷰
# ============================================================

def chain():
    nodes = [NodeSpec(f"vm{i}", f"r{i}") for i in range(3)]
    links = [LinkSpec("x", "vm0", "vm1", 10.0, 100.0), LinkSpec("y", "vm1", "vm2", 20.0, 50.0)]
    return ClusterTopology(nodes, links)


def test_overlay_network_latency_bandwidth_and_send():
    topo = chain()
    kernel = SimKernel(topo)
    net = OverlayNetwork(topo, kernel, RouteTable(topo))
    assert net.latency_ms("vm0", "vm2") == pytest.approx(30.0)
    assert net.rtt_ms("vm0", "vm2") == pytest.approx(60.0)
    assert net.bandwidth_mbps("vm0", "vm2") == 50.0
    assert net.latency_ms("vm1", "vm1") == 0.0
    assert net.reachable("vm2", "vm0")

    got = []
    net.send("vm0", "vm2", 1000, tag="read.sync", on_delivery=lambda m, t: got.append((m.path, t)))
    kernel.run()
    assert got == [(("x", "y"), pytest.approx(30.24))]


def test_overlay_network_unreachable_after_failure():
    topo = chain()
    kernel = SimKernel(topo)
    net = OverlayNetwork(topo, kernel, RouteTable(topo, reroute_delay_ms=0))
    net.plan("vm0", "vm2")
    topo.set_link_state("y", LINK_DOWN, 0)
    assert not net.reachable("vm0", "vm2")
    assert net.reachable("vm0", "vm1")


def test_mean_pair_latency():
    mean, count = mean_pair_latency(chain(), 0)
    # (10 + 30 + 20) × 2 방향 / 6
    assert count == 6
    assert mean == pytest.approx(20.0)

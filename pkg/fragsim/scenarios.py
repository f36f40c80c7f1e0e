"""
시나리오 (Scenarios)
====================
세 가지 실험군을 시뮬레이터 위에서 실행한다.

1) lsf_sweep          → (워크로드 × LSF) 마다 독립 인스턴스, 5X(LSF=1.0) 대비 정규화
2) resize             → 120초 간격 온라인 다운사이징/업사이징 + all-nodes 기준선
                        (Redis 는 기본 offline: 크기마다 클러스터 재구성)
3) link_churn         → 64 링크 메쉬에서 링크 50개를 120초 간격으로 제거 (전후 60초 관찰)
   all_nodes_baseline → 8 노드 고정 실행만

SimulationInstance 하나 = 토폴로지 + 커널 + 라우터 + DB 모델 + 실행기 (공유 상태 없음).

사용법:
    spec = ScenarioSpec(kind="lsf_sweep", engine="cassandra", workloads=("A",))
    results = run_scenario(spec, SimConfig.from_app_config(ConfigLoader().load()))
    for r in results:
        print(r.summary.one_line())
"""

from __future__ import annotations

import copy
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import networkx as nx
import numpy as np

from fragsim.dbmodels import ENGINES, ChurnPlan, MembershipError, PayloadSizes, RedisModel, create_model
from fragsim.metrics import (
    MetricsError, RunResult, RunSummary, SettleEvent, ThroughputTimeline, TrafficMatrix,
    normalized_throughput, normalized_transferred,
)
from fragsim.router import OverlayNetwork, RouteError, RouteTable, mean_pair_latency
from fragsim.simkernel import EventKind, SimKernel
from fragsim.topology import (
    LINK_DOWN, ClusterTopology, LinkSpec, QosSchedule, TopologyError, build_mesh, builtin_reference_matrix,
    reference_nodes, reference_topology,
)
from fragsim.utils.logger import logger
from fragsim.workload import OperationExecutor, WorkloadRun, WorkloadSpec, preset, run_workload

SCENARIO_KINDS = ("lsf_sweep", "resize", "link_churn", "all_nodes_baseline")
DEFAULT_LSF_SET = (0.2, 0.4, 0.6, 0.8, 1.0)
RESIZE_ENGINES = ("cassandra", "mongodb", "redis")
# MongoDB 읽기 대상: sweep 은 기본값(primary), 멤버 변경과 링크 제거는 secondary 읽기
SCENARIO_READ_PREFERENCE = {"lsf_sweep": "primary"}

# 다운사이징 제거 순서 (업사이징은 역순으로 추가)
REMOVAL_ORDERS = {
    "cassandra": ("singapore", "sydney", "canberra", "pune", "dubai", "virginia"),
    "mongodb": ("singapore", "sydney", "canberra", "pune", "seoul", "dubai"),
    "redis": ("singapore", "sydney", "canberra", "pune", "dubai", "virginia"),
}


class ScenarioError(RuntimeError):
    pass


# ============================================================
# 설정
# ============================================================

@dataclass
class SimConfig:
    """Simulation settings shared by every instance of a scenario."""
    payload: PayloadSizes = field(default_factory=PayloadSizes)
    profiles: dict = field(default_factory=dict)
    engine_cfg: dict = field(default_factory=dict)
    reroute_delay_ms: float = 30000.0
    reroute_jitter_ms: Optional[tuple] = None
    timeout_factor: float = 5.0
    min_timeout_ms: float = 1000.0
    bucket_ms: int = 1000
    unresponsive_threshold_ms: int = 5000
    intra_region: tuple = (10.0, 1000.0)
    inverse_bandwidth: bool = False
    epochs: list = field(default_factory=list)
    topology_doc: Optional[dict] = None
    trace_dir: Optional[str] = None

    @classmethod
    def from_app_config(cls, cfg: dict, run_doc: Optional[dict] = None) -> "SimConfig":
        """Merge application defaults (config.yaml) with a validated run document."""
        run_doc = run_doc or {}
        router = {**cfg.get("router", {}), **run_doc.get("router", {})}
        topo = {**cfg.get("topology", {}), **run_doc.get("topology", {})}
        metrics = {**cfg.get("metrics", {}), **run_doc.get("metrics", {})}
        workload = {**cfg.get("workload", {}), **run_doc.get("workload", {})}
        jitter = router.get("jitter_ms")
        return cls(
            payload=PayloadSizes.from_dict({**cfg.get("payload", {}), **run_doc.get("payload", {})}),
            profiles=copy.deepcopy(cfg.get("engines", {})),
            engine_cfg=dict(run_doc.get("engine", {})),
            reroute_delay_ms=float(router.get("reroute_delay_ms", 30000.0)),
            reroute_jitter_ms=tuple(jitter) if jitter else None,
            timeout_factor=float(workload.get("timeout_factor", 5.0)),
            min_timeout_ms=float(workload.get("min_timeout_ms", 1000.0)),
            bucket_ms=int(metrics.get("bucket_ms", 1000)),
            unresponsive_threshold_ms=int(metrics.get("unresponsive_threshold_ms", 5000)),
            intra_region=(float(topo.get("intra_region_latency_ms", 10.0)),
                          float(topo.get("intra_region_bw_mbps", 1000.0))),
            inverse_bandwidth=bool(topo.get("inverse_bandwidth", False)),
            epochs=list(topo.get("epochs") or []),
            topology_doc=topo.get("custom"),
            trace_dir=run_doc.get("trace", {}).get("dir") if run_doc.get("trace", {}).get("enabled") else None,
        )


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    engine: str
    workloads: tuple = ("A",)
    lsf_set: tuple = DEFAULT_LSF_SET
    lsf: float = 1.0
    removal_order: Optional[tuple] = None
    step_interval_ms: float = 120000.0
    links_total: int = 64
    links_to_remove: int = 50
    dwell_ms: float = 60000.0
    connectivity_guard: bool = True
    redis_online: bool = False
    rng_seed: int = 0
    parallelism: int = 1
    workload_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind: {self.kind}")
        if self.engine not in ENGINES:
            raise ScenarioError(f"unknown engine: {self.engine}")
        if not self.workloads:
            raise ScenarioError("at least one workload is required")
        for value in tuple(self.lsf_set) + (self.lsf,):
            if not 0 < value <= 1:
                raise ScenarioError(f"LSF values must be in (0, 1], got {value}")
        if self.step_interval_ms <= 0 or self.dwell_ms <= 0:
            raise ScenarioError("step_interval_ms and dwell_ms must be > 0")
        if self.links_to_remove < 0 or self.links_total <= 0:
            raise ScenarioError("link counts must be positive")
        if self.parallelism < 1:
            raise ScenarioError("parallelism must be ≥ 1")

    def workload_spec(self, name: str) -> WorkloadSpec:
        return preset(name, **{"rng_seed": self.rng_seed, **self.workload_overrides})

    def order(self) -> tuple:
        if self.removal_order is not None:
            return tuple(self.removal_order)
        return REMOVAL_ORDERS.get(self.engine, ())


# ============================================================
# 토폴로지 준비
# ============================================================

def _with_epochs(topology: ClusterTopology, epochs: list, inverse_bandwidth: bool) -> ClusterTopology:
    if not epochs:
        return topology
    schedule = QosSchedule.from_list(epochs, inverse_bandwidth)
    return ClusterTopology(topology.nodes.values(), [copy.copy(l) for l in topology.links.values()],
                           {lid: schedule for lid in topology.links})


def base_topology(sim: SimConfig) -> ClusterTopology:
    """The reference 8-datacenter preset, or the run document's custom topology."""
    if sim.topology_doc:
        topo = ClusterTopology.from_dict(sim.topology_doc)
    else:
        topo = reference_topology(1.0, intra_region=sim.intra_region)
    return _with_epochs(topo, sim.epochs, sim.inverse_bandwidth)


def scaled_topology(sim: SimConfig, lsf: float, topology: Optional[ClusterTopology] = None) -> ClusterTopology:
    return (topology or base_topology(sim)).with_lsf(lsf, sim.inverse_bandwidth)


# ============================================================
# 시뮬레이션 인스턴스
# ============================================================

class SimulationInstance:
    """One independent simulation: topology, kernel, router, database model and executor."""

    def __init__(self, topology: ClusterTopology, engine: str, sim: SimConfig, seed: int = 0,
                 members: Optional[list] = None, trace_path: Optional[str] = None):
        self.topology = topology
        self.engine = engine
        self.sim = sim
        self.seed = seed
        self.traffic = TrafficMatrix()
        self.kernel = SimKernel(topology, self.traffic, trace_path)
        self.routes = RouteTable(topology, sim.reroute_delay_ms, sim.reroute_jitter_ms, rng_seed=seed,
                                 trace=self.kernel.note)
        self.network = OverlayNetwork(topology, self.kernel, self.routes)
        self.model = create_model(engine, topology, sim.engine_cfg, sim.payload, sim.profiles, members)
        self.model.bind(self.network)
        self.client = topology.client_node
        self.executor = OperationExecutor(self.network, self.model, sim.timeout_factor, sim.min_timeout_ms)
        self.settle_events: list[SettleEvent] = []

    def load(self, n_records: int) -> None:
        placement = self.model.place_records(n_records)
        self.kernel.note("placement", engine=self.engine, records=placement.record_count,
                         by_node=placement.records_by_node)

    def start_gossip(self) -> None:
        """Periodic peer heartbeats between cluster members (background traffic)."""
        interval = float(self.sim.payload.gossip_interval_ms)
        size = int(self.sim.payload.gossip_bytes)
        if interval <= 0 or size <= 0:
            return

        def tick(_ev) -> None:
            for a, b in self.model.background_pairs():
                try:
                    self.network.send(a, b, size, "gossip")
                except (RouteError, TopologyError):
                    continue
            self.kernel.schedule_after(interval, EventKind.TIMER, tick, {"gossip": True})

        self.kernel.schedule_after(interval, EventKind.TIMER, tick, {"gossip": True})

    # ── 멤버십 변경 ──

    def _stream(self, plan: ChurnPlan) -> None:
        for t in plan.transfers:
            try:
                self.network.send(t.src, t.dst, t.bytes, "stream")
            except (RouteError, TopologyError) as e:
                logger.debug(f"stream {t.src}→{t.dst} not sent: {e}")

    def churn(self, node: str, kind: str) -> SettleEvent:
        t = self.kernel.now_ms
        plan = self.model.remove_node(node, t) if kind == "remove" else self.model.add_node(node, t)
        self._stream(plan)
        event = SettleEvent(node, kind, t, round(plan.accept_ms, 3), round(plan.settle_ms, 3), plan.bulk_bytes)
        self.settle_events.append(event)
        self.kernel.note("membership_change", node=node, change=kind, accept_ms=event.accept_ms,
                         settle_ms=event.duration_ms, bulk_bytes=event.bulk_bytes)
        self.kernel.schedule_at(t + plan.settle_ms, EventKind.MEMBERSHIP, lambda ev: None,
                                {"node": node, "change": kind, "phase": "settled"})
        logger.info(f"{self.engine} {kind} {node} @ {t / 1000:.0f}s: settle {plan.settle_ms / 1000:.1f}s, "
                    f"{plan.bulk_bytes} B moved")
        return event

    def rebuild(self, members: list, node: str, kind: str) -> SettleEvent:
        """Offline resize: the cluster is recreated over `members` with the same records."""
        if not isinstance(self.model, RedisModel):
            raise ScenarioError(f"offline resize is only modeled for redis, not {self.engine}")
        t = self.kernel.now_ms
        self.model = self.model.rebuild(members)
        self.executor.model = self.model
        event = SettleEvent(node, kind, t, 0.0, 0.0, 0)
        self.settle_events.append(event)
        self.kernel.note("membership_change", node=node, change=kind, offline=True, members=list(members))
        logger.info(f"{self.engine} offline {kind} {node} @ {t / 1000:.0f}s → {len(members)} masters")
        return event

    # ── 요약 ──

    def summarize(self, run: WorkloadRun, scenario: str, lsf: float, label: str = "",
                  latency_trace: Optional[list] = None, extra: Optional[dict] = None) -> RunResult:
        data_nodes = self.topology.data_nodes()
        failed = run.count("failed") + run.count("timed_out")
        summary = RunSummary(
            scenario=scenario,
            engine=self.engine,
            workload=run.spec.name,
            lsf=float(lsf),
            label=label,
            seed=self.seed,
            total_ops=run.total_ops,
            completed_ops=run.count("ok"),
            failed_ops=failed,
            timed_out_ops=run.count("timed_out"),
            wall_virtual_ms=round(run.wall_ms, 3),
            throughput_ops_s=round(run.throughput_ops_s, 6),
            total_mb_transferred=round(self.traffic.total_bytes / 1e6, 6),
            batch_throughput=[round(x, 6) for x in run.batch_throughput],
            received_bytes_by_node=self.traffic.node_received(list(self.topology.nodes)),
            received_cv=round(self.traffic.coefficient_of_variation(data_nodes), 6),
            write_path_share={n: round(s, 6) for n, s in self.traffic.tag_share("write.sync", data_nodes).items()},
            settle_events=list(self.settle_events),
            unresponsive_windows=run.timeline.unresponsive_windows(
                self.sim.unresponsive_threshold_ms, run.started_ms, run.finished_ms),
            latency_trace=latency_trace or [],
            extra={"model": self.model.describe() if not isinstance(self.model, RedisModel)
                   else {"engine": "redis", "members": list(self.model.members),
                         "slot_counts": self.model.slot_counts()},
                   **(extra or {})},
            trace_hash=self.kernel.trace_hash,
        )
        self.kernel.close()
        return RunResult(summary, run.timeline, self.traffic, run.oplog)


def _trace_path(sim: SimConfig, parts: list) -> Optional[str]:
    if not sim.trace_dir:
        return None
    return "/".join([sim.trace_dir.rstrip("/")] + [p for p in parts if p] + ["trace.ndjson"])


def _timeline(sim: SimConfig) -> ThroughputTimeline:
    return ThroughputTimeline(sim.bucket_ms)


# ============================================================
# 1) LSF sweep
# ============================================================

def _sweep_point(args: tuple) -> RunResult:
    spec, sim, workload, lsf, topo_doc = args
    topology = ClusterTopology.from_dict(topo_doc).with_lsf(lsf, sim.inverse_bandwidth)
    label = f"lsf-{lsf:g}"
    log = logger.bind(engine=spec.engine, workload=workload, lsf=lsf)
    wspec = spec.workload_spec(workload)
    inst = SimulationInstance(topology, spec.engine, sim, spec.rng_seed,
                              trace_path=_trace_path(sim, [spec.kind, spec.engine, wspec.name, label]))
    inst.load(wspec.record_count)
    inst.start_gossip()
    run = run_workload(wspec, inst.model, inst.client, inst.network, timeline=_timeline(sim),
                       executor=inst.executor)
    result = inst.summarize(run, spec.kind, lsf, label)
    log.info(result.summary.one_line())
    return result


def run_lsf_sweep(spec: ScenarioSpec, sim: SimConfig,
                  topology: Optional[ClusterTopology] = None) -> list[RunResult]:
    """One independent instance per (workload, LSF); summaries carry ratios against LSF=1.0."""
    base = topology or base_topology(sim)
    sim = replace(sim, engine_cfg=spec_engine_cfg(spec, base, sim.engine_cfg))
    doc = base.to_dict()
    points = [(spec, sim, w, float(lsf), doc) for w in spec.workloads for lsf in spec.lsf_set]
    logger.info(f"lsf_sweep {spec.engine}: {len(points)} runs (parallelism={spec.parallelism})")
    if spec.parallelism > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            results = list(pool.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]

    width = len(spec.lsf_set)
    for i in range(0, len(results), width):
        group = results[i:i + width]
        by_lsf = {r.summary.lsf: r.summary for r in group}
        try:
            tp = normalized_throughput(by_lsf)
            mb = normalized_transferred(by_lsf)
        except MetricsError as e:
            logger.warning(f"{group[0].summary.workload}: not normalized ({e})")
            continue
        for r in group:
            r.summary.extra["normalized_throughput"] = round(tp[round(r.summary.lsf, 6)], 6)
            r.summary.extra["normalized_transferred"] = round(mb[round(r.summary.lsf, 6)], 6)
    return results


# ============================================================
# 2) resize
# ============================================================

def check_removal_order(spec: ScenarioSpec, topology: ClusterTopology, engine_cfg: Optional[dict] = None) -> list[str]:
    """Problems with the removal order for this engine/topology (empty when valid)."""
    problems = []
    order = spec.order()
    data = set(topology.data_nodes())
    if spec.engine not in RESIZE_ENGINES:
        return [f"resize is not supported for {spec.engine} (node groups are fixed)"]
    model = create_model(spec.engine, topology, spec_engine_cfg(spec, topology, engine_cfg or {}))
    for node in order:
        if node not in data:
            problems.append(f"removal order names unknown data node '{node}'")
            continue
        reason = model.protection_reason(node)
        if reason:
            problems.append(f"removal order contains '{node}': {reason}")
    if len(set(order)) != len(order):
        problems.append("removal order repeats a node")
    if order and len(data) - len(order) < (2 if spec.engine == "redis" else 1):
        problems.append(f"removal order leaves {len(data) - len(order)} nodes, too few for {spec.engine}")
    return problems


def spec_engine_cfg(spec: ScenarioSpec, topology: ClusterTopology, engine_cfg: dict) -> dict:
    """Engine config for this scenario; Cassandra's RF is capped at the smallest cluster size on resize."""
    cfg = dict(engine_cfg)
    if not cfg.get("read_preference"):
        cfg["read_preference"] = SCENARIO_READ_PREFERENCE.get(spec.kind, "nearest_secondary")
    if spec.engine == "cassandra" and spec.kind == "resize":
        smallest = len(topology.data_nodes()) - len(spec.order())
        rf = int(cfg.get("rf", 3))
        if rf > smallest:
            logger.warning(f"cassandra rf {rf} > smallest cluster size {smallest}; using rf={smallest}")
            cfg["rf"] = smallest
            cfg["cl"] = min(int(cfg.get("cl", 1)), smallest)
    return cfg


def _resize_run(spec: ScenarioSpec, sim: SimConfig, topology: ClusterTopology, workload: str,
                direction: str) -> RunResult:
    order = list(spec.order())
    data = sorted(topology.data_nodes())
    offline = spec.engine == "redis" and not spec.redis_online
    if direction == "downsizing":
        members, steps = data, [(n, "remove") for n in order]
    else:
        members, steps = [n for n in data if n not in order], [(n, "add") for n in reversed(order)]
    label = direction
    wspec = spec.workload_spec(workload)
    sim_run = replace(sim, engine_cfg=spec_engine_cfg(spec, topology, sim.engine_cfg))
    inst = SimulationInstance(topology.copy(), spec.engine, sim_run, spec.rng_seed, members,
                              _trace_path(sim, [spec.kind, spec.engine, wspec.name, label]))
    inst.load(wspec.record_count)
    inst.start_gossip()

    current = list(members)
    for k, (node, kind) in enumerate(steps, start=1):
        def apply(_ev, node=node, kind=kind) -> None:
            if kind == "remove":
                current.remove(node)
            else:
                current.append(node)
            if offline:
                inst.rebuild(sorted(current), node, kind)
            else:
                try:
                    inst.churn(node, kind)
                except MembershipError as e:
                    raise ScenarioError(str(e)) from e
        inst.kernel.schedule_at(k * spec.step_interval_ms, EventKind.MEMBERSHIP, apply,
                                {"node": node, "change": kind, "phase": "requested"})

    until = (len(steps) + 1) * spec.step_interval_ms
    run = run_workload(wspec, inst.model, inst.client, inst.network, until_ms=until,
                       timeline=_timeline(sim), executor=inst.executor)
    result = inst.summarize(run, spec.kind, spec.lsf, label,
                            extra={"final_members": sorted(inst.model.members), "offline": offline})
    logger.info(result.summary.one_line())
    return result


def _all_nodes_run(spec: ScenarioSpec, sim: SimConfig, topology: ClusterTopology, workload: str,
                   operation_count: Optional[int] = None) -> RunResult:
    wspec = spec.workload_spec(workload)
    if operation_count:
        wspec = wspec.with_overrides(operation_count=operation_count)
    label = "all_nodes"
    inst = SimulationInstance(topology.copy(), spec.engine, sim, spec.rng_seed,
                              trace_path=_trace_path(sim, [spec.kind, spec.engine, wspec.name, label]))
    inst.load(wspec.record_count)
    inst.start_gossip()
    run = run_workload(wspec, inst.model, inst.client, inst.network, timeline=_timeline(sim),
                       executor=inst.executor)
    result = inst.summarize(run, spec.kind, spec.lsf, label)
    logger.info(result.summary.one_line())
    return result


def run_resize(spec: ScenarioSpec, sim: SimConfig, topology: Optional[ClusterTopology] = None) -> list[RunResult]:
    """Downsizing, upsizing and the all-nodes baseline (same op count as the downsizing run)."""
    topology = scaled_topology(sim, spec.lsf, topology)
    sim = replace(sim, engine_cfg=spec_engine_cfg(spec, topology, sim.engine_cfg))
    if spec.kind == "all_nodes_baseline":
        return [_all_nodes_run(spec, sim, topology, w) for w in spec.workloads]
    problems = check_removal_order(spec, topology, sim.engine_cfg)
    if problems:
        raise ScenarioError("; ".join(problems))
    results = []
    for workload in spec.workloads:
        down = _resize_run(spec, sim, topology, workload, "downsizing")
        up = _resize_run(spec, sim, topology, workload, "upsizing")
        base = _all_nodes_run(spec, sim, topology, workload, down.summary.total_ops)
        if sorted(up.summary.extra["final_members"]) != sorted(topology.data_nodes()):
            raise ScenarioError("upsizing did not restore the initial node set")
        results.extend([down, up, base])
    return results


# ============================================================
# 3) link churn
# ============================================================

def _client_isolated(topology: ClusterTopology, without: str) -> bool:
    g = topology.graph()
    link = topology.link(without)
    g.remove_edge(link.a, link.b, key=without)
    client = topology.client_node
    reachable = nx.node_connected_component(g, client)
    return not (reachable & set(topology.data_nodes()))


def churn_topology(spec: ScenarioSpec, sim: SimConfig) -> ClusterTopology:
    """`links_total` mesh links among the data nodes; the client hangs off its home datacenter."""
    nodes = reference_nodes()
    data = [n for n in nodes if n.has("data")]
    mesh = build_mesh(data, spec.links_total, spec.rng_seed, reference=builtin_reference_matrix(),
                      intra_region=sim.intra_region)
    links = list(mesh.links.values())
    for client in (n for n in nodes if n.has("client")):
        home = next((d.node_id for d in data if d.region == client.region), data[0].node_id)
        lat, bw = sim.intra_region
        links.append(LinkSpec(f"{client.node_id}-{home}", client.node_id, home, lat, bw))
    topo = ClusterTopology(nodes, links)
    return _with_epochs(topo, sim.epochs, sim.inverse_bandwidth).with_lsf(spec.lsf, sim.inverse_bandwidth)


def _recovery_ms(windows: list, t_ms: float, dwell_ms: float) -> float:
    for start, length in windows:
        if t_ms <= start < t_ms + dwell_ms:
            return round(start + length - t_ms, 3)
    return 0.0


def run_link_churn(spec: ScenarioSpec, sim: SimConfig,
                   topology: Optional[ClusterTopology] = None) -> list[RunResult]:
    """Remove links one by one (dwell before/after each) while the workload runs."""
    base = topology or churn_topology(spec, sim)
    sim = replace(sim, engine_cfg=spec_engine_cfg(spec, base, sim.engine_cfg))
    # 클라이언트 접속 링크는 제거 대상이 아니다
    mesh = sorted(lid for lid, l in base.links.items() if base.client_node not in (l.a, l.b))
    data_count = len(base.data_nodes())
    spare = len(mesh) - (data_count - 1)
    if spec.connectivity_guard and spec.links_to_remove > spare:
        raise ScenarioError(f"removing {spec.links_to_remove} of {len(mesh)} links cannot keep "
                            f"{data_count} nodes connected (at most {spare})")
    if spec.links_to_remove > len(mesh):
        raise ScenarioError(f"cannot remove {spec.links_to_remove} links from {len(mesh)}")

    results = []
    for workload in spec.workloads:
        wspec = spec.workload_spec(workload)
        inst = SimulationInstance(base.copy(), spec.engine, sim, spec.rng_seed,
                                  trace_path=_trace_path(sim, [spec.kind, spec.engine, wspec.name]))
        topo = inst.topology
        rng = np.random.default_rng(spec.rng_seed + 1)
        data_nodes = topo.data_nodes()
        trace: list[dict] = []
        removal_times = [spec.dwell_ms + k * 2 * spec.dwell_ms for k in range(spec.links_to_remove)]

        def remove(ev) -> None:
            up = [lid for lid in mesh if topo.links[lid].is_up]
            if spec.connectivity_guard:
                candidates = [lid for lid in up if topo.is_connected(without=[lid])]
            else:
                candidates = [lid for lid in up if not _client_isolated(topo, lid)]
            if not candidates:
                logger.warning(f"no removable link left @ {ev.t_ms / 1000:.0f}s")
                return
            lid = candidates[int(rng.integers(0, len(candidates)))]
            routed = any(plan is not None and lid in plan.path for plan in inst.routes.routes.values())
            before, _ = mean_pair_latency(topo, ev.t_ms, data_nodes)
            topo.set_link_state(lid, LINK_DOWN, ev.t_ms)
            after, pairs = mean_pair_latency(topo, ev.t_ms, data_nodes)
            trace.append({"t_ms": ev.t_ms, "link": lid, "routed": routed,
                          "before_ms": round(before, 3), "after_ms": round(after, 3), "pairs": pairs})
            logger.info(f"link {lid} removed @ {ev.t_ms / 1000:.0f}s (routed={routed}), "
                        f"mean latency {before:.1f} → {after:.1f} ms")

        for t in removal_times:
            inst.kernel.schedule_at(t, EventKind.LINK_STATE, remove, {"churn": "remove"})

        inst.load(wspec.record_count)
        inst.start_gossip()
        until = (removal_times[-1] if removal_times else 0.0) + spec.dwell_ms
        run = run_workload(wspec, inst.model, inst.client, inst.network, until_ms=until,
                           timeline=_timeline(sim), executor=inst.executor)

        windows = run.timeline.unresponsive_windows(sim.unresponsive_threshold_ms, run.started_ms, run.finished_ms)
        for row in trace:
            row["recovery_ms"] = _recovery_ms(windows, row["t_ms"], 2 * spec.dwell_ms)
        dense_end = removal_times[0] if removal_times else until
        sparse_start = (removal_times[-1] + sim.reroute_delay_ms) if removal_times else 0.0
        extra = {
            "dense_throughput_ops_s": round(run.timeline.throughput(0.0, dense_end), 6),
            "sparse_throughput_ops_s": round(run.timeline.throughput(min(sparse_start, until), until), 6),
            "links_removed": len(trace),
            "links_remaining": sum(1 for lid in mesh if topo.links[lid].is_up),
        }
        result = inst.summarize(run, spec.kind, spec.lsf, "", latency_trace=trace, extra=extra)
        logger.info(result.summary.one_line())
        results.append(result)
    return results


# ============================================================
# 디스패치
# ============================================================

def run_scenario(spec: ScenarioSpec, sim: SimConfig) -> list[RunResult]:
    if spec.kind == "lsf_sweep":
        return run_lsf_sweep(spec, sim)
    if spec.kind in ("resize", "all_nodes_baseline"):
        return run_resize(spec, sim)
    return run_link_churn(spec, sim)

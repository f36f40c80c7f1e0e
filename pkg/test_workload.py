"""워크로드: YCSB 프리셋, 키 선택기, closed-loop 배치, timeout/재시도 결과"""
from collections import Counter

import numpy as np
import pytest

from fragsim.dbmodels import RedisModel, create_model
from fragsim.metrics import TrafficMatrix
from fragsim.router import OverlayNetwork, RouteTable
from fragsim.simkernel import SimKernel
from fragsim.topology import LINK_DOWN, LINK_UP, ClusterTopology, LinkSpec, NodeSpec, reference_topology
from fragsim.workload import (
    PRESET_NAMES, OperationExecutor, OperationStream, ScrambledZipfianGenerator, SkewedLatestGenerator,
    WorkloadError, WorkloadSpec, ZipfianGenerator, preset, run_workload,
)


# ============================================================
# 프리셋 / 스펙
# ============================================================

def test_presets():
    assert PRESET_NAMES == ("A", "B", "C", "D", "E", "F")
    assert preset("C").proportions == {"read": 1.0}
    assert preset("a").proportions == {"read": 0.5, "update": 0.5}
    assert preset("D").key_distribution == "latest"
    assert preset("E").operation_count == 10000
    assert preset("F", record_count=50, threads=None).record_count == 50


def test_invalid_specs():
    with pytest.raises(WorkloadError):
        preset("G")
    with pytest.raises(WorkloadError):
        WorkloadSpec("x", {"read": 0.5})
    with pytest.raises(WorkloadError):
        WorkloadSpec("x", {"delete": 1.0})
    with pytest.raises(WorkloadError):
        preset("A", threads=0)


# ============================================================
# op 스트림 / 키 선택기
# ============================================================

def _signature(spec, n=300):
    return [(op.kind, op.key_index, op.scan_len) for op in OperationStream(spec).take(n)]


def test_stream_is_seeded():
    spec = preset("E", record_count=500, rng_seed=3)
    assert _signature(spec) == _signature(spec)
    assert _signature(spec) != _signature(spec.with_overrides(rng_seed=4))


def test_stream_mix_and_inserts():
    ops = OperationStream(preset("C", record_count=100)).take(500)
    assert {op.kind for op in ops} == {"read"}
    assert all(0 <= op.key_index < 100 for op in ops)

    inserts = [op.key_index for op in OperationStream(preset("D", record_count=100, rng_seed=1)).take(2000)
               if op.kind == "insert"]
    assert inserts == list(range(100, 100 + len(inserts)))

    scans = [op for op in OperationStream(preset("E", record_count=100, max_scan_len=7)).take(500)
             if op.kind == "scan"]
    assert scans and all(1 <= op.scan_len <= 7 for op in scans)


@pytest.mark.parametrize("name", ["A", "B", "D", "F"])
@pytest.mark.parametrize("seed", [0, 11])
def test_op_mix_matches_proportions_over_10k_ops(name, seed):
    spec = preset(name, record_count=1000, rng_seed=seed)
    kinds = Counter(op.kind for op in OperationStream(spec).take(10_000))
    assert set(kinds) == set(spec.proportions)
    for kind, share in spec.proportions.items():
        assert kinds[kind] / 10_000 == pytest.approx(share, abs=0.01)


def test_zipfian_range_and_skew():
    rng = np.random.default_rng(0)
    gen = ZipfianGenerator(100)
    draws = [gen.next(rng) for _ in range(5000)]
    assert all(0 <= d < 100 for d in draws)
    assert Counter(draws).most_common(1)[0][0] == 0

    scrambled = ScrambledZipfianGenerator()
    assert all(0 <= scrambled.next(rng, 37) < 37 for _ in range(1000))

    latest = SkewedLatestGenerator(100)
    assert Counter(latest.next(rng, 100) for _ in range(5000)).most_common(1)[0][0] == 99


def test_zipfian_grows_with_items():
    rng = np.random.default_rng(1)
    gen = ZipfianGenerator(10)
    assert all(0 <= gen.next(rng, 50) < 50 for _ in range(500))
    assert gen.items == 50


# ============================================================
# closed-loop
# ============================================================

def _reference(engine="mongodb", records=50):
    topo = reference_topology()
    net = OverlayNetwork(topo, SimKernel(topo), RouteTable(topo))
    model = create_model(engine, topo).bind(net)
    model.place_records(records)
    return net, model


def test_op_count_mode_runs_batches():
    net, model = _reference()
    spec = preset("C", record_count=50, operation_count=23, batches=5, threads=2)
    run = run_workload(spec, model, "client", net)
    assert run.total_ops == 23
    assert run.count("ok") == 23
    assert len(run.batch_throughput) == 5
    assert run.timeline.total == 23
    assert run.throughput_ops_s > 0
    assert len(run.oplog.to_frame()) == 23


def test_duration_mode_stops_issuing():
    net, model = _reference("cassandra")
    spec = preset("A", record_count=50, threads=3)
    run = run_workload(spec, model, "client", net, until_ms=3000)
    assert run.total_ops > 0
    assert all(op.issued_at < 3000 for op in run.operations)
    assert net.kernel.now_ms == 3000.0


# ============================================================
# timeout / 재시도
# ============================================================

def _single_link():
    nodes = [NodeSpec("client", "r0", frozenset({"client"})), NodeSpec("vm1", "r1")]
    topo = ClusterTopology(nodes, [LinkSpec("x", "client", "vm1", 10.0, 100.0)])
    net = OverlayNetwork(topo, SimKernel(topo), RouteTable(topo, reroute_delay_ms=30_000))
    model = RedisModel(["vm1"]).bind(net)
    model.place_records(10)
    return net, model


def _one_read(net, model):
    spec = preset("C", record_count=10, operation_count=1, threads=1, batches=1)
    executor = OperationExecutor(net, model, timeout_factor=5.0, min_timeout_ms=1000.0)
    run = run_workload(spec, model, "client", net, executor=executor)
    assert run.total_ops == 1
    return run.operations[0]


def test_lost_request_retries_after_reroute():
    net, model = _single_link()
    net.kernel.schedule_link_state("x", LINK_DOWN, 5.0)
    net.kernel.schedule_link_state("x", LINK_UP, 100.0)
    op = _one_read(net, model)
    assert op.outcome == "ok"
    assert op.attempts == 2
    assert op.completed_at > 30_100


def test_second_loss_times_out():
    net, model = _single_link()
    net.kernel.schedule_link_state("x", LINK_DOWN, 5.0)
    net.kernel.schedule_link_state("x", LINK_UP, 100.0)
    net.kernel.schedule_link_state("x", LINK_DOWN, 30_105.0)
    op = _one_read(net, model)
    assert op.outcome == "timed_out"
    assert op.completed_at == pytest.approx(31_100.0)


def test_unroutable_retry_fails():
    net, model = _single_link()
    net.kernel.schedule_link_state("x", LINK_DOWN, 5.0)
    op = _one_read(net, model)
    assert op.outcome == "failed"
    assert op.attempts == 2


def test_executor_rejects_bad_timeouts():
    net, model = _single_link()
    with pytest.raises(WorkloadError):
        OperationExecutor(net, model, min_timeout_ms=0)


# ============================================================
# 끝난 op 이후의 복제 트래픽
# ============================================================

def _traffic_run(engine):
    topo = reference_topology()
    traffic = TrafficMatrix()
    net = OverlayNetwork(topo, SimKernel(topo, traffic), RouteTable(topo))
    model = create_model(engine, topo).bind(net)
    model.place_records(10)
    spec = WorkloadSpec("U", {"update": 1.0}, record_count=10, operation_count=1, threads=1, batches=1)
    run = run_workload(spec, model, "client", net)
    assert run.count("ok") == 1
    return run, net, traffic


def _tag_total(traffic, tag):
    return sum(size for (_dst, t), size in traffic.tag_bytes.items() if t == tag)


def test_late_replica_acks_are_still_delivered():
    # CL=1: 첫 ack 로 완료되지만 나머지 두 복제본도 쓰고 ack 를 보낸다
    _, _, traffic = _traffic_run("cassandra")
    assert _tag_total(traffic, "write.sync") == 4 * (128 + 1000)
    assert _tag_total(traffic, "response") == 4 * 64
    assert traffic.conserved()


def test_oplog_in_flight_at_completion_is_delivered():
    run, net, traffic = _traffic_run("mongodb")
    assert _tag_total(traffic, "write.async") == 7 * (128 + 1000)
    assert net.kernel.in_flight() == 0
    assert net.kernel.now_ms > run.finished_ms

"""
워크로드 (YCSB 스타일 closed-loop)
==================================
- WorkloadSpec / preset()     → YCSB 코어 워크로드 A–F (비율, 키 분포, 레코드/op 수)
- ZipfianGenerator 등          → YCSB 키 선택기 (zipfian θ=0.99, scrambled, latest, uniform)
- OperationStream             → 시드 고정 op 시퀀스 (kind, key, scan 길이)
- OperationExecutor           → OperationPlan 을 커널 메시지로 실행 (노드 서비스 FIFO, quorum, timeout, 재시도 1회)
- run_workload()              → threads 개 논리 클라이언트 closed-loop 실행, 1초 타임라인 + op 로그

"10K operations for 10 times" → 배치 10개를 순차 실행 (배치 사이 barrier), 배치별/전체 처리량 기록.

사용법:
    spec = preset("A", record_count=1000, operation_count=5000, rng_seed=7)
    model.place_records(spec.record_count)
    run = run_workload(spec, model, "client", network)
    print(run.throughput_ops_s, run.timeline.total)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from fragsim.dbmodels.base import Call, DbClusterModel, DbModelError, OperationPlan, key_name
from fragsim.metrics import OpLog, OpRecord, ThroughputTimeline
from fragsim.router import OverlayNetwork, ReroutingError, RouteError
from fragsim.simkernel import Event, EventKind
from fragsim.topology import TopologyError
from fragsim.utils.logger import logger

OP_KINDS = ("read", "update", "insert", "scan", "rmw")
KEY_DISTRIBUTIONS = ("zipfian", "latest", "uniform")
OUTCOMES = ("ok", "failed", "timed_out")


class WorkloadError(ValueError):
    pass


# ============================================================
# 워크로드 정의
# ============================================================

@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    proportions: dict
    record_count: int = 10000
    operation_count: int = 100000
    key_distribution: str = "zipfian"
    zipfian_theta: float = 0.99
    max_scan_len: int = 100
    threads: int = 4
    batches: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        unknown = set(self.proportions) - set(OP_KINDS)
        if unknown:
            raise WorkloadError(f"unknown op kinds in proportions: {sorted(unknown)}")
        if any(p < 0 for p in self.proportions.values()):
            raise WorkloadError("proportions must be ≥ 0")
        if abs(sum(self.proportions.values()) - 1.0) > 1e-9:
            raise WorkloadError(f"proportions must sum to 1, got {sum(self.proportions.values())}")
        if self.key_distribution not in KEY_DISTRIBUTIONS:
            raise WorkloadError(f"unknown key_distribution: {self.key_distribution}")
        for name in ("record_count", "operation_count", "threads", "batches", "max_scan_len"):
            if getattr(self, name) <= 0:
                raise WorkloadError(f"{name} must be > 0")
        if not 0 < self.zipfian_theta < 1:
            raise WorkloadError("zipfian_theta must be in (0, 1)")

    def with_overrides(self, **overrides) -> "WorkloadSpec":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "WorkloadSpec":
        return cls(**doc)


_PRESETS = {
    "A": ({"read": 0.5, "update": 0.5}, "zipfian", {}),
    "B": ({"read": 0.95, "update": 0.05}, "zipfian", {}),
    "C": ({"read": 1.0}, "zipfian", {}),
    "D": ({"read": 0.95, "insert": 0.05}, "latest", {}),
    "E": ({"scan": 0.95, "insert": 0.05}, "zipfian", {"operation_count": 10000}),
    "F": ({"read": 0.5, "rmw": 0.5}, "zipfian", {}),
}

PRESET_NAMES = tuple(_PRESETS)

PRESET_DESCRIPTIONS = {
    "A": "Update heavy: 50% reads, 50% updates",
    "B": "Read mostly: 95% reads, 5% updates",
    "C": "Read only: 100% reads",
    "D": "Read latest: 95% reads, 5% inserts, newest records most popular",
    "E": "Short ranges: 95% scans, 5% inserts",
    "F": "Read-modify-write: 50% reads, 50% read-modify-writes",
}


def preset(name: str, **overrides) -> WorkloadSpec:
    """YCSB core workload A–F; keyword overrides replace record/op counts, threads, seed, ..."""
    key = str(name).upper()
    if key not in _PRESETS:
        raise WorkloadError(f"unknown workload preset: {name} (expected one of {', '.join(PRESET_NAMES)})")
    proportions, distribution, extra = _PRESETS[key]
    spec = WorkloadSpec(key, dict(proportions), key_distribution=distribution, **extra)
    return spec.with_overrides(**overrides)


# ============================================================
# 키 선택기
# ============================================================

def zeta(n: int, theta: float, start: int = 0, initial: float = 0.0) -> float:
    """Σ_{i=start+1..n} 1/i^θ added to `initial`."""
    if n <= start:
        return initial
    return initial + float(np.sum(np.arange(start + 1, n + 1, dtype=float) ** -theta))


class ZipfianGenerator:
    """Zipfian over [0, items) with popularity decreasing in the item index; items may grow."""

    def __init__(self, items: int, theta: float = 0.99, zetan: Optional[float] = None):
        if items <= 0:
            raise WorkloadError("zipfian needs at least one item")
        self.theta = theta
        self.alpha = 1.0 / (1.0 - theta)
        self.zeta2 = zeta(2, theta)
        self.items = items
        self.zetan = zetan if zetan is not None else zeta(items, theta)
        self._update_eta()

    def _update_eta(self) -> None:
        self.eta = (1 - (2.0 / self.items) ** (1 - self.theta)) / (1 - self.zeta2 / self.zetan)

    def _grow(self, items: int) -> None:
        if items > self.items:
            self.zetan = zeta(items, self.theta, self.items, self.zetan)
            self.items = items
            self._update_eta()

    def next(self, rng: np.random.Generator, items: Optional[int] = None) -> int:
        if items is not None:
            self._grow(items)
        u = rng.random()
        uz = u * self.zetan
        if uz < 1.0:
            return 0
        if uz < 1.0 + 0.5 ** self.theta:
            return 1
        return min(int(self.items * (self.eta * u - self.eta + 1) ** self.alpha), self.items - 1)


FNV_OFFSET_BASIS_64 = 0xCBF29CE484222325
FNV_PRIME_64 = 1099511628211
_MASK_64 = (1 << 64) - 1


def fnv_hash64(value: int) -> int:
    h = FNV_OFFSET_BASIS_64
    for _ in range(8):
        h ^= value & 0xFF
        h = (h * FNV_PRIME_64) & _MASK_64
        value >>= 8
    # 부호 있는 64비트의 절댓값
    return (1 << 64) - h if h >= 1 << 63 else h


class ScrambledZipfianGenerator:
    """Zipfian popularity scattered over the key space by FNV hashing (YCSB default)."""

    ITEM_COUNT = 10_000_000_000
    ZETAN = 26.46902820178302

    def __init__(self, theta: float = 0.99):
        self.theta = theta
        if abs(theta - 0.99) < 1e-12:
            self._zipf = ZipfianGenerator(self.ITEM_COUNT, theta, self.ZETAN)
        else:
            # 상수 zetan 은 θ=0.99 전용; 다른 θ 는 작은 공간에서 직접 계산
            self._zipf = ZipfianGenerator(1_000_000, theta)

    def next(self, rng: np.random.Generator, items: int) -> int:
        return fnv_hash64(self._zipf.next(rng)) % items


class SkewedLatestGenerator:
    """Most recently inserted keys are the most popular."""

    def __init__(self, items: int, theta: float = 0.99):
        self._zipf = ZipfianGenerator(items, theta)

    def next(self, rng: np.random.Generator, items: int) -> int:
        return items - 1 - self._zipf.next(rng, items)


class UniformGenerator:
    def next(self, rng: np.random.Generator, items: int) -> int:
        return int(rng.integers(0, items))


def key_chooser(spec: WorkloadSpec):
    if spec.key_distribution == "zipfian":
        return ScrambledZipfianGenerator(spec.zipfian_theta)
    if spec.key_distribution == "latest":
        return SkewedLatestGenerator(spec.record_count, spec.zipfian_theta)
    return UniformGenerator()


# ============================================================
# op
# ============================================================

@dataclass
class Operation:
    op_id: int
    kind: str
    key_index: int
    scan_len: int = 0
    thread: int = 0
    issued_at: Optional[float] = None
    completed_at: Optional[float] = None
    outcome: str = "pending"
    bytes_moved: int = 0
    attempts: int = 0

    @property
    def key(self) -> str:
        return key_name(self.key_index)

    @property
    def terminal(self) -> bool:
        return self.outcome in OUTCOMES

    def to_record(self) -> OpRecord:
        return OpRecord(self.op_id, self.kind, self.key, self.issued_at, self.completed_at,
                        self.outcome, self.bytes_moved)


# op 종류는 MIX_BLOCK 개 단위로 비율을 맞춘 뒤 순서만 섞는다
MIX_BLOCK = 100


def _block_counts(weights: list[float], size: int) -> np.ndarray:
    """Largest-remainder split of `size` slots by weight."""
    share = np.asarray(weights, dtype=float) / sum(weights) * size
    counts = np.floor(share).astype(int)
    short = size - int(counts.sum())
    order = np.argsort(-(share - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


class OperationStream:
    """Deterministic op sequence for a spec; inserts extend the key space sequentially."""

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.rng_seed)
        self.kinds = [k for k in OP_KINDS if spec.proportions.get(k, 0) > 0]
        self.block_counts = _block_counts([spec.proportions[k] for k in self.kinds], MIX_BLOCK)
        self._block: list[int] = []
        self.chooser = key_chooser(spec)
        self.next_insert = spec.record_count
        self.issued = 0

    def _kind(self) -> str:
        if not self._block:
            block = np.repeat(np.arange(len(self.kinds)), self.block_counts)
            self.rng.shuffle(block)
            self._block = block.tolist()
        return self.kinds[self._block.pop()]

    def next(self, thread: int = 0) -> Operation:
        kind = self._kind()
        scan_len = 0
        if kind == "insert":
            key = self.next_insert
            self.next_insert += 1
        else:
            key = self.chooser.next(self.rng, self.next_insert)
            if kind == "scan":
                scan_len = int(self.rng.integers(1, self.spec.max_scan_len + 1))
        op = Operation(self.issued, kind, key, scan_len, thread)
        self.issued += 1
        return op

    def take(self, n: int) -> list[Operation]:
        return [self.next() for _ in range(n)]


# ============================================================
# op 실행기
# ============================================================

@dataclass
class _Attempt:
    op: Operation
    plan: OperationPlan
    done: bool = False
    timer: Optional[Event] = None


class OperationExecutor:
    """
    Runs operation plans as real kernel messages.

    Each node serves requests in FIFO order (service_ms per request). An
    attempt that does not finish within max(timeout_factor × planned latency,
    min_timeout_ms) expires and is retried once, after any pending route
    recomputation for the pairs it uses. A plan that cannot be built (no route,
    owners unreachable) fails after min_timeout_ms unless a reroute is pending.
    """

    def __init__(self, network: OverlayNetwork, model: DbClusterModel, timeout_factor: float = 5.0,
                 min_timeout_ms: float = 1000.0, max_attempts: int = 2):
        if min_timeout_ms <= 0 or timeout_factor <= 0:
            raise WorkloadError("timeout_factor and min_timeout_ms must be > 0")
        self.net = network
        self.kernel = network.kernel
        self.model = model
        self.timeout_factor = timeout_factor
        self.min_timeout_ms = min_timeout_ms
        self.max_attempts = max_attempts
        self._node_free: dict[str, float] = {}
        self._outstanding = 0

    @property
    def idle(self) -> bool:
        """No message or service step of any attempt is still pending."""
        return self._outstanding == 0

    def submit(self, op: Operation, client: str, on_done: Callable[[Operation], None]) -> None:
        if op.issued_at is None:
            op.issued_at = self.kernel.now_ms
        self._attempt(op, client, on_done)

    # ── 시도 / 종료 ──

    def _later(self, t_ms: float, op: Operation, step: str, fn: Callable[[], None]) -> Event:
        return self.kernel.schedule_at(max(t_ms, self.kernel.now_ms), EventKind.WORKLOAD_OP,
                                       lambda ev: fn(), {"op": op.op_id, "step": step})

    def _attempt(self, op: Operation, client: str, on_done: Callable[[Operation], None]) -> None:
        now = self.kernel.now_ms
        op.attempts += 1
        try:
            plan = self.model.plan_operation(op, client, now)
            estimate = plan.estimate_ms(self.net)
        except ReroutingError as e:
            if op.attempts < self.max_attempts:
                self._later(e.ready_at_ms, op, "retry", lambda: self._attempt(op, client, on_done))
            else:
                self._later(now + self.min_timeout_ms, op, "failed", lambda: self._finish(op, "failed", on_done))
            return
        except (RouteError, DbModelError, TopologyError) as e:
            logger.debug(f"op {op.op_id} {op.kind} not planned: {e}")
            self._later(now + self.min_timeout_ms, op, "failed", lambda: self._finish(op, "failed", on_done))
            return

        attempt = _Attempt(op, plan)
        timeout = max(self.timeout_factor * estimate, self.min_timeout_ms)
        attempt.timer = self._later(now + timeout, op, "timeout",
                                    lambda: self._expire(attempt, client, on_done))
        self._run_stage(attempt, 0, lambda: self._complete(attempt, on_done))

    def _complete(self, attempt: _Attempt, on_done: Callable[[Operation], None]) -> None:
        if attempt.done:
            return
        attempt.done = True
        if attempt.timer is not None:
            attempt.timer.cancelled = True
        self._finish(attempt.op, "ok", on_done)

    def _expire(self, attempt: _Attempt, client: str, on_done: Callable[[Operation], None]) -> None:
        if attempt.done:
            return
        attempt.done = True
        op = attempt.op
        if op.attempts < self.max_attempts:
            ready = [self.net.routes.pending_ready_ms(s, d) for s, d in _pairs(attempt.plan)]
            retry_at = max([self.kernel.now_ms] + [r for r in ready if r is not None])
            self._later(retry_at, op, "retry", lambda: self._attempt(op, client, on_done))
        else:
            self._finish(op, "timed_out", on_done)

    def _finish(self, op: Operation, outcome: str, on_done: Callable[[Operation], None]) -> None:
        op.outcome = outcome
        op.completed_at = self.kernel.now_ms
        on_done(op)

    # ── 메시지 흐름 ──

    def _run_stage(self, attempt: _Attempt, idx: int, on_ok: Callable[[], None]) -> None:
        if attempt.done:
            return
        stages = attempt.plan.stages
        while idx < len(stages) and not stages[idx]:
            idx += 1
        if idx == len(stages):
            on_ok()
            return
        remaining = [len(stages[idx])]

        def call_ok(_t: float) -> None:
            remaining[0] -= 1
            if remaining[0] == 0:
                self._run_stage(attempt, idx + 1, on_ok)

        for call in stages[idx]:
            self._run_call(attempt, call, call_ok)

    def _run_call(self, attempt: _Attempt, call: Call, on_ok: Optional[Callable[[float], None]]) -> None:
        def respond(t: float) -> None:
            if call.response_bytes is None:
                if on_ok is not None:
                    on_ok(t)
                return
            self._send(attempt, call.dst, call.src, call.response_bytes, "response", on_ok)

        def serviced(t: float) -> None:
            for child in call.async_children:
                self._run_call(attempt, child, None)
            # 끝난 시도라도 복제본 쓰기와 ack 는 계속 흘러간다
            need = call.required
            if not call.children or need == 0:
                respond(t)
                return
            acks = [0]

            def child_ok(t2: float) -> None:
                acks[0] += 1
                if acks[0] == need:
                    respond(t2)

            for child in call.children:
                self._run_call(attempt, child, child_ok)

        def arrived(t: float) -> None:
            sync = on_ok is not None
            self._serve(attempt, call.dst, call.service_ms, t, serviced if sync or call.async_children else None)

        self._send(attempt, call.src, call.dst, call.request_bytes, call.tag, arrived)

    def _serve(self, attempt: _Attempt, node: str, service_ms: float, t_ms: float,
               then: Optional[Callable[[float], None]]) -> None:
        start = max(t_ms, self._node_free.get(node, 0.0))
        done = start + service_ms
        self._node_free[node] = done
        if then is None:
            return
        if done <= self.kernel.now_ms:
            then(done)
            return
        self._outstanding += 1

        def served(ev) -> None:
            self._outstanding -= 1
            then(ev.t_ms)

        self.kernel.schedule_at(done, EventKind.TIMER, served, {"op": attempt.op.op_id, "node": node})

    def _send(self, attempt: _Attempt, src: str, dst: str, size: int, tag: str,
              on_delivery: Optional[Callable[[float], None]]) -> None:
        attempt.op.bytes_moved += size

        def delivered(_msg, t: float) -> None:
            self._outstanding -= 1
            if on_delivery is not None:
                on_delivery(t)

        def lost(_msg, _t: float) -> None:
            self._outstanding -= 1

        self._outstanding += 1
        try:
            self.net.send(src, dst, size, tag, on_delivery=delivered, on_loss=lost)
        except (RouteError, TopologyError) as e:
            self._outstanding -= 1
            # 이 분기는 응답하지 않는다; 시도는 timeout 으로 끝난다
            logger.debug(f"op {attempt.op.op_id}: {src}→{dst} not sent ({e})")


def _pairs(plan: OperationPlan) -> list[tuple[str, str]]:
    pairs = []

    def walk(call: Call) -> None:
        if call.src != call.dst:
            pairs.append((call.src, call.dst))
        for child in call.children + call.async_children:
            walk(child)

    for stage in plan.stages:
        for call in stage:
            walk(call)
    return pairs


# ============================================================
# closed-loop 실행
# ============================================================

@dataclass
class WorkloadRun:
    spec: WorkloadSpec
    timeline: ThroughputTimeline
    oplog: OpLog
    operations: list = field(default_factory=list)
    started_ms: float = 0.0
    finished_ms: float = 0.0
    batch_throughput: list = field(default_factory=list)

    @property
    def total_ops(self) -> int:
        return len(self.operations)

    def count(self, outcome: str) -> int:
        return sum(1 for op in self.operations if op.outcome == outcome)

    @property
    def wall_ms(self) -> float:
        return self.finished_ms - self.started_ms

    @property
    def throughput_ops_s(self) -> float:
        if self.wall_ms <= 0:
            return 0.0
        return self.count("ok") / (self.wall_ms / 1000.0)


class _ClosedLoop:
    def __init__(self, spec: WorkloadSpec, executor: OperationExecutor, client: str,
                 stream: OperationStream, run: WorkloadRun, until_ms: Optional[float]):
        self.spec = spec
        self.executor = executor
        self.kernel = executor.kernel
        self.client = client
        self.stream = stream
        self.run = run
        self.until_ms = until_ms
        if until_ms is None:
            size = math.ceil(spec.operation_count / spec.batches)
            self.quotas = [min(size, spec.operation_count - i * size)
                           for i in range(spec.batches) if i * size < spec.operation_count]
        else:
            self.quotas = [None]
        self.batch = -1
        self.issued = 0
        self.completed = 0
        self.batch_ok = 0
        self.batch_start = 0.0
        self.finished = False

    def start(self) -> None:
        self._next_batch()

    def _next_batch(self) -> None:
        self.batch += 1
        if self.batch >= len(self.quotas):
            self.finished = True
            return
        self.issued = self.completed = self.batch_ok = 0
        self.batch_start = self.kernel.now_ms
        for thread in range(self.spec.threads):
            self._issue(thread)

    def _may_issue(self) -> bool:
        quota = self.quotas[self.batch]
        if quota is None:
            return self.kernel.now_ms < self.until_ms
        return self.issued < quota

    def _issue(self, thread: int) -> None:
        if not self._may_issue():
            return
        op = self.stream.next(thread)
        self.issued += 1
        self.executor.submit(op, self.client, self._done)

    def _done(self, op: Operation) -> None:
        self.run.operations.append(op)
        self.run.oplog.append(op.to_record())
        self.completed += 1
        self.run.finished_ms = op.completed_at
        if op.outcome == "ok":
            self.batch_ok += 1
            self.run.timeline.add(op.completed_at)
        if self._may_issue():
            self._issue(op.thread)
        elif self.completed == self.issued:
            self._close_batch()

    def _close_batch(self) -> None:
        duration = self.kernel.now_ms - self.batch_start
        self.run.batch_throughput.append(self.batch_ok / (duration / 1000.0) if duration > 0 else 0.0)
        logger.debug(f"batch {self.batch + 1}/{len(self.quotas)}: {self.batch_ok} ok in {duration:.0f}ms")
        self._next_batch()


def run_workload(spec: WorkloadSpec, model: DbClusterModel, client: str, network: OverlayNetwork,
                 until_ms: Optional[float] = None, timeline: Optional[ThroughputTimeline] = None,
                 oplog: Optional[OpLog] = None, executor: Optional[OperationExecutor] = None,
                 stream: Optional[OperationStream] = None) -> WorkloadRun:
    """
    Run `spec` closed-loop from `client` against `model`.

    Without `until_ms` the run issues spec.operation_count ops in spec.batches
    sequential batches and drives the kernel until the last one completes.
    With `until_ms` threads keep issuing until that virtual time (duration
    mode); events the caller scheduled on the kernel run interleaved.
    """
    kernel = network.kernel
    executor = executor or OperationExecutor(network, model)
    stream = stream or OperationStream(spec)
    run = WorkloadRun(spec, timeline or ThroughputTimeline(), oplog or OpLog(),
                      started_ms=kernel.now_ms, finished_ms=kernel.now_ms)
    loop = _ClosedLoop(spec, executor, client, stream, run, until_ms)
    logger.debug(f"workload {spec.name}: {spec.threads} threads, "
                 f"{'until ' + format(until_ms, '.0f') + 'ms' if until_ms is not None else spec.operation_count}")
    loop.start()
    if until_ms is None:
        kernel.run(stop_when=lambda: loop.finished)
        # 마지막 op 이후 남은 복제 전송을 마저 처리한다 (finished_ms 는 그대로)
        kernel.run(stop_when=lambda: executor.idle)
        run.timeline.extend_to(run.finished_ms)
    else:
        kernel.run_until(until_ms)
        run.finished_ms = max(run.finished_ms, kernel.now_ms)
        run.timeline.extend_to(until_ms)
        if not run.batch_throughput:
            run.batch_throughput.append(run.throughput_ops_s)
    return run

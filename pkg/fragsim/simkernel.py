"""
시뮬레이션 커널 (Discrete-event kernel)
=======================================
가상 시계 + (t, seq) 순서 이벤트 큐 + 멀티홉 메시지 전송.

- 내부 시간 단위는 정수 µs, API 는 ms
- 홉마다: 지연(latency) + 직렬화(size×8/bw) + 링크 방향별 FIFO 대기
- 비행 중 링크가 끊기면 메시지는 유실되고 message_loss 이벤트가 발생
- 처리한 모든 이벤트는 JSON 라인으로 해시되어 trace_hash 로 재현성을 확인

사용법:
    kernel = SimKernel(topology)
    kernel.schedule_after(1000, EventKind.TIMER, lambda ev: print(ev.t_ms))
    msg = kernel.new_message("vm0", "vm2", 1024, ["b"])
    kernel.transmit(msg, on_delivery=lambda m, t: ...)
    kernel.run_until(60_000)
    print(kernel.trace_hash)
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional

from fragsim.metrics import TrafficMatrix
from fragsim.topology import (
    LINK_DOWN, ClusterTopology, LinkSpec, LinkStateEvent, LinkUnavailableError,
)
from fragsim.utils.logger import logger

US_PER_MS = 1000


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


class KernelError(RuntimeError):
    pass


class SchedulingError(KernelError):
    pass


class EventKind(str, Enum):
    MESSAGE_HOP = "message_hop"
    MESSAGE_DELIVERY = "message_delivery"
    MESSAGE_LOSS = "message_loss"
    LINK_STATE = "link_state"
    MEMBERSHIP = "membership"
    WORKLOAD_OP = "workload_op"
    TIMER = "timer"


@dataclass(order=True)
class Event:
    t_us: int
    seq: int = -1
    kind: EventKind = field(compare=False, default=EventKind.TIMER)
    payload: dict = field(compare=False, default_factory=dict)
    callback: Optional[Callable[["Event"], None]] = field(compare=False, default=None, repr=False)
    data: Any = field(compare=False, default=None, repr=False)
    cancelled: bool = field(compare=False, default=False)

    @property
    def t_ms(self) -> float:
        return us_to_ms(self.t_us)


@dataclass
class Message:
    msg_id: int
    src: str
    dst: str
    size_bytes: int
    path: tuple
    injected_at_ms: float = 0.0
    tag: str = ""


DeliveryCallback = Callable[[Message, float], None]


@dataclass
class _Flight:
    msg: Message
    hops: list
    exits_us: list
    sent_us: int
    event: Optional[Event]
    on_loss: Optional[DeliveryCallback]
    on_delivery: Optional[DeliveryCallback] = None


class SimKernel:
    """Single-threaded event loop for one simulation instance."""

    def __init__(self, topology: ClusterTopology, traffic: Optional[TrafficMatrix] = None,
                 trace_path: Optional[str] = None):
        self.topology = topology
        self.traffic = traffic if traffic is not None else TrafficMatrix()
        self.now_us = 0
        self.processed = 0
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self._msg_ids = itertools.count(1)
        self._busy_until: dict[tuple[str, str], int] = {}
        self._last_exit: dict[tuple[str, str], int] = {}
        self._in_flight: dict[int, _Flight] = {}
        self._by_link: dict[str, set[int]] = {}
        self._hasher = hashlib.sha256()
        self.trace_records = 0
        self._trace_file = None
        if trace_path:
            Path(trace_path).parent.mkdir(parents=True, exist_ok=True)
            self._trace_file = open(trace_path, "w", encoding="utf-8")
        topology.subscribe(self._on_link_state)

    # ── 시계 / 스케줄 ──

    @property
    def now_ms(self) -> float:
        return us_to_ms(self.now_us)

    def schedule(self, event: Event) -> Event:
        if event.t_us < self.now_us:
            raise SchedulingError(f"cannot schedule at {event.t_us}µs, now={self.now_us}µs")
        if event.seq < 0:
            event.seq = next(self._seq)
        heapq.heappush(self._queue, event)
        return event

    def schedule_at(self, t_ms: float, kind: EventKind, callback: Callable[[Event], None],
                    payload: Optional[dict] = None, data: Any = None) -> Event:
        return self.schedule(Event(ms_to_us(t_ms), kind=kind, payload=payload or {},
                                   callback=callback, data=data))

    def schedule_after(self, delay_ms: float, kind: EventKind, callback: Callable[[Event], None],
                       payload: Optional[dict] = None, data: Any = None) -> Event:
        return self.schedule(Event(self.now_us + ms_to_us(delay_ms), kind=kind, payload=payload or {},
                                   callback=callback, data=data))

    def schedule_link_state(self, link_id: str, state: str, t_ms: float) -> Event:
        def apply(ev: Event) -> None:
            self.topology.set_link_state(link_id, state, ev.t_ms)
        return self.schedule_at(t_ms, EventKind.LINK_STATE, apply, {"link": link_id, "state": state})

    @staticmethod
    def cancel(event: Event) -> None:
        event.cancelled = True

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    # ── 루프 ──

    def _process(self, event: Event) -> None:
        self.now_us = event.t_us
        self.processed += 1
        self._record({"t": event.t_us, "seq": event.seq, "kind": event.kind.value, **event.payload})
        if event.callback is not None:
            event.callback(event)

    def step(self) -> bool:
        while self._queue:
            event = heapq.heappop(self._queue)
            if not event.cancelled:
                self._process(event)
                return True
        return False

    def run_until(self, t_end_ms: float) -> None:
        """Process every event with t ≤ t_end; the clock ends at t_end (never moves backwards)."""
        t_end_us = ms_to_us(t_end_ms)
        while self._queue and self._queue[0].t_us <= t_end_us:
            event = heapq.heappop(self._queue)
            if not event.cancelled:
                self._process(event)
        self.now_us = max(self.now_us, t_end_us)

    def run(self, stop_when: Optional[Callable[[], bool]] = None, max_events: Optional[int] = None) -> int:
        count = 0
        while (max_events is None or count < max_events) and not (stop_when and stop_when()):
            if not self.step():
                break
            count += 1
        return count

    # ── 전송 ──

    def new_message(self, src: str, dst: str, size_bytes: int, path: list[str], tag: str = "") -> Message:
        return Message(next(self._msg_ids), src, dst, int(size_bytes), tuple(path), self.now_ms, tag)

    def _walk(self, msg: Message) -> list[tuple[LinkSpec, str, str]]:
        hops = []
        at = msg.src
        for lid in msg.path:
            link = self.topology.link(lid)
            nxt = link.other(at)
            hops.append((link, at, nxt))
            at = nxt
        if at != msg.dst or (not msg.path and msg.src != msg.dst):
            raise KernelError(f"path {list(msg.path)} does not lead from {msg.src} to {msg.dst}")
        return hops

    def transmit(self, msg: Message, t_ms: Optional[float] = None,
                 on_delivery: Optional[DeliveryCallback] = None,
                 on_loss: Optional[DeliveryCallback] = None) -> Message:
        """
        Inject `msg` along its path. Each hop is booked when the message reaches it,
        so a message still upstream never holds a downstream link's queue.
        """
        t_us = self.now_us if t_ms is None else ms_to_us(t_ms)
        if t_us < self.now_us:
            raise SchedulingError(f"cannot transmit in the past ({t_us}µs < {self.now_us}µs)")
        hops = self._walk(msg)
        for link, _, _ in hops:
            if not link.is_up:
                raise LinkUnavailableError(link.link_id)

        flight = _Flight(msg, hops, [], t_us, None, on_loss, on_delivery)
        self._in_flight[msg.msg_id] = flight
        for link, _, _ in hops:
            self._by_link.setdefault(link.link_id, set()).add(msg.msg_id)
        if hops:
            flight.event = self.schedule(Event(t_us, kind=EventKind.MESSAGE_HOP,
                                               payload=self._hop_payload(msg, 0, hops),
                                               callback=self._enter_hop, data=flight))
        else:
            self._schedule_delivery(flight, t_us)
        return msg

    @staticmethod
    def _hop_payload(msg: Message, k: int, hops: list) -> dict:
        link, frm, to = hops[k]
        return {"msg": msg.msg_id, "hop": k, "link": link.link_id, "from": frm, "to": to}

    def _book(self, link: LinkSpec, to: str, size_bytes: int, enter_us: int) -> int:
        lat_ms, bw = self.topology.qos(link.link_id, us_to_ms(enter_us), towards=to)
        tx_us = int(round(size_bytes * 8 / bw))
        key = (link.link_id, to)
        start = max(enter_us, self._busy_until.get(key, 0))
        self._busy_until[key] = start + tx_us
        # 같은 방향으로 먼저 들어간 메시지보다 먼저 나가지 않는다
        exit_us = max(start + tx_us + ms_to_us(lat_ms), self._last_exit.get(key, 0))
        self._last_exit[key] = exit_us
        return exit_us

    def _enter_hop(self, ev: Event) -> None:
        flight: _Flight = ev.data
        k = len(flight.exits_us)
        link, _, to = flight.hops[k]
        if not link.is_up:
            self._drop(flight, k, ev.t_us)
            return
        exit_us = self._book(link, to, flight.msg.size_bytes, ev.t_us)
        flight.exits_us.append(exit_us)
        if k + 1 < len(flight.hops):
            flight.event = self.schedule(Event(exit_us, kind=EventKind.MESSAGE_HOP,
                                               payload=self._hop_payload(flight.msg, k + 1, flight.hops),
                                               callback=self._enter_hop, data=flight))
        else:
            self._schedule_delivery(flight, exit_us)

    def _schedule_delivery(self, flight: _Flight, t_us: int) -> None:
        msg = flight.msg

        def deliver(ev: Event) -> None:
            self._in_flight.pop(msg.msg_id, None)
            self._untrack(flight)
            for link, frm, to in flight.hops:
                self.traffic.record_hop(link.link_id, frm, to, msg.size_bytes, delivered=True)
            self.traffic.record_delivery(msg.dst, msg.tag, msg.size_bytes)
            if flight.on_delivery is not None:
                flight.on_delivery(msg, ev.t_ms)

        flight.event = self.schedule(Event(t_us, kind=EventKind.MESSAGE_DELIVERY,
                                           payload={"msg": msg.msg_id, "src": msg.src, "dst": msg.dst,
                                                    "size": msg.size_bytes, "tag": msg.tag},
                                           callback=deliver, data=msg))

    def _untrack(self, flight: _Flight) -> None:
        for link, _, _ in flight.hops:
            ids = self._by_link.get(link.link_id)
            if ids is not None:
                ids.discard(flight.msg.msg_id)

    def _on_link_state(self, change: LinkStateEvent) -> None:
        if change.state != LINK_DOWN:
            return
        t_us = max(self.now_us, ms_to_us(change.t_ms))
        for msg_id in sorted(self._by_link.get(change.link_id, ())):
            flight = self._in_flight.get(msg_id)
            if flight is None:
                continue
            k = next(i for i, (link, _, _) in enumerate(flight.hops) if link.link_id == change.link_id)
            # 아직 도달하지 않은 홉이거나 그 홉을 빠져나가기 전이면 유실
            if t_us < flight.sent_us or (k < len(flight.exits_us) and t_us > flight.exits_us[k]):
                continue
            self._drop(flight, k, t_us)

    def _drop(self, flight: _Flight, lost_hop: int, t_us: int) -> None:
        msg = flight.msg
        self._in_flight.pop(msg.msg_id, None)
        self._untrack(flight)
        if flight.event is not None:
            flight.event.cancelled = True
        # 빠져나간 홉만 전달로, 끊긴 링크는 유실로 계산
        for i, (link, frm, to) in enumerate(flight.hops[:lost_hop]):
            if i < len(flight.exits_us) and flight.exits_us[i] <= t_us:
                self.traffic.record_hop(link.link_id, frm, to, msg.size_bytes, delivered=True)
        link, frm, to = flight.hops[lost_hop]
        self.traffic.record_hop(link.link_id, frm, to, msg.size_bytes, delivered=False)
        lost_link = flight.hops[lost_hop][0].link_id
        logger.debug(f"msg {msg.msg_id} {msg.src}→{msg.dst} lost on {lost_link}")

        def lost(ev: Event) -> None:
            if flight.on_loss is not None:
                flight.on_loss(msg, ev.t_ms)

        self.schedule(Event(t_us, kind=EventKind.MESSAGE_LOSS,
                            payload={"msg": msg.msg_id, "src": msg.src, "dst": msg.dst,
                                     "size": msg.size_bytes, "link": lost_link},
                            callback=lost, data=msg))

    def in_flight(self) -> int:
        return len(self._in_flight)

    # ── 트레이스 ──

    def note(self, kind: str, **fields) -> None:
        """Append a non-event record (e.g. a route decision) to the trace."""
        self._record({"t": self.now_us, "kind": kind, **fields})

    def _record(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":"), default=str)
        self._hasher.update(line.encode("utf-8"))
        self._hasher.update(b"\n")
        self.trace_records += 1
        if self._trace_file is not None:
            self._trace_file.write(line + "\n")

    @property
    def trace_hash(self) -> str:
        return self._hasher.hexdigest()

    def close(self) -> None:
        if self._trace_file is not None:
            self._trace_file.close()
            self._trace_file = None


def trace_hash_of_file(path: str) -> tuple[str, int]:
    """Recompute (hash, record count) of a dumped NDJSON trace."""
    hasher = hashlib.sha256()
    count = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            hasher.update(line.encode("utf-8"))
            hasher.update(b"\n")
            count += 1
    return hasher.hexdigest(), count

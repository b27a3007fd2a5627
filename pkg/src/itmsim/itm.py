"""Monitoring plane: ITM monitors, log upload, data-center detection and queries."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .engine import MS, SECOND, Engine, EventKind
from .net import IpRange, NodeRole, Packet, Proto

COUNTED_PROTOS = tuple(p.value for p in Proto)


class MonitorStatus(str, enum.Enum):
    NORMAL = "normal"
    ATTACKED = "attacked"
    BLOCKED = "blocked"


_STATUS_ORDER = [MonitorStatus.NORMAL, MonitorStatus.ATTACKED, MonitorStatus.BLOCKED]


class Scheme(str, enum.Enum):
    CENTRALIZED = "centralized"
    DISTRIBUTED = "distributed"


class Requester(str, enum.Enum):
    PRIVATE = "private"
    PUBLIC = "public"


@dataclass
class TrafficLog:
    monitor_id: str
    interval_index: int
    start: int
    end: int
    counts: dict[str, int]
    bytes: int
    status: MonitorStatus

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class AlarmEvent:
    scheme: Scheme
    monitor_id: str
    interval_index: int
    observed_rate: int
    threshold: int
    time: int

    def __post_init__(self):
        if not self.observed_rate > self.threshold:
            raise ValueError("an alarm needs observed rate strictly above threshold")


class Monitor:
    """A telescope sensor over one address range."""

    role = NodeRole.MONITOR

    def __init__(self, monitor_id: str, range_: IpRange, interval: int = SECOND,
                 local_threshold: int | None = None, honeypot_addr: int | None = None):
        self.id = monitor_id
        self.range = range_
        self.interval = interval
        self.local_threshold = local_threshold
        self.honeypot_addr = honeypot_addr if honeypot_addr is not None else range_.last - 1
        self.status = MonitorStatus.NORMAL
        self._counts: dict[int, list] = {}  # interval -> [per-proto dict, bytes]

    @property
    def blocked(self) -> bool:
        return self.status is MonitorStatus.BLOCKED

    def set_status(self, new: MonitorStatus) -> bool:
        """Advance the status; False if ``new`` is not ahead of the current one."""
        if _STATUS_ORDER.index(new) <= _STATUS_ORDER.index(self.status):
            return False
        self.status = new
        return True

    def record(self, proto: Proto, size: int, now: int) -> None:
        if self.blocked:
            return
        k = now // self.interval
        c = self._counts.get(k)
        if c is None:
            c = self._counts[k] = [dict.fromkeys(COUNTED_PROTOS, 0), 0]
        c[0][proto.value] += 1
        c[1] += size

    def current(self, now: int) -> tuple[dict[str, int], int]:
        c = self._counts.get(now // self.interval)
        if c is None:
            return dict.fromkeys(COUNTED_PROTOS, 0), 0
        return dict(c[0]), c[1]

    def flush(self, k: int) -> TrafficLog:
        counts, nbytes = self._counts.pop(k, None) or (dict.fromkeys(COUNTED_PROTOS, 0), 0)
        return TrafficLog(self.id, k, k * self.interval, (k + 1) * self.interval, counts,
                          nbytes, self.status)


def detect_distributed(monitor: Monitor, log: TrafficLog, now: int) -> Optional[AlarmEvent]:
    th = monitor.local_threshold
    if th is None or log.total <= th:
        return None
    return AlarmEvent(Scheme.DISTRIBUTED, monitor.id, log.interval_index, log.total, th, now)


def identify_attacked(logs: list[TrafficLog]) -> list[str]:
    """Monitors with the maximal per-interval count (all of them on a tie)."""
    if not logs:
        return []
    top = max(l.total for l in logs)
    if top == 0:
        return []
    return sorted(l.monitor_id for l in logs if l.total == top)


@dataclass
class QueryRequest:
    qid: int
    requester: Requester
    monitor_id: str  # a monitor id or "ALL"
    first: int
    last: int
    arrival: int = 0


@dataclass
class Report:
    qid: int
    monitors: list[dict] = field(default_factory=list)
    error: str = ""
    truncated: bool = False


class DataCenter:
    """Log store, report publisher, detector (centralized) and block authority."""

    role = NodeRole.DATA_CENTER

    def __init__(self, engine: Engine, monitors: list[Monitor], *, addr: int = 0,
                 scheme: Scheme | None = None, global_threshold: int | None = None,
                 interval: int = SECOND, upload_latency: int = 100 * MS,
                 settle_delay: int | None = None, query_cost: int = 10 * MS,
                 on_block: Callable[[Monitor, list[TrafficLog], int], None] | None = None):
        self.engine = engine
        self.addr = addr
        self.alive = True
        self.monitors = {m.id: m for m in monitors}
        self.scheme = scheme
        self.global_threshold = global_threshold
        self.interval = interval
        self.upload_latency = upload_latency
        self.settle_delay = upload_latency if settle_delay is None else settle_delay
        self.logs: dict[tuple[str, int], TrafficLog] = {}
        self.alarms: list[AlarmEvent] = []
        self.first_alarm: dict[str, int] = {}
        self.on_block = on_block
        self.irc_clients: dict[int, object] = {}
        self.queries = QueryServer(engine, self, query_cost)

    # log ingestion
    def receive_log(self, log: TrafficLog) -> None:
        self.logs[(log.monitor_id, log.interval_index)] = log

    def logs_for(self, monitor_id: str) -> list[TrafficLog]:
        return sorted((l for (mid, _), l in self.logs.items() if mid == monitor_id),
                      key=lambda l: l.interval_index)

    def stored_intervals(self, monitor_id: str) -> int:
        return sum(1 for (mid, _) in self.logs if mid == monitor_id)

    # detection
    def _alarm(self, alarm: AlarmEvent, **extra) -> None:
        self.alarms.append(alarm)
        self.first_alarm.setdefault(alarm.monitor_id, alarm.time)
        self.engine.record("alarm", scheme=alarm.scheme.value, monitor=alarm.monitor_id,
                           interval=alarm.interval_index, observed=alarm.observed_rate,
                           threshold=alarm.threshold, **extra)

    def detect_centralized(self, k: int, now: int, deferred: bool = False) -> list[AlarmEvent]:
        """Evaluate interval ``k`` against the global threshold."""
        if self.global_threshold is None:
            return []
        logs = [self.logs.get((mid, k)) for mid in sorted(self.monitors)]
        if any(l is None for l in logs) and not deferred:
            self.engine.after(self.upload_latency, EventKind.DETECTOR_TICK,
                              lambda ev: self.detect_centralized(k, ev.fire_at, True))
            return []
        logs = [l for l in logs if l is not None]
        aggregate = sum(l.total for l in logs)
        if aggregate <= self.global_threshold:
            return []
        alarms = []
        per = {l.monitor_id: l.total for l in logs}
        for mid in identify_attacked(logs):
            alarm = AlarmEvent(Scheme.CENTRALIZED, mid, k, aggregate, self.global_threshold, now)
            self._alarm(alarm, monitor_count=per[mid])
            alarms.append(alarm)
            self.monitors[mid].set_status(MonitorStatus.ATTACKED)
            self.block_monitor(mid, now)
        return alarms

    def on_attacked_status(self, monitor_id: str, now: int) -> None:
        self.engine.record("status", monitor=monitor_id, status=MonitorStatus.ATTACKED.value)
        self.block_monitor(monitor_id, now)

    def block_monitor(self, monitor_id: str, now: int) -> None:
        m = self.monitors[monitor_id]
        if m.blocked:
            return
        m.set_status(MonitorStatus.ATTACKED)
        m.set_status(MonitorStatus.BLOCKED)
        self.engine.record("block", monitor=monitor_id, range=str(m.range))
        if self.on_block is not None:
            self.on_block(m, self.logs_for(monitor_id), now)

    # reports
    def handle_query(self, q: QueryRequest) -> Report:
        return build_report(self, q)

    # network endpoint for defender-side IRC clients (infiltration agents)
    def receive(self, p: Packet, now: int):
        client = self.irc_clients.get(p.src)
        if client is not None and p.proto is Proto.IRC_TEXT:
            client.on_packet(p, now)

    def on_cnc_lost(self, cnc_addr: int, t_down: int, now: int) -> None:
        self.irc_clients.pop(cnc_addr, None)


def build_report(dc: DataCenter, q: QueryRequest) -> Report:
    """A report derived purely from the data center's stored logs."""
    rep = Report(q.qid)
    if q.monitor_id == "ALL":
        ids = sorted(dc.monitors)
    elif q.monitor_id in dc.monitors:
        ids = [q.monitor_id]
    else:
        rep.error = f"unknown monitor {q.monitor_id!r}"
        return rep
    for mid in ids:
        rows = []
        for k in range(q.first, q.last + 1):
            log = dc.logs.get((mid, k))
            if log is None:
                rep.truncated = True
                continue
            rows.append({"interval": k, "counts": dict(log.counts), "bytes": log.bytes})
        rep.monitors.append({"monitor_id": mid, "status": dc.monitors[mid].status.value,
                             "rows": rows})
    return rep


class QueryServer:
    """Non-preemptive two-class priority server with a fixed service cost."""

    def __init__(self, engine: Engine, dc: DataCenter, cost: int = 10 * MS):
        self.engine = engine
        self.dc = dc
        self.cost = cost
        self.private: deque[QueryRequest] = deque()
        self.public: deque[QueryRequest] = deque()
        self.busy: Optional[QueryRequest] = None
        self.completed: list[tuple[QueryRequest, int, int, Report]] = []

    def submit(self, q: QueryRequest) -> None:
        q.arrival = self.engine.now
        self.engine.record("query", qid=q.qid, cls=q.requester.value, monitor=q.monitor_id,
                           first=q.first, last=q.last)
        if self.busy is None:
            self._start(q)
        elif q.requester is Requester.PRIVATE:
            self.private.append(q)
        else:
            self.public.append(q)

    def _start(self, q: QueryRequest) -> None:
        self.busy = q
        self.engine.after(self.cost, EventKind.QUERY, self._done, q=q, start=self.engine.now)

    def _done(self, ev) -> None:
        q: QueryRequest = ev.payload["q"]
        start = ev.payload["start"]
        rep = self.dc.handle_query(q)
        self.completed.append((q, start, ev.fire_at, rep))
        self.engine.record("report", qid=q.qid, cls=q.requester.value, arrival=q.arrival,
                           start=start, wait=start - q.arrival, error=rep.error,
                           truncated=rep.truncated,
                           status={m["monitor_id"]: m["status"] for m in rep.monitors})
        self.busy = None
        nxt = self.private.popleft() if self.private else (
            self.public.popleft() if self.public else None)
        if nxt is not None:
            self._start(nxt)


class MonitoringPlane:
    """Drives interval boundaries: flush, upload, and whichever detector is on."""

    def __init__(self, engine: Engine, dc: DataCenter, monitors: list[Monitor],
                 detection: Scheme | None, duration: int):
        self.engine = engine
        self.dc = dc
        self.monitors = sorted(monitors, key=lambda m: m.id)
        self.detection = detection
        self.duration = duration
        self.interval = dc.interval

    def start(self) -> None:
        if self.interval <= self.duration:
            self.engine.at(self.interval, EventKind.LOG_FLUSH, self._boundary, k=0)

    def _boundary(self, ev) -> None:
        k = ev.payload["k"]
        now = ev.fire_at
        eng = self.engine
        L = self.dc.upload_latency
        for m in self.monitors:
            log = m.flush(k)
            eng.record("log", monitor=m.id, interval=k, count=log.total, bytes=log.bytes,
                       status=log.status.value, counts=log.counts)
            eng.after(L, EventKind.LOG_UPLOAD, lambda e, log=log: self.dc.receive_log(log))
            if self.detection is Scheme.DISTRIBUTED:
                alarm = detect_distributed(m, log, now)
                if alarm is not None:
                    self.dc._alarm(alarm)
                    if m.set_status(MonitorStatus.ATTACKED):
                        eng.after(L, EventKind.TIMER,
                                  lambda e, mid=m.id: self.dc.on_attacked_status(mid, e.fire_at))
        if self.detection is Scheme.CENTRALIZED:
            eng.after(L + self.dc.settle_delay, EventKind.DETECTOR_TICK,
                      lambda e: self.dc.detect_centralized(k, e.fire_at))
        if now + self.interval <= self.duration:
            eng.at(now + self.interval, EventKind.LOG_FLUSH, self._boundary, k=k + 1)

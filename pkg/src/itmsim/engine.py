"""Deterministic discrete-event engine.

Virtual time is an integer count of microseconds. Events are ordered by
``(fire_at, seq)`` where ``seq`` is the global scheduling order, so two runs of
the same scenario with the same master seed process events identically.
"""
from __future__ import annotations

import enum
import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

US = 1
MS = 1_000
SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE

DEFAULT_STREAMS = ("infection", "background-traffic", "jitter", "attack", "bot-delay")

GENERATOR_NAME = "numpy.PCG64/SeedSequence(entropy=master_seed,spawn_key=(sha256(stream_id)[:8],))"


class SimulationFault(RuntimeError):
    """A bug in the simulation itself (e.g. scheduling into the past)."""


class ConfigurationFault(KeyError):
    pass


class EventKind(str, enum.Enum):
    PACKET_DELIVERY = "packet-delivery"
    LOG_FLUSH = "log-flush"
    COMMAND_DISPATCH = "command-dispatch"
    DETECTOR_TICK = "detector-tick"
    HONEYPOT_REBUILD = "honeypot-rebuild"
    ATTACK_START = "attack-start"
    ATTACK_STOP = "attack-stop"
    INFECTION_ATTEMPT = "infection-attempt"
    TAKEDOWN = "takedown"
    # not enumerated by the model but needed to drive it
    FLOOD_TICK = "flood-tick"
    SCAN_TICK = "scan-tick"
    LOG_UPLOAD = "log-upload"
    QUERY = "query"
    TIMER = "timer"


@dataclass(eq=False)
class SimEvent:
    fire_at: int
    kind: EventKind
    action: Callable[["SimEvent"], Any] | None = None
    payload: dict = field(default_factory=dict)
    seq: int = -1


class RngStream:
    """One named, independent random stream.

    Every variate consumes exactly one uniform double, so the draw index is a
    plain counter and replaying a stream only needs ``(master_seed, stream_id)``.
    """

    _BLOCK = 4096

    def __init__(self, master_seed: int, stream_id: str):
        self.stream_id = stream_id
        self.master_seed = master_seed
        key = int.from_bytes(hashlib.sha256(stream_id.encode()).digest()[:8], "big")
        seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(key,))
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self._buf = self._gen.random(self._BLOCK).tolist()
        self._pos = 0
        self.index = 0

    def uniform(self) -> float:
        if self._pos == self._BLOCK:
            self._buf = self._gen.random(self._BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        self.index += 1
        return u

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def exponential(self, mean: float) -> float:
        return -mean * math.log1p(-self.uniform())

    def integer(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return min(int(self.uniform() * n), n - 1)


class Trace:
    """Append-only list of trace records (plain dicts with ``t`` and ``kind``)."""

    def __init__(self, header: dict | None = None):
        self.header = header or {}
        self.records: list[dict] = []

    def append(self, record: dict) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def of_kind(self, *kinds: str) -> list[dict]:
        return [r for r in self.records if r["kind"] in kinds]

    def lines(self) -> Iterable[str]:
        if self.header:
            yield canonical_line(self.header)
        for rec in self.records:
            yield canonical_line(rec)

    def serialize(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()


def canonical_line(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=True)


class Engine:
    def __init__(self, master_seed: int = 0, streams: Iterable[str] = DEFAULT_STREAMS):
        self.master_seed = master_seed
        self.now = 0
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.streams = {name: RngStream(master_seed, name) for name in streams}
        self.trace = Trace({"t": 0, "kind": "header", "master_seed": master_seed,
                            "generator": GENERATOR_NAME})
        self.processed = 0

    # -- scheduling ---------------------------------------------------------
    def schedule(self, event: SimEvent) -> SimEvent:
        if event.fire_at < self.now:
            raise SimulationFault(
                f"event {event.kind.value} scheduled at {event.fire_at} but clock is {self.now}")
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (event.fire_at, event.seq, event))
        return event

    def at(self, fire_at: int, kind: EventKind, action=None, **payload) -> SimEvent:
        return self.schedule(SimEvent(int(fire_at), kind, action, payload))

    def after(self, delay: int, kind: EventKind, action=None, **payload) -> SimEvent:
        return self.at(self.now + int(delay), kind, action, **payload)

    def pending(self) -> int:
        return len(self._queue)

    # -- running ------------------------------------------------------------
    def step(self) -> SimEvent:
        ev = heapq.heappop(self._queue)[2]
        self.now = ev.fire_at
        self.processed += 1
        if ev.action is not None:
            ev.action(ev)
        return ev

    def run_until(self, t_end: int) -> Trace:
        q = self._queue
        while q and q[0][0] <= t_end:
            self.step()
        if t_end > self.now:
            self.now = t_end
        return self.trace

    def drain(self, kinds: Iterable[EventKind]) -> None:
        """Process remaining events of the given kinds, discarding all others."""
        kinds = set(kinds)
        while self._queue:
            ev = heapq.heappop(self._queue)[2]
            if ev.kind in kinds:
                self.now = ev.fire_at
                self.processed += 1
                if ev.action is not None:
                    ev.action(ev)

    # -- randomness and tracing ---------------------------------------------
    def stream(self, stream_id: str) -> RngStream:
        try:
            return self.streams[stream_id]
        except KeyError:
            raise ConfigurationFault(f"unknown random stream {stream_id!r}") from None

    def draw(self, stream_id: str, kind: str = "uniform", *, p: float | None = None,
             mean: float | None = None):
        s = self.stream(stream_id)
        if kind == "uniform":
            return s.uniform()
        if kind == "bernoulli":
            return s.bernoulli(p)
        if kind == "exponential":
            return s.exponential(mean)
        raise ValueError(f"unknown variate kind {kind!r}")

    def record(self, kind: str, **attrs) -> dict:
        rec = {"t": self.now, "kind": kind}
        rec.update(attrs)
        self.trace.append(rec)
        return rec

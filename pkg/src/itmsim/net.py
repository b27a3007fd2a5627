"""Simulated internet: addresses, packets, delivery, amplifiers, victim resources."""
from __future__ import annotations

import bisect
import enum
import ipaddress
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .engine import MS, SECOND, Engine, EventKind

IRC_PORT = 6667
OUTCOMES = ("delivered", "drop_blocked", "drop_saturated", "absorbed")


class CidrError(ValueError):
    pass


def ip_to_int(text: str) -> int:
    try:
        return int(ipaddress.IPv4Address(text))
    except ipaddress.AddressValueError as exc:
        raise CidrError(f"bad IPv4 address {text!r}: {exc}") from None


@lru_cache(maxsize=1 << 16)
def ip_str(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


@dataclass(frozen=True, order=True)
class IpRange:
    base: int
    prefix_len: int

    def __post_init__(self):
        if not 0 <= self.prefix_len <= 32:
            raise CidrError(f"prefix length {self.prefix_len} out of range")
        mask = (0xFFFFFFFF << (32 - self.prefix_len)) & 0xFFFFFFFF
        if self.base & ~mask & 0xFFFFFFFF:
            raise CidrError(f"{ip_str(self.base)}/{self.prefix_len} has host bits set")
        object.__setattr__(self, "mask", mask)

    @property
    def size(self) -> int:
        return 1 << (32 - self.prefix_len)

    @property
    def last(self) -> int:
        return self.base + self.size - 1

    def contains(self, addr: int) -> bool:
        return (addr & self.mask) == self.base

    def __contains__(self, addr: int) -> bool:
        return (addr & self.mask) == self.base

    def overlaps(self, other: "IpRange") -> bool:
        return self.base <= other.last and other.base <= self.last

    def covers(self, other: "IpRange") -> bool:
        return self.base <= other.base and other.last <= self.last

    def address(self, offset: int) -> int:
        if not 0 <= offset < self.size:
            raise IndexError(offset)
        return self.base + offset

    def __str__(self) -> str:
        return f"{ip_str(self.base)}/{self.prefix_len}"


def parse_cidr(text: str) -> IpRange:
    """Parse ``a.b.c.d/p``. Host bits must already be zero."""
    if not isinstance(text, str) or text.count("/") != 1:
        raise CidrError(f"expected a.b.c.d/p, got {text!r}")
    addr, _, plen = text.partition("/")
    if not plen.isdigit():
        raise CidrError(f"bad prefix length in {text!r}")
    p = int(plen)
    if p > 32:
        raise CidrError(f"prefix length {p} > 32 in {text!r}")
    return IpRange(ip_to_int(addr), p)


class Proto(str, enum.Enum):
    TCP_SYN = "syn"
    TCP_ACK = "ack"
    TCP_RST = "rst"
    ICMP_ECHO_REQUEST = "icmp_req"
    ICMP_ECHO_REPLY = "icmp_rep"
    UDP = "udp"
    IRC_TEXT = "irc"


DEFAULT_SIZES = {
    Proto.TCP_SYN: 40,
    Proto.TCP_ACK: 40,
    Proto.TCP_RST: 40,
    Proto.ICMP_ECHO_REQUEST: 1500,
    Proto.ICMP_ECHO_REPLY: 1500,
    Proto.UDP: 512,
}


def irc_size(payload: str) -> int:
    return 64 + len(payload)


@dataclass(slots=True)
class Packet:
    src: int
    dst: int
    proto: Proto
    size: int
    dport: int = 0
    payload: Optional[str] = None
    spoofed: bool = False
    # metrics only; detectors never see these
    origin: str = ""
    cls: str = "legit"
    gen: int = 0

    def __post_init__(self):
        if (self.payload is not None) != (self.proto is Proto.IRC_TEXT):
            raise ValueError("payload is present iff proto is IrcText")
        if self.size <= 0:
            raise ValueError("packet size must be positive")


def irc_packet(src: int, dst: int, line: str, origin: str, dport: int = IRC_PORT) -> Packet:
    return Packet(src, dst, Proto.IRC_TEXT, irc_size(line), dport, line, origin=origin, cls="irc")


class NodeRole(str, enum.Enum):
    LEGITIMATE_HOST = "legitimate-host"
    BOT = "bot"
    CNC_SERVER = "cnc-server"
    MASTER_CONTROLLER = "master-controller"
    MONITOR = "monitor"
    DATA_CENTER = "data-center"
    HONEYPOT = "honeypot"
    AMPLIFIER_HOST = "amplifier-host"


# -- Smurf amplifiers ---------------------------------------------------------

@dataclass(frozen=True)
class AmplifierNetwork:
    broadcast_addr: int
    host_count: int

    def host_addr(self, i: int) -> int:
        return self.broadcast_addr - self.host_count + i


def smurf_expand(p: Packet, net: AmplifierNetwork) -> list[Packet]:
    """One echo reply per amplifier host, all aimed at the request's source."""
    if p.proto is not Proto.ICMP_ECHO_REQUEST:
        raise ValueError("smurf expansion needs an ICMP echo request")
    if p.dst != net.broadcast_addr:
        raise ValueError("request is not addressed to the amplifier broadcast address")
    origin = f"amp:{ip_str(net.broadcast_addr)}"
    return [Packet(net.host_addr(i), p.src, Proto.ICMP_ECHO_REPLY, p.size,
                   origin=origin, cls=p.cls)
            for i in range(net.host_count)]


# -- victim resources ---------------------------------------------------------

class Offer(str, enum.Enum):
    ADMITTED = "admitted"
    REFUSED = "refused"


@dataclass
class SynBacklog:
    capacity: int
    timeout: int
    half_open: deque = field(default_factory=deque)
    refused: int = 0
    denied_legit: int = 0

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("backlog capacity must be positive")

    def evict(self, now: int) -> None:
        h = self.half_open
        while h and h[0][1] + self.timeout <= now:
            h.popleft()

    def __len__(self) -> int:
        return len(self.half_open)


def backlog_offer(b: SynBacklog, src: int, now: int, legit: bool = False) -> Offer:
    """Offer a SYN to the half-open queue. Expired entries go first."""
    b.evict(now)
    if len(b.half_open) < b.capacity:
        b.half_open.append((src, now))
        return Offer.ADMITTED
    b.refused += 1
    if legit:
        b.denied_legit += 1
    return Offer.REFUSED


class LinkMeter:
    """Per-window byte accounting on a node's inbound link.

    Windows are fixed and aligned to multiples of ``window``. A packet is
    dropped when it arrives after the window's offered bytes already reached
    the window capacity.
    """

    def __init__(self, capacity_bps: int, window: int = 100 * MS):
        if capacity_bps <= 0 or window <= 0:
            raise ValueError("link capacity and window must be positive")
        self.capacity_bps = capacity_bps
        self.window = window
        self.window_bytes = capacity_bps * window // (8 * SECOND)  # bits/s -> bytes per window
        self._index = -1
        self._offered = 0

    def _roll(self, now: int) -> None:
        idx = now // self.window
        if idx != self._index:
            self._index = idx
            self._offered = 0

    def saturation(self, now: int) -> float:
        self._roll(now)
        if self.window_bytes == 0:
            return 1.0
        return min(1.0, self._offered / self.window_bytes)

    def offer(self, size: int, now: int) -> bool:
        self._roll(now)
        saturated = self._offered >= self.window_bytes
        self._offered += size
        return not saturated


def link_saturation(meter: LinkMeter, now: int) -> float:
    return meter.saturation(now)


class Server:
    """A victim host: SYN backlog plus an optional capacity-limited link."""

    role = NodeRole.LEGITIMATE_HOST

    def __init__(self, node_id: str, addr: int, backlog: SynBacklog | None = None,
                 link: LinkMeter | None = None):
        self.id = node_id
        self.addr = addr
        self.backlog = backlog
        self.link = link
        self.alive = True
        self.legit_arrivals = 0
        self.denied_saturated = 0

    @property
    def denied_backlog(self) -> int:
        return self.backlog.denied_legit if self.backlog else 0

    def receive(self, p: Packet, now: int):
        legit = p.cls == "legit"
        if legit:
            self.legit_arrivals += 1
        if self.link is not None and not self.link.offer(p.size, now):
            if legit:
                self.denied_saturated += 1
            return "drop_saturated"
        if p.proto is Proto.TCP_SYN and self.backlog is not None:
            return {"conn": backlog_offer(self.backlog, p.src, now, legit).value}
        return None


# -- delivery -----------------------------------------------------------------

class Network:
    """Node registry and packet transport.

    Monitors are taps: a packet addressed into a monitor's range is recorded
    there (counts only, never origin or spoofing) and then delivered as usual.
    Traffic into a blocked monitor's range is dropped, except to addresses in
    ``redirects`` (active honeypots).
    """

    def __init__(self, engine: Engine, latency: int = 10 * MS, jitter: int = 5 * MS,
                 sizes: dict | None = None):
        if jitter > latency:
            raise ValueError("jitter larger than base latency would allow negative delay")
        self.engine = engine
        self.latency = latency
        self.jitter = jitter
        self.sizes = dict(DEFAULT_SIZES)
        if sizes:
            self.sizes.update(sizes)
        self.nodes: dict[int, object] = {}
        self.amplifiers: dict[int, AmplifierNetwork] = {}
        self.redirects: dict[int, object] = {}
        self._mon_bases: list[int] = []
        self._mons: list = []
        self.ledger = {"generated": 0, **{o: 0 for o in OUTCOMES}}
        self.closed = False
        self._flow_last: dict[tuple[int, int], int] = {}
        self._jit = engine.stream("jitter")

    # registry
    def add_node(self, addr: int, node) -> None:
        if addr in self.nodes or addr in self.amplifiers:
            raise ValueError(f"address {ip_str(addr)} already owned")
        self.nodes[addr] = node

    def add_amplifier(self, amp: AmplifierNetwork) -> None:
        if amp.broadcast_addr in self.nodes or amp.broadcast_addr in self.amplifiers:
            raise ValueError(f"address {ip_str(amp.broadcast_addr)} already owned")
        self.amplifiers[amp.broadcast_addr] = amp

    def add_monitor(self, monitor) -> None:
        i = bisect.bisect_left(self._mon_bases, monitor.range.base)
        for other in self._mons:
            if other.range.overlaps(monitor.range):
                raise ValueError(f"monitor ranges overlap: {other.id} and {monitor.id}")
        self._mon_bases.insert(i, monitor.range.base)
        self._mons.insert(i, monitor)

    def monitor_for(self, addr: int):
        i = bisect.bisect_right(self._mon_bases, addr) - 1
        if i >= 0:
            m = self._mons[i]
            if m.range.contains(addr):
                return m
        return None

    def endpoint(self, addr: int):
        node = self.redirects.get(addr)
        return node if node is not None else self.nodes.get(addr)

    def reachable(self, addr: int):
        """The node a packet to ``addr`` would reach right now, or None."""
        mon = self.monitor_for(addr)
        if mon is not None and mon.blocked:
            return self.redirects.get(addr)
        node = self.endpoint(addr)
        if node is not None and node.alive:
            return node
        return None

    # transport
    def delay(self) -> int:
        if self.jitter == 0:
            return self.latency
        return self.latency - self.jitter + self._jit.integer(2 * self.jitter + 1)

    def send(self, p: Packet) -> bool:
        """Generate ``p`` now and schedule its arrival. False once closed."""
        if self.closed:
            return False
        eng = self.engine
        p.gen = eng.now
        self.ledger["generated"] += 1
        arrive = eng.now + self.delay()
        if p.proto is Proto.IRC_TEXT:
            key = (p.src, p.dst)
            last = self._flow_last.get(key, -1)
            if arrive <= last:
                arrive = last + 1
            self._flow_last[key] = arrive
        eng.at(arrive, EventKind.PACKET_DELIVERY, self._arrive, packet=p)
        return True

    def _arrive(self, ev) -> None:
        p: Packet = ev.payload["packet"]
        now = ev.fire_at
        dst = p.dst
        extra = None
        node = None
        outcome = None
        amp = None
        mon = self.monitor_for(dst)
        if mon is not None:
            if mon.blocked:
                node = self.redirects.get(dst)
                if node is None:
                    outcome = "drop_blocked"
            else:
                mon.record(p.proto, p.size, now)
        if outcome is None:
            if node is None:
                node = self.endpoint(dst)
            if node is not None and node.alive:
                res = node.receive(p, now)
                if res is None:
                    outcome = "delivered"
                elif isinstance(res, dict):
                    outcome, extra = "delivered", res
                else:
                    outcome = res
            elif node is None and dst in self.amplifiers:
                outcome = "delivered"
                amp = self.amplifiers[dst]
            else:
                outcome = "absorbed"
        self.ledger[outcome] += 1
        rec = self.engine.record(
            "pkt", proto=p.proto.value, src=ip_str(p.src), dst=ip_str(dst), dport=p.dport,
            bytes=p.size, outcome=outcome, cls=p.cls, gen=p.gen, origin=p.origin)
        if p.proto is Proto.IRC_TEXT:
            rec["verb"] = p.payload.split(" ", 1)[0]
        if extra:
            rec.update(extra)
        if amp is not None and p.proto is Proto.ICMP_ECHO_REQUEST:
            for reply in smurf_expand(p, amp):
                self.send(reply)

    # infection attempts ride the same links but are not counted as packets
    def send_infection(self, attempt) -> bool:
        if self.closed:
            return False
        self.engine.after(self.delay(), EventKind.INFECTION_ATTEMPT, self._infect_arrive,
                          attempt=attempt)
        return True

    def _infect_arrive(self, ev) -> None:
        attempt = ev.payload["attempt"]
        node = self.reachable(attempt.dst)
        accept = getattr(node, "accept_infection", None)
        if accept is not None:
            accept(attempt, ev.fire_at)

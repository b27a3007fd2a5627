"""Second-phase defense: honeypots behind a Honeywall, C&C intel, infiltration, takedown."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import asdict, dataclass
from typing import Optional

from .botnet import BotState, CncServer, InfectionAttempt
from .engine import HOUR, SECOND, Engine, EventKind
from .irc import IrcMessage, IrcParseError, Verb, is_command, msg
from .itm import DataCenter, Monitor, Scheme, TrafficLog
from .net import Network, NodeRole, Packet, Proto, ip_str, irc_packet


class HoneypotState(str, enum.Enum):
    CLEAN = "clean"
    COMPROMISED = "compromised"
    REBUILDING = "rebuilding"


class Direction(str, enum.Enum):
    INBOUND = "in"
    OUTBOUND = "out"


class Verdict(str, enum.Enum):
    ALLOW = "allow"
    SUPPRESS = "suppress"


SUSPICIOUS_VERBS = frozenset({Verb.TOPIC, Verb.PRIVMSG, Verb.NOTICE})


def honeywall_filter(m: IrcMessage, direction: Direction) -> Verdict:
    """Data Control: outbound C&C chatter is dropped, everything inbound passes."""
    if direction is Direction.OUTBOUND and m.verb in SUSPICIOUS_VERBS:
        return Verdict.SUPPRESS
    return Verdict.ALLOW


@dataclass
class Observation:
    t: int
    direction: Direction
    message: IrcMessage
    suppressed: bool = False


INTEL_FIELDS = ("cnc_addr", "cnc_port", "server_password", "nickname", "ident",
                "channel_name", "channel_password")


@dataclass
class CapturedIntel:
    cnc_addr: Optional[int] = None
    cnc_port: Optional[int] = None
    server_password: Optional[str] = None
    nickname: Optional[str] = None
    ident: Optional[str] = None
    channel_name: Optional[str] = None
    channel_password: Optional[str] = None
    complete: bool = False
    honeypot: str = ""
    monitor: str = ""
    captured_at: int = 0

    def as_record(self) -> dict:
        d = asdict(self)
        if self.cnc_addr is not None:
            d["cnc_addr"] = ip_str(self.cnc_addr)
        return d


def capture_intel(hp: "Honeypot") -> CapturedIntel:
    """Data Capture: rebuild the C&C configuration from what the honeypot saw.

    ``complete`` holds only when all seven fields were witnessed and the server
    confirmed the JOIN, i.e. the embedded bot finished registering.
    """
    if not hp.observed:
        raise ValueError("nothing observed on this honeypot")
    intel = CapturedIntel(honeypot=hp.id, monitor=hp.monitor.id if hp.monitor else "")
    if hp.conn is not None:
        intel.cnc_addr, intel.cnc_port = hp.conn
    joined = False
    for ob in hp.observed:
        m = ob.message
        a = m.params
        if ob.direction is Direction.OUTBOUND:
            if m.verb is Verb.PASS and a:
                intel.server_password = a[0]
            elif m.verb is Verb.NICK and a:
                intel.nickname = a[0]
            elif m.verb is Verb.USER and a:
                intel.ident = a[0]
            elif m.verb is Verb.JOIN and len(a) >= 2:
                intel.channel_name, intel.channel_password = a[0], a[1]
        elif m.verb is Verb.JOIN and a and a[0] == intel.channel_name:
            joined = True
    intel.complete = joined and all(getattr(intel, f) is not None for f in INTEL_FIELDS)
    return intel


class Honeypot:
    """A maximally vulnerable decoy. The Honeywall sits on its outbound path."""

    role = NodeRole.HONEYPOT

    def __init__(self, controller: "HoneypotController", hp_id: str, honeywall: bool = True):
        self.controller = controller
        self.engine: Engine = controller.engine
        self.net: Network = controller.net
        self.id = hp_id
        self.honeywall = honeywall
        self.addr: Optional[int] = None
        self.monitor: Optional[Monitor] = None
        self.state = HoneypotState.CLEAN
        self.deployed_at: Optional[int] = None
        self.compromised_at: Optional[int] = None
        self.observed: list[Observation] = []
        self.conn: Optional[tuple[int, int]] = None
        self.bot = None
        self.infection_attempts = 0
        self.alive = True
        self._reported = False

    def _capture(self, direction: Direction, m: IrcMessage, suppressed: bool) -> None:
        self.observed.append(Observation(self.engine.now, direction, m, suppressed))
        self.engine.record("hp_capture", honeypot=self.id, dir=direction.value,
                           verb=m.verb.value, text=m.serialize(), suppressed=suppressed)

    # inbound
    def receive(self, p: Packet, now: int):
        if p.proto is not Proto.IRC_TEXT or self.bot is None:
            return None
        if self.state is not HoneypotState.COMPROMISED:
            return None
        try:
            m = IrcMessage.parse(p.payload, sender=ip_str(p.src))
        except IrcParseError:
            return None
        self._capture(Direction.INBOUND, m, False)
        self.bot.on_message(m, now)
        if (not self._reported and m.verb is Verb.JOIN
                and self.bot.state is BotState.REGISTERED):
            self._reported = True
            self.controller.on_registered(self, now)
        return None

    def accept_infection(self, attempt: InfectionAttempt, now: int) -> None:
        self.infection_attempts += 1
        if self.state is HoneypotState.REBUILDING:
            return
        if self.state is HoneypotState.COMPROMISED:
            self.engine.record("reinfect", honeypot=self.id, by=attempt.by)
            return
        self.state = HoneypotState.COMPROMISED
        self.compromised_at = now
        self.engine.record("compromise", honeypot=self.id,
                           monitor=self.monitor.id if self.monitor else "",
                           addr=ip_str(self.addr), by=attempt.by,
                           since_deploy=now - self.deployed_at)
        self.bot = attempt.botnet.embed(self.id, self.addr, attempt, self._outbound)
        self.bot.register(now)

    # outbound, through the Honeywall
    def _outbound(self, p: Packet) -> bool:
        if p.proto is Proto.IRC_TEXT:
            m = IrcMessage.parse(p.payload)
            if self.conn is None:
                self.conn = (p.dst, p.dport)
            verdict = honeywall_filter(m, Direction.OUTBOUND) if self.honeywall else Verdict.ALLOW
            suppressed = verdict is Verdict.SUPPRESS
            self._capture(Direction.OUTBOUND, m, suppressed)
            if suppressed:
                self.engine.record("hw_suppress", honeypot=self.id, verb=m.verb.value,
                                   text=m.serialize())
                return False
            return self.net.send(p)
        if self.honeywall:
            self.engine.record("hw_contain", honeypot=self.id, proto=p.proto.value)
            return False
        return self.net.send(p)

    def on_cnc_lost(self, cnc_addr: int, t_down: int, now: int) -> None:
        if self.bot is not None:
            self.bot.on_cnc_lost(cnc_addr, t_down, now)

    # rebuild
    def rebuild(self, now: int, duration: int) -> None:
        if self.state is HoneypotState.REBUILDING:
            return
        self.state = HoneypotState.REBUILDING
        if self.bot is not None:
            self.bot.neutralize("rebuild")
            cnc = self.net.nodes.get(self.bot.home.addr)
            if isinstance(cnc, CncServer):
                cnc.drop_session(self.addr)
        self.bot = None
        self.observed.clear()
        self.conn = None
        self.compromised_at = None
        self._reported = False
        self.engine.record("rebuild", honeypot=self.id, phase="start")
        self.engine.after(duration, EventKind.HONEYPOT_REBUILD, self._rebuilt)

    def _rebuilt(self, ev) -> None:
        self.state = HoneypotState.CLEAN
        self.observed.clear()
        self.engine.record("rebuild", honeypot=self.id, phase="done")
        self.controller.on_clean(self, ev.fire_at)


class InfiltrationAgent:
    """A defender-side IRC client that joins with captured credentials.

    It reads the channel roster and logs any orders it sees; it never attacks.
    """

    def __init__(self, controller: "HoneypotController", agent_id: str, addr: int,
                 intel: CapturedIntel, honeypot: Honeypot | None = None):
        self.controller = controller
        self.id = agent_id
        self.nick = agent_id
        self.addr = addr
        self.intel = intel
        self.honeypot = honeypot
        self.joined = False
        self.done = False
        self.enumerated_bots: set[str] = set()
        self.commands_seen: list[str] = []

    def _to(self, line: str) -> None:
        self.controller.net.send(irc_packet(self.addr, self.intel.cnc_addr, line, self.id,
                                            self.intel.cnc_port))

    def start(self) -> None:
        i = self.intel
        self._to(msg(Verb.PASS, i.server_password))
        self._to(msg(Verb.NICK, self.nick))
        self._to(msg(Verb.USER, i.ident, "0", "*", i.ident))
        self._to(msg(Verb.JOIN, i.channel_name, i.channel_password))

    def on_packet(self, p: Packet, now: int) -> None:
        try:
            self.on_message(IrcMessage.parse(p.payload), now)
        except IrcParseError:
            pass

    def on_message(self, m: IrcMessage, now: int) -> None:
        v = m.verb
        if v is Verb.PING:
            self._to(msg(Verb.PONG, m.trailing))
        elif v is Verb.JOIN and m.params and m.params[0] == self.intel.channel_name:
            self.joined = True
        elif v is Verb.NOTICE and m.trailing == "rejected":
            if not self.done:
                self.done = True
                self.controller.on_rejected(self, now)
        elif v is Verb.NOTICE and m.trailing.startswith("names ") and self.joined:
            if not self.done:
                self.done = True
                self.enumerated_bots = set(m.trailing.split()[1:]) - {self.nick}
                self.controller.on_infiltrated(self, now)
        elif v in (Verb.PRIVMSG, Verb.TOPIC) and is_command(m.trailing):
            self.commands_seen.append(m.trailing)
            self.controller.engine.record("agent_log", agent=self.id, text=m.trailing)


def infiltrate(agent: InfiltrationAgent, intel: CapturedIntel) -> None:
    if not intel.complete:
        raise ValueError("infiltration needs complete intel")
    agent.intel = intel
    agent.start()


class HoneypotController:
    """Deploys honeypots on handover and walks the capture, infiltrate, takedown chain."""

    def __init__(self, engine: Engine, net: Network, dc: DataCenter, monitors: list[Monitor],
                 scheme: Scheme, *, honeywall: bool = True, rebuild_period: int = 24 * HOUR,
                 rebuild_duration: int = 60 * SECOND, duration: int | None = None):
        self.engine = engine
        self.net = net
        self.dc = dc
        self.scheme = scheme
        self.rebuild_period = rebuild_period
        self.rebuild_duration = rebuild_duration
        self.duration = duration
        if scheme is Scheme.CENTRALIZED:
            self.honeypots = {"hp-dc": Honeypot(self, "hp-dc", honeywall)}
        else:
            self.honeypots = {f"hp-{m.id}": Honeypot(self, f"hp-{m.id}", honeywall)
                              for m in sorted(monitors, key=lambda m: m.id)}
        self.queue: deque[tuple[Monitor, int]] = deque()
        self.archive: list[CapturedIntel] = []
        self.agents: list[InfiltrationAgent] = []
        self.takedowns: list[dict] = []

    @property
    def central(self) -> Honeypot:
        return self.honeypots["hp-dc"]

    def start(self) -> None:
        if self.duration is None or self.rebuild_period <= 0:
            return
        t = self.rebuild_period
        while t <= self.duration:
            for hp in self.honeypots.values():
                self.engine.at(t, EventKind.HONEYPOT_REBUILD,
                               lambda ev, hp=hp: hp.rebuild(ev.fire_at, self.rebuild_duration))
            t += self.rebuild_period

    # handover from the data center
    def handover(self, monitor: Monitor, logs: list[TrafficLog], now: int) -> None:
        self.engine.record("handover", monitor=monitor.id, logs=len(logs))
        if self.scheme is Scheme.DISTRIBUTED:
            self.deploy(self.honeypots[f"hp-{monitor.id}"], monitor, now, now)
            return
        hp = self.central
        if hp.monitor is None and hp.state is HoneypotState.CLEAN:
            self.deploy(hp, monitor, now, now)
        else:
            self.queue.append((monitor, now))
            self.engine.record("handover_queued", monitor=monitor.id, depth=len(self.queue))
            if hp.monitor is None and hp.state is HoneypotState.COMPROMISED:
                hp.rebuild(now, self.rebuild_duration)

    def deploy(self, hp: Honeypot, monitor: Monitor, requested_at: int, now: int) -> None:
        if hp.addr is not None and self.net.redirects.get(hp.addr) is hp:
            del self.net.redirects[hp.addr]
        hp.addr = monitor.honeypot_addr
        hp.monitor = monitor
        hp.deployed_at = now
        self.net.redirects[hp.addr] = hp
        self.engine.record("deploy", honeypot=hp.id, monitor=monitor.id,
                           scheme=self.scheme.value, addr=ip_str(hp.addr),
                           wait=now - requested_at)

    def _release(self, hp: Honeypot, now: int) -> None:
        if self.scheme is not Scheme.CENTRALIZED:
            return
        if self.net.redirects.get(hp.addr) is hp:
            del self.net.redirects[hp.addr]
        hp.monitor = None
        if self.queue:
            hp.rebuild(now, self.rebuild_duration)

    def on_clean(self, hp: Honeypot, now: int) -> None:
        if self.scheme is Scheme.CENTRALIZED and hp.monitor is None and self.queue:
            monitor, requested = self.queue.popleft()
            self.deploy(hp, monitor, requested, now)

    # capture -> infiltrate -> takedown
    def on_registered(self, hp: Honeypot, now: int) -> None:
        intel = capture_intel(hp)
        intel.captured_at = now
        self.archive.append(intel)
        self.engine.record("intel", **intel.as_record())
        if intel.complete:
            self.start_infiltration(hp, intel, now)

    def start_infiltration(self, hp: Honeypot, intel: CapturedIntel, now: int) -> None:
        cnc = self.net.nodes.get(intel.cnc_addr)
        if not isinstance(cnc, CncServer) or cnc.down:
            self.engine.record("infiltrate", status="moot", honeypot=hp.id,
                               cnc=ip_str(intel.cnc_addr))
            self._release(hp, now)
            return
        agent = InfiltrationAgent(self, f"agent-{len(self.agents) + 1}", self.dc.addr, intel, hp)
        self.agents.append(agent)
        self.dc.irc_clients[intel.cnc_addr] = agent
        infiltrate(agent, intel)

    def on_rejected(self, agent: InfiltrationAgent, now: int) -> None:
        self.engine.record("infiltrate", status="rejected", agent=agent.id,
                           cnc=ip_str(agent.intel.cnc_addr))
        self._release(agent.honeypot, now)

    def on_infiltrated(self, agent: InfiltrationAgent, now: int) -> None:
        self.engine.record("infiltrate", status="ok", agent=agent.id,
                           cnc=ip_str(agent.intel.cnc_addr),
                           enumerated=len(agent.enumerated_bots),
                           bots=sorted(agent.enumerated_bots))
        cnc = self.net.nodes[agent.intel.cnc_addr]
        self.engine.at(now, EventKind.TAKEDOWN,
                       lambda ev: self.takedown(cnc, agent.honeypot, ev.fire_at))

    def takedown(self, cnc: CncServer, hp: Honeypot | None, now: int) -> bool:
        """Shut the server down. A second takedown of the same server is a no-op."""
        if not cnc.takedown(now):
            return False
        mid = hp.monitor.id if hp is not None and hp.monitor is not None else ""
        first = self.dc.first_alarm.get(mid)
        rec = {"cnc": ip_str(cnc.addr), "monitor": mid,
               "honeypot": hp.id if hp is not None else "",
               "time_to_takedown": None if first is None else now - first}
        self.takedowns.append(dict(rec, t=now))
        self.engine.record("takedown", **rec)
        if hp is not None:
            self._release(hp, now)
        return True

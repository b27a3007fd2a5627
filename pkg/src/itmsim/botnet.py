"""Attacker side: bot life cycle, IRC command and control, floods, scanning."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

from .engine import MS, SECOND, Engine, EventKind, RngStream
from .irc import (AttackCommand, CommandError, Flood, IrcMessage, IrcParseError, Verb,
                  is_command, msg, parse_command)
from .net import (IRC_PORT, AmplifierNetwork, IpRange, Network, NodeRole, Packet, Proto,
                  ip_str, irc_packet)

FLOOD_TICK = 100 * MS
TICKS_PER_SECOND = SECOND // FLOOD_TICK
REJECT_BACKOFF = 10 * SECOND


class BotState(str, enum.Enum):
    VULNERABLE = "vulnerable"
    INFECTED = "infected"
    REGISTERED = "registered"
    ATTACKING = "attacking"
    NEUTRALIZED = "neutralized"


LEGAL_TRANSITIONS = {
    (BotState.VULNERABLE, BotState.INFECTED),
    (BotState.INFECTED, BotState.REGISTERED),
    (BotState.REGISTERED, BotState.ATTACKING),
    (BotState.ATTACKING, BotState.REGISTERED),
} | {(s, BotState.NEUTRALIZED) for s in BotState if s is not BotState.NEUTRALIZED}


class IllegalTransition(RuntimeError):
    pass


def per_tick(rate: int, k: int) -> int:
    """Packets (or addresses) in the k-th 100 ms tick of a ``rate``/s stream."""
    return rate * (k + 1) // TICKS_PER_SECOND - rate * k // TICKS_PER_SECOND


@dataclass(frozen=True)
class CncIdentity:
    """Everything a bot binary needs to phone home."""
    addr: int
    port: int
    server_password: str
    channel: str
    channel_password: str


@dataclass
class InfectionAttempt:
    src: int
    dst: int
    by: str
    botnet: "Botnet"
    cnc: CncIdentity


# -- scanning -----------------------------------------------------------------

class ScanCursor:
    """Lazy Fisher-Yates permutation over an address range.

    Addresses come out without replacement; once the range is exhausted a new
    pass starts with a fresh permutation.
    """

    def __init__(self, space: IpRange):
        self.space = space
        self.n = space.size
        self.i = 0
        self.passes = 0
        self._swaps: dict[int, int] = {}

    def next(self, rng: RngStream) -> int:
        if self.i == self.n:
            self.i = 0
            self.passes += 1
            self._swaps.clear()
        i = self.i
        j = i + rng.integer(self.n - i)
        vj = self._swaps.get(j, j)
        self._swaps[j] = self._swaps.get(i, i)
        self.i += 1
        return self.space.base + vj


def scan_step(cursor: ScanCursor, count: int, rng: RngStream, p_infect: float,
              lookup: Callable[[int], object]) -> list[int]:
    """Draw ``count`` addresses and return those an infection attempt is sent to.

    Susceptible hosts convert with probability ``p_infect`` (one Bernoulli draw
    each, on the same stream as the address draws); honeypots always get an
    attempt because they accept anything.
    """
    hits = []
    for _ in range(count):
        addr = cursor.next(rng)
        node = lookup(addr)
        if node is None:
            continue
        if node.role is NodeRole.HONEYPOT:
            hits.append(addr)
        elif getattr(node, "susceptible", False) and rng.bernoulli(p_infect):
            hits.append(addr)
    return hits


# -- nodes --------------------------------------------------------------------

class Host:
    """An ordinary end host. Vulnerable, unpatched hosts can be recruited."""

    def __init__(self, node_id: str, addr: int, vulnerable: bool = False, patched: bool = False):
        self.id = node_id
        self.addr = addr
        self.vulnerable = vulnerable
        self.patched = patched
        self.bot: Optional[Bot] = None
        self.alive = True

    @property
    def role(self) -> NodeRole:
        return NodeRole.BOT if self.bot is not None else NodeRole.LEGITIMATE_HOST

    @property
    def susceptible(self) -> bool:
        return self.vulnerable and not self.patched and self.bot is None

    @property
    def state(self) -> Optional[BotState]:
        if self.bot is not None:
            return self.bot.state
        return BotState.VULNERABLE if self.vulnerable else None

    def receive(self, p: Packet, now: int):
        if self.bot is not None and p.proto is Proto.IRC_TEXT:
            self.bot.on_packet(p, now)

    def accept_infection(self, attempt: InfectionAttempt, now: int) -> None:
        if self.susceptible:
            attempt.botnet.adopt(self, attempt, now)

    def on_cnc_lost(self, cnc_addr: int, t_down: int, now: int) -> None:
        if self.bot is not None:
            self.bot.on_cnc_lost(cnc_addr, t_down, now)


class Bot:
    def __init__(self, botnet: "Botnet", node_id: str, addr: int, home: CncIdentity,
                 response_delay: int, send: Callable[[Packet], bool] | None = None):
        self.botnet = botnet
        self.engine: Engine = botnet.engine
        self.id = node_id
        self.addr = addr
        self.home = home
        self.nick = botnet.nick_prefix + node_id
        self.response_delay = response_delay
        self.send = send or botnet.net.send
        self.state = BotState.INFECTED
        self.idle_since = self.engine.now
        self.connected = False
        self.attack: Optional[AttackCommand] = None
        self.packets_sent = 0
        self._attempt = 0
        self._fail_since: Optional[int] = None
        self._token = 0
        self._attack_k = 0
        self._stop_at = 0
        self._cutoff: Optional[int] = None
        self._lost_at: Optional[int] = None

    # state machine
    def _transition(self, new: BotState, kind: str, **attrs) -> None:
        old = self.state
        if (old, new) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{self.id}: {old.value} -> {new.value}")
        self.state = new
        self.engine.record(kind, bot=self.id, prev=old.value, state=new.value, **attrs)

    def _irc(self, line: str) -> None:
        self.send(irc_packet(self.addr, self.home.addr, line, self.id, self.home.port))

    # registration
    def register(self, now: int | None = None) -> None:
        """Send the PASS/NICK/USER/JOIN exchange and arm a response timeout."""
        if self.state is BotState.NEUTRALIZED:
            return
        h = self.home
        if h.server_password:
            self._irc(msg(Verb.PASS, h.server_password))
        self._irc(msg(Verb.NICK, self.nick))
        self._irc(msg(Verb.USER, self.botnet.ident, "0", "*", self.botnet.ident))
        self._irc(msg(Verb.JOIN, h.channel, h.channel_password))
        self._attempt += 1
        self.engine.after(self.botnet.register_timeout, EventKind.TIMER, self._register_check,
                          attempt=self._attempt)

    def _register_check(self, ev) -> None:
        if ev.payload["attempt"] != self._attempt or self.connected:
            return
        if self.state is not BotState.INFECTED:
            # once registered, losing the server is handled by _reconnect
            return
        start = ev.fire_at - self.botnet.register_timeout
        if self._fail_since is None:
            self._fail_since = start
        if ev.fire_at - self._fail_since >= self.botnet.retry_window:
            self.neutralize("cnc_unreachable")
        else:
            self.register()

    # inbound
    def on_packet(self, p: Packet, now: int) -> None:
        try:
            m = IrcMessage.parse(p.payload, sender=ip_str(p.src))
        except IrcParseError:
            return
        self.on_message(m, now)

    def on_message(self, m: IrcMessage, now: int) -> None:
        """React to one IRC line from the C&C server."""
        if self.state is BotState.NEUTRALIZED:
            return
        v = m.verb
        if v is Verb.PING:
            self._irc(msg(Verb.PONG, m.trailing))
        elif v is Verb.JOIN and m.params and m.params[0] == self.home.channel:
            if self.state is BotState.INFECTED:
                self.connected = True
                self._fail_since = None
                self.idle_since = now
                self._transition(BotState.REGISTERED, "join", cnc=ip_str(self.home.addr),
                                 channel=self.home.channel, nick=self.nick)
                self._irc(msg(Verb.PRIVMSG, self.botnet.master_nick, f"ready {self.nick}"))
        elif v is Verb.NOTICE and m.trailing == "rejected":
            if self.state is BotState.INFECTED:
                self._attempt += 1
                self._fail_since = None
                self.engine.record("reject", bot=self.id, cnc=ip_str(self.home.addr))
                self.engine.after(REJECT_BACKOFF, EventKind.TIMER, lambda ev: self.register())
        elif v in (Verb.PRIVMSG, Verb.TOPIC) and len(m.params) >= 2:
            if m.params[0] != self.home.channel or not is_command(m.trailing):
                return
            if self.state not in (BotState.REGISTERED, BotState.ATTACKING):
                return
            try:
                cmd = parse_command(m.trailing)
            except CommandError:
                self.engine.record("cmd_bad", bot=self.id, text=m.trailing)
                return
            self.engine.after(self.response_delay, EventKind.ATTACK_START, self._attack_start,
                              cmd=cmd, received=now)

    # attacking
    def _attack_start(self, ev) -> None:
        if self.state not in (BotState.REGISTERED, BotState.ATTACKING):
            return
        now = ev.fire_at
        cmd: AttackCommand = ev.payload["cmd"]
        received = ev.payload["received"]
        if self.state is BotState.ATTACKING:
            self._stop_attack("superseded")
        idle = received - self.idle_since
        self._token += 1
        self.attack = cmd
        self._attack_k = 0
        self._stop_at = now + cmd.duration
        if self._cutoff is not None:
            self._stop_at = min(self._stop_at, max(self._cutoff, now))
        self._transition(BotState.ATTACKING, "attack_start", flood=cmd.flood.value,
                         target=cmd.target_text(), rate=cmd.rate_pps, duration=cmd.duration_s,
                         idle_us=idle, resp_us=now - received)
        self.engine.at(now, EventKind.FLOOD_TICK, self._flood_tick, token=self._token)

    def _flood_tick(self, ev) -> None:
        if ev.payload["token"] != self._token or self.state is not BotState.ATTACKING:
            return
        now = ev.fire_at
        if now >= self._stop_at:
            self._stop_attack("cnc_lost" if self._cutoff is not None and now >= self._cutoff
                              else "done")
            return
        for p in flood_tick(self, self.attack, self._attack_k, now):
            self.send(p)
            self.packets_sent += 1
        self._attack_k += 1
        self.engine.at(min(now + FLOOD_TICK, self._stop_at), EventKind.FLOOD_TICK,
                       self._flood_tick, token=self._token)

    def _stop_attack(self, reason: str) -> None:
        self._token += 1
        self.idle_since = self.engine.now
        self._transition(BotState.REGISTERED, "attack_stop", reason=reason)

    # losing the server
    def on_cnc_lost(self, cnc_addr: int, t_down: int, now: int) -> None:
        if cnc_addr != self.home.addr or self.state is BotState.NEUTRALIZED:
            return
        self.connected = False
        self._lost_at = now
        self._cutoff = t_down + self.botnet.command_timeout
        if self.state is BotState.ATTACKING:
            self._stop_at = min(self._stop_at, max(self._cutoff, now))
            self.engine.at(self._stop_at, EventKind.ATTACK_STOP, self._flood_tick,
                           token=self._token)
        if self.state is BotState.INFECTED:
            # the registration timeout already handles an unreachable server
            return
        self.engine.after(self.botnet.register_timeout, EventKind.TIMER, self._reconnect)

    def _reconnect(self, ev) -> None:
        if self.state is BotState.NEUTRALIZED or self.connected:
            return
        if ev.fire_at - self._lost_at >= self.botnet.retry_window:
            self.neutralize("cnc_unreachable")
            return
        h = self.home
        if h.server_password:
            self._irc(msg(Verb.PASS, h.server_password))
        self._irc(msg(Verb.NICK, self.nick))
        self.engine.after(self.botnet.register_timeout, EventKind.TIMER, self._reconnect)

    def neutralize(self, reason: str) -> None:
        if self.state is BotState.NEUTRALIZED:
            return
        self._token += 1
        self._attempt += 1
        self.connected = False
        self._transition(BotState.NEUTRALIZED, "neutralized", reason=reason)


def flood_tick(bot: Bot, cmd: AttackCommand, k: int, now: int) -> list[Packet]:
    """Attack packets for the k-th 100 ms tick of ``cmd`` on ``bot``."""
    n = per_tick(cmd.rate_pps, k)
    if n == 0:
        return []
    bn = bot.botnet
    rng = bn.rng_attack
    sizes = bn.net.sizes
    out = []
    if cmd.flood is Flood.SMURF:
        amp = bn.amplifier
        if amp is None:
            return []
        size = sizes[Proto.ICMP_ECHO_REQUEST]
        for _ in range(n):
            victim = _pick(cmd.target, rng)
            out.append(Packet(victim, amp.broadcast_addr, Proto.ICMP_ECHO_REQUEST, size,
                              spoofed=True, origin=bot.id, cls="attack"))
        return out
    proto, dport = _FLOOD_PROTO[cmd.flood]
    size = sizes[proto]
    for _ in range(n):
        dst = _pick(cmd.target, rng)
        if bn.spoof:
            src, spoofed = bn.random_unowned(), True
        else:
            src, spoofed = bot.addr, False
        out.append(Packet(src, dst, proto, size, dport, spoofed=spoofed, origin=bot.id,
                          cls="attack"))
    return out


_FLOOD_PROTO = {
    Flood.SYN: (Proto.TCP_SYN, 80),
    Flood.ACK: (Proto.TCP_ACK, 80),
    Flood.ICMP: (Proto.ICMP_ECHO_REQUEST, 0),
    Flood.UDP: (Proto.UDP, 53),
}


def _pick(target, rng: RngStream) -> int:
    if isinstance(target, IpRange):
        return target.base + rng.integer(target.size)
    return target


@dataclass
class IrcChannel:
    name: str
    channel_password: str = ""
    topic: str = ""
    members: dict[str, int] = field(default_factory=dict)  # nick -> address

    def __post_init__(self):
        if not self.name.startswith("#"):
            raise ValueError(f"channel name {self.name!r} must start with '#'")


@dataclass
class _Session:
    addr: int
    pass_ok: bool = False
    nick: str = ""
    ident: str = ""
    operator: bool = False


class CncServer:
    """An IRC server that relays the master's orders to its channel."""

    role = NodeRole.CNC_SERVER

    def __init__(self, engine: Engine, net: Network, node_id: str, addr: int,
                 port: int = IRC_PORT, server_password: str = "",
                 channels: list[IrcChannel] | None = None, operator_nick: str = ""):
        self.engine = engine
        self.net = net
        self.id = node_id
        self.addr = addr
        self.port = port
        self.server_password = server_password
        self.channels = {c.name: c for c in (channels or [])}
        self.operator_nick = operator_nick
        self.down = False
        self.down_at: Optional[int] = None
        self.sessions: dict[int, _Session] = {}

    @property
    def alive(self) -> bool:
        return not self.down

    def _to(self, addr: int, line: str) -> None:
        self.net.send(irc_packet(self.addr, addr, line, self.id, self.port))

    def _by_nick(self, nick: str) -> Optional[_Session]:
        for s in self.sessions.values():
            if s.nick == nick:
                return s
        return None

    def receive(self, p: Packet, now: int):
        if p.proto is not Proto.IRC_TEXT:
            return None
        try:
            m = IrcMessage.parse(p.payload)
        except IrcParseError:
            return None
        s = self.sessions.get(p.src)
        if s is None:
            s = self.sessions[p.src] = _Session(p.src)
        self._handle(s, m)
        return None

    def _reject(self, s: _Session) -> None:
        self._to(s.addr, msg(Verb.NOTICE, s.nick or "*", "rejected"))
        self.drop_session(s.addr)

    def _handle(self, s: _Session, m: IrcMessage) -> None:
        v, a = m.verb, m.params
        if v is Verb.PASS:
            s.pass_ok = bool(a) and a[0] == self.server_password
        elif v is Verb.NICK and a:
            s.nick = a[0]
            if not self.server_password:
                s.pass_ok = True
            s.operator = s.pass_ok and bool(self.operator_nick) and s.nick == self.operator_nick
        elif v is Verb.USER and a:
            s.ident = a[0]
        elif v is Verb.PING:
            self._to(s.addr, msg(Verb.PONG, m.trailing))
        elif v is Verb.JOIN and a:
            ch = self.channels.get(a[0])
            key = a[1] if len(a) > 1 else ""
            if not s.pass_ok or not s.nick or ch is None or key != ch.channel_password:
                self._reject(s)
                return
            ch.members[s.nick] = s.addr
            self._to(s.addr, msg(Verb.JOIN, ch.name))
            self._to(s.addr, msg(Verb.NOTICE, s.nick, "names " + " ".join(sorted(ch.members))))
            if ch.topic:
                self._to(s.addr, msg(Verb.TOPIC, ch.name, ch.topic))
            self._to(s.addr, msg(Verb.PING, self.id))
        elif v in (Verb.PRIVMSG, Verb.NOTICE, Verb.TOPIC) and len(a) >= 2 and s.pass_ok:
            target, text = a[0], a[-1]
            ch = self.channels.get(target)
            if ch is not None:
                if not (s.operator or s.nick in ch.members):
                    return
                if v is Verb.TOPIC:
                    ch.topic = text
                line = msg(v, ch.name, text)
                fanout = 0
                for nick, addr in sorted(ch.members.items()):
                    if addr != s.addr:
                        self._to(addr, line)
                        fanout += 1
                if s.operator and is_command(text):
                    self.engine.record("cmd", cnc=ip_str(self.addr), channel=ch.name, text=text,
                                       via=v.value.lower(), fanout=fanout)
            elif v is not Verb.TOPIC:
                peer = self._by_nick(target)
                if peer is not None:
                    self._to(peer.addr, msg(v, target, text))

    def drop_session(self, addr: int) -> None:
        s = self.sessions.pop(addr, None)
        if s is None:
            return
        for ch in self.channels.values():
            if ch.members.get(s.nick) == addr:
                del ch.members[s.nick]

    def members(self, channel: str) -> set[str]:
        return set(self.channels[channel].members)

    def takedown(self, now: int) -> bool:
        """Make the server unreachable. Returns False if it was already down."""
        if self.down:
            return False
        self.down = True
        self.down_at = now
        clients = sorted(self.sessions)
        self.sessions.clear()
        for ch in self.channels.values():
            ch.members.clear()
        for addr in clients:
            node = self.net.endpoint(addr)
            if hasattr(node, "on_cnc_lost"):
                self.engine.after(self.net.latency, EventKind.TIMER, _notify_lost,
                                  node=node, cnc=self.addr, t_down=now)
        return True


def _notify_lost(ev) -> None:
    ev.payload["node"].on_cnc_lost(ev.payload["cnc"], ev.payload["t_down"], ev.fire_at)


class Master:
    """The bot-herder's controller. Logs in as channel operator, never joins."""

    role = NodeRole.MASTER_CONTROLLER

    def __init__(self, botnet: "Botnet", node_id: str, addr: int, nick: str):
        self.botnet = botnet
        self.id = node_id
        self.addr = addr
        self.nick = nick
        self.alive = True
        self.reports: list[str] = []

    def _to(self, cnc: CncServer, line: str) -> None:
        self.botnet.net.send(irc_packet(self.addr, cnc.addr, line, self.id, cnc.port))

    def connect(self, cnc: CncServer) -> None:
        if cnc.server_password:
            self._to(cnc, msg(Verb.PASS, cnc.server_password))
        self._to(cnc, msg(Verb.NICK, self.nick))
        self._to(cnc, msg(Verb.USER, self.nick, "0", "*", self.nick))

    def issue(self, cnc: CncServer, channel: str, text: str, via: str = "privmsg") -> None:
        if cnc.down:
            self.botnet.engine.record("cmd_lost", cnc=ip_str(cnc.addr), text=text)
            return
        verb = Verb.TOPIC if via == "topic" else Verb.PRIVMSG
        self._to(cnc, msg(verb, channel, text))

    def receive(self, p: Packet, now: int):
        if p.proto is Proto.IRC_TEXT:
            self.reports.append(p.payload)

    def on_cnc_lost(self, cnc_addr: int, t_down: int, now: int) -> None:
        pass


def issue_command(master: Master, cnc: CncServer, channel: str, cmd: AttackCommand | str,
                  via: str = "privmsg") -> None:
    text = cmd.encode() if isinstance(cmd, AttackCommand) else cmd
    master.issue(cnc, channel, text, via)


class Botnet:
    """One botnet: master, C&C servers, recruitable hosts and the bots."""

    def __init__(self, engine: Engine, net: Network, botnet_id: str, *, master_addr: int,
                 master_nick: str = "herder", cncs: list[CncServer] = (),
                 nick_prefix: str = "bot-", ident: str = "bot", spoof: bool = True,
                 space: IpRange | None = None, amplifier: AmplifierNetwork | None = None,
                 response_delay_max: int = 100 * MS, command_timeout: int = 5 * SECOND,
                 retry_window: int = 30 * SECOND, register_timeout: int = 5 * SECOND,
                 scan_space: IpRange | None = None, scan_rate: int = 0, p_infect: float = 0.0,
                 bots_scan: bool = False):
        if not 0.0 <= p_infect <= 1.0:
            raise ValueError("p_infect must lie in [0, 1]")
        if response_delay_max < 1 * MS:
            raise ValueError("response delay bound must be at least 1 ms")
        self.engine = engine
        self.net = net
        self.id = botnet_id
        self.master_nick = master_nick
        self.nick_prefix = nick_prefix
        self.ident = ident
        self.spoof = spoof
        self.space = space
        self.amplifier = amplifier
        self.response_delay_max = response_delay_max
        self.command_timeout = command_timeout
        self.retry_window = retry_window
        self.register_timeout = register_timeout
        self.scan_space = scan_space
        self.scan_rate = scan_rate
        self.p_infect = p_infect
        self.bots_scan = bots_scan
        self.cncs: dict[str, CncServer] = {c.id: c for c in cncs}
        self.master = Master(self, f"master:{botnet_id}", master_addr, master_nick)
        self.hosts: list[Host] = []
        self.bots: dict[str, Bot] = {}
        self.rng_infect = engine.stream("infection")
        self.rng_attack = engine.stream("attack")
        self.rng_delay = engine.stream("bot-delay")
        self._rr = 0
        self._cursors: dict[str, ScanCursor] = {}

    def add_host(self, host: Host) -> None:
        self.hosts.append(host)

    def identity(self, cnc: CncServer) -> CncIdentity:
        ch = next(iter(cnc.channels.values()))
        return CncIdentity(cnc.addr, cnc.port, cnc.server_password, ch.name, ch.channel_password)

    def next_home(self) -> CncIdentity:
        cncs = list(self.cncs.values())
        c = cncs[self._rr % len(cncs)]
        self._rr += 1
        return self.identity(c)

    def draw_response_delay(self) -> int:
        lo = 1 * MS
        return lo + self.rng_delay.integer(self.response_delay_max - lo + 1)

    def random_unowned(self) -> int:
        while True:
            a = int(self.rng_attack.uniform() * (1 << 32))
            if self.space is None or not self.space.contains(a):
                return a

    # life cycle
    def adopt(self, host: Host, attempt: InfectionAttempt, now: int) -> Bot:
        bot = Bot(self, host.id, host.addr, attempt.cnc, self.draw_response_delay())
        bot.state = BotState.VULNERABLE
        host.bot = bot
        self.bots[bot.id] = bot
        bot._transition(BotState.INFECTED, "infect", addr=ip_str(host.addr), by=attempt.by,
                        botnet=self.id, resp_us=bot.response_delay)
        bot.register(now)
        if self.bots_scan and self.scan_rate > 0 and self.scan_space is not None:
            self.start_scanning(bot)
        return bot

    def embed(self, node_id: str, addr: int, attempt: InfectionAttempt,
              send: Callable[[Packet], bool]) -> Bot:
        """A bot instance running inside someone else's node (a honeypot)."""
        bot = Bot(self, node_id, addr, attempt.cnc, self.draw_response_delay(), send=send)
        bot.state = BotState.VULNERABLE
        self.bots[bot.id + f"@{self.engine.now}"] = bot
        bot._transition(BotState.INFECTED, "infect", addr=ip_str(addr), by=attempt.by,
                        botnet=self.id, resp_us=bot.response_delay)
        return bot

    def seed_bot(self, host: Host, now: int) -> Bot:
        attempt = InfectionAttempt(self.master.addr, host.addr, self.master.id, self,
                                   self.next_home())
        return self.adopt(host, attempt, now)

    # scanning
    def start_scanning(self, infector) -> None:
        self._cursors[infector.id] = ScanCursor(self.scan_space)
        self.engine.after(0, EventKind.SCAN_TICK, self._scan_tick, infector=infector, k=0)

    def _scan_tick(self, ev) -> None:
        infector = ev.payload["infector"]
        k = ev.payload["k"]
        if isinstance(infector, Bot) and infector.state is BotState.NEUTRALIZED:
            return
        if not isinstance(infector, Bot) and all(c.down for c in self.cncs.values()):
            # no server left to hand recruits to
            self.engine.record("scan_stop", infector=infector.id)
            return
        n = per_tick(self.scan_rate, k)
        cursor = self._cursors[infector.id]
        home = infector.home if isinstance(infector, Bot) else None
        for dst in scan_step(cursor, n, self.rng_infect, self.p_infect, self.net.endpoint):
            cnc = home or self.next_home()
            self.net.send_infection(InfectionAttempt(infector.addr, dst, infector.id, self, cnc))
        self.engine.after(FLOOD_TICK, EventKind.SCAN_TICK, self._scan_tick,
                          infector=infector, k=k + 1)

    # orders
    def schedule_command(self, at: int, text: str, cnc_id: str | None = None,
                         via: str = "privmsg") -> None:
        targets = [self.cncs[cnc_id]] if cnc_id else list(self.cncs.values())
        for cnc in targets:
            channel = next(iter(cnc.channels))
            self.engine.at(at, EventKind.COMMAND_DISPATCH,
                           lambda ev, c=cnc, ch=channel: self.master.issue(c, ch, text, via))

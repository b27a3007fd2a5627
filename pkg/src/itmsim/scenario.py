"""Scenario documents: YAML text in, a validated ScenarioConfig out.

Layout (every section except ``topology`` and ``botnets`` is optional)::

    name: demo
    seed: 7
    duration: 120s
    topology:
      space: 10.0.0.0/20
      latency: 10ms
      jitter: 5ms
      data_center: 10.0.0.2
      legit_hosts: {range: 10.0.12.0/24, count: 50}
      monitors:
        - {id: A, range: 10.0.1.0/24, background_pps: 20, local_threshold: 40}
      servers:
        - {id: victim, addr: 10.0.1.10, backlog: 128, backlog_timeout: 3s,
           link_capacity: 10000000, clients_pps: 10}
      amplifiers:
        - {id: amp, broadcast: 10.0.6.255, hosts: 6}
    botnets:
      - id: bn
        master: 10.0.5.1
        cnc:
          - {id: cnc1, addr: 10.0.4.1, port: 6667, password: hunter2,
             channel: "#ops", channel_password: k3y}
        hosts_range: 10.0.8.0/22
        vulnerable_hosts: 40
        scan_rate: 200
        p_infect: 0.9
    attacks:
      - {at: 30s, botnet: bn, command: "!ddos syn 10.0.1.10 20 60"}
    defense:
      detection: distributed        # none | centralized | distributed
      honeypot: distributed
      interval: 1s
      global_threshold: 80
    queries:
      - {at: 40s, requester: private, monitor: ALL, first: 0, last: 39}
    output: {dir: out, artifacts: [trace, metrics, counts, intel]}

Durations are either bare numbers of seconds or strings with a unit suffix
(``us``, ``ms``, ``s``, ``min``, ``h``). Thresholds are packet counts per
interval. Addresses are dotted quads, ranges are CIDR prefixes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .engine import HOUR, MINUTE, MS, SECOND, US
from .irc import AttackCommand, CommandError, Flood, parse_command
from .itm import Requester, Scheme
from .net import CidrError, IpRange, ip_str, ip_to_int, parse_cidr

ARTIFACTS = ("trace", "metrics", "counts", "intel")
_UNITS = {"us": US, "ms": MS, "s": SECOND, "min": MINUTE, "h": HOUR}
_DUR_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(us|ms|s|min|h)\s*$")


@dataclass(frozen=True)
class Problem:
    line: Optional[int]
    path: str
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else "document"
        return f"{where}: {self.path or '<root>'}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, problems: list[Problem]):
        self.problems = list(problems)
        super().__init__("\n".join(str(p) for p in self.problems))


@dataclass
class MonitorCfg:
    id: str
    range: IpRange
    background_pps: float = 0.0
    local_threshold: Optional[int] = None
    honeypot_addr: Optional[int] = None


@dataclass
class ServerCfg:
    id: str
    addr: int
    backlog: int = 128
    backlog_timeout: int = 3 * SECOND
    link_capacity: Optional[int] = None  # bits per second, None = unlimited
    link_window: int = 100 * MS
    clients_pps: float = 0.0


@dataclass
class AmplifierCfg:
    id: str
    broadcast: int
    hosts: int


@dataclass
class LegitCfg:
    range: IpRange
    count: int


@dataclass
class TopologyCfg:
    space: IpRange
    latency: int = 10 * MS
    jitter: int = 5 * MS
    data_center: Optional[int] = None
    legit_hosts: Optional[LegitCfg] = None
    monitors: list[MonitorCfg] = field(default_factory=list)
    servers: list[ServerCfg] = field(default_factory=list)
    amplifiers: list[AmplifierCfg] = field(default_factory=list)

    def dc_addr(self) -> int:
        return self.data_center if self.data_center is not None else self.space.address(2)


@dataclass
class CncCfg:
    id: str
    addr: int
    port: int = 6667
    password: str = ""
    channel: str = "#c2"
    channel_password: str = ""
    topic: str = ""


@dataclass
class BotnetCfg:
    id: str
    master: int
    cnc: list[CncCfg]
    hosts_range: IpRange
    vulnerable_hosts: int = 0
    patched_fraction: float = 0.0
    initial_bots: int = 0
    master_nick: str = "herder"
    nick_prefix: str = "bot-"
    ident: str = "bot"
    scan_space: Optional[IpRange] = None
    scan_rate: int = 0
    p_infect: float = 0.0
    bots_scan: bool = False
    response_delay_max: int = 100 * MS
    spoof: bool = True
    amplifier: Optional[str] = None

    def host_addrs(self) -> list[int]:
        return [self.hosts_range.address(i + 1) for i in range(self.vulnerable_hosts)]

    def patched(self, i: int) -> bool:
        """Patched hosts are spread evenly: host i is patched when floor(f*i) steps."""
        f = self.patched_fraction
        return int((i + 1) * f) > int(i * f)


@dataclass
class AttackCfg:
    at: int
    botnet: str
    command: AttackCommand
    cnc: Optional[str] = None
    via: str = "privmsg"


@dataclass
class DefenseCfg:
    detection: Optional[Scheme] = None
    honeypot: Optional[Scheme] = None
    interval: int = SECOND
    upload_latency: int = 100 * MS
    settle_delay: Optional[int] = None
    global_threshold: Optional[int] = None
    local_threshold: Optional[int] = None
    honeywall: bool = True
    rebuild_period: int = 24 * HOUR
    rebuild_duration: int = 60 * SECOND
    command_timeout: int = 5 * SECOND
    retry_window: int = 30 * SECOND
    register_timeout: int = 5 * SECOND
    query_cost: int = 10 * MS


@dataclass
class QueryCfg:
    at: int
    requester: Requester
    monitor: str = "ALL"
    first: int = 0
    last: int = 0


@dataclass
class OutputCfg:
    dir: Optional[str] = None
    artifacts: list[str] = field(default_factory=lambda: list(ARTIFACTS))


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration: int
    topology: TopologyCfg
    botnets: list[BotnetCfg] = field(default_factory=list)
    attacks: list[AttackCfg] = field(default_factory=list)
    defense: DefenseCfg = field(default_factory=DefenseCfg)
    queries: list[QueryCfg] = field(default_factory=list)
    output: OutputCfg = field(default_factory=OutputCfg)

    def monitor(self, mid: str) -> MonitorCfg:
        return next(m for m in self.topology.monitors if m.id == mid)

    def local_threshold(self, m: MonitorCfg) -> Optional[int]:
        return m.local_threshold if m.local_threshold is not None else self.defense.local_threshold

    def honeypot_addr(self, m: MonitorCfg) -> int:
        return m.honeypot_addr if m.honeypot_addr is not None else m.range.last - 1

    def botnet(self, bid: str) -> BotnetCfg:
        return next(b for b in self.botnets if b.id == bid)


# value converters; each raises ValueError with a readable message

def parse_duration(v) -> int:
    if isinstance(v, bool):
        raise ValueError("expected a duration, got a boolean")
    if isinstance(v, (int, float)):
        if v < 0:
            raise ValueError("duration must not be negative")
        return int(round(v * SECOND))
    if isinstance(v, str):
        m = _DUR_RE.match(v)
        if m:
            return int(round(float(m.group(1)) * _UNITS[m.group(2)]))
    raise ValueError(f"bad duration {v!r} (use e.g. 250ms, 5s, 24h)")


def format_duration(us: int) -> str:
    for unit in ("h", "min", "s", "ms"):
        if us and us % _UNITS[unit] == 0:
            return f"{us // _UNITS[unit]}{unit}"
    return f"{us}us"


def _addr(v) -> int:
    if not isinstance(v, str):
        raise ValueError(f"expected a dotted-quad address, got {v!r}")
    try:
        return ip_to_int(v)
    except CidrError as exc:
        raise ValueError(str(exc)) from None


def _cidr(v) -> IpRange:
    if not isinstance(v, str):
        raise ValueError(f"expected a CIDR range, got {v!r}")
    try:
        return parse_cidr(v)
    except CidrError as exc:
        raise ValueError(str(exc)) from None


def _int(lo: int | None = None):
    def conv(v) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v
    return conv


def _num(lo: float | None = None, hi: float | None = None):
    def conv(v) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"expected a number, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ValueError(f"{v} is outside [{lo}, {hi}]")
        return float(v)
    return conv


def _bool(v) -> bool:
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _str(v) -> str:
    if isinstance(v, bool) or v is None:
        raise ValueError(f"expected a string, got {v!r}")
    return str(v)


def _scheme(v) -> Optional[Scheme]:
    if v is None or v == "none":
        return None
    try:
        return Scheme(v)
    except ValueError:
        raise ValueError(f"scheme must be none, centralized or distributed, not {v!r}") from None


def _command(v) -> AttackCommand:
    if not isinstance(v, str):
        raise ValueError(f"expected command text, got {v!r}")
    try:
        return parse_command(v)
    except CommandError as exc:
        raise ValueError(str(exc)) from None


def _requester(v) -> Requester:
    try:
        return Requester(v)
    except ValueError:
        raise ValueError(f"requester must be private or public, not {v!r}") from None


def _positive_threshold(v) -> int:
    v = _int()(v)
    if v <= 0:
        raise ValueError("thresholds must be positive")
    return v


_REQ = object()


class _Reader:
    """Walks the loaded document, collecting every problem instead of stopping."""

    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines
        self.problems: list[Problem] = []

    def line(self, path: tuple) -> Optional[int]:
        p = tuple(path)
        while p:
            if p in self.lines:
                return self.lines[p]
            p = p[:-1]
        return self.lines.get((), None)

    def err(self, path: tuple, message: str) -> None:
        self.problems.append(Problem(self.line(path), _fmt_path(path), message))

    def mapping(self, v, path: tuple, known: tuple[str, ...]) -> dict:
        if not isinstance(v, dict):
            self.err(path, f"expected a mapping, got {type(v).__name__}")
            return {}
        for k in v:
            if k not in known:
                self.err(path + (k,), f"unknown key {k!r}")
        return v

    def seq(self, v, path: tuple) -> list:
        if v is None:
            return []
        if not isinstance(v, list):
            self.err(path, f"expected a list, got {type(v).__name__}")
            return []
        return v

    def get(self, d: dict, path: tuple, key: str, conv, default=_REQ):
        if key not in d or d[key] is None and default is not _REQ:
            if default is _REQ:
                self.err(path, f"missing required key {key!r}")
                return None
            return default
        try:
            return conv(d[key])
        except ValueError as exc:
            self.err(path + (key,), str(exc))
            return None


def _fmt_path(path: tuple) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _node_lines(node, path=(), out=None) -> dict[tuple, int]:
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value if isinstance(k, yaml.ScalarNode) else None
            sub = path + (key,)
            out[sub] = k.start_mark.line + 1
            _node_lines(v, sub, out)
            out[sub] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _node_lines(v, path + (i,), out)
    return out


def _load(text: str) -> tuple[Any, dict]:
    if not isinstance(text, str):
        raise ScenarioError([Problem(None, "", "scenario text must be a string")])
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else None
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError([Problem(line, "", f"syntax error: {exc.problem or exc}")]) from None
    except yaml.YAMLError as exc:
        raise ScenarioError([Problem(None, "", f"syntax error: {exc}")]) from None
    except (ValueError, TypeError, RecursionError) as exc:
        raise ScenarioError([Problem(None, "", f"unreadable document: {exc}")]) from None
    return data, (_node_lines(node) if node is not None else {})


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate; raises ScenarioError carrying every problem found."""
    data, lines = _load(text)
    r = _Reader(lines)
    if data is None:
        raise ScenarioError([Problem(1, "", "empty scenario")])
    top = r.mapping(data, (), ("name", "seed", "duration", "topology", "botnets", "attacks",
                               "defense", "queries", "output"))
    cfg = ScenarioConfig(
        name=r.get(top, (), "name", _str, "scenario"),
        seed=r.get(top, (), "seed", _int(0), 0),
        duration=r.get(top, (), "duration", parse_duration),
        topology=_topology(r, top.get("topology"), ("topology",)) if "topology" in top else None,
        botnets=[_botnet(r, b, ("botnets", i))
                 for i, b in enumerate(r.seq(top.get("botnets"), ("botnets",)))],
        attacks=[_attack(r, a, ("attacks", i))
                 for i, a in enumerate(r.seq(top.get("attacks"), ("attacks",)))],
        defense=_defense(r, top.get("defense") or {}, ("defense",)),
        queries=[_query(r, q, ("queries", i))
                 for i, q in enumerate(r.seq(top.get("queries"), ("queries",)))],
        output=_output(r, top.get("output") or {}, ("output",)),
    )
    if cfg.topology is None:
        r.err((), "missing required key 'topology'")
    if not r.problems:
        _semantic(r, cfg)
    if r.problems:
        raise ScenarioError(r.problems)
    return cfg


def _topology(r: _Reader, v, path) -> Optional[TopologyCfg]:
    d = r.mapping(v, path, ("space", "latency", "jitter", "data_center", "legit_hosts",
                            "monitors", "servers", "amplifiers"))
    space = r.get(d, path, "space", _cidr)
    legit = None
    if d.get("legit_hosts") is not None:
        lp = path + ("legit_hosts",)
        ld = r.mapping(d["legit_hosts"], lp, ("range", "count"))
        legit = LegitCfg(r.get(ld, lp, "range", _cidr), r.get(ld, lp, "count", _int(1)))
    monitors = []
    for i, m in enumerate(r.seq(d.get("monitors"), path + ("monitors",))):
        mp = path + ("monitors", i)
        md = r.mapping(m, mp, ("id", "range", "background_pps", "local_threshold",
                               "honeypot_addr"))
        monitors.append(MonitorCfg(
            id=r.get(md, mp, "id", _str), range=r.get(md, mp, "range", _cidr),
            background_pps=r.get(md, mp, "background_pps", _num(0), 0.0),
            local_threshold=r.get(md, mp, "local_threshold", _positive_threshold, None),
            honeypot_addr=r.get(md, mp, "honeypot_addr", _addr, None)))
    servers = []
    for i, s in enumerate(r.seq(d.get("servers"), path + ("servers",))):
        sp = path + ("servers", i)
        sd = r.mapping(s, sp, ("id", "addr", "backlog", "backlog_timeout", "link_capacity",
                               "link_window", "clients_pps"))
        servers.append(ServerCfg(
            id=r.get(sd, sp, "id", _str), addr=r.get(sd, sp, "addr", _addr),
            backlog=r.get(sd, sp, "backlog", _int(1), 128),
            backlog_timeout=r.get(sd, sp, "backlog_timeout", parse_duration, 3 * SECOND),
            link_capacity=r.get(sd, sp, "link_capacity", _int(1), None),
            link_window=r.get(sd, sp, "link_window", parse_duration, 100 * MS),
            clients_pps=r.get(sd, sp, "clients_pps", _num(0), 0.0)))
    amps = []
    for i, a in enumerate(r.seq(d.get("amplifiers"), path + ("amplifiers",))):
        ap = path + ("amplifiers", i)
        ad = r.mapping(a, ap, ("id", "broadcast", "hosts"))
        amps.append(AmplifierCfg(r.get(ad, ap, "id", _str), r.get(ad, ap, "broadcast", _addr),
                                 r.get(ad, ap, "hosts", _int(1))))
    return TopologyCfg(space=space, latency=r.get(d, path, "latency", parse_duration, 10 * MS),
                       jitter=r.get(d, path, "jitter", parse_duration, 5 * MS),
                       data_center=r.get(d, path, "data_center", _addr, None),
                       legit_hosts=legit, monitors=monitors, servers=servers, amplifiers=amps)


def _botnet(r: _Reader, v, path) -> BotnetCfg:
    d = r.mapping(v, path, ("id", "master", "master_nick", "cnc", "hosts_range",
                            "vulnerable_hosts", "patched_fraction", "initial_bots",
                            "nick_prefix", "ident", "scan_space", "scan_rate", "p_infect",
                            "bots_scan", "response_delay_max", "spoof", "amplifier"))
    cncs = []
    for i, c in enumerate(r.seq(d.get("cnc"), path + ("cnc",))):
        cp = path + ("cnc", i)
        cd = r.mapping(c, cp, ("id", "addr", "port", "password", "channel", "channel_password",
                               "topic"))
        cncs.append(CncCfg(
            id=r.get(cd, cp, "id", _str), addr=r.get(cd, cp, "addr", _addr),
            port=r.get(cd, cp, "port", _int(1), 6667),
            password=r.get(cd, cp, "password", _str, ""),
            channel=r.get(cd, cp, "channel", _str, "#c2"),
            channel_password=r.get(cd, cp, "channel_password", _str, ""),
            topic=r.get(cd, cp, "topic", _str, "")))
    if not cncs:
        r.err(path, "a botnet needs at least one C&C server under 'cnc'")
    return BotnetCfg(
        id=r.get(d, path, "id", _str), master=r.get(d, path, "master", _addr), cnc=cncs,
        hosts_range=r.get(d, path, "hosts_range", _cidr),
        vulnerable_hosts=r.get(d, path, "vulnerable_hosts", _int(0), 0),
        patched_fraction=r.get(d, path, "patched_fraction", _num(0.0, 1.0), 0.0),
        initial_bots=r.get(d, path, "initial_bots", _int(0), 0),
        master_nick=r.get(d, path, "master_nick", _str, "herder"),
        nick_prefix=r.get(d, path, "nick_prefix", _str, "bot-"),
        ident=r.get(d, path, "ident", _str, "bot"),
        scan_space=r.get(d, path, "scan_space", _cidr, None),
        scan_rate=r.get(d, path, "scan_rate", _int(0), 0),
        p_infect=r.get(d, path, "p_infect", _num(0.0, 1.0), 0.0),
        bots_scan=r.get(d, path, "bots_scan", _bool, False),
        response_delay_max=r.get(d, path, "response_delay_max", parse_duration, 100 * MS),
        spoof=r.get(d, path, "spoof", _bool, True),
        amplifier=r.get(d, path, "amplifier", _str, None))


def _attack(r: _Reader, v, path) -> AttackCfg:
    d = r.mapping(v, path, ("at", "botnet", "command", "cnc", "via"))
    via = r.get(d, path, "via", _str, "privmsg")
    if via not in ("privmsg", "topic"):
        r.err(path + ("via",), f"via must be privmsg or topic, not {via!r}")
    return AttackCfg(at=r.get(d, path, "at", parse_duration), botnet=r.get(d, path, "botnet", _str),
                     command=r.get(d, path, "command", _command),
                     cnc=r.get(d, path, "cnc", _str, None), via=via)


def _defense(r: _Reader, v, path) -> DefenseCfg:
    d = r.mapping(v, path, tuple(DefenseCfg.__dataclass_fields__))
    dflt = DefenseCfg()
    return DefenseCfg(
        detection=r.get(d, path, "detection", _scheme, None),
        honeypot=r.get(d, path, "honeypot", _scheme, None),
        interval=r.get(d, path, "interval", parse_duration, dflt.interval),
        upload_latency=r.get(d, path, "upload_latency", parse_duration, dflt.upload_latency),
        settle_delay=r.get(d, path, "settle_delay", parse_duration, None),
        global_threshold=r.get(d, path, "global_threshold", _positive_threshold, None),
        local_threshold=r.get(d, path, "local_threshold", _positive_threshold, None),
        honeywall=r.get(d, path, "honeywall", _bool, True),
        rebuild_period=r.get(d, path, "rebuild_period", parse_duration, dflt.rebuild_period),
        rebuild_duration=r.get(d, path, "rebuild_duration", parse_duration,
                               dflt.rebuild_duration),
        command_timeout=r.get(d, path, "command_timeout", parse_duration, dflt.command_timeout),
        retry_window=r.get(d, path, "retry_window", parse_duration, dflt.retry_window),
        register_timeout=r.get(d, path, "register_timeout", parse_duration,
                               dflt.register_timeout),
        query_cost=r.get(d, path, "query_cost", parse_duration, dflt.query_cost))


def _query(r: _Reader, v, path) -> QueryCfg:
    d = r.mapping(v, path, ("at", "requester", "monitor", "first", "last"))
    return QueryCfg(at=r.get(d, path, "at", parse_duration),
                    requester=r.get(d, path, "requester", _requester),
                    monitor=r.get(d, path, "monitor", _str, "ALL"),
                    first=r.get(d, path, "first", _int(0), 0),
                    last=r.get(d, path, "last", _int(0), 0))


def _output(r: _Reader, v, path) -> OutputCfg:
    d = r.mapping(v, path, ("dir", "artifacts"))
    arts = r.get(d, path, "artifacts", lambda x: x, list(ARTIFACTS))
    if not isinstance(arts, list) or any(a not in ARTIFACTS for a in arts):
        r.err(path + ("artifacts",), f"artifacts must be a list drawn from {list(ARTIFACTS)}")
        arts = list(ARTIFACTS)
    return OutputCfg(dir=r.get(d, path, "dir", _str, None), artifacts=arts)


def _semantic(r: _Reader, cfg: ScenarioConfig) -> None:
    topo = cfg.topology
    space = topo.space
    if cfg.duration <= 0:
        r.err(("duration",), "duration must be positive")

    def inside(addr: int, path: tuple, what: str) -> None:
        if not space.contains(addr):
            r.err(path, f"{what} {ip_str(addr)} lies outside the address space {space}")

    def range_inside(rg: IpRange, path: tuple, what: str) -> None:
        if not space.covers(rg):
            r.err(path, f"{what} {rg} lies outside the address space {space}")

    _unique(r, [m.id for m in topo.monitors], ("topology", "monitors"), "monitor")
    for i, m in enumerate(topo.monitors):
        range_inside(m.range, ("topology", "monitors", i, "range"), "monitor range")
        if m.honeypot_addr is not None and not m.range.contains(m.honeypot_addr):
            r.err(("topology", "monitors", i, "honeypot_addr"),
                  f"honeypot address must lie inside monitor {m.id}'s range {m.range}")
        for j in range(i):
            o = topo.monitors[j]
            if m.range.overlaps(o.range):
                r.err(("topology", "monitors", i, "range"),
                      f"monitor ranges overlap: {o.id} ({o.range}) and {m.id} ({m.range})")
    if topo.data_center is not None:
        inside(topo.data_center, ("topology", "data_center"), "data center")
    if topo.legit_hosts is not None:
        lh = topo.legit_hosts
        range_inside(lh.range, ("topology", "legit_hosts", "range"), "legit host range")
        if lh.count > lh.range.size - 2:
            r.err(("topology", "legit_hosts", "count"), f"{lh.count} hosts do not fit {lh.range}")
    _unique(r, [s.id for s in topo.servers], ("topology", "servers"), "server")
    for i, s in enumerate(topo.servers):
        inside(s.addr, ("topology", "servers", i, "addr"), "server")
        if s.clients_pps > 0 and topo.legit_hosts is None:
            r.err(("topology", "servers", i, "clients_pps"),
                  "client traffic needs topology.legit_hosts")
    amp_ids = {a.id for a in topo.amplifiers}
    for i, a in enumerate(topo.amplifiers):
        inside(a.broadcast, ("topology", "amplifiers", i, "broadcast"), "amplifier broadcast")
        if a.hosts >= a.broadcast - space.base:
            r.err(("topology", "amplifiers", i, "hosts"), "amplifier hosts run below the space")
    if cfg.defense.detection is Scheme.CENTRALIZED and cfg.defense.global_threshold is None:
        r.err(("defense", "global_threshold"), "centralized detection needs global_threshold")
    if cfg.defense.detection is Scheme.DISTRIBUTED:
        for i, m in enumerate(topo.monitors):
            if cfg.local_threshold(m) is None:
                r.err(("topology", "monitors", i),
                      f"distributed detection needs a local threshold for monitor {m.id}")
    if cfg.defense.honeypot is not None and cfg.defense.detection is None:
        r.err(("defense", "honeypot"), "honeypots are deployed on block, which needs detection")
    if cfg.defense.interval <= 0:
        r.err(("defense", "interval"), "interval must be positive")

    _unique(r, [b.id for b in cfg.botnets], ("botnets",), "botnet")
    for i, b in enumerate(cfg.botnets):
        p = ("botnets", i)
        inside(b.master, p + ("master",), "master")
        range_inside(b.hosts_range, p + ("hosts_range",), "host range")
        if b.scan_space is not None:
            range_inside(b.scan_space, p + ("scan_space",), "scan space")
        if b.vulnerable_hosts > b.hosts_range.size - 2:
            r.err(p + ("vulnerable_hosts",), f"{b.vulnerable_hosts} hosts do not fit {b.hosts_range}")
        if b.initial_bots > b.vulnerable_hosts:
            r.err(p + ("initial_bots",), "initial_bots exceeds vulnerable_hosts")
        if b.response_delay_max < MS:
            r.err(p + ("response_delay_max",), "response delay bound must be at least 1ms")
        if b.amplifier is not None and b.amplifier not in amp_ids:
            r.err(p + ("amplifier",), f"unknown amplifier {b.amplifier!r}")
        _unique(r, [c.id for c in b.cnc], p + ("cnc",), "C&C server")
        for j, c in enumerate(b.cnc):
            inside(c.addr, p + ("cnc", j, "addr"), "C&C server")
            if not c.channel.startswith("#") or " " in c.channel:
                r.err(p + ("cnc", j, "channel"), f"channel names start with '#': {c.channel!r}")
            for key in ("password", "channel_password"):
                val = getattr(c, key)
                if " " in val or val.startswith(":"):
                    r.err(p + ("cnc", j, key), "passwords cannot contain spaces or start with ':'")
    bots = {b.id: b for b in cfg.botnets}
    for i, a in enumerate(cfg.attacks):
        p = ("attacks", i)
        b = bots.get(a.botnet)
        if b is None:
            r.err(p + ("botnet",), f"unknown botnet {a.botnet!r}")
            continue
        if a.cnc is not None and a.cnc not in {c.id for c in b.cnc}:
            r.err(p + ("cnc",), f"botnet {b.id} has no C&C server {a.cnc!r}")
        if a.command.flood is Flood.SMURF and b.amplifier is None:
            r.err(p + ("command",), f"smurf attack needs an amplifier on botnet {b.id}")
        if a.at >= cfg.duration:
            r.err(p + ("at",), "attack issued after the run ends")
    mids = {m.id for m in topo.monitors}
    for i, q in enumerate(cfg.queries):
        if q.monitor != "ALL" and q.monitor not in mids:
            r.err(("queries", i, "monitor"), f"unknown monitor {q.monitor!r}")
        if q.last < q.first:
            r.err(("queries", i, "last"), "last interval precedes first")

    # every node needs its own address
    owners: dict[int, str] = {}
    def claim(addr: int, who: str, path: tuple) -> None:
        if addr in owners:
            r.err(path, f"address {ip_str(addr)} used by both {owners[addr]} and {who}")
        owners[addr] = who
    claim(topo.dc_addr(), "data center", ("topology", "data_center"))
    for i, s in enumerate(topo.servers):
        claim(s.addr, f"server {s.id}", ("topology", "servers", i, "addr"))
    for i, b in enumerate(cfg.botnets):
        claim(b.master, f"master of {b.id}", ("botnets", i, "master"))
        for j, c in enumerate(b.cnc):
            claim(c.addr, f"C&C {c.id}", ("botnets", i, "cnc", j, "addr"))
        for k, a in enumerate(b.host_addrs()):
            claim(a, f"host {k} of {b.id}", ("botnets", i, "hosts_range"))
    if cfg.defense.honeypot is not None:
        for i, m in enumerate(topo.monitors):
            claim(cfg.honeypot_addr(m), f"honeypot of {m.id}", ("topology", "monitors", i))


def _unique(r: _Reader, ids: list, path: tuple, what: str) -> None:
    seen = set()
    for i, x in enumerate(ids):
        if x in seen:
            r.err(path + (i, "id"), f"duplicate {what} id {x!r}")
        seen.add(x)


# serialization

def to_dict(cfg: ScenarioConfig) -> dict:
    dur = format_duration
    t = cfg.topology
    topo: dict = {"space": str(t.space), "latency": dur(t.latency), "jitter": dur(t.jitter)}
    if t.data_center is not None:
        topo["data_center"] = ip_str(t.data_center)
    if t.legit_hosts is not None:
        topo["legit_hosts"] = {"range": str(t.legit_hosts.range), "count": t.legit_hosts.count}
    topo["monitors"] = []
    for m in t.monitors:
        md = {"id": m.id, "range": str(m.range), "background_pps": m.background_pps}
        if m.local_threshold is not None:
            md["local_threshold"] = m.local_threshold
        if m.honeypot_addr is not None:
            md["honeypot_addr"] = ip_str(m.honeypot_addr)
        topo["monitors"].append(md)
    topo["servers"] = []
    for s in t.servers:
        sd = {"id": s.id, "addr": ip_str(s.addr), "backlog": s.backlog,
              "backlog_timeout": dur(s.backlog_timeout), "link_window": dur(s.link_window),
              "clients_pps": s.clients_pps}
        if s.link_capacity is not None:
            sd["link_capacity"] = s.link_capacity
        topo["servers"].append(sd)
    topo["amplifiers"] = [{"id": a.id, "broadcast": ip_str(a.broadcast), "hosts": a.hosts}
                          for a in t.amplifiers]
    botnets = []
    for b in cfg.botnets:
        bd = {"id": b.id, "master": ip_str(b.master), "master_nick": b.master_nick,
              "cnc": [{"id": c.id, "addr": ip_str(c.addr), "port": c.port,
                       "password": c.password, "channel": c.channel,
                       "channel_password": c.channel_password, "topic": c.topic}
                      for c in b.cnc],
              "hosts_range": str(b.hosts_range), "vulnerable_hosts": b.vulnerable_hosts,
              "patched_fraction": b.patched_fraction, "initial_bots": b.initial_bots,
              "nick_prefix": b.nick_prefix, "ident": b.ident, "scan_rate": b.scan_rate,
              "p_infect": b.p_infect, "bots_scan": b.bots_scan,
              "response_delay_max": dur(b.response_delay_max), "spoof": b.spoof}
        if b.scan_space is not None:
            bd["scan_space"] = str(b.scan_space)
        if b.amplifier is not None:
            bd["amplifier"] = b.amplifier
        botnets.append(bd)
    attacks = []
    for a in cfg.attacks:
        ad = {"at": dur(a.at), "botnet": a.botnet, "command": a.command.encode(), "via": a.via}
        if a.cnc is not None:
            ad["cnc"] = a.cnc
        attacks.append(ad)
    d = cfg.defense
    defense = {"detection": d.detection.value if d.detection else "none",
               "honeypot": d.honeypot.value if d.honeypot else "none",
               "interval": dur(d.interval), "upload_latency": dur(d.upload_latency),
               "honeywall": d.honeywall, "rebuild_period": dur(d.rebuild_period),
               "rebuild_duration": dur(d.rebuild_duration),
               "command_timeout": dur(d.command_timeout), "retry_window": dur(d.retry_window),
               "register_timeout": dur(d.register_timeout), "query_cost": dur(d.query_cost)}
    for key in ("settle_delay",):
        if getattr(d, key) is not None:
            defense[key] = dur(getattr(d, key))
    for key in ("global_threshold", "local_threshold"):
        if getattr(d, key) is not None:
            defense[key] = getattr(d, key)
    out = {"name": cfg.name, "seed": cfg.seed, "duration": dur(cfg.duration),
           "topology": topo, "botnets": botnets, "attacks": attacks, "defense": defense,
           "queries": [{"at": dur(q.at), "requester": q.requester.value, "monitor": q.monitor,
                        "first": q.first, "last": q.last} for q in cfg.queries],
           "output": {"artifacts": list(cfg.output.artifacts)}}
    if cfg.output.dir is not None:
        out["output"]["dir"] = cfg.output.dir
    return out


def to_text(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=False)


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())

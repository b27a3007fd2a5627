"""Build a world from a ScenarioConfig and run it to completion."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .botnet import Botnet, CncServer, Host, IrcChannel
from .engine import SECOND, Engine, EventKind, SimulationFault, Trace
from .honeypot import HoneypotController
from .itm import DataCenter, MonitoringPlane, Monitor, QueryRequest
from .net import AmplifierNetwork, LinkMeter, Network, Packet, Proto, Server, SynBacklog
from .scenario import ScenarioConfig, to_text


def scenario_digest(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(to_text(cfg).encode()).hexdigest()[:16]


@dataclass
class World:
    cfg: ScenarioConfig
    engine: Engine
    net: Network
    monitors: dict[str, Monitor]
    dc: DataCenter
    plane: MonitoringPlane
    servers: dict[str, Server] = field(default_factory=dict)
    botnets: dict[str, Botnet] = field(default_factory=dict)
    cncs: dict[str, CncServer] = field(default_factory=dict)
    controller: Optional[HoneypotController] = None


@dataclass
class RunResult:
    trace: Trace
    metrics: dict
    world: World
    fault: Optional[str] = None

    @property
    def digest(self) -> str:
        return self.trace.digest()


class RunFault(RuntimeError):
    """An engine fault during a run. ``partial`` holds the trace so far."""

    def __init__(self, message: str, partial: Trace):
        super().__init__(message)
        self.partial = partial


def build_world(cfg: ScenarioConfig, seed: int | None = None) -> World:
    seed = cfg.seed if seed is None else seed
    eng = Engine(seed)
    eng.trace.header["scenario"] = scenario_digest(cfg)
    topo = cfg.topology
    dfn = cfg.defense
    net = Network(eng, topo.latency, topo.jitter)

    monitors = [Monitor(m.id, m.range, dfn.interval, cfg.local_threshold(m),
                        cfg.honeypot_addr(m)) for m in topo.monitors]
    for m in monitors:
        net.add_monitor(m)
    dc = DataCenter(eng, monitors, addr=topo.dc_addr(), scheme=dfn.detection,
                    global_threshold=dfn.global_threshold if dfn.detection else None,
                    interval=dfn.interval, upload_latency=dfn.upload_latency,
                    settle_delay=dfn.settle_delay, query_cost=dfn.query_cost)
    net.add_node(dc.addr, dc)
    plane = MonitoringPlane(eng, dc, monitors, dfn.detection, cfg.duration)
    world = World(cfg, eng, net, {m.id: m for m in monitors}, dc, plane)

    if dfn.honeypot is not None:
        world.controller = HoneypotController(
            eng, net, dc, monitors, dfn.honeypot, honeywall=dfn.honeywall,
            rebuild_period=dfn.rebuild_period, rebuild_duration=dfn.rebuild_duration,
            duration=cfg.duration)
        dc.on_block = world.controller.handover

    for s in topo.servers:
        link = LinkMeter(s.link_capacity, s.link_window) if s.link_capacity else None
        srv = Server(s.id, s.addr, SynBacklog(s.backlog, s.backlog_timeout), link)
        net.add_node(s.addr, srv)
        world.servers[s.id] = srv

    amps = {}
    for a in topo.amplifiers:
        amp = AmplifierNetwork(a.broadcast, a.hosts)
        net.add_amplifier(amp)
        amps[a.id] = amp

    for b in cfg.botnets:
        cncs = []
        for c in b.cnc:
            ch = IrcChannel(c.channel, c.channel_password, c.topic)
            srv = CncServer(eng, net, c.id, c.addr, c.port, c.password, [ch],
                            operator_nick=b.master_nick)
            net.add_node(c.addr, srv)
            cncs.append(srv)
            world.cncs[c.id] = srv
        bn = Botnet(eng, net, b.id, master_addr=b.master, master_nick=b.master_nick, cncs=cncs,
                    nick_prefix=b.nick_prefix, ident=b.ident, spoof=b.spoof, space=topo.space,
                    amplifier=amps.get(b.amplifier) if b.amplifier else None,
                    response_delay_max=b.response_delay_max,
                    command_timeout=dfn.command_timeout, retry_window=dfn.retry_window,
                    register_timeout=dfn.register_timeout, scan_space=b.scan_space,
                    scan_rate=b.scan_rate, p_infect=b.p_infect, bots_scan=b.bots_scan)
        net.add_node(b.master, bn.master)
        for i, addr in enumerate(b.host_addrs()):
            host = Host(f"{b.id}-h{i}", addr, vulnerable=True, patched=b.patched(i))
            net.add_node(addr, host)
            bn.add_host(host)
        world.botnets[b.id] = bn
    return world


def _schedule(world: World) -> None:
    cfg = world.cfg
    eng = world.engine
    world.plane.start()
    if world.controller is not None:
        world.controller.start()

    for b in cfg.botnets:
        bn = world.botnets[b.id]
        for cnc in bn.cncs.values():
            bn.master.connect(cnc)
        seeded = [h for h in bn.hosts if h.susceptible][:b.initial_bots]
        for h in seeded:
            bn.seed_bot(h, 0)
        if b.scan_rate > 0 and b.scan_space is not None:
            bn.start_scanning(bn.master)

    for a in cfg.attacks:
        world.botnets[a.botnet].schedule_command(a.at, a.command.encode(), a.cnc, a.via)

    for i, q in enumerate(cfg.queries):
        req = QueryRequest(i + 1, q.requester, q.monitor, q.first, q.last)
        eng.at(q.at, EventKind.QUERY, lambda ev, req=req: world.dc.queries.submit(req))

    _background(world)


def _poisson(eng: Engine, rate: float, until: int, emit) -> None:
    """Poisson arrivals at ``rate`` per second on the background stream."""
    if rate <= 0:
        return
    rng = eng.stream("background-traffic")
    mean = SECOND / rate

    def tick(ev):
        emit(ev.fire_at)
        nxt = ev.fire_at + max(1, int(rng.exponential(mean)))
        if nxt < until:
            eng.at(nxt, EventKind.TIMER, tick)

    first = max(1, int(rng.exponential(mean)))
    if first < until:
        eng.at(first, EventKind.TIMER, tick)


def _background(world: World) -> None:
    """Benign traffic: noise into every monitored range plus clients of each server."""
    cfg = world.cfg
    eng = world.engine
    net = world.net
    rng = eng.stream("background-traffic")
    legit = cfg.topology.legit_hosts

    def legit_src() -> int:
        if legit is None:
            return 0
        return legit.range.address(1 + rng.integer(legit.count))

    protos = (Proto.UDP, Proto.TCP_SYN, Proto.ICMP_ECHO_REQUEST)
    for m in cfg.topology.monitors:
        def noise(now, rg=m.range):
            proto = protos[rng.integer(len(protos))]
            dst = rg.base + rng.integer(rg.size)
            net.send(Packet(legit_src(), dst, proto, net.sizes[proto], cls="background",
                            origin="background"))
        _poisson(eng, m.background_pps, cfg.duration, noise)
    for s in cfg.topology.servers:
        def client(now, addr=s.addr):
            net.send(Packet(legit_src(), addr, Proto.TCP_SYN, net.sizes[Proto.TCP_SYN], 80,
                            cls="legit", origin="client"))
        _poisson(eng, s.clients_pps, cfg.duration, client)


def run_world(world: World) -> Trace:
    eng = world.engine
    _schedule(world)
    try:
        eng.run_until(world.cfg.duration)
        world.net.closed = True
        eng.drain({EventKind.PACKET_DELIVERY})
    except (SimulationFault, RecursionError) as exc:
        eng.record("fault", error=str(exc))
        raise RunFault(str(exc), eng.trace) from exc
    eng.record("end", ledger=dict(world.net.ledger))
    return eng.trace


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> RunResult:
    """Run ``cfg`` (optionally under another master seed) and compute metrics."""
    from .metrics import compute_metrics

    world = build_world(cfg, seed)
    trace = run_world(world)
    return RunResult(trace, compute_metrics(trace, cfg), world)

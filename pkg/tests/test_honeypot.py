from types import SimpleNamespace

import pytest

import builders
from itmsim import parse_scenario
from itmsim.audit import kill_chain
from itmsim.engine import HOUR, SECOND
from itmsim.honeypot import (CapturedIntel, Direction, HoneypotState, InfiltrationAgent,
                             Observation, Verdict, capture_intel, honeywall_filter, infiltrate)
from itmsim.irc import IrcMessage
from itmsim.itm import Scheme
from itmsim.net import Packet, Proto, ip_to_int
from itmsim.runner import run_scenario


@pytest.mark.parametrize("line,direction,verdict", [
    ("PRIVMSG herder :ready bot-1", Direction.OUTBOUND, Verdict.SUPPRESS),
    ("NOTICE herder :hi", Direction.OUTBOUND, Verdict.SUPPRESS),
    ("TOPIC #x :!ddos udp 10.0.0.1 5 5", Direction.OUTBOUND, Verdict.SUPPRESS),
    ("JOIN #x k", Direction.OUTBOUND, Verdict.ALLOW),
    ("NICK bot-1", Direction.OUTBOUND, Verdict.ALLOW),
    ("PONG :srv", Direction.OUTBOUND, Verdict.ALLOW),
    ("PRIVMSG #x :!ddos udp 10.0.0.1 5 5", Direction.INBOUND, Verdict.ALLOW),
    ("NOTICE bot :names a b", Direction.INBOUND, Verdict.ALLOW),
])
def test_honeywall_filter(line, direction, verdict):
    assert honeywall_filter(IrcMessage.parse(line), direction) is verdict


def _fake_hp(lines):
    obs = [Observation(i, d, IrcMessage.parse(text)) for i, (d, text) in enumerate(lines)]
    return SimpleNamespace(id="hp-A", monitor=SimpleNamespace(id="A"), observed=obs,
                           conn=(0x0A000302, 6667))


OUT, IN = Direction.OUTBOUND, Direction.INBOUND
FULL = [(OUT, "PASS pw"), (OUT, "NICK bot-x"), (OUT, "USER zmb 0 * zmb"),
        (OUT, "JOIN #x k"), (IN, "JOIN #x")]


def test_capture_intel_complete():
    intel = capture_intel(_fake_hp(FULL))
    assert intel.complete
    assert (intel.server_password, intel.nickname, intel.ident, intel.channel_name,
            intel.channel_password, intel.cnc_port) == ("pw", "bot-x", "zmb", "#x", "k", 6667)


@pytest.mark.parametrize("drop", range(5))
def test_capture_intel_partial(drop):
    intel = capture_intel(_fake_hp(FULL[:drop] + FULL[drop + 1:]))
    assert not intel.complete


def test_capture_intel_needs_observations():
    with pytest.raises(ValueError):
        capture_intel(_fake_hp([]))


def test_infiltrate_requires_complete_intel():
    agent = InfiltrationAgent(SimpleNamespace(), "agent-1", 2, CapturedIntel())
    with pytest.raises(ValueError):
        infiltrate(agent, CapturedIntel(cnc_addr=1, complete=False))


@pytest.fixture(scope="module")
def chain():
    return run_scenario(parse_scenario(builders.chain_text()))


def test_kill_chain_in_order(chain):
    steps = kill_chain(list(chain.trace), "A")
    assert [r["kind"] for r in steps] == ["alarm", "block", "deploy", "compromise", "intel",
                                          "infiltrate", "takedown"]
    times = [r["t"] for r in steps]
    assert times == sorted(times)


def test_honeywall_drops_outbound_chatter_and_contains_floods(chain):
    tr = chain.trace
    sup = tr.of_kind("hw_suppress")
    assert sup and all(r["verb"] in ("PRIVMSG", "NOTICE", "TOPIC") for r in sup)
    hp_pkts = [r for r in tr.of_kind("pkt") if r["origin"].startswith("hp-")]
    assert hp_pkts and all(r["proto"] == "irc" for r in hp_pkts)
    assert not [r for r in hp_pkts if r["verb"] in ("PRIVMSG", "NOTICE", "TOPIC")]


def test_honeywall_contains_non_irc(chain):
    hp = chain.world.controller.honeypots["hp-A"]
    p = Packet(hp.addr, ip_to_int("10.0.1.10"), Proto.UDP, 512, cls="attack", origin=hp.id)
    before = chain.world.net.ledger["generated"]
    assert hp._outbound(p) is False
    assert chain.trace.of_kind("hw_contain")[-1]["honeypot"] == "hp-A"
    assert chain.world.net.ledger["generated"] == before


def test_agent_only_observes(chain):
    tr = chain.trace
    agents = {a.id for a in chain.world.controller.agents}
    sent = [r for r in tr.of_kind("pkt") if r["origin"] in agents]
    assert sent and all(r["proto"] == "irc" for r in sent)
    assert not [r for r in sent if r["verb"] in ("PRIVMSG", "TOPIC")]


def test_enumeration_matches_channel_roster(chain):
    tr = chain.trace
    inf = next(r for r in tr.of_kind("infiltrate") if r["status"] == "ok")
    present = {}
    for r in tr:
        if r["t"] > inf["t"]:
            break
        if r["kind"] == "join":
            present[r["nick"]] = True
        elif r["kind"] == "neutralized":
            present.pop("bot-" + r["bot"], None)
    assert set(inf["bots"]) == set(present)
    assert inf["enumerated"] == len(present) == 6  # five seeded bots plus the decoy


def test_double_takedown_is_noop(chain):
    ctl = chain.world.controller
    cnc = chain.world.cncs["c"]
    n = len(chain.trace.of_kind("takedown"))
    assert n == 1
    assert ctl.takedown(cnc, None, cnc.down_at + 1) is False
    assert len(chain.trace.of_kind("takedown")) == n


def test_no_rebuild_in_short_run(chain):
    assert not chain.trace.of_kind("rebuild")


@pytest.mark.parametrize("name", ["multi_victim_k3"])
def test_centralized_serves_handovers_fifo(name):
    res = run_scenario(builders.with_scheme(name, Scheme.CENTRALIZED))
    tr = res.trace
    handovers = [r["monitor"] for r in tr.of_kind("handover")]
    deploys = tr.of_kind("deploy")
    assert [r["monitor"] for r in deploys] == handovers
    assert deploys[0]["wait"] == 0 and all(r["wait"] > 0 for r in deploys[1:])
    # each later deploy follows a completed rebuild of the single honeypot
    done = [r["t"] for r in tr.of_kind("rebuild") if r["phase"] == "done"]
    for d in deploys[1:]:
        assert d["t"] in done
    assert {r["honeypot"] for r in deploys} == {"hp-dc"}


def test_distributed_deploys_in_parallel():
    res = run_scenario(builders.with_scheme("multi_victim_k3", Scheme.DISTRIBUTED))
    deploys = res.trace.of_kind("deploy")
    assert sorted(r["honeypot"] for r in deploys) == ["hp-M1", "hp-M2", "hp-M3"]
    assert all(r["wait"] == 0 for r in deploys)
    assert not res.trace.of_kind("handover_queued")


def test_periodic_rebuild_at_24h_keeps_archive():
    cfg = parse_scenario(builders.chain_text(duration="86520s", interval="60s", threshold=600))
    res = run_scenario(cfg)
    tr = res.trace
    hp = res.world.controller.honeypots["hp-A"]
    rb = [(r["t"], r["phase"]) for r in tr.of_kind("rebuild") if r["honeypot"] == "hp-A"]
    assert rb == [(24 * HOUR, "start"), (24 * HOUR + 60 * SECOND, "done")]
    assert hp.state is HoneypotState.CLEAN and hp.bot is None and not hp.observed
    assert res.world.controller.archive and res.world.controller.archive[0].complete

import pytest
from hypothesis import given, strategies as st

import builders
from itmsim import parse_scenario
from itmsim.botnet import (BotState, IllegalTransition, ScanCursor, per_tick, scan_step)
from itmsim.engine import SECOND, EventKind, RngStream
from itmsim.net import NodeRole, parse_cidr
from itmsim.runner import build_world, run_world


@given(st.integers(1, 100_000), st.integers(0, 10_000))
def test_per_tick_ten_consecutive_ticks_sum_to_rate(rate, j):
    assert sum(per_tick(rate, k) for k in range(j, j + 10)) == rate


def test_scan_cursor_visits_every_address_once_per_pass():
    space = parse_cidr("10.0.0.0/26")
    cur = ScanCursor(space)
    rng = RngStream(1, "infection")
    first = [cur.next(rng) for _ in range(64)]
    second = [cur.next(rng) for _ in range(64)]
    assert sorted(first) == sorted(second) == list(range(space.base, space.base + 64))
    assert first != second and cur.passes == 1


class _Node:
    def __init__(self, role, susceptible):
        self.role = role
        self.susceptible = susceptible


def test_scan_step_matches_replayed_stream():
    """Oracle: an eager Fisher-Yates plus Bernoulli draws replayed from the same stream."""
    space = parse_cidr("10.0.0.0/24")
    nodes = {space.base + i: _Node(NodeRole.LEGITIMATE_HOST, i % 3 == 0) for i in range(0, 256, 2)}
    nodes[space.base + 101] = _Node(NodeRole.HONEYPOT, False)
    p = 0.4
    hits = scan_step(ScanCursor(space), 200, RngStream(99, "infection"), p, nodes.get)

    rng = RngStream(99, "infection")
    perm = list(range(256))
    expected = []
    for i in range(200):
        j = i + min(int(rng.uniform() * (256 - i)), 256 - i - 1)
        perm[i], perm[j] = perm[j], perm[i]
        addr = space.base + perm[i]
        node = nodes.get(addr)
        if node is None:
            continue
        if node.role is NodeRole.HONEYPOT:
            expected.append(addr)
        elif node.susceptible and rng.uniform() < p:
            expected.append(addr)
    assert hits == expected


def _world(text=None, **over):
    cfg = parse_scenario(text or builders.minimal_text())
    for k, v in over.items():
        setattr(cfg.defense, k, v)
    return build_world(cfg)


def test_bot_life_cycle_and_attack_volume():
    w = _world(builders.sweep_text("none", 40, duration=30))
    run_world(w)
    tr = w.engine.trace
    kinds = [r["kind"] for r in tr if r.get("bot") == "bn-h0"]
    assert kinds[:3] == ["infect", "join", "attack_start"]
    attack = [r for r in tr.of_kind("pkt") if r["cls"] == "attack"]
    assert len(attack) == 40 * 22  # rate x duration
    stop = tr.of_kind("attack_stop")[0]
    assert stop["reason"] == "done"
    assert all(r["gen"] < stop["t"] for r in attack)


def test_illegal_transition_raises():
    w = _world()
    run_world(w)
    bot = next(iter(w.botnets["bn"].bots.values()))
    with pytest.raises(IllegalTransition):
        bot._transition(BotState.INFECTED, "x")


def test_response_delay_within_bound():
    w = _world()
    run_world(w)
    for r in w.engine.trace.of_kind("attack_start"):
        assert 1000 <= r["resp_us"] <= 100_000


def test_takedown_before_command_means_no_attack():
    w = _world(builders.minimal_text().replace("duration: 20s", "duration: 40s"))
    cnc = w.cncs["c"]
    w.engine.at(2 * SECOND, EventKind.TAKEDOWN, lambda ev: cnc.takedown(ev.fire_at))
    run_world(w)
    tr = w.engine.trace
    assert tr.of_kind("cmd_lost")
    assert not [r for r in tr.of_kind("pkt") if r["cls"] == "attack"]
    neut = tr.of_kind("neutralized")[0]
    assert neut["reason"] == "cnc_unreachable" and neut["t"] >= 2 * SECOND + 30 * SECOND


def test_attack_stops_within_command_timeout_of_takedown():
    w = _world(builders.sweep_text("none", 50, duration=60))
    cnc = w.cncs["c"]
    w.engine.at(20 * SECOND, EventKind.TAKEDOWN, lambda ev: cnc.takedown(ev.fire_at))
    run_world(w)
    tr = w.engine.trace
    attack = [r for r in tr.of_kind("pkt") if r["cls"] == "attack"]
    assert max(r["gen"] for r in attack) < 25 * SECOND
    assert any(r["gen"] > 24 * SECOND for r in attack)
    assert tr.of_kind("attack_stop")[0]["reason"] == "cnc_lost"
    neut = tr.of_kind("neutralized")[0]
    assert neut["t"] >= 20 * SECOND + 30 * SECOND


def test_second_cnc_keeps_its_bots():
    text = builders.sweep_text("none", 20, duration=40).replace(
        'cnc: [{id: c, addr: 10.0.4.1, password: pw, channel: "#x", channel_password: k}]',
        'cnc: [{id: c, addr: 10.0.4.1, password: pw, channel: "#x", channel_password: k},'
        ' {id: d, addr: 10.0.4.2, password: pw, channel: "#y", channel_password: k}]').replace(
        "vulnerable_hosts: 1\n    initial_bots: 1", "vulnerable_hosts: 2\n    initial_bots: 2")
    w = _world(text)
    w.engine.at(10 * SECOND, EventKind.TAKEDOWN, lambda ev: w.cncs["c"].takedown(ev.fire_at))
    run_world(w)
    late = {r["origin"] for r in w.engine.trace.of_kind("pkt")
            if r["cls"] == "attack" and r["gen"] > 20 * SECOND}
    assert late == {"bn-h1"}


def test_wrong_channel_key_is_rejected():
    text = builders.minimal_text()
    w = _world(text)
    ch = w.cncs["c"].channels["#x"]
    # the bot already holds the old key when the server changes it
    w.engine.at(1, EventKind.TIMER, lambda ev: setattr(ch, "channel_password", "other"))
    run_world(w)
    tr = w.engine.trace
    assert tr.of_kind("reject") and not tr.of_kind("join")


def test_bad_command_is_ignored():
    w = _world()
    bn = w.botnets["bn"]
    bn.schedule_command(3 * SECOND, "!ddos syn 10.0.0.200 5")
    run_world(w)
    assert w.engine.trace.of_kind("cmd_bad")


def test_scanning_recruits_susceptible_hosts_only():
    text = builders.minimal_text().replace(
        "vulnerable_hosts: 1\n    initial_bots: 1",
        "vulnerable_hosts: 10\n    initial_bots: 0\n    patched_fraction: 0.5\n"
        "    scan_space: 10.0.0.0/24\n    scan_rate: 100\n    p_infect: 1.0")
    w = _world(text)
    run_world(w)
    infected = {r["bot"] for r in w.engine.trace.of_kind("infect")}
    hosts = w.botnets["bn"].hosts
    assert infected == {h.id for h in hosts if not h.patched}
    assert sum(h.patched for h in hosts) == 5

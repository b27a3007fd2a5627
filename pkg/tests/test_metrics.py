import pytest

import builders
from itmsim import parse_scenario
from itmsim.engine import MS, SECOND
from itmsim.metrics import compute_metrics, denial_fraction, ledger_closes, packet_ledger
from itmsim.runner import run_scenario

CFG_TEXT = """
name: oracle
duration: 30s
topology:
  space: 10.0.0.0/20
  monitors:
    - {id: A, range: 10.0.1.0/24, local_threshold: 10}
    - {id: B, range: 10.0.2.0/24, local_threshold: 10}
  servers:
    - {id: victim, addr: 10.0.1.10}
botnets: []
defense:
  detection: distributed
  honeypot: distributed
"""


def _pkt(gen, cls, dst, outcome="delivered", **kw):
    return {"t": gen + 10 * MS, "kind": "pkt", "gen": gen, "cls": cls, "dst": dst,
            "outcome": outcome, **kw}


def _trace():
    V = "10.0.1.10"
    s = SECOND
    recs = [
        _pkt(1 * s, "legit", V),
        _pkt(2190 * MS, "attack", V),
        _pkt(2490 * MS, "attack", V),
        _pkt(2600 * MS, "legit", V, conn="refused"),
        _pkt(2700 * MS, "legit", V, "drop_saturated"),
        {"t": 1 * s, "kind": "alarm", "monitor": "B", "interval": 0},
        {"t": 3 * s, "kind": "alarm", "monitor": "A", "interval": 2},
        {"t": 3100 * MS, "kind": "block", "monitor": "A"},
        _pkt(3200 * MS, "attack", V, "drop_blocked"),
        _pkt(3300 * MS, "attack", V, "drop_blocked"),
        _pkt(3400 * MS, "attack", V),
        {"t": 4 * s, "kind": "intel", "monitor": "A", "complete": True},
        {"t": 5 * s, "kind": "takedown", "monitor": "A", "time_to_takedown": 2 * s},
        _pkt(20 * s, "legit", V),
    ]
    for m in "AB":
        recs += [{"t": (k + 1) * s, "kind": "log", "monitor": m, "interval": k} for k in range(5)]
    return sorted(recs, key=lambda r: r["t"])


@pytest.fixture(scope="module")
def oracle():
    return compute_metrics(_trace(), parse_scenario(CFG_TEXT))


def test_hand_built_monitor_metrics(oracle):
    a, b = oracle["monitors"]["A"], oracle["monitors"]["B"]
    assert a["first_attack"] == 2200 * MS
    assert a["detection_latency"] == 800 * MS
    assert a["false_alarms"] == 0 and a["false_positive_rate"] == 0
    assert a["blocked_attack_fraction"] == pytest.approx(2 / 3)
    assert a["time_to_intel"] == 1 * SECOND
    assert a["time_to_takedown"] == 2 * SECOND
    assert b["detection_latency"] is None and b["false_alarms"] == 1
    assert b["false_positive_rate"] == pytest.approx(0.2)
    assert b["blocked_attack_fraction"] is None


def test_hand_built_server_and_summary(oracle):
    v = oracle["servers"]["victim"]
    assert v["legit_packets"] == 4
    assert v["victim_denial_fraction"] == 0.5
    assert (v["denial_pre_attack"], v["denial_during_attack"], v["denial_post_recovery"]) == (0, 1, 0)
    s = oracle["summary"]
    assert s["false_positive_rate"] == pytest.approx(0.1)
    assert s["detection_latency"] == 800 * MS
    assert s["attack_packets"] == 5 and s["takedowns"] == 1
    assert oracle["ledger"]["generated"] == 9 and oracle["ledger_closes"]


def test_denial_window_bounds():
    recs = _trace()
    assert denial_fraction(recs, "10.0.1.10", 2 * SECOND, 3 * SECOND) == (1.0, 2)
    assert denial_fraction(recs, "10.0.9.9") == (None, 0)


def test_ledger_detects_missing_outcome():
    led = packet_ledger(_trace())
    assert ledger_closes(led)
    led["delivered"] -= 1
    assert not ledger_closes(led)


def _quiet_text(threshold, detection="distributed"):
    return f"""
name: quiet
seed: 4
duration: 20s
topology:
  space: 10.0.0.0/20
  legit_hosts: {{range: 10.0.12.0/24, count: 20}}
  monitors:
    - {{id: A, range: 10.0.1.0/24, background_pps: 30, local_threshold: {threshold}}}
  servers:
    - {{id: victim, addr: 10.0.1.10, clients_pps: 5}}
botnets: []
defense:
  detection: {detection}
"""


def test_legit_only_run():
    m = run_scenario(parse_scenario(_quiet_text(200))).metrics
    s = m["summary"]
    assert s["false_positive_rate"] == 0
    assert s["detection_latency"] is None and s["time_to_takedown"] is None
    assert s["blocked_attack_fraction"] is None
    assert m["servers"]["victim"]["victim_denial_fraction"] == 0


def test_threshold_below_background_raises_false_alarms():
    m = run_scenario(parse_scenario(_quiet_text(5))).metrics
    assert m["monitors"]["A"]["false_alarms"] >= 1
    assert m["summary"]["false_positive_rate"] > 0


def test_defense_disabled():
    cfg = parse_scenario(builders.sweep_text("none", 200, duration=20))
    s = run_scenario(cfg).metrics["summary"]
    assert s["blocked_attack_fraction"] == 0
    assert s["false_positive_rate"] is None and s["detection_latency"] is None

"""Metrics computed from a finished trace plus the config that produced it.

Times are integer microseconds. A metric whose defining events never
happened (no alarm, no takedown, ...) is ``None``, never zero.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional

from .net import ip_str, ip_to_int
from .scenario import ScenarioConfig

OUTCOMES = ("delivered", "drop_blocked", "drop_saturated", "absorbed")


def _mean(xs: list) -> Optional[float]:
    return sum(xs) / len(xs) if xs else None


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def packet_ledger(records: Iterable[dict]) -> dict:
    led = {"generated": 0, **{o: 0 for o in OUTCOMES}}
    for r in records:
        if r["kind"] == "pkt":
            led["generated"] += 1
            led[r["outcome"]] += 1
    return led


def ledger_closes(led: dict) -> bool:
    return led["generated"] == sum(led[o] for o in OUTCOMES)


def denial_fraction(records: Iterable[dict], addr: str, start: int = 0,
                    end: Optional[int] = None) -> tuple[Optional[float], int]:
    """Share of legit packets generated toward ``addr`` in [start, end) that the victim denied.

    Denied means refused by the SYN backlog or dropped on a saturated link.
    Returns (fraction, legit packets counted).
    """
    legit = denied = 0
    for r in records:
        if r["kind"] != "pkt" or r["cls"] != "legit" or r["dst"] != addr:
            continue
        g = r["gen"]
        if g < start or (end is not None and g >= end):
            continue
        legit += 1
        if r["outcome"] == "drop_saturated" or r.get("conn") == "refused":
            denied += 1
    return _ratio(denied, legit), legit


def compute_metrics(trace, cfg: ScenarioConfig) -> dict:
    records = list(trace)
    topo = cfg.topology
    interval = cfg.defense.interval
    monitors = topo.monitors
    addr_cache: dict[str, int] = {}

    def owner(addr: str) -> Optional[str]:
        a = addr_cache.get(addr)
        if a is None:
            a = addr_cache[addr] = ip_to_int(addr)
        for m in monitors:
            if m.range.contains(a):
                return m.id
        return None

    first_attack_arrival: dict[str, int] = {}
    attack_by_interval: dict[str, set] = defaultdict(set)
    attack_pkts: dict[str, list] = defaultdict(list)  # (gen, outcome)
    alarms: dict[str, list] = defaultdict(list)
    blocks: dict[str, int] = {}
    evaluated: dict[str, int] = defaultdict(int)
    intel_at: dict[str, int] = {}
    takedowns: list[dict] = []
    first_attack_gen: Optional[int] = None
    attack_total = 0

    for r in records:
        kind = r["kind"]
        if kind == "pkt":
            if r["cls"] != "attack":
                continue
            attack_total += 1
            if first_attack_gen is None or r["gen"] < first_attack_gen:
                first_attack_gen = r["gen"]
            mid = owner(r["dst"])
            if mid is None:
                continue
            t = r["t"]
            if mid not in first_attack_arrival or t < first_attack_arrival[mid]:
                first_attack_arrival[mid] = t
            attack_by_interval[mid].add(t // interval)
            attack_pkts[mid].append((r["gen"], r["outcome"]))
        elif kind == "alarm":
            alarms[r["monitor"]].append(r)
        elif kind == "block":
            blocks.setdefault(r["monitor"], r["t"])
        elif kind == "log":
            if cfg.defense.detection is not None:
                evaluated[r["monitor"]] += 1
        elif kind == "intel":
            if r.get("complete") and r.get("monitor"):
                intel_at.setdefault(r["monitor"], r["t"])
        elif kind == "takedown":
            takedowns.append(r)

    per_monitor = {}
    for m in monitors:
        mid = m.id
        al = alarms.get(mid, [])
        first_alarm = al[0]["t"] if al else None
        start = first_attack_arrival.get(mid)
        alarm_intervals = {a["interval"] for a in al}
        false_alarms = sum(1 for k in alarm_intervals if k not in attack_by_interval[mid])
        pkts = attack_pkts.get(mid, [])
        if mid in blocks:
            after = [o for g, o in pkts if g >= blocks[mid]]
            blocked = _ratio(sum(1 for o in after if o == "drop_blocked"), len(after))
        else:
            blocked = 0.0 if pkts else None
        td = [x for x in takedowns if x.get("monitor") == mid]
        per_monitor[mid] = {
            "first_attack": start,
            "first_alarm": first_alarm,
            "detection_latency": first_alarm - start
            if first_alarm is not None and start is not None and first_alarm >= start else None,
            "alarm_intervals": len(alarm_intervals),
            "false_alarms": false_alarms,
            "intervals_evaluated": evaluated.get(mid, 0),
            "false_positive_rate": _ratio(false_alarms, evaluated.get(mid, 0)),
            "blocked_at": blocks.get(mid),
            "attack_packets": len(pkts),
            "blocked_attack_fraction": blocked,
            "time_to_intel": intel_at[mid] - first_alarm
            if mid in intel_at and first_alarm is not None else None,
            "time_to_takedown": td[0]["time_to_takedown"] if td else None,
        }

    # victim denial, split around the attack and the recovery point
    recovery = None
    if takedowns:
        recovery = max(x["t"] for x in takedowns) + cfg.defense.command_timeout
    per_server = {}
    for s in topo.servers:
        a = ip_str(s.addr)
        overall, n = denial_fraction(records, a)
        pre, n_pre = denial_fraction(records, a, 0, first_attack_gen)
        during, _ = (denial_fraction(records, a, first_attack_gen, recovery)
                     if first_attack_gen is not None else (None, 0))
        post, n_post = (denial_fraction(records, a, recovery)
                        if recovery is not None else (None, 0))
        per_server[s.id] = {"legit_packets": n, "victim_denial_fraction": overall,
                            "denial_pre_attack": pre, "denial_during_attack": during,
                            "denial_post_recovery": post, "legit_pre": n_pre,
                            "legit_post": n_post}

    led = packet_ledger(records)
    all_blocked = [v["blocked_attack_fraction"] for v in per_monitor.values()
                   if v["blocked_attack_fraction"] is not None and v["blocked_at"] is not None]
    any_attack = attack_total > 0
    lat = [v["detection_latency"] for v in per_monitor.values()
           if v["detection_latency"] is not None]
    fa = sum(v["false_alarms"] for v in per_monitor.values())
    ev = sum(v["intervals_evaluated"] for v in per_monitor.values())
    summary = {
        "detection_latency": _mean(lat),
        "false_positive_rate": _ratio(fa, ev),
        "blocked_attack_fraction": _mean(all_blocked) if all_blocked
        else (0.0 if any_attack else None),
        "victim_denial_fraction": _mean([v["victim_denial_fraction"] for v in per_server.values()
                                         if v["victim_denial_fraction"] is not None]),
        "time_to_intel": _mean([v["time_to_intel"] for v in per_monitor.values()
                                if v["time_to_intel"] is not None]),
        "time_to_takedown": _mean([x["time_to_takedown"] for x in takedowns
                                   if x.get("time_to_takedown") is not None]),
        "takedowns": len(takedowns),
        "attack_packets": attack_total,
    }
    return {
        "scenario": cfg.name,
        "seed": trace.header.get("master_seed", cfg.seed) if hasattr(trace, "header") else cfg.seed,
        "detection": cfg.defense.detection.value if cfg.defense.detection else "none",
        "honeypot": cfg.defense.honeypot.value if cfg.defense.honeypot else "none",
        "monitors": per_monitor,
        "servers": per_server,
        "summary": summary,
        "ledger": led,
        "ledger_closes": ledger_closes(led),
    }


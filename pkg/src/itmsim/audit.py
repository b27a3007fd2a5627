"""Trace audits: bot life-cycle legality, the kill-chain order, residual attack traffic."""
from __future__ import annotations

from typing import Iterable, Optional

from .botnet import LEGAL_TRANSITIONS, BotState

KILL_CHAIN = ("alarm", "block", "deploy", "compromise", "intel", "infiltrate", "takedown")
_LIFECYCLE_KINDS = {"infect", "join", "attack_start", "attack_stop", "neutralized"}


def lifecycle_violations(records: Iterable[dict]) -> list[str]:
    """Every recorded bot transition must start where the last one ended and be legal.

    A fresh ``infect`` may restart a life (a rebuilt honeypot can be infected again).
    """
    last: dict[str, str] = {}
    bad = []
    for r in records:
        if r["kind"] not in _LIFECYCLE_KINDS:
            continue
        bot, prev, new = r["bot"], r["prev"], r["state"]
        if r["kind"] == "infect":
            if prev != BotState.VULNERABLE.value:
                bad.append(f"t={r['t']} {bot}: infect from {prev}")
        elif last.get(bot) != prev:
            bad.append(f"t={r['t']} {bot}: {r['kind']} claims prev={prev}, was {last.get(bot)}")
        if (BotState(prev), BotState(new)) not in LEGAL_TRANSITIONS:
            bad.append(f"t={r['t']} {bot}: illegal {prev} -> {new}")
        last[bot] = new
    return bad


def _matches(step: str, r: dict, monitor: Optional[str]) -> bool:
    if r["kind"] != step:
        return False
    if step == "intel" and not r.get("complete"):
        return False
    if step == "infiltrate" and r.get("status") != "ok":
        return False
    if monitor is not None and step != "infiltrate" and r.get("monitor") != monitor:
        return False
    return True


def kill_chain(records: Iterable[dict], monitor: str | None = None) -> list[dict]:
    """The earliest ordered match of the kill chain, or the prefix found so far."""
    found = []
    for r in records:
        if len(found) == len(KILL_CHAIN):
            break
        if _matches(KILL_CHAIN[len(found)], r, monitor):
            found.append(r)
    return found


def has_kill_chain(records: Iterable[dict], monitor: str | None = None) -> bool:
    return len(kill_chain(records, monitor)) == len(KILL_CHAIN)


def attack_packets_after(records: Iterable[dict], t: int) -> int:
    """Attack packets generated strictly after ``t``."""
    return sum(1 for r in records
               if r["kind"] == "pkt" and r["cls"] == "attack" and r["gen"] > t)

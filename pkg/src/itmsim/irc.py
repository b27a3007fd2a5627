"""IRC message framing and the botnet's attack command dialect.

Commands travel as channel text of the form::

    !ddos <flood> <target> <rate_pps> <duration_s>

where ``flood`` is one of syn, ack, icmp, udp, smurf and ``target`` is either a
dotted-quad address or a CIDR range.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from .engine import SECOND
from .net import CidrError, IpRange, ip_str, ip_to_int, parse_cidr

COMMAND_PREFIX = "!ddos"


class IrcParseError(ValueError):
    pass


class CommandError(ValueError):
    pass


class Verb(str, enum.Enum):
    PASS = "PASS"
    NICK = "NICK"
    USER = "USER"
    JOIN = "JOIN"
    TOPIC = "TOPIC"
    PRIVMSG = "PRIVMSG"
    NOTICE = "NOTICE"
    PING = "PING"
    PONG = "PONG"


@dataclass
class IrcMessage:
    verb: Verb
    params: list[str] = field(default_factory=list)
    sender: str = ""

    def serialize(self) -> str:
        parts = [self.verb.value]
        if self.params:
            *middle, last = self.params
            for p in middle:
                if not p or " " in p or p.startswith(":"):
                    raise IrcParseError(f"middle parameter {p!r} cannot be framed")
            parts.extend(middle)
            if not last or " " in last or last.startswith(":"):
                last = ":" + last
            parts.append(last)
        return " ".join(parts)

    @property
    def trailing(self) -> str:
        return self.params[-1] if self.params else ""

    @classmethod
    def parse(cls, line: str, sender: str = "") -> "IrcMessage":
        if not line or "\n" in line or "\r" in line:
            raise IrcParseError(f"bad IRC line {line!r}")
        head, sep, trailing = line.partition(" :")
        tokens = head.split(" ")
        if any(t == "" for t in tokens):
            raise IrcParseError(f"empty token in {line!r}")
        try:
            verb = Verb(tokens[0])
        except ValueError:
            raise IrcParseError(f"unknown verb {tokens[0]!r}") from None
        params = tokens[1:]
        if sep:
            params.append(trailing)
        return cls(verb, params, sender)


def msg(verb: Verb, *params: str) -> str:
    """Serialized line for ``verb params...``."""
    return IrcMessage(verb, list(params)).serialize()


class Flood(str, enum.Enum):
    SYN = "syn"
    ACK = "ack"
    ICMP = "icmp"
    UDP = "udp"
    SMURF = "smurf"


Target = Union[int, IpRange]


@dataclass(frozen=True)
class AttackCommand:
    flood: Flood
    target: Target
    rate_pps: int
    duration: int  # microseconds, whole seconds on the wire

    def __post_init__(self):
        if self.rate_pps <= 0:
            raise CommandError("rate must be positive")
        if self.duration <= 0 or self.duration % SECOND:
            raise CommandError("duration must be a positive whole number of seconds")

    @property
    def duration_s(self) -> int:
        return self.duration // SECOND

    def target_text(self) -> str:
        return str(self.target) if isinstance(self.target, IpRange) else ip_str(self.target)

    def encode(self) -> str:
        return f"{COMMAND_PREFIX} {self.flood.value} {self.target_text()} {self.rate_pps} {self.duration_s}"


def is_command(text: str) -> bool:
    return text == COMMAND_PREFIX or text.startswith(COMMAND_PREFIX + " ")


def parse_command(text: str) -> AttackCommand:
    parts = text.split()
    if len(parts) != 5 or parts[0] != COMMAND_PREFIX:
        raise CommandError(f"expected '{COMMAND_PREFIX} <flood> <target> <rate> <dur>', got {text!r}")
    _, flood, target, rate, dur = parts
    try:
        flood = Flood(flood)
    except ValueError:
        raise CommandError(f"unknown flood type {flood!r}") from None
    try:
        tgt: Target = parse_cidr(target) if "/" in target else ip_to_int(target)
    except CidrError as exc:
        raise CommandError(str(exc)) from None
    if not (rate.isdigit() and dur.isdigit()):
        raise CommandError(f"rate and duration must be positive integers in {text!r}")
    return AttackCommand(flood, tgt, int(rate), int(dur) * SECOND)

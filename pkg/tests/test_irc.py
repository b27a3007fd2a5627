import pytest
from hypothesis import given, strategies as st

from itmsim.engine import SECOND
from itmsim.irc import (AttackCommand, CommandError, Flood, IrcMessage, IrcParseError, Verb,
                        is_command, msg, parse_command)
from itmsim.net import parse_cidr, ip_to_int

middle = st.text(st.characters(min_codepoint=33, max_codepoint=126), min_size=1,
                 max_size=12).filter(lambda s: not s.startswith(":"))
trailing = st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=40)


@given(st.sampled_from(list(Verb)), st.lists(middle, max_size=3), trailing)
def test_serialize_parse_round_trip(verb, mids, last):
    m = IrcMessage(verb, mids + [last])
    assert IrcMessage.parse(m.serialize()).params == m.params


@given(st.text(max_size=60))
def test_parse_never_raises_anything_but_parse_error(line):
    try:
        IrcMessage.parse(line)
    except IrcParseError:
        pass


def test_trailing_colon_rules():
    assert msg(Verb.PRIVMSG, "#c", "hi there") == "PRIVMSG #c :hi there"
    assert msg(Verb.JOIN, "#c", "key") == "JOIN #c key"
    assert msg(Verb.PING, "") == "PING :"
    assert IrcMessage.parse("TOPIC #c :a :b").trailing == "a :b"


@pytest.mark.parametrize("line", ["", "FOO x", "PRIVMSG  #c", "NICK a\r\n"])
def test_bad_lines(line):
    with pytest.raises(IrcParseError):
        IrcMessage.parse(line)


def test_command_round_trip():
    cmd = parse_command("!ddos syn 10.1.0.7 500 60")
    assert cmd == AttackCommand(Flood.SYN, ip_to_int("10.1.0.7"), 500, 60 * SECOND)
    assert cmd.encode() == "!ddos syn 10.1.0.7 500 60"
    rng = parse_command("!ddos udp 10.2.0.0/24 10 5")
    assert rng.target == parse_cidr("10.2.0.0/24")


@pytest.mark.parametrize("text", ["!ddos", "!ddos syn 10.0.0.1 5", "!ddos tcp 10.0.0.1 5 5",
                                  "!ddos syn 10.0.0.300 5 5", "!ddos syn 10.0.0.1 0 5",
                                  "!ddos syn 10.0.0.1 -3 5", "!ddos syn 10.0.0.0/33 5 5"])
def test_bad_commands(text):
    with pytest.raises(CommandError):
        parse_command(text)


def test_is_command():
    assert is_command("!ddos syn 1.2.3.4 1 1")
    assert not is_command("!ddoser") and not is_command("hello")

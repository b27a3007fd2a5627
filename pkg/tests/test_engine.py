import pytest
from hypothesis import given, settings, strategies as st

from itmsim.engine import (MS, SECOND, ConfigurationFault, Engine, EventKind, RngStream,
                           SimulationFault, Trace, canonical_line)


def test_events_fire_in_time_then_scheduling_order():
    eng = Engine(1)
    seen = []
    eng.at(5, EventKind.TIMER, lambda ev: seen.append("b"))
    eng.at(3, EventKind.TIMER, lambda ev: seen.append("a"))
    eng.at(5, EventKind.TIMER, lambda ev: seen.append("c"))
    eng.run_until(10)
    assert seen == ["a", "b", "c"]
    assert eng.now == 10


def test_scheduling_in_the_past_is_a_fault():
    eng = Engine(1)
    eng.at(100, EventKind.TIMER)
    eng.run_until(100)
    with pytest.raises(SimulationFault):
        eng.at(99, EventKind.TIMER)


def test_run_until_leaves_later_events_queued():
    eng = Engine(1)
    eng.at(5, EventKind.TIMER)
    eng.at(50, EventKind.TIMER)
    eng.run_until(10)
    assert eng.pending() == 1 and eng.now == 10


def test_drain_only_runs_selected_kinds():
    eng = Engine(1)
    hits = []
    eng.at(5, EventKind.PACKET_DELIVERY, lambda ev: hits.append("pkt"))
    eng.at(6, EventKind.TIMER, lambda ev: hits.append("timer"))
    eng.drain({EventKind.PACKET_DELIVERY})
    assert hits == ["pkt"] and eng.pending() == 0


def test_unknown_stream_is_configuration_fault():
    with pytest.raises(ConfigurationFault):
        Engine(1).stream("weather")


def test_stream_is_reproducible_from_seed_and_id():
    a = RngStream(42, "infection")
    b = RngStream(42, "infection")
    xs = [a.uniform() for _ in range(5000)]
    assert xs == [b.uniform() for _ in range(5000)]
    assert a.index == 5000


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 300))
def test_streams_are_isolated(seed, n_other):
    """Draws on one stream never shift another stream's sequence."""
    quiet = Engine(seed)
    busy = Engine(seed)
    for _ in range(n_other):
        busy.draw("attack")
    assert [quiet.draw("infection") for _ in range(20)] == \
           [busy.draw("infection") for _ in range(20)]


def test_variates_consume_one_uniform_each():
    s = RngStream(7, "jitter")
    s.bernoulli(0.5)
    s.exponential(3.0)
    s.integer(10)
    assert s.index == 3


def test_integer_stays_in_range():
    s = RngStream(7, "jitter")
    assert all(0 <= s.integer(3) < 3 for _ in range(2000))


def test_distinct_seeds_give_distinct_streams():
    assert RngStream(1, "attack").uniform() != RngStream(2, "attack").uniform()


def test_trace_digest_covers_header_and_records():
    eng = Engine(3)
    eng.record("x", a=1)
    d1 = eng.trace.digest()
    eng.record("y", b=2)
    assert eng.trace.digest() != d1
    assert eng.trace.serialize().count("\n") == 3
    assert canonical_line({"b": 1, "a": [1, 2]}) == '{"b":1,"a":[1,2]}'


def test_trace_filter():
    t = Trace()
    t.append({"t": 0, "kind": "a"})
    t.append({"t": 1, "kind": "b"})
    assert [r["t"] for r in t.of_kind("b")] == [1]


def test_time_units():
    assert SECOND == 1000 * MS == 1_000_000

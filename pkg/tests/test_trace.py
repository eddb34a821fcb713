import io

import pytest
from hypothesis import given, settings, strategies as st

from mobinfer.errors import DomainError, TraceParseError, TraceValidationError
from mobinfer.trace import (
    ContactEvent,
    ContactSchedule,
    ContactTrace,
    contacts_at,
    current_contact_end,
    format_contact_trace,
    load_contact_trace,
    next_contact_start,
    save_contact_trace,
)

from conftest import make_trace


def csv_bytes(rows):
    body = "id_a,id_b,t_start,t_end\n" + "".join(f"{a},{b},{s},{e}\n" for a, b, s, e in rows)
    return body.encode()


def test_load_merges_adjacent_and_canonicalizes():
    trace = load_contact_trace(csv_bytes([(0, 1, 10, 20), (1, 0, 20, 25)]))
    assert trace.events == (ContactEvent(0, 1, 10.0, 25.0),)


def test_load_rejects_overlap():
    with pytest.raises(TraceValidationError, match="overlapping"):
        load_contact_trace(csv_bytes([(0, 1, 10, 20), (0, 1, 15, 30)]))


def test_load_empty_trace():
    trace = load_contact_trace(csv_bytes([]), node_count=5, duration=100)
    assert trace.node_count == 5
    assert trace.duration == 100
    assert trace.events == ()


def test_load_rejects_reversed_interval():
    with pytest.raises(TraceValidationError, match="line 2"):
        load_contact_trace(csv_bytes([(0, 1, 20, 20)]))


@pytest.mark.parametrize(
    "text, line",
    [
        ("id_a,id_b,t_start,t_end\n0,1,2\n", 2),
        ("id_a,id_b,t_start,t_end\n0,1,2,3\n0,x,2,3\n", 3),
        ("a,b,c,d\n0,1,2,3\n", 1),
        ("id_a,id_b,t_start,t_end\n0,1,1,2\n1,2,3,4\n1,2,3.5.1,4\n", 4),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(TraceParseError) as err:
        load_contact_trace(io.StringIO(text))
    assert err.value.line == line


def test_ids_and_times_checked_against_declared_bounds():
    with pytest.raises(TraceValidationError):
        load_contact_trace(csv_bytes([(0, 7, 1, 2)]), node_count=5)
    with pytest.raises(TraceValidationError):
        load_contact_trace(csv_bytes([(0, 1, 1, 200)]), duration=100)


def test_events_sorted_with_pair_tiebreak():
    trace = make_trace([(2, 3, 5, 6), (0, 1, 5, 6), (1, 2, 1, 2)])
    assert [e.pair for e in trace.events] == [(1, 2), (0, 1), (2, 3)]


def test_contacts_at_half_open():
    trace = make_trace([(0, 1, 10, 25)])
    assert contacts_at(trace, 10) == {(0, 1)}
    assert contacts_at(trace, 25) == set()


def test_contacts_at_matches_enumeration():
    events = [(0, 1, 10, 25), (2, 3, 5, 30)]
    trace = make_trace(events)
    brute = {(a, b) for a, b, s, e in events if s <= 12 < e}
    assert contacts_at(trace, 12) == brute == {(0, 1), (2, 3)}


def test_contacts_at_out_of_range():
    with pytest.raises(DomainError):
        contacts_at(make_trace([(0, 1, 10, 25)]), 26)


def test_next_contact_start():
    trace = make_trace([(0, 1, 10, 25)], duration=60)
    assert next_contact_start(trace, 0, 1, 3) == 10
    assert next_contact_start(trace, 0, 1, 30) is None
    two = make_trace([(0, 1, 10, 25), (0, 1, 40, 50)])
    assert next_contact_start(two, 0, 1, 26) == 40
    assert next_contact_start(two, 1, 0, 12) is None  # in contact
    with pytest.raises(DomainError):
        next_contact_start(two, 1, 1, 3)


def test_current_contact_end():
    trace = make_trace([(0, 1, 10, 25)])
    assert current_contact_end(trace, 0, 1, 12) == 25
    assert current_contact_end(trace, 0, 1, 5) is None
    two = make_trace([(0, 1, 10, 25), (0, 1, 40, 50)])
    assert current_contact_end(two, 1, 0, 45) == 50


def test_save_writes_meta(tmp_path):
    trace = make_trace([(0, 1, 1.5, 2.25)], node_count=4, duration=10)
    path = tmp_path / "c.csv"
    save_contact_trace(trace, path)
    assert load_contact_trace(path) == trace


# -- properties ------------------------------------------------------------

@st.composite
def traces(draw):
    n = draw(st.integers(2, 6))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    events = []
    for a, b in draw(st.lists(st.sampled_from(pairs), max_size=6, unique=True)):
        cuts = sorted(draw(st.lists(st.integers(0, 100), min_size=2, max_size=8, unique=True)))
        for s, e in zip(cuts[0::2], cuts[1::2]):
            # quarter-second grid keeps the CSV round trip exact
            events.append((b, a, s / 4, e / 4) if draw(st.booleans()) else (a, b, s / 4, e / 4))
    return make_trace(events, node_count=n, duration=25.0)


@given(traces())
def test_round_trip(trace):
    assert load_contact_trace(format_contact_trace(trace).encode(), trace.node_count, trace.duration) == trace


@given(traces(), st.integers(0, 100))
def test_contact_end_iff_in_contact(trace, q):
    t = q / 4
    now = contacts_at(trace, t)
    for a in range(trace.node_count):
        for b in range(a + 1, trace.node_count):
            assert (current_contact_end(trace, a, b, t) is not None) == ((a, b) in now)
            nxt = next_contact_start(trace, a, b, t)
            if nxt is not None:
                assert nxt > t
                assert (a, b) not in now


@settings(max_examples=50)
@given(traces(), st.lists(st.integers(0, 100), min_size=1, max_size=20))
def test_schedule_agrees_with_queries(trace, qs):
    sched = ContactSchedule(trace)
    for q in sorted(qs):
        t = q / 4
        in_contact, next_start = sched.at(t)
        now = contacts_at(trace, t)
        for a in range(trace.node_count):
            for b in range(a + 1, trace.node_count):
                assert in_contact[a, b] == in_contact[b, a] == ((a, b) in now)
                nxt = next_contact_start(trace, a, b, t)
                expected = float("inf") if nxt is None else nxt
                assert next_start[a, b] == next_start[b, a] == expected


def test_schedule_rejects_backwards_time():
    sched = ContactSchedule(make_trace([(0, 1, 1, 2)]))
    sched.at(1.5)
    with pytest.raises(DomainError):
        sched.at(1.0)

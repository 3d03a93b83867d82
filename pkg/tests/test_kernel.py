import pytest

from sociable.kernel import EventKind, EventQueue, RngState, SchedulingError, SimClock, tick_times


def make_queue(end=100.0):
    return EventQueue(SimClock(end=end))


def test_event_at_now_precedes_later_event():
    q = make_queue()
    q.schedule(1e-9, EventKind.BEACON_TICK, "later")
    q.schedule(0.0, EventKind.BEACON_TICK, "now")
    assert q.pop().payload == "now"
    assert q.pop().payload == "later"


def test_same_timestamp_keeps_insertion_order():
    q = make_queue()
    q.schedule(5.0, EventKind.PACKET_ARRIVAL, "A")
    q.schedule(5.0, EventKind.MOBILITY_TICK, "B")
    assert [q.pop().payload, q.pop().payload] == ["A", "B"]


def test_scheduling_in_the_past_is_rejected():
    q = make_queue()
    q.schedule(1.0, EventKind.BEACON_TICK)
    q.pop()
    with pytest.raises(SchedulingError):
        q.schedule(1.0 - 0.1, EventKind.BEACON_TICK)


def test_clock_follows_popped_events_and_stays_monotone():
    q = make_queue()
    for t in (3.0, 1.0, 2.0, 2.0):
        q.schedule(t, EventKind.BEACON_TICK)
    seen = []
    while q:
        seen.append(q.pop().timestamp)
        assert q.clock.now == seen[-1]
    assert seen == sorted(seen)


def test_clock_refuses_to_pass_end():
    clock = SimClock(end=1.0)
    with pytest.raises(SchedulingError):
        clock.advance(1.5)


def test_peek_and_len():
    q = make_queue()
    assert q.peek() is None and len(q) == 0
    q.schedule(2.0, EventKind.SIM_END)
    assert q.peek().kind is EventKind.SIM_END and len(q) == 1


def test_rng_streams_are_reproducible_and_independent():
    a = RngState(7).stream("mobility").random(4)
    b = RngState(7).stream("mobility").random(4)
    c = RngState(7).stream("community").random(4)
    d = RngState(8).stream("mobility").random(4)
    assert (a == b).all()
    assert not (a == c).all()
    assert not (a == d).all()


def test_tick_times_do_not_drift():
    ticks = tick_times(0.1, 0.0, 540.0)
    assert len(ticks) == 5400
    assert ticks[-1] == 539.9
    assert tick_times(1.0, 30.0, 33.0) == [30.0, 31.0, 32.0]
    with pytest.raises(ValueError):
        tick_times(0.0, 0.0, 1.0)

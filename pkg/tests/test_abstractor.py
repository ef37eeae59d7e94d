import pytest

from conftest import SCALE, interval_trace, ticks
from cutfinder.abstractor import HORIZON_MARKER, AbstractorState, RightRootMsg, root_events
from cutfinder.causality import EventId, EventKind
from cutfinder.errors import FifoViolation, ProtocolViolation
from cutfinder.signals import SkewBound, extract_roots, trace_from_points
from cutfinder.tracelog import TraceLog

EPS_HALF = SkewBound(SCALE.to_ticks(0.5))


def root(agent, seconds, kind):
    return EventId(agent, SCALE.to_ticks(seconds), kind)


def remote(origin, seconds, kind='right_root'):
    return RightRootMsg(origin, SCALE.to_ticks(seconds), kind)


def at(seconds):
    return SCALE.to_ticks(seconds)


@pytest.fixture
def three_agent_abstractor():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    return AbstractorState(0, 3, EPS_HALF, st, TraceLog())


# Root events

def test_root_events_of_one_interval():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    assert root_events(st) == [root(0, 3, EventKind.LEFT_ROOT), root(0, 4, EventKind.RIGHT_ROOT)]


def test_interval_at_trace_start_yields_horizon_event():
    st = extract_roots(trace_from_points(0, [(0, 1.0), (2, -1.0), (4, -1.0)]))
    assert root_events(st) == [root(0, 0, EventKind.HORIZON), root(0, 1, EventKind.RIGHT_ROOT)]


def test_degenerate_interval_yields_one_right_root():
    st = extract_roots(trace_from_points(0, [(0, -1.0), (1, 0.0), (2, -1.0)]))
    assert root_events(st) == [root(0, 1, EventKind.RIGHT_ROOT)]


def test_interval_running_into_horizon_has_no_right_root():
    st = extract_roots(trace_from_points(0, [(0, -1.0), (9.9, 0.0), (10, 1.0)]))
    assert root_events(st) == [root(0, 9.9, EventKind.LEFT_ROOT)]


# Readiness and flushing

def test_events_wait_for_every_other_agent(three_agent_abstractor):
    a = three_agent_abstractor
    messages, flushed = a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    assert messages == [] and flushed == []

    assert a.on_remote_right_root(remote(1, 3.0), at(3.1)) == []
    messages, flushed = a.on_root(root(0, 4, EventKind.RIGHT_ROOT), at(4))
    assert [dst for dst, _ in messages] == [1, 2]
    assert all(msg == RightRootMsg(0, at(4)) for _, msg in messages)
    assert flushed == []
    assert a.on_remote_right_root(remote(1, 5.0), at(5.1)) == []
    assert [e.t for e in a.buffer] == list(ticks(3, 3.5, 4, 5.5))

    flushed = a.on_remote_right_root(remote(2, 4.2), at(5.2))
    assert [e.t for e in flushed] == list(ticks(3, 3.5, 4))
    assert [e.kind for e in flushed] == [EventKind.LEFT_ROOT, EventKind.OFFSET_FROM_RIGHT_ROOT, EventKind.RIGHT_ROOT]
    assert [e.truth for e in flushed] == [True, True, True]
    assert [e.t for e in a.buffer] == list(ticks(4.7, 5.5))
    assert a.max_buffer_size == 5


def test_offset_event_is_stamped_after_the_remote_root(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_remote_right_root(remote(1, 5.0), at(5.1))
    event, = a.buffer
    assert event.t == at(5.5)
    assert event.pvc.stamp[1] == at(5.0)
    assert not event.truth


def test_horizon_markers_release_everything(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    a.on_remote_right_root(remote(2, 4.2), at(4.3))
    messages, flushed = a.on_horizon(at(10))
    assert [dst for dst, msg in messages] == [1, 2]
    assert all(msg.kind == HORIZON_MARKER and msg.t == at(10) for _, msg in messages)
    assert flushed == []
    flushed = a.on_remote_right_root(remote(1, 10, HORIZON_MARKER))
    assert [e.t for e in flushed] == [at(3)]
    assert not a.closed
    flushed = a.on_remote_right_root(remote(2, 10, HORIZON_MARKER))
    assert [e.t for e in flushed] == [at(4.7)]
    assert a.closed
    assert a.messages_sent == 2


def test_offset_past_horizon_is_false():
    st = extract_roots(interval_trace(0, [(1, 2)], 5.0))
    a = AbstractorState(0, 2, SkewBound(SCALE.to_ticks(1)), st)
    a.on_horizon(at(5))
    assert a.on_remote_right_root(remote(1, 4.5), at(5)) == []
    flushed = a.on_remote_right_root(remote(1, 5, HORIZON_MARKER))
    assert [(e.t, e.truth) for e in flushed] == [(at(5.5), False)]
    assert a.closed


def test_offset_landing_on_a_root_merges_into_it():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    a = AbstractorState(0, 2, EPS_HALF, st)
    a.on_remote_right_root(remote(1, 2.5), at(2.6))
    a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    event, = a.buffer
    assert event.kind is EventKind.LEFT_ROOT
    assert event.pvc.stamp == ticks(3, 2.5)
    assert event.truth


def test_single_agent_releases_roots_immediately():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    a = AbstractorState(0, 1, EPS_HALF, st)
    messages, flushed = a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    assert messages == [] and [e.t for e in flushed] == [at(3)]
    messages, flushed = a.on_root(root(0, 4, EventKind.RIGHT_ROOT), at(4))
    assert messages == [] and [e.t for e in flushed] == [at(4)]
    messages, flushed = a.on_horizon(at(10))
    assert messages == [] and flushed == []
    assert a.closed


def test_events_ahead_of_local_time_are_held():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    a = AbstractorState(0, 2, EPS_HALF, st)
    assert a.on_remote_right_root(remote(1, 1.0), at(1.1)) == []
    flushed = a.on_remote_right_root(remote(1, 2.0), at(2.1))
    assert [e.t for e in flushed] == [at(1.5)]
    messages, flushed = a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    assert flushed == []
    assert [e.t for e in a.buffer] == list(ticks(2.5, 3))


def test_trace_log_records_each_trigger(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    a.on_remote_right_root(remote(1, 3.0), at(3.1))
    a.on_horizon(at(10))
    a.on_remote_right_root(remote(2, 10, HORIZON_MARKER))
    triggers = [r['trigger'] for r in a.log.where(source='abstractor')]
    assert triggers == ['root', 'remote_right_root', 'horizon', 'marker']
    assert a.log.where(trigger='remote_right_root')[0]['origin'] == 1


# Violations

def test_right_roots_out_of_order_on_a_channel(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_remote_right_root(remote(1, 5.0), at(5.1))
    with pytest.raises(FifoViolation):
        a.on_remote_right_root(remote(1, 4.5), at(5.2))


def test_message_after_horizon_marker(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_remote_right_root(remote(1, 10, HORIZON_MARKER))
    with pytest.raises(FifoViolation):
        a.on_remote_right_root(remote(1, 9.0))


def test_roots_must_increase(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(3))
    with pytest.raises(ProtocolViolation):
        a.on_root(root(0, 2.5, EventKind.RIGHT_ROOT), at(3))
    with pytest.raises(ProtocolViolation):
        a.on_root(root(1, 4, EventKind.RIGHT_ROOT), at(4))


def test_no_roots_after_horizon(three_agent_abstractor):
    a = three_agent_abstractor
    a.on_horizon(at(10))
    with pytest.raises(ProtocolViolation):
        a.on_root(root(0, 3, EventKind.LEFT_ROOT), at(10))
    with pytest.raises(ProtocolViolation):
        a.on_horizon(at(10))


def test_unknown_origin(three_agent_abstractor):
    with pytest.raises(ProtocolViolation):
        three_agent_abstractor.on_remote_right_root(remote(0, 1.0))
    with pytest.raises(ProtocolViolation):
        three_agent_abstractor.on_remote_right_root(remote(3, 1.0))


def test_event_behind_released_events_is_rejected():
    st = extract_roots(interval_trace(0, [(3, 4)], 10.0))
    a = AbstractorState(0, 2, EPS_HALF, st)
    a.on_remote_right_root(remote(1, 2.0), at(2.1))
    assert [e.t for e in a.on_remote_right_root(remote(1, 3.0), at(3.1))] == [at(2.5)]
    with pytest.raises(ProtocolViolation):
        a.on_root(root(0, 2.4, EventKind.LEFT_ROOT), at(3.1))

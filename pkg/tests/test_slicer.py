import pytest

from conftest import SCALE, interval_trace, ticks
from cutfinder.causality import EventKind, make_event
from cutfinder.errors import ProtocolViolation
from cutfinder.signals import SkewBound, extract_roots
from cutfinder.slicer import Phase, SlicerState, Target, Token, advance_token
from cutfinder.tracelog import TraceLog

EPS = SkewBound(SCALE.to_ticks(1))


def ev(agent, seconds, truth=True, n_agents=2, kind=EventKind.INTERIOR):
    return make_event(agent, SCALE.to_ticks(seconds), kind, n_agents, EPS, truth)


def at(seconds):
    return SCALE.to_ticks(seconds)


def travelling(owner, entries, target):
    tok = Token(owner, list(entries))
    tok.target = target
    tok.phase = Phase.IN_TRANSIT
    return tok


# advance_token

def test_missing_entry_is_required_epsilon_behind():
    tok = Token(0, [ev(0, 2.5), None])
    assert advance_token(tok) == Target(1, at(1.5), True)


def test_false_entry_moves_to_its_successor():
    tok = Token(0, [ev(0, 2.0), ev(1, 1.5, truth=False)])
    assert advance_token(tok) == Target(1, at(1.5), False)


def test_satisfying_consistent_candidate_needs_no_target():
    assert advance_token(Token(0, [ev(0, 2.5), ev(1, 3.5)])) is None


def test_earliest_lagging_entry_moves_first():
    tok = Token(0, [ev(0, 5, n_agents=3), ev(1, 2, n_agents=3), ev(2, 3, n_agents=3)])
    assert advance_token(tok) == Target(1, at(4), True)


def test_owner_entry_is_required():
    with pytest.raises(ProtocolViolation):
        advance_token(Token(0, [None, ev(1, 2.0)]))


# Single agent

def test_single_agent_emits_every_true_event():
    st = extract_roots(interval_trace(0, [(2, 6)], 8.0))
    slicer = SlicerState(0, 1, EPS, st)
    sends, emitted = slicer.feed(make_event(0, at(2), EventKind.LEFT_ROOT, 1, EPS, True))
    assert sends == []
    assert [f.times for f in emitted] == [ticks(2)]
    sends, emitted = slicer.feed(make_event(0, at(6), EventKind.RIGHT_ROOT, 1, EPS, True))
    assert [f.times for f in emitted] == [ticks(6)]
    assert slicer.token.phase is Phase.IDLE


def test_single_agent_false_event_waits_then_retires():
    st = extract_roots(interval_trace(0, [(2, 6)], 8.0))
    slicer = SlicerState(0, 1, EPS, st, TraceLog())
    sends, emitted = slicer.feed(make_event(0, at(7), EventKind.OFFSET_FROM_RIGHT_ROOT, 1, EPS, False))
    assert (sends, emitted) == ([], [])
    assert slicer.token.phase is Phase.WAITING
    slicer.close_feed()
    assert slicer.token.phase is Phase.RETIRED
    assert [r['action'] for r in slicer.log.where(source='slicer')][-2:] == ['park', 'retire']


# Tokens visiting another agent

def test_missing_event_is_created_on_arrival():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st, TraceLog())
    sends, _ = slicer.feed(ev(1, 3.5, kind=EventKind.LEFT_ROOT))
    assert [dst for dst, _ in sends] == [0]

    tok = travelling(0, [ev(0, 2.0), None], Target(1, at(1.0), True))
    sends, emitted = slicer.on_token_arrival(tok)
    assert sends == [(0, tok)] and emitted == []
    assert slicer.created_events == 1
    created = slicer.log.where(action='create')[0]['event']
    assert (created['t'], created['kind'], created['truth']) == (at(1.0), 'slicer_created', False)
    assert tok.candidate_times == list(ticks(2.0, 3.5))
    assert tok.target == Target(0, at(2.5), True)
    assert tok.phase is Phase.IN_TRANSIT
    assert tok.hops == 1


def test_token_parks_until_the_event_arrives():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st)
    tok = travelling(0, [ev(0, 2.0), None], Target(1, at(3.5), True))
    assert slicer.on_token_arrival(tok) == ([], [])
    assert tok.phase is Phase.WAITING
    sends, _ = slicer.feed(ev(1, 3.5, kind=EventKind.LEFT_ROOT))
    assert (0, tok) in sends
    assert tok.candidate_times == list(ticks(2.0, 3.5))
    assert slicer.created_events == 0


def test_later_feed_lets_a_parked_token_create_its_event():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st)
    tok = travelling(0, [ev(0, 4.8), None], Target(1, at(3.8), True))
    slicer.on_token_arrival(tok)
    assert tok.phase is Phase.WAITING
    slicer.feed(ev(1, 5.8, kind=EventKind.RIGHT_ROOT))
    assert slicer.created_events == 1
    assert tok.entries[1].t == at(3.8)
    assert tok.entries[1].kind is EventKind.SLICER_CREATED


def test_token_retires_past_the_horizon():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st)
    slicer.close_feed()
    assert slicer.token.phase is Phase.RETIRED
    tok = travelling(0, [ev(0, 10.0), None], Target(1, at(9.0), True))
    assert slicer.on_token_arrival(tok) == ([], [])
    assert tok.phase is Phase.RETIRED


def test_events_created_past_the_own_horizon_are_false():
    st = extract_roots(interval_trace(1, [(1, 2)], 3.0))
    slicer = SlicerState(1, 2, EPS, st, TraceLog())
    slicer.feed(ev(1, 9.0, truth=False, kind=EventKind.OFFSET_FROM_RIGHT_ROOT))
    tok = travelling(0, [ev(0, 5.0), None], Target(1, at(4.0), True))
    assert slicer.on_token_arrival(tok) == ([], [])
    created = slicer.log.where(action='create')[0]['event']
    assert (created['t'], created['truth']) == (at(4.0), False)
    assert tok.candidate_times == list(ticks(5.0, 9.0))
    assert tok.phase is Phase.WAITING


def test_closed_feed_creates_events_up_to_the_horizon():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st)
    slicer.close_feed()
    tok = travelling(0, [ev(0, 8.0), None], Target(1, at(7.0), True))
    sends, _ = slicer.on_token_arrival(tok)
    assert tok.entries[1].t == at(7.0)
    assert not tok.entries[1].truth
    # false entry with no later event on a closed feed
    assert sends == []
    assert tok.phase is Phase.RETIRED


def test_finished_token_goes_home_and_emits():
    st = extract_roots(interval_trace(0, [(2, 6)], 8.0))
    slicer = SlicerState(0, 2, EPS, st)
    slicer.feed(ev(0, 2.0, kind=EventKind.LEFT_ROOT))
    tok = slicer.token
    assert not slicer.token_home
    tok.entries = [ev(0, 2.5), ev(1, 3.5)]
    tok.phase = Phase.DONE
    sends, emitted = slicer.on_token_arrival(tok)
    assert [f.times for f in emitted] == [ticks(2.5, 3.5)]
    assert slicer.token_home
    assert tok.phase is Phase.IDLE


def test_completion_past_the_next_event_is_emitted_again():
    st = extract_roots(interval_trace(0, [(2, 6)], 8.0))
    slicer = SlicerState(0, 2, EPS, st)
    tok = slicer.token
    tok.entries = [ev(0, 5.0), ev(1, 5.0)]
    slicer.pending.append(ev(0, 4.0))
    assert slicer.next_pending(tok)
    assert tok.phase is Phase.DONE
    assert tok.candidate_times == list(ticks(5.0, 5.0))


# Violations

def test_feed_must_be_local_and_increasing():
    st = extract_roots(interval_trace(0, [(2, 6)], 8.0))
    slicer = SlicerState(0, 2, EPS, st)
    with pytest.raises(ProtocolViolation):
        slicer.feed(ev(1, 2.0))
    slicer.feed(ev(0, 2.0))
    with pytest.raises(ProtocolViolation):
        slicer.feed(ev(0, 2.0))
    slicer.close_feed()
    with pytest.raises(ProtocolViolation):
        slicer.feed(ev(0, 7.0))


def test_tokens_must_arrive_where_they_are_expected():
    st = extract_roots(interval_trace(1, [(3.5, 5.8)], 8.0))
    slicer = SlicerState(1, 2, EPS, st)
    done = Token(0, [ev(0, 2.5), ev(1, 3.5)], phase=Phase.DONE)
    with pytest.raises(ProtocolViolation):
        slicer.on_token_arrival(done)
    with pytest.raises(ProtocolViolation):
        slicer.on_token_arrival(Token(0, [ev(0, 2.5), None]))
    with pytest.raises(ProtocolViolation):
        slicer.on_token_arrival(travelling(0, [ev(0, 2.5), None], Target(0, at(2.5), True)))

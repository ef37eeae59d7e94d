"""
Events, happened-before and the lattice of satisfying cuts.

Cuts are never materialized as event sets; a cut is its frontier, one event per
agent, and its downward closure follows from the frontier and epsilon.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import ConfigurationError, OutOfRangeError
from .signals import SignTrace, SkewBound, Ticks, TickScale, sign_at


class EventKind(str, enum.Enum):
    LEFT_ROOT = 'left_root'
    RIGHT_ROOT = 'right_root'
    OFFSET_FROM_RIGHT_ROOT = 'offset_from_right_root'
    SLICER_CREATED = 'slicer_created'
    HORIZON = 'horizon'
    # frontiers built by the oracle or by tests out of arbitrary times
    INTERIOR = 'interior'


@dataclass(frozen=True)
class EventId:
    agent: int
    t: Ticks
    kind: EventKind


@dataclass(frozen=True)
class Pvc:
    owner: int
    stamp: Tuple[Ticks, ...]

    def leq(self, other: Pvc) -> bool:
        return all(a <= b for a, b in zip(self.stamp, other.stamp))

    def __lt__(self, other: Pvc) -> bool:
        return self.stamp != other.stamp and self.leq(other)

    def join(self, other: Pvc) -> Pvc:
        return Pvc(self.owner, tuple(max(a, b) for a, b in zip(self.stamp, other.stamp)))


def pvc_assign(n: int, t: Ticks, n_agents: int, skew: SkewBound) -> Pvc:
    if t < 0:
        raise OutOfRangeError('cannot stamp event at negative tick {}'.format(t))
    if t < skew.epsilon:
        stamp = [0] * n_agents
    else:
        stamp = [t - skew.epsilon] * n_agents
    stamp[n] = t
    return Pvc(n, tuple(stamp))


@dataclass(frozen=True)
class Event:
    id: EventId
    pvc: Pvc
    truth: bool

    @property
    def agent(self) -> int:
        return self.id.agent

    @property
    def t(self) -> Ticks:
        return self.id.t

    @property
    def kind(self) -> EventKind:
        return self.id.kind

    def to_record(self):
        return {'agent': self.agent, 't': self.t, 'kind': self.kind.value,
                'pvc': list(self.pvc.stamp), 'truth': self.truth}


def make_event(agent, t, kind, n_agents, skew, truth):
    return Event(EventId(agent, t, kind), pvc_assign(agent, t, n_agents, skew), truth)


def hb(e: Event, f: Event) -> bool:
    """True iff ``e`` happened-before ``f``, decided from the PVC of ``f`` alone."""
    if e.agent == f.agent:
        return e.t < f.t
    return f.pvc.stamp[e.agent] >= e.t and e.pvc.stamp != f.pvc.stamp


def hb_by_time(e: Event, f: Event, skew: SkewBound) -> bool:
    if e.agent == f.agent:
        return e.t < f.t
    return e.t + skew.epsilon <= f.t


# Frontiers

@dataclass(frozen=True)
class Frontier:
    events: Tuple[Event, ...]

    def __post_init__(self):
        for index, event in enumerate(self.events):
            if event.agent != index:
                raise ConfigurationError('frontier slot {} holds an event of agent {}'.format(index, event.agent))

    @property
    def times(self) -> Tuple[Ticks, ...]:
        return tuple(e.t for e in self.events)

    @property
    def all_true(self) -> bool:
        return all(e.truth for e in self.events)

    @classmethod
    def from_times(cls, times, traces: Sequence[SignTrace], skew: SkewBound, kind=EventKind.INTERIOR):
        n_agents = len(times)
        return cls(tuple(make_event(n, t, kind, n_agents, skew, sign_at(traces[n], t))
                         for n, t in enumerate(times)))


def is_consistent(fr: Frontier, skew: SkewBound) -> bool:
    times = fr.times
    return max(times) - min(times) <= skew.epsilon


def satisfies(fr: Frontier, traces: Sequence[SignTrace]) -> bool:
    return all(sign_at(traces[e.agent], e.t) for e in fr.events)


def is_satcut(times, traces, skew) -> bool:
    return max(times) - min(times) <= skew.epsilon and all(sign_at(traces[n], t) for n, t in enumerate(times))


def cut_join(a: Frontier, b: Frontier) -> Frontier:
    return Frontier(tuple(x if x.t >= y.t else y for x, y in zip(a.events, b.events)))


def cut_meet(a: Frontier, b: Frontier) -> Frontier:
    return Frontier(tuple(x if x.t <= y.t else y for x, y in zip(a.events, b.events)))


# Regions and satcut intervals

RegionKey = Tuple[int, ...]


def region_of(times, traces: Sequence[SignTrace]) -> Optional[RegionKey]:
    """Index of the nonnegative interval holding each component, or None if some component is negative."""
    key = []
    for n, t in enumerate(times):
        index = traces[n].interval_index(t)
        if index is None:
            return None
        key.append(index)
    return tuple(key)


@dataclass(frozen=True)
class SatcutInterval:
    region: RegionKey
    leftmost: Frontier
    rightmost: Frontier
    rightmost_satisfying: bool

    def bounds(self):
        return self.leftmost.times, self.rightmost.times, self.rightmost_satisfying

    def contains(self, times) -> bool:
        return all(lo <= t <= hi for lo, t, hi in zip(self.leftmost.times, times, self.rightmost.times))

    def to_record(self, scale: TickScale, interval_id: int):
        return {
            'interval_id': interval_id,
            'leftmost': [scale.to_seconds(t) for t in self.leftmost.times],
            'rightmost': [scale.to_seconds(t) for t in self.rightmost.times],
            'leftmost_ticks': list(self.leftmost.times),
            'rightmost_ticks': list(self.rightmost.times),
            'rightmost_satisfying': self.rightmost_satisfying,
        }


def region_bounds(key: RegionKey, traces: Sequence[SignTrace], skew: SkewBound):
    """
    Leftmost and rightmost frontier times of the satcuts inside one region.
    Parameters
    ----------
    key - One interval index per agent
    traces - Sign traces of all agents
    skew - Skew bound of the run

    Returns ``(leftmost, rightmost, rightmost_satisfying)`` or None when no
    consistent frontier fits inside the region.
    """
    eps = skew.epsilon
    intervals = [traces[n].intervals[k] for n, k in enumerate(key)]
    latest_left = max(iv.left for iv in intervals)
    earliest_right = min(iv.right for iv in intervals)
    leftmost = tuple(max(iv.left, latest_left - eps) for iv in intervals)
    if not all(iv.contains(t) for iv, t in zip(intervals, leftmost)):
        return None
    rightmost = tuple(min(iv.right, earliest_right + eps) for iv in intervals)
    satisfying = all(iv.contains(t) for iv, t in zip(intervals, rightmost))
    return leftmost, rightmost, satisfying


def region_interval(key, traces, skew) -> Optional[SatcutInterval]:
    bounds = region_bounds(key, traces, skew)
    if bounds is None:
        return None
    leftmost, rightmost, satisfying = bounds
    return SatcutInterval(tuple(key),
                          Frontier.from_times(leftmost, traces, skew),
                          Frontier.from_times(rightmost, traces, skew),
                          satisfying)

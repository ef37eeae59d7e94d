"""
Continuous-time signal model.

Times are integer ticks at a run-wide resolution (see ``TickScale``), so every
comparison the detector makes ("is there an event at exactly t - epsilon?") is
exact. Values are real numbers interpreted piecewise-linearly between samples.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .errors import ConfigurationError, MalformedTraceError, OutOfRangeError

DEFAULT_TICK_HZ = 1000000

Ticks = int


@dataclass(frozen=True)
class TickScale:
    """Converts between seconds and integer ticks."""

    hz: int = DEFAULT_TICK_HZ

    def __post_init__(self):
        if self.hz <= 0:
            raise ConfigurationError('tick_hz must be positive, got {}'.format(self.hz))

    def to_ticks(self, seconds) -> Ticks:
        try:
            exact = Decimal(str(seconds)) * self.hz
        except InvalidOperation:
            raise ConfigurationError('not a time in seconds: {!r}'.format(seconds))
        if not exact.is_finite():
            raise ConfigurationError('not a finite time: {!r}'.format(seconds))
        if exact != exact.to_integral_value():
            raise ConfigurationError('{}s is not a whole number of ticks at {} Hz'.format(seconds, self.hz))
        return int(exact)

    def to_seconds(self, ticks: Ticks) -> float:
        return float(Fraction(ticks, self.hz))


@dataclass(frozen=True)
class SkewBound:
    epsilon: Ticks

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError('epsilon must be strictly positive, got {} ticks'.format(self.epsilon))

    @property
    def max_offset(self) -> Ticks:
        # any two offsets within this bound differ by less than epsilon
        return (self.epsilon - 1) // 2


# Local clocks

@dataclass(frozen=True)
class LocalClock:
    """
    Local clock c_n(chi) = chi + offset(chi) of one agent.

    ``breakpoints`` is a sorted tuple of ``(global_tick, offset_ticks)``; each
    offset holds from its global tick up to the next breakpoint, and the first
    one also covers everything before it.
    """

    agent: int
    breakpoints: Tuple[Tuple[Ticks, Ticks], ...] = ((0, 0),)
    _starts: Tuple[Ticks, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.breakpoints:
            raise ConfigurationError('clock of agent {} has an empty offset schedule'.format(self.agent))
        starts = tuple(b[0] for b in self.breakpoints)
        if any(after <= before for before, after in zip(starts, starts[1:])):
            raise ConfigurationError('clock breakpoints of agent {} are not strictly increasing'.format(self.agent))
        object.__setattr__(self, '_starts', starts)

    def offset_at(self, chi: Ticks) -> Ticks:
        index = bisect.bisect_right(self._starts, chi) - 1
        return self.breakpoints[max(index, 0)][1]

    def validate(self, skew: SkewBound):
        """
        Checks that the clock is increasing and stays within the skew bound.
        Parameters
        ----------
        skew - The skew bound shared by all agents of the run
        """
        offsets = [o for _, o in self.breakpoints]
        for before, after in zip(offsets, offsets[1:]):
            if after < before:
                raise ConfigurationError(
                    'clock of agent {} steps its offset back from {} to {} ticks; '
                    'the local clock would not be increasing'.format(self.agent, before, after))
        worst = max(abs(o) for o in offsets)
        if worst > skew.max_offset:
            raise ConfigurationError(
                'clock of agent {} has offset {} ticks, above the bound of {} ticks for epsilon {}'.format(
                    self.agent, worst, skew.max_offset, skew.epsilon))
        return self

    def global_time_of(self, local: Ticks) -> Ticks:
        """Earliest global tick (not before 0) at which the local clock reads at least ``local``."""
        for index, (start, offset) in enumerate(self.breakpoints):
            lo = max(start, 0) if index > 0 else 0
            chi = max(lo, local - offset)
            if index + 1 == len(self.breakpoints) or chi < self.breakpoints[index + 1][0]:
                return chi
        return max(0, local)


def local_time(clock: LocalClock, global_ticks: Ticks) -> Ticks:
    return global_ticks + clock.offset_at(global_ticks)


def constant_clock(agent: int, offset: Ticks = 0) -> LocalClock:
    return LocalClock(agent, ((0, offset),))


def random_clock(agent, skew, rng, span, breaks=8):
    """
    Draws a nondecreasing piecewise-constant offset schedule within the skew bound.
    Parameters
    ----------
    agent - The agent owning the clock
    skew - SkewBound of the run
    rng - numpy Generator
    span - Global ticks over which breakpoints are spread
    breaks - Number of breakpoints
    """
    bound = skew.max_offset
    offsets = sorted(int(o) for o in rng.integers(-bound, bound + 1, size=breaks))
    starts = sorted(set(int(s) for s in rng.integers(1, max(span, 2), size=breaks - 1)))
    points = [(0, offsets[0])] + [(s, offsets[i + 1]) for i, s in enumerate(starts)]
    return LocalClock(agent, tuple(points)).validate(skew)


# Traces

@dataclass(frozen=True)
class Sample:
    t: Ticks
    value: float
    jump: bool = False


@dataclass(frozen=True)
class PLTrace:
    """
    Piecewise-linear, right-continuous signal of one agent in local time.

    A sample flagged ``jump`` is reached by holding the previous sample's value
    (zero-order hold) and takes its own value from its time on.
    """

    agent: int
    samples: Tuple[Sample, ...]

    def __post_init__(self):
        if not self.samples:
            raise MalformedTraceError('trace of agent {} has no samples'.format(self.agent))
        for before, after in zip(self.samples, self.samples[1:]):
            if after.t <= before.t:
                raise MalformedTraceError(
                    'trace of agent {}: sample times not strictly increasing ({} then {})'.format(
                        self.agent, before.t, after.t))
        for sample in self.samples:
            if math.isnan(sample.value):
                raise MalformedTraceError('trace of agent {}: NaN value at tick {}'.format(self.agent, sample.t))

    @property
    def start(self) -> Ticks:
        return self.samples[0].t

    @property
    def horizon(self) -> Ticks:
        return self.samples[-1].t

    @property
    def times(self) -> Tuple[Ticks, ...]:
        return tuple(s.t for s in self.samples)

    def value_at(self, t: Ticks) -> float:
        if t < self.start or t > self.horizon:
            raise OutOfRangeError('tick {} outside trace of agent {} [{}, {}]'.format(
                t, self.agent, self.start, self.horizon))
        index = bisect.bisect_right(self.times, t) - 1
        here = self.samples[index]
        if t == here.t or index + 1 == len(self.samples):
            return here.value
        after = self.samples[index + 1]
        if after.jump:
            return here.value
        return here.value + (after.value - here.value) * (t - here.t) / (after.t - here.t)


def trace_from_points(agent, points, scale: TickScale = TickScale()):
    """Builds a PLTrace from ``(seconds, value)`` or ``(seconds, value, jump)`` tuples."""
    samples = []
    for point in points:
        jump = bool(point[2]) if len(point) > 2 else False
        samples.append(Sample(scale.to_ticks(point[0]), float(point[1]), jump))
    return PLTrace(agent, tuple(samples))


# Predicate atoms

class Comparison(str, enum.Enum):
    GE = '>='
    LE = '<='
    EQ = '='

    @classmethod
    def parse(cls, text):
        aliases = {'>=': cls.GE, 'ge': cls.GE, '≥': cls.GE,
                   '<=': cls.LE, 'le': cls.LE, '≤': cls.LE,
                   '=': cls.EQ, '==': cls.EQ, 'eq': cls.EQ}
        try:
            return aliases[str(text).strip().lower()]
        except KeyError:
            raise ConfigurationError('unknown comparison {!r}'.format(text))


@dataclass(frozen=True)
class PredicateAtom:
    agent: int
    comparison: Comparison = Comparison.GE
    threshold: float = 0.0
    column: str = 'value'


def _crossing(t1, a, t2, b) -> Ticks:
    # zero of the line through (t1, a) and (t2, b), rounded to the nearest tick
    return t1 + round(Fraction(t2 - t1) * Fraction(-a) / (Fraction(b) - Fraction(a)))


def normalize(trace: PLTrace, atom: PredicateAtom) -> PLTrace:
    """
    Rewrites ``trace`` so that the atom holds exactly where the result is >= 0.
    Parameters
    ----------
    trace - The raw signal of one agent
    atom - The conjunct of the predicate that concerns this agent
    """
    if atom.agent != trace.agent:
        raise ConfigurationError('atom for agent {} applied to trace of agent {}'.format(atom.agent, trace.agent))
    theta = atom.threshold
    if atom.comparison is Comparison.GE:
        if theta == 0:
            return trace
        return PLTrace(trace.agent, tuple(Sample(s.t, s.value - theta, s.jump) for s in trace.samples))
    if atom.comparison is Comparison.LE:
        return PLTrace(trace.agent, tuple(Sample(s.t, theta - s.value, s.jump) for s in trace.samples))
    samples = [trace.samples[0]]
    for before, after in zip(trace.samples, trace.samples[1:]):
        a, b = before.value - theta, after.value - theta
        if not after.jump and a * b < 0 and after.t - before.t >= 2:
            c = min(max(_crossing(before.t, a, after.t, b), before.t + 1), after.t - 1)
            samples.append(Sample(c, theta))
        samples.append(after)
    return PLTrace(trace.agent, tuple(Sample(s.t, -abs(s.value - theta), s.jump) for s in samples))


# Sign traces

class EndpointTag(str, enum.Enum):
    LEFT_ROOT = 'left_root'
    RIGHT_ROOT = 'right_root'
    HORIZON_BOUNDARY = 'horizon_boundary'


@dataclass(frozen=True)
class SignInterval:
    """Maximal interval where the signal is >= 0; closed on the left, closed on the right unless ``right_closed`` is false."""

    left: Ticks
    right: Ticks
    left_tag: EndpointTag
    right_tag: EndpointTag
    right_closed: bool = True

    def contains(self, t: Ticks) -> bool:
        return self.left <= t < self.right or (t == self.right and self.right_closed)


@dataclass(frozen=True)
class SignTrace:
    agent: int
    start: Ticks
    horizon: Ticks
    intervals: Tuple[SignInterval, ...]
    _lefts: Tuple[Ticks, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for before, after in zip(self.intervals, self.intervals[1:]):
            if after.left <= before.right:
                raise MalformedTraceError('sign intervals of agent {} overlap or touch'.format(self.agent))
        object.__setattr__(self, '_lefts', tuple(iv.left for iv in self.intervals))

    def interval_index(self, t: Ticks) -> Optional[int]:
        if t < self.start or t > self.horizon:
            raise OutOfRangeError('tick {} outside horizon [{}, {}] of agent {}'.format(
                t, self.start, self.horizon, self.agent))
        index = bisect.bisect_right(self._lefts, t) - 1
        if index >= 0 and self.intervals[index].contains(t):
            return index
        return None

    @property
    def right_root_count(self) -> int:
        return sum(1 for iv in self.intervals if iv.right_tag is EndpointTag.RIGHT_ROOT)


def sign_at(st: SignTrace, t: Ticks) -> bool:
    return st.interval_index(t) is not None


def _segment_piece(t1, a, t2, b):
    # nonnegative part of the half-open segment [t1, t2) running from a towards b
    if a >= 0 and b >= 0:
        return t1, t2, False
    if a >= 0 > b:
        if a == 0:
            return t1, t1, True
        return t1, min(_crossing(t1, a, t2, b), t2 - 1), True
    if a < 0 <= b:
        if b == 0:
            return None
        c = max(_crossing(t1, a, t2, b), t1 + 1)
        return (c, t2, False) if c < t2 else None
    return None


def extract_roots(trace: PLTrace) -> SignTrace:
    pieces = []
    samples = trace.samples
    for before, after in zip(samples, samples[1:]):
        if after.t <= before.t:
            raise MalformedTraceError('non-monotone sample times in trace of agent {}'.format(trace.agent))
        towards = before.value if after.jump else after.value
        piece = _segment_piece(before.t, before.value, after.t, towards)
        if piece is not None:
            pieces.append(piece)
    if samples[-1].value >= 0:
        pieces.append((samples[-1].t, samples[-1].t, True))

    merged = []
    for left, right, closed in pieces:
        if merged and left <= merged[-1][1]:
            merged[-1] = [merged[-1][0], right, closed]
        else:
            merged.append([left, right, closed])

    intervals = []
    for left, right, closed in merged:
        left_tag = EndpointTag.HORIZON_BOUNDARY if left == trace.start else EndpointTag.LEFT_ROOT
        if right == trace.horizon and closed:
            right_tag = EndpointTag.HORIZON_BOUNDARY
        else:
            right_tag = EndpointTag.RIGHT_ROOT
        intervals.append(SignInterval(left, right, left_tag, right_tag, closed))
    return SignTrace(trace.agent, trace.start, trace.horizon, tuple(intervals))


def sign_traces(traces: Sequence[PLTrace]):
    return tuple(extract_roots(trace) for trace in traces)

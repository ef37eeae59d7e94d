"""
Centralized ground truth.

The oracle sees every agent's sign trace at once and computes the extremal
satcuts directly, region by region. A brute-force enumerator over a time grid
cross-checks it on small instances.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

from .causality import (Frontier, SatcutInterval, is_consistent, region_bounds, region_interval, region_of,
                        satisfies)
from .errors import ConfigurationError, PreconditionError, StructuralInvariantViolation
from .signals import EndpointTag, LocalClock, SignTrace, SkewBound, sign_at

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalView:
    traces: Tuple[SignTrace, ...]
    skew: SkewBound
    clocks: Optional[Tuple[LocalClock, ...]] = None

    @property
    def n_agents(self):
        return len(self.traces)

    @property
    def horizon(self):
        return min(st.horizon for st in self.traces)


def _require_satcut(fr, view):
    if not is_consistent(fr, view.skew) or not satisfies(fr, view.traces):
        raise PreconditionError('frontier {} is not a satcut'.format(list(fr.times)))
    return region_of(fr.times, view.traces)


def leftmost_from_satcut(fr: Frontier, view: GlobalView) -> Frontier:
    """
    Shifts every component of a satcut back as far as its region allows.
    Parameters
    ----------
    fr - A consistent, satisfying frontier
    view - GlobalView of the run

    Each component can move back to the left end of its nonnegative interval;
    the component whose interval starts last pins the others to within epsilon.
    """
    key = _require_satcut(fr, view)
    leftmost, _, _ = region_bounds(key, view.traces, view.skew)
    return Frontier.from_times(leftmost, view.traces, view.skew)


def rightmost_from_satcut(fr: Frontier, view: GlobalView) -> Tuple[Frontier, bool]:
    """Forward counterpart of ``leftmost_from_satcut``; returns ``(frontier, satisfying)``."""
    key = _require_satcut(fr, view)
    _, rightmost, satisfying = region_bounds(key, view.traces, view.skew)
    return Frontier.from_times(rightmost, view.traces, view.skew), satisfying


def _region_keys(view):
    eps = view.skew.epsilon
    traces = view.traces

    def extend(prefix, latest_left, earliest_right):
        n = len(prefix)
        if n == len(traces):
            yield tuple(prefix)
            return
        for index, iv in enumerate(traces[n].intervals):
            left = max(latest_left, iv.left)
            right = min(earliest_right, iv.right)
            # intervals only narrow the window as agents are added
            if left - right > eps:
                continue
            yield from extend(prefix + [index], left, right)

    return extend([], -math.inf, math.inf)


def enumerate_extremals(view: GlobalView) -> List[SatcutInterval]:
    """One SatcutInterval per region that holds a satcut, sorted by leftmost frontier."""
    intervals = []
    for key in _region_keys(view):
        interval = region_interval(key, view.traces, view.skew)
        if interval is not None:
            intervals.append(interval)
    intervals.sort(key=lambda iv: (iv.leftmost.times, iv.rightmost.times))
    logger.debug('oracle found %d extremal intervals', len(intervals))
    return intervals


def root_ticks(view):
    ticks = []
    for st in view.traces:
        for iv in st.intervals:
            if iv.left_tag is EndpointTag.LEFT_ROOT:
                ticks.append(iv.left)
            if iv.right_tag is EndpointTag.RIGHT_ROOT:
                ticks.append(iv.right)
    return ticks


def default_grid_step(view):
    return max(math.gcd(view.skew.epsilon, *root_ticks(view)), 1)


def brute_force_satcuts(view: GlobalView, grid_step: Optional[int] = None) -> Set[Tuple[int, ...]]:
    """
    Every satisfying consistent frontier whose components lie on a time grid.
    Parameters
    ----------
    view - GlobalView of the run
    grid_step - Grid spacing in ticks; defaults to the gcd of epsilon and all roots
    """
    step = grid_step or default_grid_step(view)
    if step <= 0:
        raise ConfigurationError('grid step must be positive, got {}'.format(step))
    missed = [t for t in [view.skew.epsilon] + root_ticks(view) if t % step]
    if missed:
        raise ConfigurationError('grid step {} does not hit epsilon and every root (first miss at {})'.format(
            step, missed[0]))
    eps = view.skew.epsilon
    points = []
    for st in view.traces:
        first = -(-st.start // step) * step
        points.append([t for t in range(first, st.horizon + 1, step) if sign_at(st, t)])

    found = set()

    def extend(prefix, low, high):
        if len(prefix) == len(points):
            found.add(tuple(prefix))
            return
        for t in points[len(prefix)]:
            new_low, new_high = min(low, t), max(high, t)
            if new_high - new_low <= eps:
                extend(prefix + [t], new_low, new_high)

    extend([], math.inf, -math.inf)
    return found


class ExtremalTag(str, enum.Enum):
    LEFT_ROOT = 'left_root'
    RIGHT_ROOT = 'right_root'
    BEFORE_LEFT_ROOT = 'minus_epsilon_from_left_root'
    AFTER_RIGHT_ROOT = 'plus_epsilon_from_right_root'
    HORIZON_BOUNDARY = 'horizon_boundary'


def classify_extremal(fr: Frontier, view: GlobalView, side: str = 'leftmost') -> List[ExtremalTag]:
    """
    Tags each component of an extremal frontier by what pins it in place.
    Parameters
    ----------
    fr - Leftmost or rightmost frontier of an enumerated interval
    view - GlobalView of the run
    side - 'leftmost' or 'rightmost'

    Raises StructuralInvariantViolation when a component is neither at a root
    of its own agent nor exactly epsilon away from the pinning component.
    """
    if side not in ('leftmost', 'rightmost'):
        raise ConfigurationError('side must be leftmost or rightmost, got {!r}'.format(side))
    eps = view.skew.epsilon
    times = fr.times
    tags = []
    if side == 'leftmost':
        pin = max(times)
        for n, t in enumerate(times):
            iv = _enclosing(view.traces[n], t)
            if iv is not None and t == iv.left:
                tags.append(ExtremalTag.LEFT_ROOT if iv.left_tag is EndpointTag.LEFT_ROOT
                            else ExtremalTag.HORIZON_BOUNDARY)
            elif t == pin - eps and iv is not None:
                tags.append(ExtremalTag.BEFORE_LEFT_ROOT)
            else:
                raise StructuralInvariantViolation(
                    'leftmost component {} of agent {} is neither a left root nor {} before one'.format(t, n, eps))
        if all(tag is ExtremalTag.BEFORE_LEFT_ROOT for tag in tags):
            raise StructuralInvariantViolation('leftmost frontier {} has no left root'.format(list(times)))
    else:
        pin = min(times)
        for n, t in enumerate(times):
            iv = _enclosing(view.traces[n], t, right_end=True)
            if iv is not None and t == iv.right:
                tags.append(ExtremalTag.RIGHT_ROOT if iv.right_tag is EndpointTag.RIGHT_ROOT
                            else ExtremalTag.HORIZON_BOUNDARY)
            elif t == pin + eps and iv is not None:
                tags.append(ExtremalTag.AFTER_RIGHT_ROOT)
            else:
                raise StructuralInvariantViolation(
                    'rightmost component {} of agent {} is neither a right root nor {} after one'.format(t, n, eps))
        if all(tag is ExtremalTag.AFTER_RIGHT_ROOT for tag in tags):
            raise StructuralInvariantViolation('rightmost frontier {} has no right root'.format(list(times)))
    return tags


def _enclosing(st, t, right_end=False):
    for iv in st.intervals:
        if iv.contains(t) or (right_end and t == iv.right):
            return iv
    return None


def oracle_report(view: GlobalView, scale):
    return [iv.to_record(scale, index) for index, iv in enumerate(enumerate_extremals(view))]


def sandwich_violations(view: GlobalView, intervals: Sequence[SatcutInterval], grid_step=None):
    """
    Grid frontiers breaking the interval structure, as ``(kind, times)`` pairs.

    ``outside``: a grid satcut in no interval, or in more than one.
    ``inside``: a consistent grid frontier inside an interval that does not satisfy.
    """
    step = grid_step or default_grid_step(view)
    violations = []
    for times in sorted(brute_force_satcuts(view, step)):
        holders = [iv for iv in intervals if iv.contains(times)]
        if len(holders) != 1:
            violations.append(('outside', times))
    eps = view.skew.epsilon
    for iv in intervals:
        ranges = []
        for lo, hi in zip(iv.leftmost.times, iv.rightmost.times):
            first = -(-lo // step) * step
            ranges.append(range(first, hi + 1, step))
        for times in itertools.product(*ranges):
            if max(times) - min(times) > eps:
                continue
            if not iv.rightmost_satisfying and any(t == r for t, r in zip(times, iv.rightmost.times)):
                continue
            if not all(sign_at(view.traces[n], t) for n, t in enumerate(times)):
                violations.append(('inside', times))
    return violations

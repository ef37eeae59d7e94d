import pytest

from cutfinder.signals import SkewBound, TickScale, extract_roots, trace_from_points

SCALE = TickScale()


def ticks(*seconds):
    return tuple(SCALE.to_ticks(s) for s in seconds)


def interval_trace(agent, intervals, horizon_s, scale=SCALE):
    """Trace that is nonnegative exactly on the given (left, right) intervals, in seconds."""
    points = [(0, -1.0)]
    previous = None
    for left, right in intervals:
        if previous is not None:
            points.append(((previous + left) / 2.0, -1.0))
        points += [(left, 0.0), ((left + right) / 2.0, 1.0), (right, 0.0)]
        previous = right
    points.append((horizon_s, -1.0))
    return trace_from_points(agent, points, scale)


@pytest.fixture
def scale():
    return SCALE


@pytest.fixture
def eps1():
    return SkewBound(SCALE.to_ticks(1))


@pytest.fixture
def fig1_traces():
    return tuple(interval_trace(n, [iv], 7.0) for n, iv in enumerate([(1, 4), (2, 5.5), (2.5, 4)]))


@pytest.fixture
def fig1_signs(fig1_traces):
    return tuple(extract_roots(t) for t in fig1_traces)


@pytest.fixture
def fig4_traces():
    return (interval_trace(0, [(2, 6)], 8.0), interval_trace(1, [(3.5, 5.8)], 8.0))


@pytest.fixture
def fig4_signs(fig4_traces):
    return tuple(extract_roots(t) for t in fig4_traces)

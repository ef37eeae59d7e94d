"""
Reference scenarios with hand-derived expected output, replayed by ``golden``.

``fig1``: three agents with one nonnegative interval each and a single
extremal interval. ``fig4``: two agents whose tokens create events at
exactly ``t - epsilon`` and emit three satcuts.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

from .config import RunConfig
from .errors import ConfigurationError
from .harness import detect
from .signals import TickScale, trace_from_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    name: str
    epsilon_s: float
    horizon_s: float
    # one (left, right) nonnegative interval per agent, in seconds
    intervals: Tuple[Tuple[float, float], ...]
    extremals: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...]
    satcuts: Tuple[Tuple[float, ...], ...] = ()
    # (agent, seconds) events the tokens must create
    created: Tuple[Tuple[int, float], ...] = ()
    delay_s: float = 0.01

    def config(self, scale=TickScale()):
        return RunConfig.from_dict({'n_agents': len(self.intervals), 'epsilon_s': self.epsilon_s, 'tick_hz': scale.hz,
                                    'horizon_s': self.horizon_s,
                                    'delay': {'mode': 'constant', 'delay_s': self.delay_s}})

    def traces(self, scale=TickScale()):
        traces = []
        for agent, (left, right) in enumerate(self.intervals):
            points = [(0, -1.0), (left, 0.0), ((left + right) / 2.0, 1.0), (right, 0.0), (self.horizon_s, -1.0)]
            traces.append(trace_from_points(agent, points, scale))
        return tuple(traces)


SCENARIOS = {
    'fig1': Scenario(
        name='fig1',
        epsilon_s=1.0,
        horizon_s=7.0,
        intervals=((1.0, 4.0), (2.0, 5.5), (2.5, 4.0)),
        extremals=(((1.5, 2.0, 2.5), (4.0, 5.0, 4.0)),),
    ),
    'fig4': Scenario(
        name='fig4',
        epsilon_s=1.0,
        horizon_s=8.0,
        intervals=((2.0, 6.0), (3.5, 5.8)),
        extremals=(((2.5, 3.5), (6.0, 5.8)),),
        satcuts=((2.5, 3.5), (4.8, 5.8), (6.0, 5.0)),
        created=((0, 2.5), (0, 4.8)),
    ),
}


def scenario(name):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigurationError('unknown scenario {!r}, expected one of {}'.format(name, sorted(SCENARIOS)))


@dataclass
class GoldenResult:
    scenario: Scenario
    report: object
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches


def run_golden(name, scale=TickScale()):
    """Replays a scenario end to end and lists every difference from its expected output."""
    sc = scenario(name)
    report = detect(sc.config(scale), sc.traces(scale))
    mismatches = []

    def ticks(times):
        return tuple(scale.to_ticks(t) for t in times)

    expected = sorted((ticks(lo), ticks(hi)) for lo, hi in sc.extremals)
    found = sorted((iv.leftmost.times, iv.rightmost.times) for iv in report.extremals)
    if found != expected:
        mismatches.append('extremals {} != expected {}'.format(found, expected))
    if sc.satcuts:
        wanted = sorted(ticks(t) for t in sc.satcuts)
        emitted = sorted(tuple(t) for t in report.satcuts)
        if emitted != wanted:
            mismatches.append('emitted satcuts {} != expected {}'.format(emitted, wanted))
    created = {(r['event']['agent'], r['event']['t']) for r in report.log
               if r.get('source') == 'slicer' and r.get('action') == 'create'}
    for agent, seconds in sc.created:
        if (agent, scale.to_ticks(seconds)) not in created:
            mismatches.append('no event created on agent {} at {}s'.format(agent, seconds))
    for line in mismatches:
        logger.warning('golden %s: %s', name, line)
    return GoldenResult(sc, report, mismatches)

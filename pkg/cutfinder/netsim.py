"""
Deterministic discrete-event simulation of the detector.

All agents run inside one event loop. Messages travel over FIFO lossless
channels, one per ordered pair of agents, with delays drawn from a
``DelayModel``. Roots fire when an agent's drifting local clock reaches them.
"""

import enum
import heapq
import itertools
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .abstractor import AbstractorState, RightRootMsg, root_events
from .errors import ConfigurationError, ProtocolViolation
from .signals import LocalClock, PLTrace, SkewBound, TickScale, constant_clock, extract_roots, local_time
from .slicer import SlicerState, Token
from .tracelog import TraceLog

logger = logging.getLogger(__name__)

DELAY_MODES = ('constant', 'uniform', 'adversarial')


def channel_name(src, dst):
    return '{}->{}'.format(src, dst)


@dataclass(frozen=True)
class DelayModel:
    """
    Message delays in ticks.

    ``constant`` delays every message by ``constant``; ``uniform`` draws from
    ``[low, high]`` with a generator seeded by ``seed``; ``adversarial`` takes
    the k-th delay of a channel from ``schedule["src->dst"]``, then falls back
    to ``stall["src->dst"]`` and finally to ``default``.
    """

    mode: str = 'constant'
    constant: int = 0
    low: int = 0
    high: int = 0
    seed: int = 0
    default: int = 0
    schedule: Tuple[Tuple[str, Tuple[int, ...]], ...] = ()
    stall: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.mode not in DELAY_MODES:
            raise ConfigurationError('unknown delay mode {!r}, expected one of {}'.format(self.mode, DELAY_MODES))
        values = [self.constant, self.low, self.high, self.default]
        values += [d for _, ds in self.schedule for d in ds] + [d for _, d in self.stall]
        if any(d < 0 for d in values):
            raise ConfigurationError('message delays must be nonnegative')
        if self.high < self.low:
            raise ConfigurationError('uniform delay has high {} below low {}'.format(self.high, self.low))

    @classmethod
    def from_dict(cls, data, scale=TickScale(), default_seed=0):
        data = dict(data or {})
        mode = data.pop('mode', 'constant')
        try:
            if mode == 'constant':
                return cls(mode, constant=scale.to_ticks(data.get('delay_s', 0)))
            if mode == 'uniform':
                return cls(mode, low=scale.to_ticks(data.get('low_s', 0)), high=scale.to_ticks(data.get('high_s', 0)),
                           seed=int(data.get('seed', default_seed)))
            if mode == 'adversarial':
                schedule = tuple(sorted((str(k), tuple(scale.to_ticks(d) for d in v))
                                        for k, v in data.get('schedule', {}).items()))
                stall = tuple(sorted((str(k), scale.to_ticks(v)) for k, v in data.get('stall_s', {}).items()))
                return cls(mode, default=scale.to_ticks(data.get('default_s', 0)), schedule=schedule, stall=stall)
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigurationError('invalid delay settings {!r}: {}'.format(data, exc))
        raise ConfigurationError('unknown delay mode {!r}, expected one of {}'.format(mode, DELAY_MODES))

    def to_dict(self, scale=TickScale()):
        if self.mode == 'constant':
            return {'mode': 'constant', 'delay_s': scale.to_seconds(self.constant)}
        if self.mode == 'uniform':
            return {'mode': 'uniform', 'low_s': scale.to_seconds(self.low), 'high_s': scale.to_seconds(self.high),
                    'seed': self.seed}
        return {'mode': 'adversarial', 'default_s': scale.to_seconds(self.default),
                'schedule': {k: [scale.to_seconds(d) for d in v] for k, v in self.schedule},
                'stall_s': {k: scale.to_seconds(v) for k, v in self.stall}}

    def sampler(self):
        """Returns ``draw(src, dst, k)`` giving the delay of the k-th message on a channel."""
        if self.mode == 'constant':
            return lambda src, dst, k: self.constant
        if self.mode == 'uniform':
            rng = np.random.default_rng(self.seed)
            return lambda src, dst, k: int(rng.integers(self.low, self.high + 1))
        schedule = dict(self.schedule)
        stall = dict(self.stall)

        def draw(src, dst, k):
            name = channel_name(src, dst)
            listed = schedule.get(name, ())
            if k < len(listed):
                return listed[k]
            return stall.get(name, self.default)
        return draw


@dataclass
class Channel:
    src: int
    dst: int
    last_deliver: int = 0
    sent: int = 0
    in_flight: deque = field(default_factory=deque)

    def send(self, now, delay, payload):
        # a late draw never overtakes an earlier message
        deliver = max(now + delay, self.last_deliver)
        self.last_deliver = deliver
        self.sent += 1
        self.in_flight.append((now, deliver, payload))
        return deliver

    def receive(self):
        return self.in_flight.popleft()


class SimEventKind(str, enum.Enum):
    ROOT_FIRES = 'root_fires'
    MSG_DELIVERY = 'msg_delivery'
    HORIZON = 'horizon'


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    kind: SimEventKind
    agent: int
    payload: Any = None


@dataclass
class Metrics:
    n_agents: int = 0
    R_total: int = 0
    D: int = 0
    M: int = 0
    abstractor_msgs: int = 0
    token_msgs: int = 0
    max_buffer_size: int = 0
    emissions: int = 0
    max_detection_delay_s: float = 0.0

    @property
    def slicer_created_events(self):
        return self.M

    def to_dict(self):
        return {
            'n_agents': self.n_agents,
            'R_total': self.R_total,
            'D': self.D,
            'M': self.M,
            'slicer_created_events': self.M,
            'abstractor_msgs': self.abstractor_msgs,
            'token_msgs': self.token_msgs,
            'max_buffer_size': self.max_buffer_size,
            'emissions': self.emissions,
            'max_detection_delay_s': self.max_detection_delay_s,
        }


@dataclass
class RunReport:
    tick_hz: int
    epsilon: int
    satcuts: List[Tuple[int, ...]]
    emissions: List[Dict[str, Any]]
    metrics: Metrics
    log: List[Dict[str, Any]]
    extremals: List[Any] = field(default_factory=list)

    def to_dict(self, with_log=True):
        scale = TickScale(self.tick_hz)
        report = {
            'tick_hz': self.tick_hz,
            'epsilon_s': scale.to_seconds(self.epsilon),
            'satcuts': [[scale.to_seconds(t) for t in times] for times in self.satcuts],
            'satcuts_ticks': [list(times) for times in self.satcuts],
            'emissions': self.emissions,
            'metrics': self.metrics.to_dict(),
            'extremals': [iv.to_record(scale, index) for index, iv in enumerate(self.extremals)],
        }
        if with_log:
            report['log'] = self.log
        return report

    def to_json(self, with_log=True):
        return json.dumps(self.to_dict(with_log), sort_keys=True, indent=2)


class Simulator(object):

    def __init__(self, skew: SkewBound, traces: Sequence[PLTrace], delays: Optional[DelayModel] = None,
                 clocks: Optional[Sequence[LocalClock]] = None, scale: TickScale = TickScale()):
        """
        Builds the agents of one run.
        Parameters
        ----------
        skew - SkewBound shared by all agents
        traces - Normalized PLTrace per agent, in local time, indexed by agent
        delays - DelayModel, constant zero by default
        clocks - LocalClock per agent, identity clocks by default
        scale - TickScale used for reporting seconds
        """
        self.n_agents = len(traces)
        if self.n_agents == 0:
            raise ConfigurationError('a run needs at least one agent')
        for index, trace in enumerate(traces):
            if trace.agent != index:
                raise ConfigurationError('trace at position {} belongs to agent {}'.format(index, trace.agent))
        if clocks is None:
            clocks = [constant_clock(n) for n in range(self.n_agents)]
        if len(clocks) != self.n_agents:
            raise ConfigurationError('{} clocks for {} agents'.format(len(clocks), self.n_agents))
        for index, clock in enumerate(clocks):
            if clock.agent != index:
                raise ConfigurationError('clock at position {} belongs to agent {}'.format(index, clock.agent))
            clock.validate(skew)
        self.skew = skew
        self.scale = scale
        self.clocks = list(clocks)
        self.delays = delays or DelayModel()
        self._draw = self.delays.sampler()
        self.log = TraceLog()
        self.sign_traces = tuple(extract_roots(trace) for trace in traces)
        self.abstractors = [AbstractorState(n, self.n_agents, skew, st, self.log)
                            for n, st in enumerate(self.sign_traces)]
        self.slicers = [SlicerState(n, self.n_agents, skew, st, self.log)
                        for n, st in enumerate(self.sign_traces)]
        self.channels = {(src, dst): Channel(src, dst)
                         for src in range(self.n_agents) for dst in range(self.n_agents) if src != dst}
        self.now = 0
        self._queue = []
        self._seq = itertools.count()
        self.metrics = Metrics(n_agents=self.n_agents,
                               R_total=sum(st.right_root_count for st in self.sign_traces))
        self.satcuts = {}
        self.emissions = []
        self._closed = set()
        for n, st in enumerate(self.sign_traces):
            for root in root_events(st):
                self._schedule(self.clocks[n].global_time_of(root.t), SimEventKind.ROOT_FIRES, n, root)
        for n, st in enumerate(self.sign_traces):
            self._schedule(self.clocks[n].global_time_of(st.horizon), SimEventKind.HORIZON, n)

    def _schedule(self, time, kind, agent, payload=None):
        event = SimEvent(time, next(self._seq), kind, agent, payload)
        heapq.heappush(self._queue, (event.time, event.seq, event))
        return event

    def _local_now(self, agent):
        return local_time(self.clocks[agent], self.now)

    def step(self) -> Optional[SimEvent]:
        """Pops and dispatches one simulation event; returns it, or None once the queue is empty."""
        if not self._queue:
            return None
        _, _, event = heapq.heappop(self._queue)
        self.now = event.time
        try:
            self._dispatch(event)
        except ProtocolViolation as exc:
            logger.error('run aborted at global tick %d, trace log position %d: %s', self.now, self.log.position, exc)
            raise type(exc)('{} (trace log position {})'.format(exc, self.log.position)) from exc
        return event

    def run(self) -> RunReport:
        while self.step() is not None:
            pass
        return self.report()

    def _dispatch(self, event):
        n = event.agent
        abstractor = self.abstractors[n]
        if event.kind is SimEventKind.ROOT_FIRES:
            # a forward clock step can fire later roots at this same global tick
            messages, flushed = abstractor.on_root(event.payload, event.payload.t)
            self._send_all(n, messages)
            self._feed(n, flushed)
        elif event.kind is SimEventKind.HORIZON:
            messages, flushed = abstractor.on_horizon(self._local_now(n))
            self._send_all(n, messages)
            self._feed(n, flushed)
        else:
            src, payload = event.payload
            sent_at, _, received = self.channels[(src, n)].receive()
            if received is not payload:
                raise ProtocolViolation('channel {} delivered out of order'.format(channel_name(src, n)))
            if isinstance(payload, RightRootMsg):
                self._feed(n, abstractor.on_remote_right_root(payload, self._local_now(n)))
            elif isinstance(payload, Token):
                self._slicer_output(n, self.slicers[n].on_token_arrival(payload))
            else:
                raise ProtocolViolation('unknown payload {!r} on channel {}'.format(payload, channel_name(src, n)))
        if abstractor.closed and n not in self._closed:
            self._closed.add(n)
            self._slicer_output(n, self.slicers[n].close_feed())

    def _send(self, src, dst, payload):
        channel = self.channels[(src, dst)]
        delay = self._draw(src, dst, channel.sent)
        deliver = channel.send(self.now, delay, payload)
        self._schedule(deliver, SimEventKind.MSG_DELIVERY, dst, (src, payload))

    def _send_all(self, src, messages):
        for dst, msg in messages:
            self._send(src, dst, msg)
            self.metrics.abstractor_msgs += 1

    def _feed(self, n, flushed):
        for event in flushed:
            self.metrics.D += 1
            self._slicer_output(n, self.slicers[n].feed(event))

    def _slicer_output(self, n, output):
        sends, emitted = output
        for dst, tok in sends:
            self._send(n, dst, tok)
            self.metrics.token_msgs += 1
        for frontier in emitted:
            self._record_emission(n, frontier)

    def _record_emission(self, owner, frontier):
        times = frontier.times
        occurred = max(self.clocks[e.agent].global_time_of(e.t) for e in frontier.events)
        delay = max(self.now - occurred, 0)
        self.metrics.emissions += 1
        self.metrics.max_detection_delay_s = max(self.metrics.max_detection_delay_s, self.scale.to_seconds(delay))
        self.satcuts.setdefault(times, len(self.satcuts))
        self.emissions.append({'owner': owner, 'times': list(times), 'global_tick': self.now,
                               'detection_delay_ticks': delay})
        self.log.emit('emit', owner=owner, times=list(times), global_tick=self.now)

    def report(self):
        self.metrics.M = sum(s.created_events for s in self.slicers)
        self.metrics.max_buffer_size = max(a.max_buffer_size for a in self.abstractors)
        satcuts = sorted(self.satcuts, key=self.satcuts.get)
        return RunReport(self.scale.hz, self.skew.epsilon, satcuts, self.emissions, self.metrics, self.log.records)


def run(skew: SkewBound, traces: Sequence[PLTrace], delays: Optional[DelayModel] = None,
        clocks: Optional[Sequence[LocalClock]] = None, scale: TickScale = TickScale()) -> RunReport:
    """Runs the detector end to end and returns its RunReport."""
    sim = Simulator(skew, traces, delays, clocks, scale)
    report = sim.run()
    logger.info('run finished: %d agents, %d satcuts, %d abstractor messages, %d token messages',
                sim.n_agents, len(report.satcuts), report.metrics.abstractor_msgs, report.metrics.token_msgs)
    return report

"""
Per-agent abstractor.

Turns the roots of one agent's signal into a stream of discrete, PVC-stamped
events for the local slicer. Right roots are broadcast to every other agent,
which answer with a local event epsilon later; buffered events are released
once no earlier event can still appear.
"""

import bisect
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .causality import Event, EventId, EventKind, make_event
from .errors import FifoViolation, ProtocolViolation
from .signals import EndpointTag, SignTrace, SkewBound, sign_at

logger = logging.getLogger(__name__)

RIGHT_ROOT = 'right_root'
HORIZON_MARKER = 'horizon'


@dataclass(frozen=True)
class RightRootMsg:
    origin: int
    t: int
    kind: str = RIGHT_ROOT


def root_events(st: SignTrace) -> List[EventId]:
    """
    Roots of one sign trace in time order.
    Parameters
    ----------
    st - SignTrace of the agent

    An interval that starts at the first sample yields a ``horizon`` event so
    that tokens can land on it; a degenerate interval yields one right root.
    """
    roots = []
    for iv in st.intervals:
        if iv.left == iv.right and iv.right_tag is EndpointTag.RIGHT_ROOT:
            roots.append(EventId(st.agent, iv.left, EventKind.RIGHT_ROOT))
            continue
        if iv.left_tag is EndpointTag.LEFT_ROOT:
            roots.append(EventId(st.agent, iv.left, EventKind.LEFT_ROOT))
        else:
            roots.append(EventId(st.agent, iv.left, EventKind.HORIZON))
        if iv.right_tag is EndpointTag.RIGHT_ROOT:
            roots.append(EventId(st.agent, iv.right, EventKind.RIGHT_ROOT))
    return roots


class AbstractorState(object):

    def __init__(self, agent: int, n_agents: int, skew: SkewBound, sign_trace: SignTrace, log=None):
        """
        Creates the abstractor of one agent.
        Parameters
        ----------
        agent - Index of the agent
        n_agents - Number of agents in the run
        skew - SkewBound of the run
        sign_trace - The agent's own SignTrace, used for truth bits of created events
        log - Optional TraceLog receiving one record per trigger
        """
        self.agent = agent
        self.n_agents = n_agents
        self.skew = skew
        self.sign_trace = sign_trace
        self.log = log
        self.buffer = []
        self._buffer_times = []
        self.last_right_root_seen = {m: None for m in range(n_agents) if m != agent}
        self.markers = set()
        self.local_now = None
        self.last_root = None
        self.last_delivered = None
        self.horizon_reached = False
        self.closed = False
        self.max_buffer_size = 0
        self.messages_sent = 0

    # Triggers

    def on_root(self, root: EventId, local_now: Optional[int] = None) -> Tuple[list, List[Event]]:
        """Buffers a local root; right roots are broadcast. Returns ``(messages, flushed)``."""
        if root.agent != self.agent:
            raise ProtocolViolation('agent {} got a root of agent {}'.format(self.agent, root.agent))
        if self.horizon_reached:
            raise ProtocolViolation('agent {} got a root at {} after its horizon'.format(self.agent, root.t))
        if self.last_root is not None and root.t <= self.last_root:
            raise ProtocolViolation('agent {} got root {} after root {}'.format(self.agent, root.t, self.last_root))
        self.last_root = root.t
        self._advance(local_now if local_now is not None else root.t)
        event = make_event(self.agent, root.t, root.kind, self.n_agents, self.skew, self._truth(root.t))
        self._insert(event)
        messages = []
        if root.kind is EventKind.RIGHT_ROOT:
            messages = self._broadcast(RightRootMsg(self.agent, root.t))
        self._record('root', event)
        return messages, self._flush()

    def on_remote_right_root(self, msg: RightRootMsg, local_now: Optional[int] = None) -> List[Event]:
        """Handles a right root (or horizon marker) of another agent. Returns the flushed events."""
        if msg.origin == self.agent or msg.origin not in self.last_right_root_seen:
            raise ProtocolViolation('agent {} got a message from unknown origin {}'.format(self.agent, msg.origin))
        if msg.origin in self.markers:
            raise FifoViolation('agent {} got {} from agent {} after its horizon marker'.format(
                self.agent, msg.t, msg.origin))
        previous = self.last_right_root_seen[msg.origin]
        if previous is not None and msg.t < previous:
            raise FifoViolation('agent {} got right root {} from agent {} after {}'.format(
                self.agent, msg.t, msg.origin, previous))
        if local_now is not None:
            self._advance(local_now)
        self.last_right_root_seen[msg.origin] = msg.t
        if msg.kind == HORIZON_MARKER:
            self.markers.add(msg.origin)
            self._record('marker', None, origin=msg.origin)
            return self._flush()
        t = msg.t + self.skew.epsilon
        # stamp[origin] == msg.t, so the remote right root happened-before this event
        event = make_event(self.agent, t, EventKind.OFFSET_FROM_RIGHT_ROOT, self.n_agents, self.skew, self._truth(t))
        self._insert(event)
        self._record('remote_right_root', event, origin=msg.origin)
        return self._flush()

    def on_horizon(self, local_now: Optional[int] = None) -> Tuple[list, List[Event]]:
        """Broadcasts the horizon marker. Returns ``(messages, flushed)``."""
        if self.horizon_reached:
            raise ProtocolViolation('agent {} reached its horizon twice'.format(self.agent))
        self.horizon_reached = True
        horizon = self.sign_trace.horizon
        self._advance(max(horizon, local_now) if local_now is not None else horizon)
        messages = self._broadcast(RightRootMsg(self.agent, horizon, HORIZON_MARKER))
        self._record('horizon', None)
        return messages, self._flush()

    # Internals

    def _advance(self, local_now):
        if self.local_now is None or local_now > self.local_now:
            self.local_now = local_now

    def _truth(self, t):
        st = self.sign_trace
        return st.start <= t <= st.horizon and sign_at(st, t)

    def _broadcast(self, msg):
        messages = [(m, msg) for m in range(self.n_agents) if m != self.agent]
        self.messages_sent += len(messages)
        return messages

    def _insert(self, event):
        if self.last_delivered is not None and event.t <= self.last_delivered:
            raise ProtocolViolation('agent {}: event at {} arrives after event {} was already released'.format(
                self.agent, event.t, self.last_delivered))
        index = bisect.bisect_left(self._buffer_times, event.t)
        if index < len(self.buffer) and self._buffer_times[index] == event.t:
            present = self.buffer[index]
            kind = present.kind
            if kind is EventKind.OFFSET_FROM_RIGHT_ROOT:
                kind = event.kind
            self.buffer[index] = Event(EventId(self.agent, event.t, kind), present.pvc.join(event.pvc), present.truth)
            return
        self.buffer.insert(index, event)
        self._buffer_times.insert(index, event.t)
        self.max_buffer_size = max(self.max_buffer_size, len(self.buffer))

    def _ready(self, s):
        if not self.horizon_reached and (self.local_now is None or s > self.local_now):
            return False
        return all(t is not None and t >= s for t in self.last_right_root_seen.values())

    def _flush(self):
        final = self.horizon_reached and len(self.markers) == len(self.last_right_root_seen)
        count = 0
        while count < len(self.buffer) and (final or self._ready(self.buffer[count].t)):
            count += 1
        flushed = self.buffer[:count]
        del self.buffer[:count]
        del self._buffer_times[:count]
        if flushed:
            self.last_delivered = flushed[-1].t
        if final and not self.closed:
            self.closed = True
            logger.debug('abstractor %d closed its feed after %d messages', self.agent, self.messages_sent)
        return flushed

    def _record(self, trigger, event, **extra):
        if self.log is None:
            return
        self.log.emit('abstractor', agent=self.agent, trigger=trigger,
                      event=event.to_record() if event is not None else None,
                      pvc=list(event.pvc.stamp) if event is not None else None,
                      buffer_size=len(self.buffer), **extra)

"""
Per-agent slicer.

Every agent owns one token. The token completes each event its abstractor
delivers into the least satisfying consistent cut whose own component is not
earlier than the event, travelling to other agents to move their entries
forward. Missing events at exactly ``t - epsilon`` are created on arrival.
"""

import bisect
import enum
import heapq
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .causality import Event, EventKind, Frontier, make_event
from .errors import ProtocolViolation
from .signals import SignTrace, SkewBound, sign_at

logger = logging.getLogger(__name__)


class Phase(str, enum.Enum):
    IDLE = 'at_owner'
    SEARCHING = 'searching'
    IN_TRANSIT = 'in_transit'
    WAITING = 'waiting_at'
    DONE = 'done'
    RETIRED = 'retired'


@dataclass(frozen=True)
class Target:
    agent: int
    t: int
    # exact: an event at exactly t; otherwise the first event after t
    exact: bool

    def to_record(self):
        return {'agent': self.agent, 't': self.t, 'exact': self.exact}


@dataclass
class Token:
    owner: int
    entries: List[Optional[Event]]
    pending: Optional[Event] = None
    target: Optional[Target] = None
    phase: Phase = Phase.IDLE
    hops: int = 0

    @property
    def candidate_times(self) -> List[Optional[int]]:
        return [None if e is None else e.t for e in self.entries]

    def frontier(self) -> Frontier:
        return Frontier(tuple(self.entries))


def advance_token(tok: Token) -> Optional[Target]:
    """
    Next target of a token, or None when its candidate is a satisfying consistent cut.
    Parameters
    ----------
    tok - Token whose owner entry is set

    A false entry moves to its successor on that agent. Otherwise an entry
    that is missing, or earlier than what the other entries' PVCs require of
    its agent, moves to exactly the required time.
    """
    entries = tok.entries
    if entries[tok.owner] is None:
        raise ProtocolViolation('token of agent {} has no entry for its owner'.format(tok.owner))
    for m, entry in enumerate(entries):
        if entry is not None and not entry.truth:
            return Target(m, entry.t, False)
    behind = []
    for m, entry in enumerate(entries):
        known = [e.pvc.stamp[m] for k, e in enumerate(entries) if k != m and e is not None]
        required = max(known) if known else 0
        if entry is None or entry.t < required:
            behind.append((-1 if entry is None else entry.t, m, required))
    if not behind:
        return None
    _, m, required = min(behind)
    return Target(m, required, True)


class SlicerState(object):

    def __init__(self, agent: int, n_agents: int, skew: SkewBound, sign_trace: SignTrace, log=None):
        """
        Creates the slicer of one agent together with the agent's token.
        Parameters
        ----------
        agent - Index of the agent
        n_agents - Number of agents in the run
        skew - SkewBound of the run
        sign_trace - The agent's own SignTrace, used for truth bits of created events
        log - Optional TraceLog receiving token moves and emissions
        """
        self.agent = agent
        self.n_agents = n_agents
        self.skew = skew
        self.sign_trace = sign_trace
        self.log = log
        self.events = []
        self._times = []
        self._by_time = {}
        self.fed_until = None
        self.closed = False
        self.pending = deque()
        self.token = Token(agent, [None] * n_agents)
        self.token_home = True
        self._parked = []
        self._seq = itertools.count()
        self.emitted = []
        self.created_events = 0

    # Feed from the local abstractor

    def feed(self, event: Event) -> Tuple[list, list]:
        """Appends an abstractor event to F_n. Returns ``(sends, emitted)``."""
        if event.agent != self.agent:
            raise ProtocolViolation('slicer {} fed an event of agent {}'.format(self.agent, event.agent))
        if self.closed:
            raise ProtocolViolation('slicer {} fed after its feed closed'.format(self.agent))
        if self.fed_until is not None and event.t <= self.fed_until:
            raise ProtocolViolation('slicer {} fed {} after {}'.format(self.agent, event.t, self.fed_until))
        if event.t in self._by_time:
            raise ProtocolViolation('slicer {} already holds an event at {}'.format(self.agent, event.t))
        self._insert(event)
        self.fed_until = event.t
        self.pending.append(event)
        sends, emitted = [], []
        woken = []
        while self._parked and self._parked[0][0] <= event.t:
            woken.append(heapq.heappop(self._parked)[2])
        for tok in woken:
            self._run(tok, sends, emitted)
        if self.token_home and self.token.phase is Phase.IDLE:
            self._run(self.token, sends, emitted)
        return sends, emitted

    def close_feed(self) -> Tuple[list, list]:
        """No more abstractor events will arrive. Returns ``(sends, emitted)``."""
        self.closed = True
        sends, emitted = [], []
        woken = [entry[2] for entry in sorted(self._parked)]
        self._parked = []
        for tok in woken:
            self._run(tok, sends, emitted)
        if self.token_home and self.token.phase is Phase.IDLE:
            self._run(self.token, sends, emitted)
        return sends, emitted

    # Token handling

    def on_token_arrival(self, tok: Token) -> Tuple[list, list]:
        """Handles a token delivered by the network. Returns ``(sends, emitted)``."""
        if tok.phase is Phase.DONE:
            if tok.owner != self.agent:
                raise ProtocolViolation('finished token of agent {} delivered to agent {}'.format(
                    tok.owner, self.agent))
        elif tok.phase is Phase.IN_TRANSIT:
            if tok.target is None or tok.target.agent != self.agent:
                raise ProtocolViolation('token of agent {} delivered to agent {} without a target there'.format(
                    tok.owner, self.agent))
            tok.phase = Phase.SEARCHING
        else:
            raise ProtocolViolation('token of agent {} delivered in phase {}'.format(tok.owner, tok.phase.value))
        if tok.owner == self.agent:
            self.token_home = True
        sends, emitted = [], []
        self._run(tok, sends, emitted)
        return sends, emitted

    def next_pending(self, tok: Token) -> bool:
        """
        Moves the owner's token on to the next unconsumed event of F_n.
        Parameters
        ----------
        tok - The owner's token, finished with its previous event

        Returns False when the token idles (nothing pending) or retires (feed closed).
        """
        if not self.pending:
            tok.phase = Phase.RETIRED if self.closed else Phase.IDLE
            tok.pending = None
            return False
        event = self.pending.popleft()
        tok.pending = event
        tok.target = None
        current = tok.entries[self.agent]
        if current is None or current.t < event.t:
            tok.entries[self.agent] = event
            tok.phase = Phase.SEARCHING
        else:
            # the previous completion already lies at or past this event
            tok.phase = Phase.DONE
        self._record('start', tok, pending=event.t)
        return True

    def _run(self, tok, sends, emitted):
        while True:
            if tok.phase in (Phase.IDLE, Phase.DONE):
                if tok.owner != self.agent:
                    self._send(tok, tok.owner, sends)
                    return
                if tok.phase is Phase.DONE:
                    frontier = tok.frontier()
                    self.emitted.append(frontier)
                    emitted.append(frontier)
                    self._record('emit', tok)
                if not self.next_pending(tok):
                    if tok.phase is Phase.RETIRED:
                        self._record('retire', tok)
                    return
                continue
            if tok.phase is Phase.RETIRED:
                return
            if tok.target is None:
                tok.target = advance_token(tok)
                if tok.target is None:
                    tok.phase = Phase.DONE
                    continue
                self._record('target', tok)
            if tok.target.agent != self.agent:
                tok.phase = Phase.IN_TRANSIT
                self._send(tok, tok.target.agent, sends)
                return
            tok.phase = Phase.SEARCHING
            event = self._resolve(tok)
            if event is None:
                return
            tok.entries[self.agent] = event
            tok.target = None
            self._record('incorporate', tok, event=event.to_record())

    def _resolve(self, tok):
        target = tok.target
        if target.exact:
            t = max(target.t, self.sign_trace.start)
            if t in self._by_time:
                return self._by_time[t]
            if (self.fed_until is not None and self.fed_until > t) or (self.closed and t <= self.sign_trace.horizon):
                return self._create(t)
            if self.closed:
                return self._retire(tok)
            return self._park(tok, t)
        index = bisect.bisect_right(self._times, target.t)
        if index < len(self.events):
            return self.events[index]
        if self.closed:
            return self._retire(tok)
        return self._park(tok, target.t + 1)

    def _create(self, t: int) -> Event:
        event = make_event(self.agent, t, EventKind.SLICER_CREATED, self.n_agents, self.skew, self._truth(t))
        self._insert(event)
        self.created_events += 1
        if self.log is not None:
            self.log.emit('slicer', agent=self.agent, action='create', event=event.to_record())
        return event

    def _truth(self, t):
        # false past the agent's own horizon
        st = self.sign_trace
        return st.start <= t <= st.horizon and sign_at(st, t)

    def _park(self, tok, wake_at):
        tok.phase = Phase.WAITING
        heapq.heappush(self._parked, (wake_at, next(self._seq), tok))
        self._record('park', tok, wake_at=wake_at)
        return None

    def _retire(self, tok):
        tok.phase = Phase.RETIRED
        self._record('retire', tok)
        logger.debug('token of agent %d retired at agent %d waiting for %s', tok.owner, self.agent, tok.target)
        return None

    def _send(self, tok, dst, sends):
        tok.hops += 1
        if tok.owner == self.agent:
            self.token_home = False
        self._record('send', tok, dst=dst)
        sends.append((dst, tok))

    def _insert(self, event):
        index = bisect.bisect_left(self._times, event.t)
        self._times.insert(index, event.t)
        self.events.insert(index, event)
        self._by_time[event.t] = event

    def _record(self, action, tok, **extra):
        if self.log is None:
            return
        self.log.emit('slicer', agent=self.agent, action=action, owner=tok.owner, phase=tok.phase.value,
                      candidate=tok.candidate_times,
                      target=tok.target.to_record() if tok.target is not None else None, **extra)

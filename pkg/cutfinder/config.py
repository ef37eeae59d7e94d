import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigurationError
from .netsim import DelayModel
from .signals import (DEFAULT_TICK_HZ, Comparison, LocalClock, PredicateAtom, SkewBound, TickScale,
                      constant_clock)

ENV_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), ".env")


@dataclass(frozen=True)
class Settings:
    log_level: str = 'INFO'
    tick_hz: int = DEFAULT_TICK_HZ
    bench_workers: int = 1


def load_settings(env_path=ENV_PATH):
    """
    Reads process-level settings from the environment.
    Parameters
    ----------
    env_path - Optional .env file loaded first; variables already set win
    """
    load_dotenv(env_path)
    try:
        return Settings(
            log_level=os.environ.get("CUTFINDER_LOG_LEVEL", "INFO"),
            tick_hz=int(os.environ.get("CUTFINDER_TICK_HZ", DEFAULT_TICK_HZ)),
            bench_workers=max(1, int(os.environ.get("CUTFINDER_BENCH_WORKERS", 1)))
        )
    except ValueError as exc:
        raise ConfigurationError('invalid CUTFINDER_* environment setting: {}'.format(exc))


def _required(data, key):
    if key not in data:
        raise ConfigurationError('run config is missing "{}"'.format(key))
    return data[key]


def parse_atoms(items):
    atoms = []
    for item in items or []:
        try:
            atoms.append(PredicateAtom(int(item['agent']),
                                       Comparison.parse(item.get('comparison', '>=')),
                                       float(item.get('threshold', 0.0)),
                                       str(item.get('column', 'value'))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError('invalid atom {!r}: {}'.format(item, exc))
    return tuple(atoms)


def atoms_by_agent(atoms):
    """Maps agent index to its atom; conjuncts are one per agent."""
    indexed = {}
    for atom in atoms:
        if atom.agent in indexed:
            raise ConfigurationError('agent {} has more than one atom; conjuncts are one per agent'.format(atom.agent))
        indexed[atom.agent] = atom
    return indexed


def parse_clock(agent, spec, scale):
    if spec is None:
        return constant_clock(agent)
    if isinstance(spec, (int, float)):
        return constant_clock(agent, scale.to_ticks(spec))
    try:
        return LocalClock(agent, tuple((scale.to_ticks(start), scale.to_ticks(offset)) for start, offset in spec))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError('invalid clock_offsets entry for agent {}: {}'.format(agent, exc))


@dataclass(frozen=True)
class RunConfig:
    """Run configuration, as read from a JSON document."""

    n_agents: int
    epsilon_s: float
    tick_hz: int = DEFAULT_TICK_HZ
    horizon_s: Optional[float] = None
    delay: DelayModel = DelayModel()
    clock_offsets: Tuple = ()
    seed: int = 0
    atoms: Tuple[PredicateAtom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigurationError('n_agents must be at least 1, got {}'.format(self.n_agents))
        if self.clock_offsets and len(self.clock_offsets) != self.n_agents:
            raise ConfigurationError('clock_offsets lists {} agents, expected {}'.format(
                len(self.clock_offsets), self.n_agents))
        for atom in self.atoms:
            if not 0 <= atom.agent < self.n_agents:
                raise ConfigurationError('atom names agent {} of {}'.format(atom.agent, self.n_agents))
        atoms_by_agent(self.atoms)
        SkewBound(self.scale.to_ticks(self.epsilon_s))

    @property
    def scale(self):
        return TickScale(self.tick_hz)

    @property
    def skew(self):
        return SkewBound(self.scale.to_ticks(self.epsilon_s))

    @property
    def horizon(self):
        return None if self.horizon_s is None else self.scale.to_ticks(self.horizon_s)

    def clocks(self) -> List[LocalClock]:
        specs = self.clock_offsets or (None,) * self.n_agents
        return [parse_clock(n, spec, self.scale).validate(self.skew) for n, spec in enumerate(specs)]

    def atom_for(self, agent: int) -> PredicateAtom:
        return atoms_by_agent(self.atoms).get(agent, PredicateAtom(agent))

    @classmethod
    def from_dict(cls, data, settings=None):
        if not isinstance(data, dict):
            raise ConfigurationError('run config must be a JSON object')
        tick_hz = int(data.get('tick_hz') or (settings.tick_hz if settings else DEFAULT_TICK_HZ))
        scale = TickScale(tick_hz)
        try:
            seed = int(data.get('seed', 0))
            return cls(n_agents=int(_required(data, 'n_agents')),
                       epsilon_s=float(_required(data, 'epsilon_s')),
                       tick_hz=tick_hz,
                       horizon_s=None if data.get('horizon_s') is None else float(data['horizon_s']),
                       delay=DelayModel.from_dict(data.get('delay'), scale, seed),
                       clock_offsets=tuple(data.get('clock_offsets') or ()),
                       seed=seed,
                       atoms=parse_atoms(data.get('atoms')))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError('invalid run config: {}'.format(exc))

    @classmethod
    def from_json(cls, path, settings=None):
        try:
            with open(path) as handle:
                data = json.load(handle)
        except (OSError, ValueError) as exc:
            raise ConfigurationError('cannot read run config {}: {}'.format(path, exc))
        return cls.from_dict(data, settings)

    def to_dict(self):
        return {
            'n_agents': self.n_agents,
            'epsilon_s': self.epsilon_s,
            'tick_hz': self.tick_hz,
            'horizon_s': self.horizon_s,
            'delay': self.delay.to_dict(self.scale),
            'clock_offsets': [list(map(list, c)) if isinstance(c, (list, tuple)) else c for c in self.clock_offsets],
            'seed': self.seed,
            'atoms': [{'agent': a.agent, 'comparison': a.comparison.value, 'threshold': a.threshold,
                       'column': a.column} for a in self.atoms],
        }

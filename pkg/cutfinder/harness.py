"""
Experiment harness: synthetic signals, CSV ingestion, end-to-end detection,
aggregation of emitted satcuts into extremal intervals, oracle diffing and
scaling benchmarks.
"""

import csv
import glob
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from . import netsim
from .causality import Frontier, SatcutInterval, is_satcut, region_interval, region_of
from .config import RunConfig, atoms_by_agent
from .errors import ConfigurationError, IngestionError, MalformedTraceError, StructuralInvariantViolation
from .oracle import GlobalView, enumerate_extremals
from .signals import PLTrace, PredicateAtom, Sample, SkewBound, TickScale, normalize, sign_traces
from .workers import CellPool

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ['n_agents', 'root_rate', 'reps', 'R_total', 'D', 'M', 'abstractor_msgs', 'token_msgs',
                 'token_msgs_per_root', 'max_buffer_size', 'max_detection_delay_s', 'wall_time_s',
                 'wall_time_ci95_s', 'online']


# Synthetic signals

@dataclass(frozen=True)
class GeneratorConfig:
    n_agents: int = 2
    duration_s: float = 10.0
    root_rate: Union[float, Tuple[float, ...]] = 5.0
    amplitude: float = 1.0
    seed: int = 0
    # roots land on multiples of this many seconds, for grid checks
    quantum_s: Optional[float] = None

    def rates(self):
        if isinstance(self.root_rate, (int, float)):
            return [float(self.root_rate)] * self.n_agents
        if len(self.root_rate) != self.n_agents:
            raise ConfigurationError('{} root rates for {} agents'.format(len(self.root_rate), self.n_agents))
        return [float(r) for r in self.root_rate]


def root_count(rate: float, duration_s: float) -> int:
    """Even number of roots closest to ``rate * duration_s``, at least two."""
    return max(2, 2 * int(round(rate * duration_s / 2.0)))


def _agent_trace(agent, rate, cfg, rng, scale):
    unit = scale.to_ticks(cfg.quantum_s) if cfg.quantum_s else 1
    if unit <= 0:
        raise ConfigurationError('quantum_s {} is below the tick resolution'.format(cfg.quantum_s))
    total_units = scale.to_ticks(cfg.duration_s) // unit
    roots = root_count(rate, cfg.duration_s)
    gaps = roots + 1
    if 2 * gaps > total_units:
        raise ConfigurationError(
            'agent {}: {} roots in {}s do not fit at a resolution of {} ticks'.format(
                agent, roots, cfg.duration_s, unit))
    # exponential spacing, clipped, then scaled onto the available units
    weights = np.clip(rng.exponential(1.0, size=gaps), 0.2, 3.0)
    spare = total_units - 2 * gaps
    shares = weights / weights.sum() * spare
    extra = np.floor(shares).astype(np.int64)
    leftover = int(spare - extra.sum())
    extra[np.argsort(-(shares - extra), kind='stable')[:leftover]] += 1
    bounds = [0] + [int(b) * unit for b in np.cumsum(2 + extra)]
    peaks = cfg.amplitude * rng.uniform(0.5, 1.0, size=gaps)

    samples = [Sample(0, -float(peaks[0]) / 2)]
    for i in range(gaps):
        sign = -1.0 if i % 2 == 0 else 1.0
        samples.append(Sample((bounds[i] + bounds[i + 1]) // 2, sign * float(peaks[i])))
        if i + 1 < gaps:
            samples.append(Sample(bounds[i + 1], 0.0))
        else:
            samples.append(Sample(bounds[i + 1], -float(peaks[i]) / 2))
    return PLTrace(agent, tuple(samples))


def generate(cfg: GeneratorConfig, scale: TickScale = TickScale()) -> Tuple[PLTrace, ...]:
    """
    Seeded triangle-like signals with a target average root rate.
    Parameters
    ----------
    cfg - GeneratorConfig
    scale - TickScale of the run

    Every trace starts and ends negative and crosses zero exactly at its roots.
    """
    rates = cfg.rates()
    for rate in rates:
        if rate * cfg.duration_s < 2:
            raise ConfigurationError('root rate {} over {}s gives fewer than two roots'.format(rate, cfg.duration_s))
    rng = np.random.default_rng(cfg.seed)
    return tuple(_agent_trace(n, rate, cfg, rng, scale) for n, rate in enumerate(rates))


def write_traces(traces: Sequence[PLTrace], path: str, scale: TickScale = TickScale()) -> str:
    """Writes traces as one long-format CSV with header ``agent,time,value``."""
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['agent', 'time', 'value'])
        for trace in traces:
            for sample in trace.samples:
                writer.writerow([trace.agent, repr(scale.to_seconds(sample.t)), repr(sample.value)])
    return path


# Ingestion

def _read_rows(path):
    try:
        with open(path, newline='') as handle:
            reader = csv.DictReader(handle)
            if not reader.fieldnames:
                raise IngestionError('empty file', path)
            return [name.strip() for name in reader.fieldnames], list(reader)
    except OSError as exc:
        raise IngestionError('cannot read: {}'.format(exc), path)


def _parse_number(text, what, path, row):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise IngestionError('{} {!r} is not a number'.format(what, text), path, row)
    if math.isnan(value) or math.isinf(value):
        raise IngestionError("{} is not finite".format(what), path, row)
    return value


def ingest(paths, atoms: Sequence[PredicateAtom] = (), scale: TickScale = TickScale(),
           n_agents: Optional[int] = None) -> Tuple[PLTrace, ...]:
    """
    Reads CSV traces and normalizes them against the predicate atoms.
    Parameters
    ----------
    paths - One long-format CSV (with an ``agent`` column) or one CSV per agent
    atoms - One atom per agent; agents without one use ``value >= 0``
    scale - TickScale used to convert times in seconds
    n_agents - Expected number of agents, checked when given
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    atom_of = atoms_by_agent(atoms)
    rows_by_agent = {}
    for position, path in enumerate(paths):
        fields, rows = _read_rows(path)
        if not rows:
            raise IngestionError('no data rows', path)
        if 'time' not in fields:
            raise IngestionError('missing "time" column', path, 0)
        for number, row in enumerate(rows, start=1):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            if 'agent' in fields:
                try:
                    agent = int(row['agent'])
                except (TypeError, ValueError):
                    raise IngestionError('agent {!r} is not an integer'.format(row.get('agent')), path, number)
            else:
                agent = position
            rows_by_agent.setdefault(agent, []).append((path, number, row))

    agents = sorted(rows_by_agent)
    expected = n_agents if n_agents is not None else len(agents)
    missing = [n for n in range(expected) if n not in rows_by_agent]
    if missing:
        raise IngestionError('no rows for agent {}'.format(missing[0]))
    extra = [n for n in agents if n < 0 or n >= expected]
    if extra:
        raise IngestionError('rows for agent {} beyond the {} expected agents'.format(extra[0], expected))

    traces = []
    for agent in range(expected):
        atom = atom_of.get(agent, PredicateAtom(agent))
        samples = []
        for path, number, row in rows_by_agent[agent]:
            if atom.column not in row:
                raise IngestionError('missing column {!r}'.format(atom.column), path, number)
            seconds = _parse_number(row['time'], 'time', path, number)
            value = _parse_number(row[atom.column], atom.column, path, number)
            try:
                t = scale.to_ticks(row['time'].strip())
            except ConfigurationError as exc:
                raise IngestionError(str(exc), path, number)
            if samples and t <= samples[-1].t:
                raise IngestionError('time {}s is not after the previous sample of agent {}'.format(
                    seconds, agent), path, number)
            jump = str(row.get('jump', '')).strip().lower() in ('1', 'true', 'yes')
            samples.append(Sample(t, value, jump))
        try:
            trace = PLTrace(agent, tuple(samples))
        except MalformedTraceError as exc:
            raise IngestionError(str(exc), rows_by_agent[agent][0][0])
        traces.append(normalize(trace, atom))
    logger.info('ingested %d agents from %d file(s)', len(traces), len(paths))
    return tuple(traces)


def ingest_dir(directory: str, atoms: Sequence[PredicateAtom] = (), scale: TickScale = TickScale(),
               n_agents: Optional[int] = None) -> Tuple[PLTrace, ...]:
    paths = sorted(glob.glob(os.path.join(directory, '*.csv')))
    if not paths:
        raise IngestionError('no CSV files', directory)
    return ingest(paths, atoms, scale, n_agents)


def clip_trace(trace: PLTrace, horizon: Optional[int]) -> PLTrace:
    """Cuts a trace at ``horizon`` ticks, adding a sample there when needed."""
    if horizon is None or horizon >= trace.horizon:
        return trace
    if horizon < trace.start:
        raise ConfigurationError('horizon {} precedes the first sample of agent {}'.format(horizon, trace.agent))
    kept = [s for s in trace.samples if s.t <= horizon]
    if kept[-1].t != horizon:
        kept.append(Sample(horizon, trace.value_at(horizon)))
    return PLTrace(trace.agent, tuple(kept))


# Aggregation

def _close_keys(keys):
    closed = set(keys)
    fresh = set(keys)
    while fresh:
        found = set()
        for a in fresh:
            for b in closed:
                for key in (tuple(map(max, a, b)), tuple(map(min, a, b))):
                    if key not in closed:
                        found.add(key)
        closed |= found
        fresh = found
    return closed


def aggregate(satcuts, traces, skew: SkewBound) -> List[SatcutInterval]:
    """
    Groups emitted satcuts into extremal intervals.
    Parameters
    ----------
    satcuts - Emitted frontiers, as Frontier objects or tuples of ticks
    traces - SignTrace per agent
    skew - SkewBound of the run

    Region keys are closed under componentwise max and min, the keys of joins
    and meets, before each region is expanded to its leftmost and rightmost cut.
    """
    keys = set()
    for satcut in satcuts:
        times = satcut.times if isinstance(satcut, Frontier) else tuple(satcut)
        if not is_satcut(times, traces, skew):
            raise StructuralInvariantViolation('emitted frontier {} is not a satcut'.format(list(times)))
        keys.add(region_of(times, traces))
    intervals = [region_interval(key, traces, skew) for key in _close_keys(keys)]
    intervals = [iv for iv in intervals if iv is not None]
    intervals.sort(key=lambda iv: (iv.leftmost.times, iv.rightmost.times))
    return intervals


# End to end

def prepare(config: RunConfig, traces: Sequence[PLTrace]) -> Tuple[PLTrace, ...]:
    """
    Checks the trace count and cuts every trace at the run horizon.
    Parameters
    ----------
    config - RunConfig of the run
    traces - One normalized PLTrace per agent

    Without ``horizon_s`` the horizon is the earliest last sample over all
    agents, so that every agent observes the whole window.
    """
    if len(traces) != config.n_agents:
        raise ConfigurationError('{} traces for n_agents {}'.format(len(traces), config.n_agents))
    horizon = config.horizon
    if horizon is None:
        horizon = min(trace.horizon for trace in traces)
    return tuple(clip_trace(trace, horizon) for trace in traces)


def detect(config: RunConfig, traces: Sequence[PLTrace]) -> netsim.RunReport:
    """Runs the detector on normalized traces and aggregates its output."""
    traces = prepare(config, traces)
    report = netsim.run(config.skew, traces, config.delay, config.clocks(), config.scale)
    report.extremals = aggregate(report.satcuts, sign_traces(traces), config.skew)
    return report


@dataclass
class VerifyResult:
    detected: List[SatcutInterval]
    expected: List[SatcutInterval]
    missing: List[tuple] = field(default_factory=list)
    unexpected: List[tuple] = field(default_factory=list)
    report: Optional[netsim.RunReport] = None

    @property
    def ok(self):
        return not self.missing and not self.unexpected


def diff_intervals(detected: Sequence[SatcutInterval], expected: Sequence[SatcutInterval]):
    found = {iv.bounds() for iv in detected}
    wanted = {iv.bounds() for iv in expected}
    return sorted(wanted - found), sorted(found - wanted)


def verify(config: RunConfig, traces: Sequence[PLTrace]) -> VerifyResult:
    """Compares the detector's aggregated output with the oracle, tick for tick."""
    traces = prepare(config, traces)
    report = detect(config, traces)
    view = GlobalView(sign_traces(traces), config.skew, tuple(config.clocks()))
    expected = enumerate_extremals(view)
    missing, unexpected = diff_intervals(report.extremals, expected)
    if missing or unexpected:
        logger.warning('detector and oracle disagree: %d missing, %d unexpected', len(missing), len(unexpected))
    return VerifyResult(report.extremals, expected, missing, unexpected, report)


# Benchmarks

def cell_seed(seed: int, n_agents: int, rate: float, rep: int) -> int:
    return int(np.random.SeedSequence([seed, n_agents, int(round(rate * 1000)), rep]).generate_state(1)[0])


def confidence_halfwidth(values, level: float = 0.95) -> float:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    sem = values.std(ddof=1) / math.sqrt(len(values))
    return float(stats.t.ppf(0.5 + level / 2, len(values) - 1) * sem)


def _sweep_config(n_agents, sweep, atoms=()):
    return RunConfig.from_dict({'n_agents': n_agents, 'epsilon_s': sweep.get('epsilon_s', 0.05),
                                'tick_hz': int(sweep.get('tick_hz', 1000000)),
                                'horizon_s': sweep.get('horizon_s'),
                                'delay': sweep.get('delay', {'mode': 'constant', 'delay_s': 0.01}),
                                'atoms': list(atoms)})


def _timed_run(config, traces):
    started = time.perf_counter()
    report = netsim.run(config.skew, traces, config.delay, config.clocks(), config.scale)
    return time.perf_counter() - started, report.metrics


def _summarize(n_agents, rate, duration, runs):
    walls = [wall for wall, _ in runs]

    def mean(name):
        return float(np.mean([getattr(m, name) for _, m in runs]))

    r_total = mean('R_total')
    row = {
        'n_agents': n_agents,
        'root_rate': rate,
        'reps': len(runs),
        'R_total': r_total,
        'D': mean('D'),
        'M': mean('M'),
        'abstractor_msgs': mean('abstractor_msgs'),
        'token_msgs': mean('token_msgs'),
        'token_msgs_per_root': mean('token_msgs') / r_total if r_total else 0.0,
        'max_buffer_size': mean('max_buffer_size'),
        'max_detection_delay_s': mean('max_detection_delay_s'),
        'wall_time_s': float(np.mean(walls)),
        'wall_time_ci95_s': confidence_halfwidth(walls),
    }
    row['online'] = row['wall_time_s'] < duration
    return row


def run_cell(n_agents: int, rate: float, reps: int, seed: int, sweep: dict) -> dict:
    """One synthetic cell: a fresh seeded trace set per repetition."""
    config = _sweep_config(n_agents, sweep)
    duration = float(sweep.get('duration_s', 5.0))
    runs = []
    for rep in range(reps):
        cfg = GeneratorConfig(n_agents, duration, rate, seed=cell_seed(seed, n_agents, rate, rep))
        runs.append(_timed_run(config, generate(cfg, config.scale)))
    return _summarize(n_agents, rate, duration, runs)


def run_trace_cell(n_agents: int, path: str, reps: int, sweep: dict) -> dict:
    """
    One recorded cell: the same ingested trace set, timed ``reps`` times.
    Parameters
    ----------
    n_agents - Number of agents in the set
    path - Long-format CSV or directory of per-agent CSVs
    reps - Repetitions
    sweep - The sweep; its ``atom`` (one template for every agent) or
            ``atoms`` (one per agent) select and threshold the column

    ``root_rate`` in the row is the measured right-root rate per agent.
    """
    template = sweep.get('atom')
    if template is not None:
        items = [dict(template, agent=n) for n in range(n_agents)]
    else:
        items = [a for a in sweep.get('atoms') or [] if int(a.get('agent', 0)) < n_agents]
    config = _sweep_config(n_agents, sweep, items)
    if os.path.isdir(path):
        traces = ingest_dir(path, config.atoms, config.scale, n_agents)
    else:
        traces = ingest(path, config.atoms, config.scale, n_agents)
    traces = prepare(config, traces)
    duration = config.scale.to_seconds(traces[0].horizon - min(t.start for t in traces))
    runs = [_timed_run(config, traces) for _ in range(reps)]
    row = _summarize(n_agents, 0.0, duration, runs)
    if duration > 0:
        row['root_rate'] = row['R_total'] / (n_agents * duration)
    logger.info('recorded set %s: %d agents over %.3fs', path, n_agents, duration)
    return row


def _trace_sets(sweep):
    try:
        return [(int(item['n_agents']), str(item['path'])) for item in sweep['trace_sets']]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError('trace_sets entries need n_agents and path: {}'.format(exc))


def bench(sweep: dict, reps: int = 3, seed: int = 0, workers: int = 1) -> List[dict]:
    """
    Runs every cell of a sweep ``reps`` times.
    Parameters
    ----------
    sweep - dict with either ``n_agents`` and ``root_rate`` lists (synthetic
            cells, plus optional ``duration_s``) or ``trace_sets``, a list of
            ``{"n_agents", "path"}`` recorded sets with ``atom`` or ``atoms``;
            both take optional ``epsilon_s``, ``tick_hz``, ``horizon_s`` and ``delay``
    reps - Repetitions per cell, at least 3
    seed - Base seed of synthetic cells
    workers - Worker threads running cells
    """
    if reps < 3:
        raise ConfigurationError('bench needs at least 3 repetitions per cell, got {}'.format(reps))
    pool = CellPool(workers)
    if 'trace_sets' in sweep:
        for index, (n, path) in enumerate(_trace_sets(sweep)):
            pool.submit((n, index), run_trace_cell, n, path, reps, sweep)
    else:
        try:
            agents = [int(n) for n in sweep['n_agents']]
            rates = [float(r) for r in sweep['root_rate']]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError('sweep needs n_agents and root_rate lists, or trace_sets: {}'.format(exc))
        for n in agents:
            for rate in rates:
                pool.submit((n, rate), run_cell, n, rate, reps, seed, sweep)
    rows = pool.join()
    logger.info('bench finished %d cells', len(rows))
    return rows


def write_table(rows: Sequence[dict], path: str) -> str:
    with open(path, 'w', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=TABLE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in TABLE_COLUMNS})
    return path


def fit_token_scaling(rows: Sequence[dict], root_rate: Optional[float] = None) -> dict:
    """
    Least-squares line of token messages per right root against N.
    Parameters
    ----------
    rows - bench rows
    root_rate - Restrict the fit to one root rate; all rows by default

    Returns a dict with ``slope``, ``intercept`` and ``max_relative_residual``.
    """
    chosen = [r for r in rows if root_rate is None or r['root_rate'] == root_rate]
    if len({r['n_agents'] for r in chosen}) < 2:
        raise ConfigurationError('a scaling fit needs rows for at least two agent counts')
    x = np.array([r['n_agents'] for r in chosen], dtype=float)
    y = np.array([r['token_msgs_per_root'] for r in chosen], dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    scale = np.where(np.abs(y) > 0, np.abs(y), 1.0)
    return {'slope': float(slope), 'intercept': float(intercept),
            'max_relative_residual': float(np.max(np.abs(y - fitted) / scale))}

import json
import logging
import os
import sys

import click

from . import harness, scenarios
from .config import RunConfig, load_settings
from .errors import CutfinderError
from .oracle import GlobalView, oracle_report
from .signals import TickScale, sign_traces
from .tracelog import configure_logging

logger = logging.getLogger(__name__)

VERIFY_MISMATCH = 2


def _fail(exc):
    logger.error('%s: %s', type(exc).__name__, exc)
    sys.exit(1)


def _load_traces(config, traces):
    if os.path.isdir(traces):
        return harness.ingest_dir(traces, config.atoms, config.scale, config.n_agents)
    return harness.ingest(traces, config.atoms, config.scale, config.n_agents)


@click.group()
@click.option('--log-level', default=None, help='Overrides CUTFINDER_LOG_LEVEL.')
@click.pass_context
def main(ctx, log_level):
    """Detects every satisfying consistent cut of conjunctive predicates over agent signals."""
    try:
        settings = load_settings()
    except CutfinderError as exc:
        _fail(exc)
    configure_logging(log_level or settings.log_level)
    ctx.obj = settings


@main.command()
@click.option('--agents', 'n_agents', type=int, default=2, show_default=True)
@click.option('--duration', 'duration_s', type=float, default=10.0, show_default=True, help='Seconds.')
@click.option('--rate', 'root_rate', type=float, default=5.0, show_default=True, help='Roots per second.')
@click.option('--amplitude', type=float, default=1.0, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--quantum', 'quantum_s', type=float, default=None, help='Place roots on this grid (seconds).')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Long-format CSV to write.')
@click.pass_obj
def generate(settings, n_agents, duration_s, root_rate, amplitude, seed, quantum_s, out):
    """Writes seeded synthetic traces."""
    scale = TickScale(settings.tick_hz)
    try:
        cfg = harness.GeneratorConfig(n_agents, duration_s, root_rate, amplitude, seed, quantum_s)
        harness.write_traces(harness.generate(cfg, scale), out, scale)
    except CutfinderError as exc:
        _fail(exc)
    click.echo(out)


@main.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--traces', type=click.Path(exists=True), required=True, help='CSV file or directory of CSVs.')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='RunReport JSON; stdout by default.')
@click.option('--no-log', is_flag=True, help='Leave the trace log out of the report.')
@click.pass_obj
def detect(settings, config_path, traces, out, no_log):
    """Runs the detector and writes its RunReport."""
    try:
        config = RunConfig.from_json(config_path, settings)
        report = harness.detect(config, _load_traces(config, traces))
    except CutfinderError as exc:
        _fail(exc)
    text = report.to_json(with_log=not no_log)
    if out:
        with open(out, 'w') as handle:
            handle.write(text)
        logger.info('wrote %d extremal intervals to %s', len(report.extremals), out)
    else:
        click.echo(text)


@main.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--traces', type=click.Path(exists=True), required=True, help='CSV file or directory of CSVs.')
@click.option('--oracle-out', type=click.Path(dir_okay=False), default=None, help='Also write the oracle report.')
@click.pass_obj
def verify(settings, config_path, traces, oracle_out):
    """Diffs the detector against the oracle; exits 2 on any difference."""
    try:
        config = RunConfig.from_json(config_path, settings)
        loaded = harness.prepare(config, _load_traces(config, traces))
        result = harness.verify(config, loaded)
        if oracle_out:
            view = GlobalView(sign_traces(loaded), config.skew)
            with open(oracle_out, 'w') as handle:
                json.dump(oracle_report(view, config.scale), handle, sort_keys=True, indent=2)
    except CutfinderError as exc:
        _fail(exc)
    scale = config.scale
    for lo, hi, _ in result.missing:
        click.echo('missing    {} .. {}'.format([scale.to_seconds(t) for t in lo], [scale.to_seconds(t) for t in hi]))
    for lo, hi, _ in result.unexpected:
        click.echo('unexpected {} .. {}'.format([scale.to_seconds(t) for t in lo], [scale.to_seconds(t) for t in hi]))
    click.echo('{} intervals, {}'.format(len(result.expected), 'match' if result.ok else 'MISMATCH'))
    if not result.ok:
        sys.exit(VERIFY_MISMATCH)


@main.command()
@click.option('--sweep', 'sweep_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='CSV table to write.')
@click.option('--reps', type=int, default=3, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--workers', type=int, default=None, help='Overrides CUTFINDER_BENCH_WORKERS.')
@click.pass_obj
def bench(settings, sweep_path, out, reps, seed, workers):
    """Runs a scaling sweep and writes a table with 95% confidence intervals."""
    try:
        with open(sweep_path) as handle:
            sweep = json.load(handle)
    except (OSError, ValueError) as exc:
        logger.error('cannot read sweep %s: %s', sweep_path, exc)
        sys.exit(1)
    if not isinstance(sweep, dict):
        logger.error('sweep %s must be a JSON object', sweep_path)
        sys.exit(1)
    # recorded trace sets are found relative to the sweep file
    base = os.path.dirname(os.path.abspath(sweep_path))
    for item in sweep.get('trace_sets') or []:
        if isinstance(item, dict) and 'path' in item:
            item['path'] = os.path.join(base, str(item['path']))
    try:
        rows = harness.bench(sweep, reps, seed, workers or settings.bench_workers)
        harness.write_table(rows, out)
    except CutfinderError as exc:
        _fail(exc)
    click.echo(out)


@main.command()
@click.option('--scenario', 'name', type=click.Choice(sorted(scenarios.SCENARIOS)), required=True)
@click.pass_obj
def golden(settings, name):
    """Replays a reference scenario and diffs it against its expected output."""
    scale = TickScale(settings.tick_hz)
    try:
        result = scenarios.run_golden(name, scale)
    except CutfinderError as exc:
        _fail(exc)
    for iv in result.report.extremals:
        click.echo('{} .. {}'.format([scale.to_seconds(t) for t in iv.leftmost.times],
                                     [scale.to_seconds(t) for t in iv.rightmost.times]))
    for line in result.mismatches:
        click.echo('mismatch: {}'.format(line))
    if not result.ok:
        sys.exit(VERIFY_MISMATCH)

#!/usr/bin/env python3
"""
Hierarchical SFN Local Content Toolkit - Main CLI Entry Point

Required C/N tables, BER curves, the equal-coverage alpha solver, user data
rates and scenario-driven Monte Carlo simulation for hierarchical modulation
carrying local content in hybrid satellite/terrestrial SFNs.
"""

import json
import logging
import math
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import click
import yaml
from colorama import Fore, Style
from colorama import init as colorama_init
from tabulate import tabulate

from analysis.link_analysis import (
    STANDARD_ALPHAS, Stream, ber_curve_hier, compare_thresholds, configuration_report,
    effective_esn0_curve, qpsk_reference_curve, required_cnr_global, select_standard_alpha,
    solve_equal_coverage, solve_equal_coverage_numeric, threshold_table,
)
from analysis.reference import (
    QPSK_THRESHOLDS_CSV, SIMULATED_THRESHOLDS_CSV, BerCurve, load_simulated_rows, load_threshold_rows,
)
from config.parser import ConfigParser
from generators.reports import ReportGenerator, write_records_csv
from phy.constellation import HierarchyParams
from phy.pilots import DEFAULT_OVERHEAD, FrameParams, parse_code_rate, user_data_rate
from simulation.harness import run_ber_experiment, run_detection_experiment, run_estimation_experiment
from utils import __version__
from utils.errors import ConfigurationError, InfeasibleError, ReferenceDataError
from utils.units import db_to_linear, linear_to_db

logger = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_INFEASIBLE = 5

TABLE_HEADER = ('code_rate', 'qpsk_cn_db', 'global_cn_db', 'local_cn_db')
DELTA_HEADER = ('global_delta_db', 'local_delta_db')
EFFECTIVE_HEADER = ('alpha', 'cnr_db', 'global_esn0_db', 'local_esn0_db')


def _fail(message: str, code: int) -> None:
    click.echo(f"{Fore.RED}❌ {message}{Style.RESET_ALL}", err=True)
    sys.exit(code)


def _handle_error(e: Exception, what: str) -> None:
    """Report an exception and exit with the matching status."""
    if isinstance(e, ConfigurationError):
        click.echo(f"{Fore.RED}❌ Invalid {what}:{Style.RESET_ALL}", err=True)
        for message in e.errors:
            click.echo(f"   - {message}", err=True)
        sys.exit(EXIT_VALIDATION)
    if isinstance(e, (ReferenceDataError, yaml.YAMLError, FileNotFoundError)):
        _fail(f"Could not read {what}: {e}", EXIT_PARSE)
    if isinstance(e, InfeasibleError):
        _fail(f"Infeasible: {e}", EXIT_INFEASIBLE)
    if isinstance(e, ValueError):
        _fail(f"Invalid {what}: {e}", EXIT_VALIDATION)
    logger.debug("Unexpected error", exc_info=True)
    _fail(f"Error in {what}: {e}", EXIT_ERROR)


def _sweep(start: float, stop: float, step: float):
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"stop ({stop}) must not be below start ({start})")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _format_db(value: Optional[float]) -> str:
    return '' if value is None else f"{value:.2f}"


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, default=str))


@click.group()
@click.version_option(version=__version__)
@click.option('--log-level', default='WARNING', show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Logging verbosity (INFO shows the resolved parameters)')
def cli(log_level: str):
    """Hierarchical SFN Local Content Toolkit

    Link analysis and Monte Carlo simulation of hierarchical modulation
    carrying local content in hybrid satellite/terrestrial SFNs.
    """
    colorama_init()
    logging.basicConfig(level=getattr(logging, log_level.upper()),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


@cli.command()
@click.option('--output', '-o', default='scenario.yaml',
              help='Output path for the sample scenario file')
def init(output: str):
    """Initialize a new scenario file."""
    try:
        if os.path.exists(output):
            if not click.confirm(f"Scenario file {output} already exists. Overwrite?"):
                click.echo("Operation cancelled.")
                return

        ConfigParser.create_sample_config(output)
        click.echo(f"✅ Sample scenario created: {output}")
        click.echo("\nNext steps:")
        click.echo(f"1. Edit {output} to describe the coverage region and C/N sweep")
        click.echo(f"2. Run 'hier-sfn simulate {output}' to start the experiment")

    except Exception as e:
        _handle_error(e, "scenario file")


@cli.command()
@click.option('--alpha', '-a', default='2', show_default=True, help='Hierarchical parameter (>= 1 or "inf")')
@click.option('--reference', '-r', type=click.Path(dir_okay=False), default=str(QPSK_THRESHOLDS_CSV),
              help='QPSK threshold CSV (code_rate,qpsk_cn_db)')
@click.option('--compare', is_flag=True, help='Also show simulation-minus-theory deltas')
@click.option('--simulated', type=click.Path(dir_okay=False), default=str(SIMULATED_THRESHOLDS_CSV),
              help='Simulated threshold CSV used by --compare')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the table as CSV')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def table(alpha: str, reference: str, compare: bool, simulated: str, output: Optional[str], as_json: bool):
    """Required C/N of the global and local streams per code rate."""
    try:
        h = HierarchyParams.parse(alpha)
        logger.info("table: alpha=%s reference=%s compare=%s simulated=%s output=%s",
                    h, reference, compare, simulated, output)
        result = threshold_table(load_threshold_rows(reference), h)
        records = result.as_records()

        comparisons = []
        if compare:
            comparisons = compare_thresholds(result, load_simulated_rows(simulated))

        if output:
            header = TABLE_HEADER
            if compare:
                header = TABLE_HEADER + DELTA_HEADER
                deltas = {str(c.code_rate): c for c in comparisons}
                for record in records:
                    c = deltas.get(record['code_rate'])
                    record['global_delta_db'] = c.global_delta_db if c else None
                    record['local_delta_db'] = c.local_delta_db if c else None
            write_records_csv(records, header, output)

        if as_json:
            _echo_json({
                'alpha': str(h),
                'rows': records,
                'comparison': [{
                    'code_rate': str(c.code_rate),
                    'global_delta_db': c.global_delta_db,
                    'local_delta_db': c.local_delta_db,
                } for c in comparisons],
            })
            return

        click.echo(f"📊 Required C/N (dB) at alpha = {h}")
        click.echo(tabulate(
            [[r['code_rate'], _format_db(r['qpsk_cn_db']), _format_db(r['global_cn_db']),
              _format_db(r['local_cn_db'])] for r in records],
            headers=['Code rate', 'QPSK', 'Global', 'Local'], tablefmt='github', disable_numparse=True))
        if comparisons:
            click.echo("\n🔍 Simulation minus theory (dB)")
            click.echo(tabulate(
                [[str(c.code_rate), _format_db(c.global_delta_db), _format_db(c.local_delta_db)]
                 for c in comparisons],
                headers=['Code rate', 'Global delta', 'Local delta'], tablefmt='github', disable_numparse=True))
            worst = max((abs(d) for c in comparisons for d in (c.global_delta_db, c.local_delta_db)
                         if d is not None), default=0.0)
            click.echo(f"Largest deviation: {worst:.2f} dB")
        if output:
            click.echo(f"📁 Table written to: {output}")

    except Exception as e:
        _handle_error(e, "threshold table")


@cli.command()
@click.option('--alpha', '-a', default='2', show_default=True, help='Hierarchical parameter (>= 1 or "inf")')
@click.option('--stream', '-s', type=click.Choice([s.value for s in Stream]), default='global', show_default=True)
@click.option('--reference', '-r', type=click.Path(dir_okay=False),
              help='QPSK BER-vs-Es/N0 CSV (x_db,ber); default is analytic uncoded QPSK')
@click.option('--start', default=-5.0, show_default=True, help='First C/N point (dB)')
@click.option('--stop', default=20.0, show_default=True, help='Last C/N point (dB)')
@click.option('--step', default=0.5, show_default=True, help='C/N step (dB)')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the curve as CSV')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def curve(alpha: str, stream: str, reference: Optional[str], start: float, stop: float, step: float,
          output: Optional[str], as_json: bool):
    """BER versus C/N of one stream, read off a QPSK reference curve."""
    try:
        h = HierarchyParams.parse(alpha)
        points = _sweep(start, stop, step)
        logger.info("curve: alpha=%s stream=%s reference=%s sweep=%g..%g step %g output=%s",
                    h, stream, reference or 'analytic', start, stop, step, output)
        if reference:
            qpsk_ref = BerCurve.from_csv(reference)
        else:
            qpsk_ref = qpsk_reference_curve(_sweep(-10.0, 30.0, 0.1))
        result = ber_curve_hier(qpsk_ref, h, Stream(stream), points)

        if output:
            result.to_csv(output, x_header='cnr_db')

        if as_json:
            _echo_json({
                'alpha': str(h),
                'stream': stream,
                'points': [{'cnr_db': x, 'ber': b} for x, b in zip(result.x_db, result.ber)],
                'omitted': list(result.omitted),
            })
            return

        click.echo(f"📊 {stream.capitalize()} stream BER at alpha = {h}")
        click.echo(tabulate([[f"{x:.2f}", f"{b:.3e}"] for x, b in zip(result.x_db, result.ber)],
                            headers=['C/N (dB)', 'BER'], tablefmt='github', disable_numparse=True))
        if result.omitted:
            click.echo(f"⚠️  {len(result.omitted)} point(s) outside the reference range were omitted")
        if output:
            click.echo(f"📁 Curve written to: {output}")

    except Exception as e:
        _handle_error(e, "BER curve")


@cli.command('solve-alpha')
@click.option('--global-cn-db', type=float, help='Required QPSK C/N of the global stream (dB)')
@click.option('--local-cn-db', type=float, help='Required QPSK C/N of the local stream (dB)')
@click.option('--global-rate', help='Look the global threshold up by code rate instead')
@click.option('--local-rate', help='Look the local threshold up by code rate instead')
@click.option('--reference', '-r', type=click.Path(dir_okay=False), default=str(QPSK_THRESHOLDS_CSV),
              help='QPSK threshold CSV used with --global-rate/--local-rate')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def solve_alpha(global_cn_db: Optional[float], local_cn_db: Optional[float], global_rate: Optional[str],
                local_rate: Optional[str], reference: str, as_json: bool):
    """Alpha at which the global and local streams need the same C/N."""
    try:
        if global_cn_db is None or local_cn_db is None:
            if not (global_rate and local_rate):
                raise click.UsageError("give --global-cn-db and --local-cn-db, or --global-rate and --local-rate")
            rows = load_threshold_rows(reference)
            lookup = {row.code_rate: row.qpsk_cn_db for row in rows}
            for rate in (global_rate, local_rate):
                if parse_code_rate(rate) not in lookup:
                    raise ReferenceDataError(f"no reference threshold for code rate {rate}", path=reference)
            global_cn_db = lookup[parse_code_rate(global_rate)] if global_cn_db is None else global_cn_db
            local_cn_db = lookup[parse_code_rate(local_rate)] if local_cn_db is None else local_cn_db
        logger.info("solve-alpha: global=%.3f dB local=%.3f dB", global_cn_db, local_cn_db)

        g_req, l_req = db_to_linear(global_cn_db), db_to_linear(local_cn_db)
        h = solve_equal_coverage(g_req, l_req)
        common_db = linear_to_db(required_cnr_global(g_req, h))
        numeric = solve_equal_coverage_numeric(g_req, l_req)
        standard = select_standard_alpha(g_req, l_req, STANDARD_ALPHAS)

        summary = {
            'alpha': h.alpha,
            'power_ratio': h.power_ratio,
            'common_cn_db': common_db,
            'alpha_numeric': numeric.alpha,
            'standard_alpha': standard.alpha,
        }
        if as_json:
            _echo_json(summary)
            return

        click.echo("✅ Equal-coverage solution")
        click.echo(tabulate([
            ['(1+alpha)^2', f"{h.power_ratio:.4f}"],
            ['alpha', f"{h.alpha:.4f}"],
            ['alpha (numeric check)', f"{numeric.alpha:.4f}"],
            ['common required C/N (dB)', f"{common_db:.2f}"],
            ['best standard alpha', f"{standard}"],
        ], tablefmt='github', disable_numparse=True))

    except click.UsageError:
        raise
    except Exception as e:
        _handle_error(e, "alpha solver input")


@cli.command()
@click.option('--bandwidth', default=5e6, show_default=True, help='Channel bandwidth (Hz)')
@click.option('--fft', default=2048, show_default=True, help='FFT size')
@click.option('--gi', default='1/8', show_default=True, help='Guard interval fraction')
@click.option('--code-rate', '-c', default='2/3', show_default=True, help='Inner code rate')
@click.option('--overhead', default=DEFAULT_OVERHEAD, show_default=True, help='Framing overhead factor')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def rate(bandwidth: float, fft: int, gi: str, code_rate: str, overhead: float, as_json: bool):
    """User data rate of one QPSK-equivalent stream."""
    try:
        fp = FrameParams(bandwidth_hz=bandwidth, fft_size=fft, guard_fraction=Fraction(gi))
        cr = parse_code_rate(code_rate)
        logger.info("rate: bandwidth=%g fft=%d gi=%s code_rate=%s overhead=%g", bandwidth, fft, gi, cr, overhead)
        raw = user_data_rate(fp, cr, overhead=1.0)
        adjusted = user_data_rate(fp, cr, overhead=overhead)

        if as_json:
            _echo_json({'code_rate': str(cr), 'raw_bps': raw, 'user_bps': adjusted,
                        'symbol_duration_s': fp.symbol_duration})
            return

        click.echo(f"📊 Data rate at code rate {cr}")
        click.echo(tabulate([
            ['Symbol duration (us)', f"{fp.symbol_duration * 1e6:.1f}"],
            ['Raw rate (Mbps)', f"{raw / 1e6:.3f}"],
            ['User rate (Mbps)', f"{adjusted / 1e6:.3f}"],
        ], tablefmt='github', disable_numparse=True))

    except Exception as e:
        _handle_error(e, "rate parameters")


@cli.command('config')
@click.option('--alpha', '-a', default='2', show_default=True, help='Hierarchical parameter (>= 1)')
@click.option('--global-rate', default='2/3', show_default=True, help='Code rate of the global stream')
@click.option('--local-rate', default='2/9', show_default=True, help='Code rate of the local stream')
@click.option('--reference', '-r', type=click.Path(dir_okay=False), default=str(QPSK_THRESHOLDS_CSV),
              help='QPSK threshold CSV (code_rate,qpsk_cn_db)')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def config_report(alpha: str, global_rate: str, local_rate: str, reference: str, as_json: bool):
    """Local-content configuration next to the QPSK baseline."""
    try:
        h = HierarchyParams.parse(alpha)
        logger.info("config: alpha=%s global_rate=%s local_rate=%s reference=%s",
                    h, global_rate, local_rate, reference)
        report = configuration_report(h, parse_code_rate(global_rate), parse_code_rate(local_rate),
                                      load_threshold_rows(reference))
        columns = [('Baseline', report.baseline), ('Global', report.global_stream), ('Local', report.local_stream)]

        if as_json:
            _echo_json({
                'alpha': h.alpha,
                'columns': {name.lower(): {'code_rate': str(col.code_rate), 'user_rate_bps': col.user_rate_bps,
                                           'required_cn_db': col.required_cn_db} for name, col in columns},
                'global_degradation_db': report.global_degradation_db,
                'local_excess_db': report.local_excess_db,
            })
            return

        click.echo(f"📊 Configuration at alpha = {h}")
        click.echo(tabulate([
            ['Alpha', 'inf'] + [f"{h}"] * 2,
            ['Code rate'] + [str(col.code_rate) for _, col in columns],
            ['User rate (Mbps)'] + [f"{col.user_rate_bps / 1e6:.3f}" for _, col in columns],
            ['Required C/N (dB)'] + [f"{col.required_cn_db:.2f}" for _, col in columns],
        ], headers=[''] + [name for name, _ in columns], tablefmt='github', disable_numparse=True))
        click.echo(f"Global degradation: {report.global_degradation_db:.2f} dB, "
                   f"local excess: {report.local_excess_db:.2f} dB")

    except Exception as e:
        _handle_error(e, "configuration")


@cli.command()
@click.option('--alpha', '-a', 'alphas', multiple=True, default=('1', '2', '4'), show_default=True,
              help='Hierarchical parameter; repeat for several curves')
@click.option('--start', default=0.0, show_default=True, help='First C/N point (dB)')
@click.option('--stop', default=30.0, show_default=True, help='Last C/N point (dB)')
@click.option('--step', default=1.0, show_default=True, help='C/N step (dB)')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the curves as CSV')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def effective(alphas, start: float, stop: float, step: float, output: Optional[str], as_json: bool):
    """Effective Es/N0 of both streams versus C/N."""
    try:
        hs = [HierarchyParams.parse(a) for a in alphas]
        logger.info("effective: alphas=%s sweep=%g..%g step %g output=%s",
                    ",".join(str(h) for h in hs), start, stop, step, output)
        records = effective_esn0_curve(_sweep(start, stop, step), hs)

        if output:
            write_records_csv(records, EFFECTIVE_HEADER, output)
        if as_json:
            _echo_json(records)
            return

        click.echo(tabulate([[r['alpha'], f"{r['cnr_db']:.2f}", _format_db(r['global_esn0_db']),
                              _format_db(r['local_esn0_db'])] for r in records],
                            headers=['Alpha', 'C/N (dB)', 'Global Es/N0 (dB)', 'Local Es/N0 (dB)'],
                            tablefmt='github', disable_numparse=True))
        if output:
            click.echo(f"📁 Curves written to: {output}")

    except Exception as e:
        _handle_error(e, "effective Es/N0 sweep")


@cli.command()
@click.argument('scenario', type=click.Path(dir_okay=False))
@click.option('--output', '-o', default='results.csv', show_default=True, help='Results CSV path')
@click.option('--seed', type=int, help='Override the scenario seed')
@click.option('--experiment', '-e', type=click.Choice(['ber', 'estimation', 'detection']), default='ber',
              show_default=True, help='Experiment to run')
@click.option('--sat-power-db', 'sat_powers', multiple=True, type=float,
              help='Satellite power level for the estimation experiment; repeat for a sweep')
@click.option('--report', type=click.Path(dir_okay=False), help='Also write a markdown summary')
@click.option('--with-detection', is_flag=True,
              help='Add a local content detection sweep to the markdown report (ber experiment)')
@click.option('--json', 'as_json', is_flag=True, help='Print a machine-readable summary')
def simulate(scenario: str, output: str, seed: Optional[int], experiment: str, sat_powers, report: Optional[str],
             with_detection: bool, as_json: bool):
    """Run a Monte Carlo experiment described by a scenario file."""
    try:
        sc = ConfigParser.load_config(scenario)
        if seed is not None:
            sc = replace(sc, seed=seed)
        errors = ConfigParser.validate_config(sc)
        if errors:
            raise ConfigurationError(errors)
        logger.info("simulate: experiment=%s scenario=%s", experiment,
                    json.dumps(ConfigParser.to_dict(sc), sort_keys=True))

        generator = ReportGenerator()
        output_path = Path(output)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        metadata_path = output_path.with_suffix(output_path.suffix + '.meta.json')

        if not as_json:
            click.echo(f"🔍 Running {experiment} experiment ({sc.mode}, alpha = {sc.alpha}, "
                       f"{len(sc.cnr_sweep_db)} C/N point(s))...")

        if experiment == 'ber':
            result = run_ber_experiment(sc)
            written = generator.generate_results_csv(result, str(output_path))
            summary = [{'cnr_db': p.cnr_db, 'hp_ber': p.hp_ber, 'lp_ber': p.lp_ber,
                        'detection_rate': p.detection_rate} for p in result.points]
            if report:
                detection = run_detection_experiment(sc) if with_detection else None
                if generator.generate_markdown_report(result, report, detection=detection):
                    if not as_json:
                        click.echo(f"📁 Report written to: {report}")
                else:
                    click.echo(f"⚠️  Could not write report: {report}", err=True)
        elif experiment == 'estimation':
            powers = list(sat_powers) or [sc.path_gains.sat_power_db]
            stats = run_estimation_experiment(sc, powers)
            written = generator.generate_estimation_csv(stats, str(output_path))
            summary = [{'sat_power_db': s.sat_power_db, 'cnr_db': s.cnr_db, 'mse_global': s.mse_global,
                        'mse_local': s.mse_local} for s in stats]
        else:
            points = run_detection_experiment(sc)
            written = generator.generate_detection_csv(points, str(output_path))
            summary = [{'cnr_db': p.cnr_db, 'detection_rate': p.detection_rate,
                        'false_alarm_rate': p.false_alarm_rate} for p in points]

        if not written:
            _fail(f"Could not write results to {output_path}", EXIT_ERROR)
        generator.generate_metadata(sc, str(metadata_path), experiment=experiment)

        if as_json:
            _echo_json({'results': str(output_path), 'metadata': str(metadata_path), 'points': summary})
            return

        click.echo(f"✅ Experiment completed: {len(summary)} row(s)")
        click.echo(tabulate([[f"{v:.3e}" if isinstance(v, float) and 0 < abs(v) < 1e-2 else
                              ('' if v is None else v) for v in row.values()] for row in summary],
                            headers=list(summary[0].keys()) if summary else [], tablefmt='github'))
        click.echo(f"📁 Results written to: {output_path}")
        click.echo(f"📁 Metadata written to: {metadata_path}")

    except Exception as e:
        _handle_error(e, "scenario")


if __name__ == '__main__':
    cli()

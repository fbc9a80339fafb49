#!/usr/bin/env python3
"""
Sphere Exponential - Command Line
---------------------------------
This module parses the command line and runs one of the commands

    exp       e^A by the requested backend(s)
    fourier   e^{iA}, with the unitarity defect of each result
    diagnose  the built-in identity checks, as a pass/fail table
    converge  error against the oracle over a sample or truncation ladder
    bench     wall time and error of each backend on a fixed matrix suite

Only data goes to stdout (or --output); status lines and errors go to stderr.
"""

import argparse
import json
import logging
import sys
import traceback
from dataclasses import dataclass
from typing import Optional

import pandas as pd

from expm_core import ExpmError, HermitianMatrix, load_matrix_json
from expm_diagnostics import run_diagnostics
from expm_settings import settings, thread_count
from expm_sphere import SamplerConfig
from expm_tables import (
    bench_suite,
    bench_table,
    deviation_table,
    diagnostics_table,
    entry_table,
    expand_backends,
    fit_log_slope,
    json_ready,
    mc_convergence_table,
    run_backend,
    series_convergence_table,
    table_records,
    unitarity_defect,
)

logger = logging.getLogger(__name__)

COMMANDS = ('exp', 'fourier', 'diagnose', 'converge', 'bench')

DEFAULT_BACKENDS = {
    'exp': 'series',
    'fourier': 'series',
    'diagnose': 'all',
    'converge': 'mc',
    'bench': 'all',
}

EXIT_CODES = {
    'bad_matrix_file': 2,
    'not_hermitian': 3,
    'truncation_cap': 4,
}
EXIT_DIAGNOSTICS_FAILED = 5


@dataclass(frozen=True)
class RunConfig:
    command: str
    backend: str
    input_path: Optional[str]
    samples: int
    target_abs_err: float
    seed: int
    streams: int
    output_format: str
    output_path: Optional[str] = None
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.backend in ('mc', 'all') and self.samples < 1:
            raise ValueError(f"--samples must be at least 1, got {self.samples}")
        if self.backend in ('series', 'all') and not self.target_abs_err > 0:
            raise ValueError(f"--target-abs-err must be positive, got {self.target_abs_err}")
        if self.streams < 1:
            raise ValueError(f"--streams must be at least 1, got {self.streams}")

    @property
    def sampler(self):
        return SamplerConfig(seed=self.seed, stream_count=self.streams)


def build_arg_parser():
    cli = settings['cli']
    parser = argparse.ArgumentParser(
        prog='expm',
        description="Matrix exponential of hermitian matrices from sphere integrals",
    )
    parser.add_argument('command', choices=COMMANDS, help="What to run")
    parser.add_argument('--input', dest='input_path', default=None,
                        help="Matrix JSON file ({dim, re, im}); optional for diagnose and bench")
    parser.add_argument('--backend', choices=('mc', 'series', 'oracle', 'all'), default=None,
                        help="Backend; defaults to series for exp/fourier, mc for converge, all for bench")
    parser.add_argument('--samples', type=int, default=cli['samples'], help="Monte Carlo sample count")
    parser.add_argument('--target-abs-err', type=float, default=cli['target_abs_err'],
                        help="Entrywise absolute target for the series backend")
    parser.add_argument('--seed', type=int, default=settings['sampler']['default_seed'], help="Sampler seed")
    parser.add_argument('--streams', type=int, default=settings['sampler']['default_streams'],
                        help="Number of independent sampler streams (results depend on this, not on THREADS)")
    parser.add_argument('--format', dest='output_format', choices=('json', 'csv'), default=cli['output_format'],
                        help="Output format")
    parser.add_argument('--output', dest='output_path', default=None, help="Output file (default stdout)")
    parser.add_argument('--verbose', action='store_true', help="Debug logging on stderr")
    return parser


def config_from_args(args):
    return RunConfig(
        command=args.command,
        backend=args.backend or DEFAULT_BACKENDS[args.command],
        input_path=args.input_path,
        samples=args.samples,
        target_abs_err=args.target_abs_err,
        seed=args.seed,
        streams=args.streams,
        output_format=args.output_format,
        output_path=args.output_path,
        verbose=args.verbose,
    )


def configure_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
        force=True,
    )


def load_input(cfg):
    """Read and validate the input matrix; a missing path is a bad matrix file"""
    if not cfg.input_path:
        raise ExpmError('bad_matrix_file', f"{cfg.command} needs --input")
    matrix = load_matrix_json(cfg.input_path)
    hermitian = HermitianMatrix.from_matrix(matrix)
    logger.info(f"Loaded {hermitian.dim}x{hermitian.dim} hermitian matrix from {cfg.input_path}")
    return hermitian


def emit(cfg, payload, table):
    """Write the JSON payload, or the table as CSV, to --output or stdout"""
    if cfg.output_format == 'csv':
        text = table.to_csv(index=False)
    else:
        text = json.dumps(json_ready(payload), indent=2) + '\n'

    if cfg.output_path:
        with open(cfg.output_path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"Wrote {cfg.command} output to {cfg.output_path}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _run_exp(cfg, mode):
    a = load_input(cfg)
    reports = [run_backend(backend, a, mode, cfg.samples, cfg.target_abs_err, cfg.sampler)
               for backend in expand_backends(cfg.backend)]
    deviations = deviation_table(reports)

    payload = {'command': cfg.command, 'dim': a.dim, 'reports': []}
    tables = []
    for report in reports:
        entry = report.to_dict()
        table = entry_table(report)
        if mode == 'fourier':
            entry['unitarity_defect'] = unitarity_defect(report.value)
            table['unitarity_defect'] = entry['unitarity_defect']
        # CSV carries the pairwise deviations as one column per other backend
        for _, row in deviations.iterrows():
            if row['backend_a'] == report.backend.value:
                table[f"deviation_vs_{row['backend_b']}"] = row['max_abs_deviation']
            elif row['backend_b'] == report.backend.value:
                table[f"deviation_vs_{row['backend_a']}"] = row['max_abs_deviation']
        payload['reports'].append(entry)
        tables.append(table)

    if len(reports) > 1:
        payload['deviations'] = table_records(deviations)

    emit(cfg, payload, pd.concat(tables, ignore_index=True))
    return 0


def cmd_exp(cfg):
    """e^A for every requested backend, plus pairwise deviations when more than one runs"""
    return _run_exp(cfg, 'exp')


def cmd_fourier(cfg):
    """e^{iA} for every requested backend, each with max |U†U - I|"""
    return _run_exp(cfg, 'fourier')


def cmd_diagnose(cfg):
    """
    Run the diagnostic bundle and emit the pass/fail table

    Returns:
        int: 0 when every check passes, 5 otherwise
    """
    results = run_diagnostics(cfg.samples, cfg.sampler)
    table = diagnostics_table(results)
    failed = table.loc[~table['passed'], 'check'].tolist()

    payload = {
        'command': 'diagnose',
        'samples': cfg.samples,
        'seed': cfg.seed,
        'passed': not failed,
        'checks': table_records(table),
    }
    emit(cfg, payload, table)

    if failed:
        logger.error(f"Diagnostics failed: {', '.join(failed)}")
        return EXIT_DIAGNOSTICS_FAILED
    return 0


def cmd_converge(cfg):
    """
    Convergence ladder against the oracle

    mc: samples 1000, 2000, ... up to --samples, with the fitted log-log slope
    series: kmax 2..40
    """
    a = load_input(cfg)
    backends = ('mc', 'series') if cfg.backend == 'all' else (cfg.backend,)
    if cfg.backend == 'oracle':
        raise ValueError("converge needs the mc or series backend")

    payload = {'command': 'converge', 'dim': a.dim}
    tables = []

    if 'mc' in backends:
        mc = mc_convergence_table(a, cfg.samples, cfg.sampler)
        payload['mc'] = table_records(mc)
        payload['mc_slope'] = fit_log_slope(mc, 'samples', 'max_error')
        tables.append(mc.assign(backend='mc'))

    if 'series' in backends:
        series = series_convergence_table(a)
        payload['series'] = table_records(series)
        tables.append(series.assign(backend='series'))

    emit(cfg, payload, pd.concat(tables, ignore_index=True))
    return 0


def cmd_bench(cfg):
    """Wall time and error against the oracle per backend per matrix"""
    if cfg.input_path:
        a = load_input(cfg)
        matrices = [(a.dim, None, a)]
    else:
        matrices = bench_suite()

    table = bench_table(matrices, expand_backends(cfg.backend), cfg.samples, cfg.target_abs_err, cfg.sampler)
    payload = {'command': 'bench', 'seed': cfg.seed, 'rows': table_records(table)}
    emit(cfg, payload, table)
    return 0


HANDLERS = {
    'exp': cmd_exp,
    'fourier': cmd_fourier,
    'diagnose': cmd_diagnose,
    'converge': cmd_converge,
    'bench': cmd_bench,
}


def main(argv=None):
    """
    Command-line entry point

    Exit codes: 0 success, 2 bad matrix file, 3 not hermitian, 4 truncation cap,
    5 failing diagnostics, 1 anything else.
    """
    args = build_arg_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        cfg = config_from_args(args)
        logger.info(f"Running {cfg.command} (backend={cfg.backend}, seed={cfg.seed}, "
                    f"streams={cfg.streams}, threads={thread_count()})")
        return HANDLERS[cfg.command](cfg)
    except ExpmError as e:
        logger.error(f"Error running {args.command}: {e}")
        logger.debug(traceback.format_exc())
        return EXIT_CODES.get(e.code, 1)
    except Exception as e:
        logger.error(f"Error running {args.command}: {e}")
        logger.error(traceback.format_exc())
        return 1

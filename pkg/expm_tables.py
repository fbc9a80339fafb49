#!/usr/bin/env python3
"""
Sphere Exponential - Result Tables
----------------------------------
This module runs the backends and assembles their results into pandas tables
for the command-line front end: per-entry value tables, pairwise backend
deviations, convergence ladders with their fitted log-log slope, and the
benchmark suite.
"""

import itertools
import logging
import math

import numpy as np
import pandas as pd
import statsmodels.api as sm

from expm_core import (
    Backend,
    expm_oracle,
    expm_oracle_imaginary,
    oracle_report,
    random_hermitian,
)
from expm_monte_carlo import expm_fourier_mode, expm_monte_carlo
from expm_series import build_moment_table, evaluate_series, expm_series, expm_series_fourier
from expm_settings import settings

logger = logging.getLogger(__name__)

BACKEND_CHOICES = {
    'mc': Backend.MONTE_CARLO,
    'series': Backend.SERIES,
    'oracle': Backend.ORACLE,
}


def expand_backends(choice):
    """'all' means every backend, in mc, series, oracle order"""
    if choice == 'all':
        return list(BACKEND_CHOICES.values())
    return [BACKEND_CHOICES[choice]]


def run_backend(backend, a, mode, samples, target_abs_err, sampler, threads=None):
    """
    Run one backend on a hermitian matrix

    Args:
        backend: Backend
        a: HermitianMatrix
        mode: 'exp' for e^A or 'fourier' for e^{iA}
        samples: Monte Carlo sample count
        target_abs_err: series accuracy target
        sampler: SamplerConfig
        threads: optional stream-level parallelism cap

    Returns:
        EstimateReport
    """
    if backend == Backend.MONTE_CARLO:
        estimate = expm_fourier_mode if mode == 'fourier' else expm_monte_carlo
        return estimate(a, samples, sampler, threads)
    if backend == Backend.SERIES:
        estimate = expm_series_fourier if mode == 'fourier' else expm_series
        return estimate(a, target_abs_err)
    return oracle_report(a, mode)


def oracle_value(a, mode='exp'):
    return expm_oracle_imaginary(a) if mode == 'fourier' else expm_oracle(a)


def unitarity_defect(value):
    """max |U†U - I| entry"""
    u = value.entries
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def entry_table(report):
    """One row per matrix entry with real/imaginary parts and, for Monte Carlo, the standard error"""
    value = report.value.entries
    rows = []
    for i, j in itertools.product(range(value.shape[0]), repeat=2):
        row = {
            'backend': report.backend.value,
            'mode': report.mode,
            'row': i,
            'col': j,
            're': float(value[i, j].real),
            'im': float(value[i, j].imag),
            'abs_error_estimate': report.abs_error_estimate,
            'samples_or_terms': report.samples_or_terms,
        }
        if report.entry_std_error is not None:
            row['std_error'] = float(report.entry_std_error[i, j])
        rows.append(row)
    return pd.DataFrame(rows)


def deviation_table(reports):
    """Pairwise max-entry deviation between backend results"""
    rows = []
    for first, second in itertools.combinations(reports, 2):
        rows.append({
            'backend_a': first.backend.value,
            'backend_b': second.backend.value,
            'max_abs_deviation': float(np.max(np.abs(first.value.entries - second.value.entries))),
        })
    return pd.DataFrame(rows, columns=['backend_a', 'backend_b', 'max_abs_deviation'])


def sample_ladder(max_samples, start=None):
    """Doubling ladder from start up to max_samples, always ending at max_samples"""
    if start is None:
        start = settings['cli']['converge_mc_start']
    ladder = []
    n = min(start, max_samples)
    while n < max_samples:
        ladder.append(n)
        n *= 2
    ladder.append(max_samples)
    return ladder


def mc_convergence_table(a, max_samples, sampler, threads=None, mode='exp'):
    """
    Monte Carlo error against the oracle over a doubling sample ladder

    Returns:
        DataFrame with columns samples, max_error, rms_error, predicted_std_error
    """
    exact = oracle_value(a, mode).entries
    rows = []
    for samples in sample_ladder(max_samples):
        report = run_backend(Backend.MONTE_CARLO, a, mode, samples, None, sampler, threads)
        deviation = np.abs(report.value.entries - exact)
        rows.append({
            'samples': samples,
            'max_error': float(np.max(deviation)),
            'rms_error': float(np.sqrt(np.mean(deviation ** 2))),
            'predicted_std_error': report.abs_error_estimate,
        })
        logger.debug(f"Convergence rung {samples}: max error {rows[-1]['max_error']:.3e}")
    return pd.DataFrame(rows)


def series_convergence_table(a, kmax_values=None, mode='exp'):
    """
    Series residual against the oracle for a list of truncation orders

    Returns:
        DataFrame with columns kmax, residual
    """
    if kmax_values is None:
        kmax_values = settings['cli']['converge_series_kmax']
    target = a.scaled(1j) if mode == 'fourier' else a
    exact = oracle_value(a, mode).entries
    table = build_moment_table(target, max(kmax_values))

    rows = []
    for kmax in kmax_values:
        value = evaluate_series(target, kmax, table=table)
        rows.append({'kmax': kmax, 'residual': float(np.max(np.abs(value.entries - exact)))})
    return pd.DataFrame(rows)


def fit_log_slope(df, x, y):
    """
    Least-squares slope of log(y) against log(x)

    Rows with a nonpositive x or y are dropped; fewer than three usable rows
    give None.

    Returns:
        dict with slope, slope_std_error and intercept, or None
    """
    usable = df[(df[x] > 0) & (df[y] > 0)]
    if len(usable) < 3:
        logger.info(f"Not enough positive points to fit a slope of {y} against {x}: {len(usable)}")
        return None

    design = sm.add_constant(np.log(usable[x].to_numpy(dtype=float)))
    fit = sm.OLS(np.log(usable[y].to_numpy(dtype=float)), design).fit()
    return {
        'slope': float(fit.params[1]),
        'slope_std_error': float(fit.bse[1]),
        'intercept': float(fit.params[0]),
    }


def bench_suite(dims=None, seed=None, spectral_norm=None):
    """
    Deterministic random hermitian test matrices, one per dimension

    Returns:
        list of (dim, seed, HermitianMatrix)
    """
    cfg = settings['cli']
    dims = cfg['bench_dims'] if dims is None else dims
    seed = cfg['bench_seed'] if seed is None else seed
    spectral_norm = cfg['bench_spectral_norm'] if spectral_norm is None else spectral_norm
    return [(r, seed + r, random_hermitian(r, seed + r, spectral_norm)) for r in dims]


def bench_table(matrices, backends, samples, target_abs_err, sampler, threads=None, mode='exp'):
    """
    Wall time and error against the oracle for each backend on each matrix

    Args:
        matrices: list of (dim, seed, HermitianMatrix); seed may be None for user input

    Returns:
        DataFrame, one row per (matrix, backend)
    """
    rows = []
    for dim, seed, a in matrices:
        exact = oracle_value(a, mode).entries
        for backend in backends:
            report = run_backend(backend, a, mode, samples, target_abs_err, sampler, threads)
            rows.append({
                'dim': dim,
                'matrix_seed': seed,
                'backend': backend.value,
                'wall_time': report.wall_time,
                'max_error': float(np.max(np.abs(report.value.entries - exact))),
                'abs_error_estimate': report.abs_error_estimate,
                'samples_or_terms': report.samples_or_terms,
            })
        logger.info(f"Benchmarked r={dim} on {len(backends)} backends")
    return pd.DataFrame(rows)


def diagnostics_table(results):
    df = pd.DataFrame([vars(r) for r in results], columns=['check', 'passed', 'value', 'threshold', 'detail'])
    df['value'] = df['value'].astype(float)
    return df


def json_ready(value):
    """Replace non-finite floats by None so output stays strict JSON"""
    if isinstance(value, dict):
        return {k: json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def table_records(df):
    return json_ready(df.to_dict(orient='records'))
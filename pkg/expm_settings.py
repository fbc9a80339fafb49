#!/usr/bin/env python3
"""
Sphere Exponential - Shared Settings
------------------------------------
This module contains the shared defaults used across the library and the
command-line front end.
"""

import logging
import os

logger = logging.getLogger(__name__)

# Defaults dictionary for consistent behaviour across modules
settings = {
    'core': {
        'tol_herm': 1e-12,
        'jacobi_tol': 1e-14,
        'jacobi_max_sweeps': 100,
        'resolvent_det_tol': 1e-12,
        'oracle_taylor_order': 16,
        'oracle_extra_squarings': 4,
    },
    'sampler': {
        # Fixed chunk length; reduction order depends on it, never on threads
        'chunk_size': 16384,
        'default_seed': 0,
        'default_streams': 4,
    },
    'series': {
        'kmax_cap': 500,
        'posteriori_ratio': 0.01,
        'factorial_float_limit': 1e300,
    },
    'diagnostics': {
        'moment_cases': [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)],
        'moment_sigma': 3.0,
        'negative_control_sigma': 10.0,
        'scalar_values': [-2.0, -0.5, 0.0, 0.7, 3.0],
        'scalar_tol': 1e-13,
        'identity_rmax': 8,
        'identity_kmax': 20,
        'resolvent_norm': 0.7,
        'resolvent_dim': 4,
        'resolvent_kmax': 60,
        'resolvent_tol': 1e-8,
        'integrand_samples': 4096,
    },
    'cli': {
        'samples': 100000,
        'target_abs_err': 1e-10,
        'output_format': 'json',
        'converge_mc_start': 1000,
        'converge_series_kmax': list(range(2, 41)),
        'bench_dims': [2, 4, 8, 16],
        'bench_spectral_norm': 1.0,
        'bench_seed': 2024,
    },
}


def thread_count():
    """
    Read the stream-level parallelism cap from the THREADS environment variable

    Returns:
        int: positive thread count, 1 when unset or invalid
    """
    raw = os.environ.get('THREADS')
    if raw is None or raw.strip() == '':
        return 1

    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring THREADS={raw!r}: not an integer, using 1")
        return 1

    if value < 1:
        logger.warning(f"Ignoring THREADS={value}: must be positive, using 1")
        return 1

    return value

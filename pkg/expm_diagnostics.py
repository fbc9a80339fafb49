#!/usr/bin/env python3
"""
Sphere Exponential - Diagnostics
--------------------------------
This module bundles the identity checks behind the `diagnose` command: the exact
weight identity, the Gaussian/sphere moment ratios, the naive-formula negative
controls, the integrand-form agreement, the one-dimensional exactness of both
backends and the resolvent series residual.
"""

import logging
import math
import traceback
from dataclasses import dataclass

import numpy as np

from expm_core import HermitianMatrix, operator_norm_upper, random_hermitian, resolvent
from expm_monte_carlo import (
    expm_monte_carlo,
    integrand_forms_agree,
    resolvent_gaussian_estimate,
    wrong_formula_demo,
)
from expm_series import (
    alternate_convention_deviation,
    weight_identity_sweep,
    expm_series,
    resolvent_series_check,
)
from expm_settings import settings
from expm_sphere import gaussian_vs_sphere_check

logger = logging.getLogger(__name__)


@dataclass
class DiagnosticResult:
    check: str
    passed: bool
    value: float
    threshold: float
    detail: str


def check_weight_identity():
    cfg = settings['diagnostics']
    failures = weight_identity_sweep(cfg['identity_rmax'], cfg['identity_kmax'])
    return DiagnosticResult(
        check='weight_identity_d_equals_2r',
        passed=not failures,
        value=float(len(failures)),
        threshold=0.0,
        detail=f"exact Fraction sweep r<={cfg['identity_rmax']}, k<={cfg['identity_kmax']}; failures: {failures[:5]}",
    )


def check_alternate_convention():
    cfg = settings['diagnostics']
    deviation = alternate_convention_deviation(cfg['identity_rmax'], cfg['identity_kmax'])
    return DiagnosticResult(
        check='weight_identity_r_equals_2d_rejected',
        passed=deviation > 1e-3,
        value=deviation,
        threshold=1e-3,
        detail="reading the identity with d = r/2 must not hold",
    )


def check_moment_ratios(samples, sampler, threads=None):
    cfg = settings['diagnostics']
    results = []
    for r, n_half in cfg['moment_cases']:
        report = gaussian_vs_sphere_check(r, n_half, 1, sampler, samples=samples,
                                          sigma=cfg['moment_sigma'], threads=threads)
        results.append(DiagnosticResult(
            check=f'moment_ratio_r{r}_N{n_half}',
            passed=report.passed,
            value=report.max_sigma,
            threshold=cfg['moment_sigma'],
            detail=(f"expected {report.expected_ratio:g}, measured {report.measured_ratios[0]:.6g} "
                    f"for exponents {report.exponents[0]}"),
        ))
    return results


def check_negative_controls(samples, sampler, threads=None):
    results = []

    scalar = wrong_formula_demo(HermitianMatrix([[1.0]]), 1, sampler, threads)
    results.append(DiagnosticResult(
        check='naive_formula_scalar_fails',
        passed=scalar.fails_as_expected and abs(scalar.wrong_deviation - math.e) < 1e-12,
        value=scalar.wrong_deviation,
        threshold=math.e,
        detail="A=[1]: Det(1-A)=0, so the naive formula gives 0 instead of e (fails as expected)",
    ))

    half = HermitianMatrix(0.5 * np.eye(2))
    report = wrong_formula_demo(half, samples, sampler, threads)
    results.append(DiagnosticResult(
        check='naive_formula_half_identity_fails',
        passed=report.fails_as_expected and report.correct_within_4se >= 0.95,
        value=report.wrong_sigma,
        threshold=settings['diagnostics']['negative_control_sigma'],
        detail=(f"naive deviation {report.wrong_deviation:.3e}; correct formula within 4 SE on "
                f"{100 * report.correct_within_4se:.0f}% of entries (fails as expected)"),
    ))
    return results


def check_integrand_forms(sampler):
    a = random_hermitian(4, sampler.seed, 2.0)
    worst = integrand_forms_agree(a, settings['diagnostics']['integrand_samples'], sampler)
    tol = 1e-15 * max(1.0, a.frobenius_norm()) * a.dim ** 2
    return DiagnosticResult(
        check='trace_form_equals_vector_form',
        passed=worst <= tol,
        value=worst,
        threshold=tol,
        detail="Tr(AW) against <An, conj n> on identical draws",
    )


def check_scalar_exactness(sampler, threads=None):
    cfg = settings['diagnostics']
    worst_mc, worst_series = 0.0, 0.0
    for a in cfg['scalar_values']:
        h = HermitianMatrix([[a]])
        exact = math.exp(a)
        mc = expm_monte_carlo(h, 1, sampler, threads).value.entries[0, 0]
        series = expm_series(h, cfg['scalar_tol'] / 100.0).value.entries[0, 0]
        worst_mc = max(worst_mc, abs(mc - exact))
        worst_series = max(worst_series, abs(series - exact))

    worst = max(worst_mc, worst_series)
    return DiagnosticResult(
        check='scalar_exactness',
        passed=worst <= cfg['scalar_tol'],
        value=worst,
        threshold=cfg['scalar_tol'],
        detail=f"r=1, one sample: monte carlo miss {worst_mc:.2e}, series miss {worst_series:.2e}",
    )


def check_resolvent_series(sampler):
    cfg = settings['diagnostics']
    a = random_hermitian(cfg['resolvent_dim'], sampler.seed, cfg['resolvent_norm'])
    residual = resolvent_series_check(a, cfg['resolvent_kmax'])
    return DiagnosticResult(
        check='resolvent_series_residual',
        passed=residual <= cfg['resolvent_tol'],
        value=residual,
        threshold=cfg['resolvent_tol'],
        detail=f"||A||={cfg['resolvent_norm']}, r={cfg['resolvent_dim']}, total degree <= {cfg['resolvent_kmax']}",
    )


def check_resolvent_gaussian(samples, sampler, threads=None):
    a = random_hermitian(3, sampler.seed + 1, 0.15)
    report = resolvent_gaussian_estimate(a, samples, sampler, threads)
    exact = resolvent(a).entries
    z = np.abs(report.value.entries - exact) / np.maximum(report.entry_std_error, 1e-300)
    fraction = float(np.mean(z <= 4.0))
    return DiagnosticResult(
        check='resolvent_gaussian_integral',
        passed=fraction >= 0.95,
        value=float(np.max(z)),
        threshold=4.0,
        detail=(f"Det(1-A) E[e^<Ax,conj x> x x†] vs (1-A)^-1, ||A||={operator_norm_upper(a):.2f}, "
                f"{100 * fraction:.0f}% of entries within 4 SE"),
    )


def run_diagnostics(samples, sampler, threads=None):
    """
    Run every diagnostic and collect pass/fail rows

    A check that raises is recorded as a failed row carrying the error message;
    the remaining checks still run.

    Args:
        samples: Monte Carlo sample count for the statistical checks
        sampler: SamplerConfig
        threads: optional stream-level parallelism cap

    Returns:
        list of DiagnosticResult
    """
    checks = [
        ('weight_identity_d_equals_2r', lambda: [check_weight_identity()]),
        ('weight_identity_r_equals_2d_rejected', lambda: [check_alternate_convention()]),
        ('moment_ratios', lambda: check_moment_ratios(samples, sampler, threads)),
        ('negative_controls', lambda: check_negative_controls(samples, sampler, threads)),
        ('trace_form_equals_vector_form', lambda: [check_integrand_forms(sampler)]),
        ('scalar_exactness', lambda: [check_scalar_exactness(sampler, threads)]),
        ('resolvent_series_residual', lambda: [check_resolvent_series(sampler)]),
        ('resolvent_gaussian_integral', lambda: [check_resolvent_gaussian(samples, sampler, threads)]),
    ]

    results = []
    for name, run in checks:
        try:
            results.extend(run())
        except Exception as e:
            logger.error(f"Error running diagnostic {name}: {e}")
            logger.debug(traceback.format_exc())
            results.append(DiagnosticResult(check=name, passed=False, value=math.nan,
                                            threshold=math.nan, detail=f"error: {e}"))

    failed = [r.check for r in results if not r.passed]
    logger.info(f"Diagnostics: {len(results) - len(failed)} of {len(results)} checks passed")
    return results

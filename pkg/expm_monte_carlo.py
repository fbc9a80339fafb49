#!/usr/bin/env python3
"""
Sphere Exponential - Monte Carlo Estimator
------------------------------------------
This module evaluates the sphere-integral formula for e^A by Monte Carlo:

    (e^A)_ab = 1/Gamma(r) sum_j P_j(A) d^{r-j}/ds^{r-j} [ E_n e^{s<An, conj n>} n_a conj(n_b) s^r ] at s = 1

The s-derivative is applied in closed form per sample, so each draw contributes
c(lambda) * w with lambda = <An, conj n> and w = n n†.
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from expm_charpoly import char_poly_pieces
from expm_core import (
    Backend,
    ComplexMatrix,
    EstimateReport,
    ExpmError,
    expm_oracle,
    operator_norm_upper,
)
from expm_settings import settings
from expm_sphere import run_streams, sample_complex_gaussians, sample_unit_vectors, stream_sizes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DerivativeWeights:
    """c_i = C(r-j, i) * r!/(r-i)!, i = 0..r-j, so that
    d^{r-j}/ds^{r-j} [e^{s lam} s^r] at s=1 equals e^lam * sum_i c_i lam^{r-j-i}"""

    r: int
    j: int
    coefficients: tuple

    def polynomial(self, lam):
        acc = np.zeros_like(np.asarray(lam, dtype=np.complex128)) + self.coefficients[0]
        for c in self.coefficients[1:]:
            acc = acc * lam + c
        return acc

    def evaluate(self, lam):
        return np.exp(lam) * self.polynomial(lam)


def derivative_weights(r, j):
    if not 0 <= j <= r:
        raise ExpmError('index_range', f"j={j} outside [0, {r}]")
    order = r - j
    return DerivativeWeights(
        r=r,
        j=j,
        coefficients=tuple(math.comb(order, i) * math.perm(r, i) for i in range(order + 1)),
    )


def s_derivative_closed_form(r, j, lam):
    """
    d^{r-j}/ds^{r-j} [e^{s lam} s^r] at s = 1 (Leibniz rule)

    Args:
        r: dimension
        j: index 0..r
        lam: complex scalar or array

    Returns:
        complex (or array of complex)
    """
    value = derivative_weights(r, j).evaluate(lam)
    return complex(value) if np.ndim(value) == 0 else value


def s_derivative_at(r, order, lam, s):
    """d^order/ds^order [e^{s lam} s^r] at an arbitrary s"""
    total = 0j
    for i in range(min(order, r) + 1):
        total += math.comb(order, i) * math.perm(r, i) * s ** (r - i) * lam ** (order - i)
    return complex(np.exp(s * lam) * total)


def _integrand_polynomial(pieces, r):
    # Coefficients (highest degree first) of (1/Gamma(r)) sum_j P_j poly_j(lam)
    coeffs = np.zeros(r + 1, dtype=np.complex128)
    for j in range(r + 1):
        weights = derivative_weights(r, j).coefficients
        # weights[i] multiplies lam^{r-j-i}, stored at position j+i
        for i, c in enumerate(weights):
            coeffs[j + i] += pieces.p[j] * c
    return coeffs / math.factorial(r - 1)


def _quadratic_form(n, arr):
    return np.real(np.einsum('si,ij,sj->s', n.conj(), arr, n))


def _mean_and_error(first, second, samples):
    mean = first / samples
    mean_square = second / samples
    var = mean_square - np.abs(mean) ** 2
    # a constant integrand leaves only cancellation noise of a few ulps
    var = np.where(var <= 64 * np.finfo(float).eps * mean_square, 0.0, var)
    if samples > 1:
        var = var * samples / (samples - 1)
    return mean, np.sqrt(var / samples)


def _sphere_estimate(h, factor, samples, cfg, threads=None, with_wrong=False):
    # lambda = factor * <An, conj n>; factor is 1 for e^A and 1j for e^{iA}
    arr = h.entries
    r = h.dim
    target = ComplexMatrix(arr * factor)
    pieces = char_poly_pieces(target)
    poly = _integrand_polynomial(pieces, r)
    det = pieces.determinant()

    def worker(stream, start, count):
        n = sample_unit_vectors(cfg, stream, start, count, r)
        lam = factor * _quadratic_form(n, arr)
        growth = np.exp(lam)
        c = growth * np.polyval(poly, lam)
        mod2 = n.real ** 2 + n.imag ** 2
        parts = ((n * c[:, None]).T @ n.conj(), (mod2 * (np.abs(c) ** 2)[:, None]).T @ mod2)
        if with_wrong:
            g = det * growth
            parts += ((n * g[:, None]).T @ n.conj(), (mod2 * (np.abs(g) ** 2)[:, None]).T @ mod2)
        return parts

    return run_streams(cfg, samples, worker, threads)


def _report(h, factor, samples, cfg, threads, mode):
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")

    start = time.perf_counter()
    first, second = _sphere_estimate(h, factor, samples, cfg, threads)
    mean, errors = _mean_and_error(first, second, samples)
    abs_error = float(np.max(errors))

    if samples == 1 and h.dim > 1:
        abs_error = float(np.max(np.abs(mean)))
        logger.warning("One sample gives no variance estimate; reporting the value scale as the error")

    elapsed = time.perf_counter() - start
    logger.info(f"Monte Carlo {mode} estimate for r={h.dim}: {samples} samples, "
                f"standard error {abs_error:.3e}, {elapsed:.2f}s")

    return EstimateReport(
        value=ComplexMatrix(mean),
        abs_error_estimate=abs_error,
        backend=Backend.MONTE_CARLO,
        samples_or_terms=samples,
        seed=cfg.seed,
        wall_time=elapsed,
        mode=mode,
        entry_std_error=errors,
    )


def expm_monte_carlo(a, samples, cfg, threads=None):
    """
    Monte Carlo estimate of e^A for hermitian A

    Args:
        a: HermitianMatrix
        samples: number of sphere draws (>= 1)
        cfg: SamplerConfig
        threads: optional cap on stream-level parallelism

    Returns:
        EstimateReport with per-entry standard errors
    """
    return _report(a, 1.0, samples, cfg, threads, 'exp')


def expm_fourier_mode(a, samples, cfg, threads=None):
    """Monte Carlo estimate of e^{iA} (the same machinery run on iA)"""
    return _report(a, 1j, samples, cfg, threads, 'fourier')


def _sigmas(deviation, errors, scale):
    floor = 1e-12 * (1.0 + scale)
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.where(errors > 0, deviation / np.where(errors > 0, errors, 1.0),
                     np.where(deviation > floor, np.inf, 0.0))
    return z


@dataclass
class WrongFormulaReport:
    wrong_value: ComplexMatrix
    correct_value: ComplexMatrix
    oracle_value: ComplexMatrix
    wrong_deviation: float
    wrong_std_error: float
    wrong_sigma: float
    correct_deviation: float
    correct_std_error: float
    correct_within_4se: float
    fails_as_expected: bool


def wrong_formula_demo(a, samples, cfg, threads=None):
    """
    Evaluate Det(1-A) * E_n[e^{<An, conj n>} n n†] next to the correct estimator

    Both estimates use the same draws. The naive formula should miss e^A by many
    standard errors whenever A is nonzero (for r > 1 it also misses at A = 0,
    where it gives I/r).

    Args:
        a: HermitianMatrix
        samples: number of draws
        cfg: SamplerConfig

    Returns:
        WrongFormulaReport
    """
    if a.max_abs() == 0:
        logger.warning("Negative control on the zero matrix: the naive formula is only exact there for r=1")

    first, second, wrong_first, wrong_second = _sphere_estimate(a, 1.0, samples, cfg, threads, with_wrong=True)
    correct, correct_err = _mean_and_error(first, second, samples)
    wrong, wrong_err = _mean_and_error(wrong_first, wrong_second, samples)
    oracle = expm_oracle(a).entries
    scale = float(np.max(np.abs(oracle)))

    wrong_dev = np.abs(wrong - oracle)
    correct_dev = np.abs(correct - oracle)
    wrong_z = _sigmas(wrong_dev, wrong_err, scale)
    correct_z = _sigmas(correct_dev, correct_err, scale)
    worst = np.unravel_index(np.argmax(wrong_dev), wrong_dev.shape)

    threshold = settings['diagnostics']['negative_control_sigma']
    report = WrongFormulaReport(
        wrong_value=ComplexMatrix(wrong),
        correct_value=ComplexMatrix(correct),
        oracle_value=ComplexMatrix(oracle),
        wrong_deviation=float(np.max(wrong_dev)),
        wrong_std_error=float(wrong_err[worst]),
        wrong_sigma=float(np.max(wrong_z)),
        correct_deviation=float(np.max(correct_dev)),
        correct_std_error=float(np.max(correct_err)),
        correct_within_4se=float(np.mean(correct_z <= 4.0)),
        fails_as_expected=bool(np.max(wrong_z) > threshold),
    )
    logger.info(f"Naive formula deviation {report.wrong_deviation:.3e} "
                f"({report.wrong_sigma:.1f} standard errors); correct formula deviation "
                f"{report.correct_deviation:.3e}")
    return report


def integrand_forms_agree(a, samples, cfg):
    """
    Largest pointwise difference between Tr(AW) and <An, conj n> over the draws

    Args:
        a: ComplexMatrix
        samples: number of draws to compare
        cfg: SamplerConfig

    Returns:
        float: max |Tr(AW) - <An, conj n>|
    """
    arr = a.entries
    worst = 0.0
    chunk = settings['sampler']['chunk_size']
    for stream, size in enumerate(stream_sizes(samples, cfg.stream_count)):
        for start in range(0, size, chunk):
            n = sample_unit_vectors(cfg, stream, start, min(chunk, size - start), a.dim)
            w = n[:, :, None] * n.conj()[:, None, :]
            trace_form = np.einsum('ij,sji->s', arr, w)
            vector_form = np.einsum('si,ij,sj->s', n.conj(), arr, n)
            worst = max(worst, float(np.max(np.abs(trace_form - vector_form))))
    return worst


def resolvent_gaussian_estimate(a, samples, cfg, threads=None):
    """
    Monte Carlo of Det(1-A) E_x[e^{<Ax, conj x>} x conj(x)^T] = (1 - A)^{-1}

    x is a standard complex Gaussian vector; the estimator has finite variance
    only for spectral norm below 1/2.

    Args:
        a: HermitianMatrix with spectral norm < 1/2
        samples: number of Gaussian draws
        cfg: SamplerConfig

    Returns:
        EstimateReport (mode 'resolvent')
    """
    norm = operator_norm_upper(a)
    if norm >= 0.5:
        raise ExpmError('resolvent_series_divergent',
                        f"spectral norm {norm:.3f} >= 1/2: Gaussian estimator has infinite variance")

    start_time = time.perf_counter()
    arr = a.entries
    det = char_poly_pieces(a).determinant()

    def worker(stream, start, count):
        x = sample_complex_gaussians(cfg, stream, start, count, a.dim)
        g = det * np.exp(_quadratic_form(x, arr))
        mod2 = x.real ** 2 + x.imag ** 2
        return ((x * g[:, None]).T @ x.conj(), (mod2 * (np.abs(g) ** 2)[:, None]).T @ mod2)

    first, second = run_streams(cfg, samples, worker, threads)
    mean, errors = _mean_and_error(first, second, samples)
    return EstimateReport(
        value=ComplexMatrix(mean),
        abs_error_estimate=float(np.max(errors)),
        backend=Backend.MONTE_CARLO,
        samples_or_terms=samples,
        seed=cfg.seed,
        wall_time=time.perf_counter() - start_time,
        mode='resolvent',
        entry_std_error=errors,
    )

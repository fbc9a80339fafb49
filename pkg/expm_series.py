#!/usr/bin/env python3
"""
Sphere Exponential - Exact Series Evaluator
-------------------------------------------
This module evaluates the expanded formula

    e^A = sum_j P_j(A) sum_k G[k] / (k! (k+j)!)

deterministically, with the complex Gaussian moments G[k] obtained in closed
form from the trace recursion for the complete homogeneous polynomials h[k],
and with a truncation order chosen from an a-priori tail majorant.
"""

import logging
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from expm_charpoly import char_poly_pieces, power_sums
from expm_core import (
    Backend,
    ComplexMatrix,
    EstimateReport,
    ExpmError,
    operator_norm_upper,
    resolvent,
)
from expm_settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MomentTable:
    """
    h[k]: coefficient of t^k in 1/Det(1 - tA)
    reduced[k]: G[k]/k! = sum_{m=0..k} A^m h[k-m]
    """

    kmax: int
    h: np.ndarray
    reduced: tuple

    def gaussian_moment(self, k):
        """G[k] = k! * reduced[k]; overflow raises ExpmError('moment_overflow')"""
        with np.errstate(over='ignore', invalid='ignore'):
            value = self.reduced[k] * float(math.factorial(k)) if k <= 170 else None
        if value is None or not np.all(np.isfinite(value)):
            raise ExpmError('moment_overflow', f"G[{k}] is not representable in floating point")
        return ComplexMatrix(value)

    @property
    def G(self):
        return [self.gaussian_moment(k) for k in range(self.kmax + 1)]


@dataclass(frozen=True)
class TruncationPlan:
    kmax: int
    tail_bound: float


def build_moment_table(a, kmax):
    """
    Gaussian moment table up to order kmax

    h[k] = (1/k) sum_{i=1..k} Tr(A^i) h[k-i], and reduced[k] = h[k] I + A reduced[k-1].

    Args:
        a: ComplexMatrix
        kmax: highest order (>= 0)

    Returns:
        MomentTable
    """
    if kmax < 0:
        raise ValueError(f"kmax must be nonnegative, got {kmax}")

    r = a.dim
    arr = a.entries
    traces = power_sums(a, kmax) if kmax >= 1 else np.zeros(0, dtype=np.complex128)

    h = np.zeros(kmax + 1, dtype=np.complex128)
    h[0] = 1.0
    for k in range(1, kmax + 1):
        h[k] = np.dot(traces[:k], h[k - 1::-1]) / k

    ident = np.eye(r, dtype=np.complex128)
    reduced = [ident]
    for k in range(1, kmax + 1):
        reduced.append(h[k] * ident + arr @ reduced[-1])

    if not np.all(np.isfinite(h)) or not all(np.all(np.isfinite(m)) for m in reduced):
        raise ExpmError('moment_overflow', f"moment table overflowed before order {kmax}")

    h.setflags(write=False)
    return MomentTable(kmax=kmax, h=h, reduced=tuple(reduced))


def _log_term_bound(norm, r, k):
    # log of norm^k * C(k + r, r) / k!
    if norm == 0.0:
        return 0.0 if k == 0 else -math.inf
    return k * math.log(norm) + math.lgamma(k + r + 1) - math.lgamma(r + 1) - 2.0 * math.lgamma(k + 1)


def _tail_after(norm, r, kmax, coefficient_mass):
    k = kmax + 1
    if norm == 0.0:
        return 0.0
    ratio = norm * (k + 1 + r) / ((k + 1) ** 2)
    if ratio >= 1.0:
        return math.inf
    return coefficient_mass * math.exp(_log_term_bound(norm, r, k)) / (1.0 - ratio)


def plan_truncation(a, target_abs_err, norm=None, pieces=None):
    """
    Smallest kmax whose discarded tail is provably below target_abs_err

    Entrywise |G[k]/k!| <= ||A||^k C(k+r, r) (hockey-stick sum of the bound
    |h[n]| <= C(n+r-1, r-1) ||A||^n), and 1/(k+j)! <= 1/k!, so term k is at most
    sum_j |P_j| ||A||^k C(k+r, r)/k!. Consecutive bounds have ratio
    ||A|| (k+1+r)/(k+1)^2, which decreases in k, giving a geometric majorant.

    Args:
        a: ComplexMatrix
        target_abs_err: entrywise absolute target (> 0)
        norm: optional spectral-norm bound to use instead of operator_norm_upper(a)
        pieces: optional precomputed CharPolyCoefficients

    Returns:
        TruncationPlan
    """
    if not target_abs_err > 0:
        raise ValueError(f"target_abs_err must be positive, got {target_abs_err}")

    if norm is None:
        norm = operator_norm_upper(a)
    if pieces is None:
        pieces = char_poly_pieces(a)

    cap = settings['series']['kmax_cap']
    mass = pieces.abs_sum()
    r = a.dim

    for kmax in range(cap + 1):
        tail = _tail_after(norm, r, kmax, mass)
        if tail <= target_abs_err:
            return TruncationPlan(kmax=kmax, tail_bound=tail)

    raise ExpmError('truncation_cap', f"target {target_abs_err:g} needs kmax beyond {cap} (||A|| = {norm:.3g})")


def _inverse_factorial(n):
    if math.lgamma(n + 1) < math.log(settings['series']['factorial_float_limit']):
        return 1.0 / math.factorial(n)
    return math.exp(-math.lgamma(n + 1))


def _series_terms(table, pieces, kmax):
    # term[k] = sum_j P_j reduced[k] / (k+j)!
    r = pieces.dim
    for k in range(kmax + 1):
        weight = sum(pieces.p[j] * _inverse_factorial(k + j) for j in range(r + 1))
        yield table.reduced[k] * weight


def evaluate_series(a, kmax, table=None, pieces=None):
    """
    Partial sum sum_j P_j sum_{k<=kmax} G[k]/(k!(k+j)!)

    Args:
        a: ComplexMatrix
        kmax: truncation order
        table: optional MomentTable with table.kmax >= kmax
        pieces: optional CharPolyCoefficients

    Returns:
        ComplexMatrix
    """
    if pieces is None:
        pieces = char_poly_pieces(a)
    if table is None or table.kmax < kmax:
        table = build_moment_table(a, kmax)

    total = np.zeros((a.dim, a.dim), dtype=np.complex128)
    for term in _series_terms(table, pieces, kmax):
        total += term
    return ComplexMatrix(total)


def _expm_series_matrix(a, target_abs_err, norm, mode):
    start = time.perf_counter()
    pieces = char_poly_pieces(a)
    plan = plan_truncation(a, target_abs_err, norm=norm, pieces=pieces)
    cap = settings['series']['kmax_cap']
    ratio = settings['series']['posteriori_ratio']

    kmax = plan.kmax
    table = build_moment_table(a, kmax)
    terms = list(_series_terms(table, pieces, kmax))

    # A-posteriori check: the last included term must be small against the target
    while kmax > 0 and np.max(np.abs(terms[-1])) >= ratio * target_abs_err:
        if kmax >= cap:
            raise ExpmError('truncation_cap', f"last term still {np.max(np.abs(terms[-1])):.3e} at kmax={cap}")
        kmax = min(cap, kmax + max(1, kmax // 4))
        table = build_moment_table(a, kmax)
        terms = list(_series_terms(table, pieces, kmax))

    total = np.zeros((a.dim, a.dim), dtype=np.complex128)
    for term in terms:
        total += term

    tail = plan.tail_bound if kmax == plan.kmax else _tail_after(norm, a.dim, kmax, pieces.abs_sum())
    elapsed = time.perf_counter() - start
    logger.info(f"Series {mode} evaluation for r={a.dim}: kmax={kmax}, tail bound {tail:.3e}, {elapsed:.3f}s")

    return EstimateReport(
        value=ComplexMatrix(total),
        abs_error_estimate=float(tail),
        backend=Backend.SERIES,
        samples_or_terms=kmax,
        wall_time=elapsed,
        mode=mode,
        tail_bound=float(tail),
    )


def expm_series(a, target_abs_err):
    """
    Deterministic e^A from the expanded sphere formula

    Args:
        a: HermitianMatrix
        target_abs_err: entrywise absolute accuracy target (> 0)

    Returns:
        EstimateReport (abs_error_estimate is the tail bound)

    Raises:
        ExpmError: 'truncation_cap' when the target needs kmax beyond the hard cap
    """
    if not target_abs_err > 0:
        raise ValueError(f"target_abs_err must be positive, got {target_abs_err}")
    return _expm_series_matrix(a, target_abs_err, operator_norm_upper(a), 'exp')


def expm_series_fourier(a, target_abs_err):
    """e^{iA} by the series backend; iA has the same spectral norm as A"""
    if not target_abs_err > 0:
        raise ValueError(f"target_abs_err must be positive, got {target_abs_err}")
    return _expm_series_matrix(a.scaled(1j), target_abs_err, operator_norm_upper(a), 'fourier')


def resolvent_series_check(a, kmax):
    """
    Residual of the truncated Gaussian resolvent series against (1 - A)^{-1}

    Terms are kept up to total degree j + k <= kmax, which makes the partial sum
    exactly 1 + A + ... + A^kmax.

    Args:
        a: HermitianMatrix with spectral norm < 1
        kmax: highest total degree

    Returns:
        float: max entrywise |partial sum - (1 - A)^{-1}|
    """
    norm = operator_norm_upper(a)
    if norm >= 1.0:
        raise ExpmError('resolvent_series_divergent', f"spectral norm {norm:.3f} >= 1")

    pieces = char_poly_pieces(a)
    table = build_moment_table(a, kmax)
    total = np.zeros((a.dim, a.dim), dtype=np.complex128)
    for j in range(a.dim + 1):
        for k in range(0, kmax - j + 1):
            total += pieces.p[j] * table.reduced[k]

    residual = float(np.max(np.abs(total - resolvent(a).entries)))
    logger.debug(f"Resolvent series residual at kmax={kmax}: {residual:.3e}")
    return residual


def weight_identity_sweep(rmax=8, kmax=20):
    """
    Exact check of the sphere/Gaussian weight identity with d = 2r

    (1/Gamma(r)) (1/k!) ((r+k)!/(k+j)!) Gamma(d/2)/Gamma((2(k+1)+d)/2) = 1/(k! (j+k)!)

    With d = 2r every Gamma argument is a positive integer, so both sides are
    compared as Fractions.

    Returns:
        list: (r, j, k) triples where the identity fails (empty on success)
    """
    failures = []
    for r in range(1, rmax + 1):
        d = 2 * r
        for j in range(r + 1):
            for k in range(kmax + 1):
                lhs = (Fraction(1, math.factorial(r - 1))
                       * Fraction(1, math.factorial(k))
                       * Fraction(math.factorial(r + k), math.factorial(k + j))
                       * Fraction(math.factorial(d // 2 - 1), math.factorial((2 * (k + 1) + d) // 2 - 1)))
                rhs = Fraction(1, math.factorial(k) * math.factorial(j + k))
                if lhs != rhs:
                    failures.append((r, j, k))
    return failures


def alternate_convention_deviation(rmax=8, kmax=20):
    """
    Largest relative miss of the same identity read with r = 2d (d = r/2)

    Returns:
        float: max |lhs/rhs - 1| over the sweep, in floating point
    """
    worst = 0.0
    for r in range(1, rmax + 1):
        d = r / 2.0
        for j in range(r + 1):
            for k in range(kmax + 1):
                log_lhs = (-math.lgamma(r) - math.lgamma(k + 1) + math.lgamma(r + k + 1) - math.lgamma(k + j + 1)
                           + math.lgamma(d / 2.0) - math.lgamma((2 * (k + 1) + d) / 2.0))
                log_rhs = -math.lgamma(k + 1) - math.lgamma(j + k + 1)
                worst = max(worst, abs(math.expm1(min(log_lhs - log_rhs, 700.0))))
    return worst

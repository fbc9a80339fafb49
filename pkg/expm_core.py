#!/usr/bin/env python3
"""
Sphere Exponential - Matrix Core
--------------------------------
This module holds the dense complex matrix types, the error type shared by the
whole package, the cyclic Jacobi eigensolver for hermitian matrices, the
reference (oracle) exponential, the resolvent and the matrix JSON format.
"""

import json
import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from expm_settings import settings

logger = logging.getLogger(__name__)


class ExpmError(Exception):
    """Error raised by the library; `code` is a stable machine-readable identifier"""

    def __init__(self, code, message=''):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """Immutable dense r x r complex matrix (row-major numpy storage)"""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ExpmError('dim_mismatch', f"expected a square r x r array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ExpmError('non_finite', "matrix entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, 'entries', arr)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def identity(cls, r):
        return cls(np.eye(r, dtype=np.complex128))

    @classmethod
    def zeros(cls, r):
        return cls(np.zeros((r, r), dtype=np.complex128))

    def conjugate_transpose(self):
        return ComplexMatrix(self.entries.conj().T)

    def frobenius_norm(self):
        return float(np.linalg.norm(self.entries))

    def max_abs(self):
        return float(np.max(np.abs(self.entries)))

    def scaled(self, factor):
        return ComplexMatrix(self.entries * factor)

    def is_hermitian(self, tol=None):
        """
        Check hermiticity relative to the largest entry magnitude

        Args:
            tol: relative tolerance, defaults to settings['core']['tol_herm']

        Returns:
            bool: True when max |a_ij - conj(a_ji)| <= tol * max |a_ij|
        """
        if tol is None:
            tol = settings['core']['tol_herm']
        asym = np.max(np.abs(self.entries - self.entries.conj().T))
        return bool(asym <= tol * self.max_abs())


class HermitianMatrix(ComplexMatrix):
    """ComplexMatrix checked for hermiticity and stored exactly symmetrized"""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_hermitian():
            raise ExpmError('not_hermitian', "matrix is not hermitian within tolerance")
        arr = 0.5 * (self.entries + self.entries.conj().T)
        arr.setflags(write=False)
        object.__setattr__(self, 'entries', arr)

    @classmethod
    def from_matrix(cls, a):
        return a if isinstance(a, HermitianMatrix) else cls(a.entries)

    def scaled(self, factor):
        if np.iscomplexobj(factor) and np.imag(factor) != 0:
            return ComplexMatrix(self.entries * factor)
        return HermitianMatrix(self.entries * float(np.real(factor)))


class Backend(str, Enum):
    MONTE_CARLO = 'monte_carlo'
    SERIES = 'series'
    ORACLE = 'oracle'


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Result of one backend run, ready for CLI output"""

    value: ComplexMatrix
    abs_error_estimate: float
    backend: Backend
    samples_or_terms: int
    seed: Optional[int] = None
    wall_time: float = 0.0
    mode: str = 'exp'
    entry_std_error: Optional[np.ndarray] = None
    tail_bound: Optional[float] = None

    def __post_init__(self):
        if not self.abs_error_estimate >= 0:
            raise ValueError(f"abs_error_estimate must be nonnegative, got {self.abs_error_estimate}")
        if self.samples_or_terms < 0:
            raise ValueError(f"samples_or_terms must be nonnegative, got {self.samples_or_terms}")

    def to_dict(self):
        data = {
            'backend': self.backend.value,
            'mode': self.mode,
            'value': matrix_to_dict(self.value),
            'abs_error_estimate': float(self.abs_error_estimate),
            'samples_or_terms': int(self.samples_or_terms),
            'seed': self.seed,
            'wall_time': float(self.wall_time),
        }
        if self.tail_bound is not None:
            data['tail_bound'] = float(self.tail_bound)
        if self.entry_std_error is not None:
            data['entry_std_error'] = np.asarray(self.entry_std_error, dtype=float).tolist()
        return data


def matmul(a, b):
    """Matrix product of two equally sized matrices"""
    if a.dim != b.dim:
        raise ExpmError('dim_mismatch', f"cannot multiply {a.dim}x{a.dim} by {b.dim}x{b.dim}")
    return ComplexMatrix(a.entries @ b.entries)


def hermitian_eig(a):
    """
    Cyclic Jacobi eigendecomposition of a hermitian matrix

    Each rotation first removes the phase of the pivot a_pq, then applies the
    real symmetric Jacobi rotation that zeroes it.

    Args:
        a: HermitianMatrix (or a ComplexMatrix that passes the hermiticity check)

    Returns:
        tuple: (eigenvalues ascending as float array, unitary eigenvector matrix)
    """
    m = np.array(HermitianMatrix.from_matrix(a).entries)
    r = m.shape[0]
    v = np.eye(r, dtype=np.complex128)

    scale = np.linalg.norm(m)
    if scale == 0.0:
        return np.zeros(r), v

    tol = settings['core']['jacobi_tol'] * scale
    off_mask = ~np.eye(r, dtype=bool)
    converged = False

    for sweep in range(settings['core']['jacobi_max_sweeps']):
        off = math.sqrt(float(np.sum(np.abs(m[off_mask]) ** 2)))
        if off < tol:
            converged = True
            break

        for p in range(r - 1):
            for q in range(p + 1, r):
                apq = m[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = np.conj(apq / mag)
                theta = 0.5 * math.atan2(2.0 * mag, (m[q, q] - m[p, p]).real)
                c, s = math.cos(theta), math.sin(theta)
                rot = np.array([[c, s], [-s * phase, c * phase]], dtype=np.complex128)

                cols = [p, q]
                m[:, cols] = m[:, cols] @ rot
                m[cols, :] = rot.conj().T @ m[cols, :]
                v[:, cols] = v[:, cols] @ rot
                m[p, q] = m[q, p] = 0.0
                m[p, p] = m[p, p].real
                m[q, q] = m[q, q].real

    if not converged:
        logger.warning(f"Jacobi eigensolver did not reach tolerance after "
                       f"{settings['core']['jacobi_max_sweeps']} sweeps (r={r})")

    eigenvalues = np.real(np.diag(m))
    order = np.argsort(eigenvalues, kind='stable')
    return eigenvalues[order], v[:, order]


def operator_norm_upper(a):
    """
    Upper bound on the spectral norm

    Args:
        a: ComplexMatrix

    Returns:
        float: max |eigenvalue| for hermitian input, Frobenius norm otherwise
    """
    if a.is_hermitian():
        eigenvalues, _ = hermitian_eig(a)
        return float(np.max(np.abs(eigenvalues)))
    return a.frobenius_norm()


def _scaling_and_squaring(arr):
    cfg = settings['core']
    r = arr.shape[0]
    norm = float(np.linalg.norm(arr))
    squarings = math.ceil(math.log2(max(1.0, norm))) + cfg['oracle_extra_squarings']
    b = arr / (2.0 ** squarings)

    ident = np.eye(r, dtype=np.complex128)
    result = ident
    # Horner form of the truncated Taylor series
    for k in range(cfg['oracle_taylor_order'], 0, -1):
        result = ident + (b @ result) / k

    for _ in range(squarings):
        result = result @ result
    return result


def expm_oracle(a):
    """
    Reference matrix exponential

    Hermitian input goes through the Jacobi eigendecomposition A = U diag(w) U†,
    anything else through scaling-and-squaring with a fixed-order Taylor core.

    Args:
        a: ComplexMatrix

    Returns:
        ComplexMatrix: e^A
    """
    if a.is_hermitian():
        w, u = hermitian_eig(a)
        return ComplexMatrix((u * np.exp(w)) @ u.conj().T)
    return ComplexMatrix(_scaling_and_squaring(a.entries))


def expm_oracle_imaginary(a):
    """e^{iA} for hermitian A via its eigendecomposition"""
    w, u = hermitian_eig(a)
    return ComplexMatrix((u * np.exp(1j * w)) @ u.conj().T)


def oracle_report(a, mode='exp'):
    """Wrap the oracle exponential (of A, or of iA in fourier mode) as an EstimateReport"""
    start = time.perf_counter()
    value = expm_oracle_imaginary(a) if mode == 'fourier' else expm_oracle(a)
    return EstimateReport(
        value=value,
        abs_error_estimate=0.0,
        backend=Backend.ORACLE,
        samples_or_terms=0,
        wall_time=time.perf_counter() - start,
        mode=mode,
    )


def resolvent(a):
    """
    (1 - A)^{-1} by LU solve

    Raises:
        ExpmError: 'resolvent_singular' when |det(1 - A)| <= 1e-12 (1 + ||A||_F)^r
    """
    r = a.dim
    shifted = np.eye(r, dtype=np.complex128) - a.entries
    det = np.linalg.det(shifted)
    threshold = settings['core']['resolvent_det_tol'] * (1.0 + a.frobenius_norm()) ** r
    if not abs(det) > threshold:
        raise ExpmError('resolvent_singular', f"|det(1-A)| = {abs(det):.3e} is below {threshold:.3e}")
    return ComplexMatrix(np.linalg.solve(shifted, np.eye(r, dtype=np.complex128)))


def random_hermitian(r, seed, spectral_norm=1.0):
    """
    Deterministic random hermitian matrix with a prescribed spectral norm

    Args:
        r: dimension
        seed: seed for numpy's default generator
        spectral_norm: target max |eigenvalue| (0 gives the zero matrix)

    Returns:
        HermitianMatrix
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    h = HermitianMatrix(0.5 * (g + g.conj().T))
    if spectral_norm == 0:
        return HermitianMatrix(np.zeros((r, r), dtype=np.complex128))
    return h.scaled(spectral_norm / operator_norm_upper(h))


def matrix_to_dict(a):
    """Matrix JSON object: dim plus row-major real and imaginary arrays (both always present)"""
    return {
        'dim': a.dim,
        're': a.entries.real.tolist(),
        'im': a.entries.imag.tolist(),
    }


def matrix_from_dict(data):
    """Parse the matrix JSON object; malformed content raises ExpmError('bad_matrix_file')"""
    if not isinstance(data, dict) or not {'dim', 're', 'im'} <= set(data):
        raise ExpmError('bad_matrix_file', "expected an object with fields dim, re, im")

    dim = data['dim']
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ExpmError('bad_matrix_file', f"dim must be a positive integer, got {dim!r}")

    try:
        re = np.array(data['re'], dtype=np.float64)
        im = np.array(data['im'], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ExpmError('bad_matrix_file', f"entries must be numbers: {e}") from e

    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ExpmError('bad_matrix_file', f"re/im must both be {dim}x{dim}, got {re.shape} and {im.shape}")

    try:
        return ComplexMatrix(re + 1j * im)
    except ExpmError as e:
        raise ExpmError('bad_matrix_file', e.message) from e


def load_matrix_json(path):
    """Read a matrix JSON file"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ExpmError('bad_matrix_file', f"could not read {path}: {e}") from e
    return matrix_from_dict(data)


def dump_matrix_json(a, path):
    """Write a matrix JSON file"""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(matrix_to_dict(a), f)
        f.write('\n')

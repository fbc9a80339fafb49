#!/usr/bin/env python3
"""
Sphere Exponential - Characteristic Polynomial Pieces
-----------------------------------------------------
This module computes the homogeneous pieces P_j(A) of Det(1 - A) from traces
of powers of A (Newton's identities), without any eigendecomposition.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CharPolyCoefficients:
    """P_0..P_r with Det(1 - A) = sum_j P_j(A); p[0] is exactly 1"""

    dim: int
    p: np.ndarray

    def determinant(self):
        return complex(np.sum(self.p))

    def abs_sum(self):
        return float(np.sum(np.abs(self.p)))


def power_sums(a, kmax):
    """
    Traces of powers of A by repeated multiplication

    Args:
        a: ComplexMatrix
        kmax: highest power (>= 1)

    Returns:
        numpy array: [Tr(A^1), ..., Tr(A^kmax)]
    """
    if kmax < 1:
        raise ValueError(f"kmax must be at least 1, got {kmax}")

    sums = np.empty(kmax, dtype=np.complex128)
    power = a.entries
    sums[0] = np.trace(power)
    for k in range(1, kmax):
        power = power @ a.entries
        sums[k] = np.trace(power)
    return sums


def char_poly_pieces(a):
    """
    Homogeneous pieces of Det(1 - A)

    P_j = (-1)^j e_j with e_k = (1/k) sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i, where
    p_i = Tr(A^i).

    Args:
        a: ComplexMatrix

    Returns:
        CharPolyCoefficients
    """
    r = a.dim
    traces = power_sums(a, r)

    e = np.zeros(r + 1, dtype=np.complex128)
    e[0] = 1.0
    for k in range(1, r + 1):
        acc = 0j
        for i in range(1, k + 1):
            sign = 1.0 if i % 2 == 1 else -1.0
            acc += sign * e[k - i] * traces[i - 1]
        e[k] = acc / k

    signs = np.array([(-1.0) ** j for j in range(r + 1)])
    p = signs * e
    p[0] = 1.0
    p.setflags(write=False)
    return CharPolyCoefficients(dim=r, p=p)

import logging
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from expm_core import random_hermitian  # noqa: E402
from expm_sphere import SamplerConfig  # noqa: E402


def random_unitary(r, seed):
    """Haar unitary from the QR factorization of a complex Gaussian matrix"""
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))) / np.sqrt(2.0)
    q, rr = np.linalg.qr(z)
    phases = np.diag(rr) / np.abs(np.diag(rr))
    return q * phases


@pytest.fixture
def sampler():
    return SamplerConfig(seed=7, stream_count=4)


@pytest.fixture
def hermitian_3x3():
    return random_hermitian(3, 11, 1.0)


@pytest.fixture
def unitary_3x3():
    return random_unitary(3, 5)


@pytest.fixture
def make_unitary():
    return random_unitary


@pytest.fixture
def matrix_file(tmp_path):
    """Write a matrix JSON file and return its path"""
    from expm_core import ComplexMatrix, dump_matrix_json

    def write(entries, name='matrix.json'):
        path = tmp_path / name
        dump_matrix_json(ComplexMatrix(np.asarray(entries, dtype=np.complex128)), path)
        return str(path)

    return write


@pytest.fixture(autouse=True)
def reset_logging():
    """Drop root handlers bound to a captured stderr once a test ends"""
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)

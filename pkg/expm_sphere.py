#!/usr/bin/env python3
"""
Sphere Exponential - Sphere Sampler
-----------------------------------
This module draws unit vectors in C^r under the unitary-invariant measure and
provides the exact sphere moments and the Gaussian/sphere moment comparison.

Draws come from a Philox counter-based generator keyed on (seed, stream), with
sample index i owning a fixed block of counters, so a sample depends only on
(seed, stream, index, r) and never on chunking or thread scheduling.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from expm_core import ExpmError
from expm_settings import settings, thread_count

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi
_UNIT = 2.0 ** -53


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    stream_count: int = 1

    def __post_init__(self):
        if self.stream_count < 1:
            raise ValueError(f"stream_count must be at least 1, got {self.stream_count}")


@dataclass(frozen=True, eq=False)
class SphereSample:
    """Unit vector n in C^r and its projector w = n n†"""

    n: np.ndarray
    w: np.ndarray


def _blocks_per_sample(r):
    # Each Philox block yields 4 uint64 -> 4 normals via Box-Muller
    return (r + 1) // 2


def _philox(cfg, stream, counter):
    key = (cfg.seed & _MASK64) | (stream << 64)
    return np.random.Philox(key=key, counter=counter)


def _normals_from_raw(raw):
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _UNIT
    u1, u2 = u[..., 0::2], u[..., 1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = _TWO_PI * u2
    out = np.empty(raw.shape, dtype=np.float64)
    out[..., 0::2] = radius * np.cos(angle)
    out[..., 1::2] = radius * np.sin(angle)
    return out


def _check_stream(cfg, stream):
    if not 0 <= stream < cfg.stream_count:
        raise ExpmError('index_range', f"stream {stream} outside [0, {cfg.stream_count})")


def sample_complex_gaussians(cfg, stream, start, count, r):
    """
    Complex Gaussian vectors with density e^{-|x|^2}/pi^r (E|x_i|^2 = 1)

    Args:
        cfg: SamplerConfig
        stream: substream number
        start: index of the first sample
        count: number of samples
        r: complex dimension

    Returns:
        numpy array of shape (count, r)
    """
    _check_stream(cfg, stream)
    blocks = _blocks_per_sample(r)
    raw = _philox(cfg, stream, start * blocks).random_raw(count * blocks * 4)
    normals = _normals_from_raw(raw.reshape(count, blocks * 4))[:, :2 * r]
    return (normals[:, 0::2] + 1j * normals[:, 1::2]) / math.sqrt(2.0)


def _redraw(cfg, stream, index, r):
    blocks = _blocks_per_sample(r)
    inner = 1
    while True:
        counter = index * blocks + (inner << 128)
        raw = _philox(cfg, stream, counter).random_raw(blocks * 4)
        normals = _normals_from_raw(raw.reshape(1, blocks * 4))[:, :2 * r]
        x = (normals[:, 0::2] + 1j * normals[:, 1::2]) / math.sqrt(2.0)
        if np.any(x != 0):
            return x[0]
        inner += 1


def sample_unit_vectors(cfg, stream, start, count, r):
    """Unit vectors for samples start..start+count-1 of a stream, shape (count, r)"""
    x = sample_complex_gaussians(cfg, stream, start, count, r)
    norms = np.sqrt(np.sum(x.real ** 2 + x.imag ** 2, axis=1))

    zero_rows = np.flatnonzero(norms == 0.0)
    for row in zero_rows:
        logger.warning(f"Zero Gaussian draw at stream {stream}, index {start + row}; redrawing")
        x[row] = _redraw(cfg, stream, start + row, r)
        norms[row] = np.sqrt(np.sum(x[row].real ** 2 + x[row].imag ** 2))

    return x / norms[:, None]


def sample_unit_vector(cfg, stream, index, r):
    """
    One deterministic draw from the unitary-invariant sphere measure

    Args:
        cfg: SamplerConfig
        stream: substream number, 0 <= stream < cfg.stream_count
        index: sample index within the stream
        r: complex dimension (>= 1)

    Returns:
        SphereSample
    """
    if r < 1:
        raise ExpmError('index_range', f"dimension must be at least 1, got {r}")
    n = sample_unit_vectors(cfg, stream, index, 1, r)[0]
    return SphereSample(n=n, w=np.outer(n, n.conj()))


def stream_sizes(samples, stream_count):
    base, extra = divmod(samples, stream_count)
    return [base + (1 if s < extra else 0) for s in range(stream_count)]


def _tree_reduce(parts):
    # Fixed pairwise order over streams
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts) - 1, 2):
            merged.append(tuple(x + y for x, y in zip(parts[i], parts[i + 1])))
        if len(parts) % 2 == 1:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def run_streams(cfg, samples, worker, threads=None):
    """
    Run a chunked accumulation over all streams and reduce in fixed order

    The worker is called as worker(stream, start, count) for consecutive chunks of
    settings['sampler']['chunk_size'] samples and returns a tuple of arrays;
    chunks are summed sequentially inside a stream, then streams are combined by
    a fixed pairwise tree.

    Args:
        cfg: SamplerConfig
        samples: total number of samples (>= 1)
        worker: callable returning a tuple of partial sums
        threads: worker thread cap, defaults to the THREADS environment variable

    Returns:
        tuple: reduced partial sums
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")

    chunk = settings['sampler']['chunk_size']
    sizes = stream_sizes(samples, cfg.stream_count)
    active = [(stream, size) for stream, size in enumerate(sizes) if size > 0]

    def run_one(stream, size):
        total = None
        for start in range(0, size, chunk):
            part = worker(stream, start, min(chunk, size - start))
            total = part if total is None else tuple(x + y for x, y in zip(total, part))
        return total

    if threads is None:
        threads = thread_count()

    if threads > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(active))) as pool:
            futures = [pool.submit(run_one, stream, size) for stream, size in active]
            parts = [future.result() for future in futures]
    else:
        parts = [run_one(stream, size) for stream, size in active]

    logger.debug(f"Accumulated {samples} samples over {len(active)} streams")
    return _tree_reduce(parts)


def sphere_moment_exact(r, total_degree, a, b, strict=False):
    """
    Exact normalized sphere moment of prod_i n_i^{a_i} conj(n_i)^{b_i}

    Args:
        r: complex dimension
        total_degree: sum(a) + sum(b), must be even
        a: exponents of n_i (length r)
        b: exponents of conj(n_i) (length r)
        strict: raise instead of returning 0 when a != b

    Returns:
        float: prod(a_i!) Gamma(r) / Gamma(r + N) when a == b, else 0
    """
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    if len(a) != r or len(b) != r or min(a + b, default=0) < 0:
        raise ExpmError('index_range', f"monomial exponents must be {r} nonnegative integers each")
    if sum(a) + sum(b) != total_degree:
        raise ExpmError('index_range', f"exponents sum to {sum(a) + sum(b)}, not {total_degree}")
    if total_degree % 2 == 1:
        raise ExpmError('odd_degree_moment_zero', f"total degree {total_degree} is odd")

    if a != b:
        if strict:
            raise ExpmError('index_range', "a != b: moment vanishes by phase invariance")
        return 0.0

    half = total_degree // 2
    numerator = math.prod(math.factorial(x) for x in a) * math.factorial(r - 1)
    return float(Fraction(numerator, math.factorial(r + half - 1)))


def gaussian_sphere_ratio(r, n_half):
    """Gamma(N + r) / Gamma(r), the factor relating degree-2N Gaussian and sphere moments"""
    return float(Fraction(math.factorial(n_half + r - 1), math.factorial(r - 1)))


@dataclass
class MomentCheckReport:
    r: int
    n_half: int
    exponents: list
    expected_ratio: float
    measured_ratios: list
    std_errors: list
    max_relative_deviation: float
    max_sigma: float
    passed: bool


def _random_exponents(rng, r, n_half):
    # Uniform over compositions of n_half into r nonnegative parts
    choices = list(itertools.combinations_with_replacement(range(r), n_half))
    pick = choices[rng.integers(len(choices))]
    exps = [0] * r
    for i in pick:
        exps[i] += 1
    return exps


def gaussian_vs_sphere_check(r, n_half, trials, cfg, samples=100000, sigma=3.0, threads=None):
    """
    Compare Gaussian and sphere moments of random degree-2N monomials by Monte Carlo

    Both moments are estimated from the same draws (x Gaussian, n = x/|x|), and
    their ratio is checked against Gamma(N + r)/Gamma(r).

    Args:
        r: complex dimension
        n_half: N, half the total degree
        trials: number of random monomials |n_1|^{2a_1}...|n_r|^{2a_r}
        cfg: SamplerConfig
        samples: draws per trial
        sigma: acceptance in standard errors

    Returns:
        MomentCheckReport
    """
    if r < 1 or n_half < 0:
        raise ExpmError('index_range', f"need r >= 1 and N >= 0, got r={r}, N={n_half}")

    rng = np.random.default_rng(cfg.seed)
    expected = gaussian_sphere_ratio(r, n_half)
    all_exps, ratios, errors = [], [], []

    for trial in range(max(1, trials)):
        exps = np.array(_random_exponents(rng, r, n_half), dtype=np.float64)

        def worker(stream, start, count):
            x = sample_complex_gaussians(cfg, stream, start, count, r)
            mod2 = x.real ** 2 + x.imag ** 2
            radius2 = np.sum(mod2, axis=1)
            sphere = np.prod((mod2 / radius2[:, None]) ** exps, axis=1)
            gauss = np.prod(mod2 ** exps, axis=1)
            return (np.array([np.sum(gauss), np.sum(sphere), np.sum(gauss ** 2),
                              np.sum(sphere ** 2), np.sum(gauss * sphere)]),)

        (totals,) = run_streams(cfg, samples, worker, threads)
        g_mean, s_mean = totals[0] / samples, totals[1] / samples
        g_var = totals[2] / samples - g_mean ** 2
        s_var = totals[3] / samples - s_mean ** 2
        cov = totals[4] / samples - g_mean * s_mean

        ratio = g_mean / s_mean
        # Delta method for a ratio of correlated means
        var_ratio = (g_var - 2.0 * ratio * cov + ratio ** 2 * s_var) / (s_mean ** 2 * samples)
        all_exps.append(exps.astype(int).tolist())
        ratios.append(float(ratio))
        errors.append(float(math.sqrt(max(var_ratio, 0.0))))

    deviations = [abs(x - expected) / expected for x in ratios]
    sigmas = [abs(x - expected) / e if e > 0 else (0.0 if abs(x - expected) <= 1e-12 * expected else math.inf)
              for x, e in zip(ratios, errors)]
    max_sigma = max(sigmas)
    logger.info(f"Moment ratio check r={r}, N={n_half}: expected {expected:g}, "
                f"max deviation {max(deviations):.3e} ({max_sigma:.2f} standard errors)")

    return MomentCheckReport(
        r=r,
        n_half=n_half,
        exponents=all_exps,
        expected_ratio=expected,
        measured_ratios=ratios,
        std_errors=errors,
        max_relative_deviation=max(deviations),
        max_sigma=max_sigma,
        passed=max_sigma <= sigma,
    )


def gaussian_moment_monte_carlo(a, k, samples, cfg, threads=None):
    """
    Monte Carlo estimate of G[k]_{ab} = E[(<Ax, conj x>)^k x_a conj(x_b)]

    Args:
        a: ComplexMatrix
        k: power of the quadratic form
        samples: number of Gaussian draws
        cfg: SamplerConfig

    Returns:
        tuple: (mean matrix, per-entry standard error matrix)
    """
    arr = a.entries
    r = a.dim

    def worker(stream, start, count):
        x = sample_complex_gaussians(cfg, stream, start, count, r)
        quad = np.einsum('si,ij,sj->s', x.conj(), arr, x) ** k
        weighted = x * quad[:, None]
        mod2 = np.abs(x) ** 2
        return (weighted.T @ x.conj(), (mod2 * (np.abs(quad) ** 2)[:, None]).T @ mod2)

    first, second = run_streams(cfg, samples, worker, threads)
    mean = first / samples
    var = np.maximum(second / samples - np.abs(mean) ** 2, 0.0)
    return mean, np.sqrt(var / samples)

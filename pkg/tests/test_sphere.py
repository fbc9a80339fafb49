import math

import numpy as np
import pytest

from expm_core import ExpmError, random_hermitian
from expm_sphere import (
    SamplerConfig,
    gaussian_moment_monte_carlo,
    gaussian_sphere_ratio,
    gaussian_vs_sphere_check,
    run_streams,
    sample_complex_gaussians,
    sample_unit_vector,
    sample_unit_vectors,
    sphere_moment_exact,
    stream_sizes,
)


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(seed=1, stream_count=0)


def test_unit_norm_and_projector_laws():
    cfg = SamplerConfig(seed=3, stream_count=2)
    for r in (1, 2, 5):
        for index in range(20):
            sample = sample_unit_vector(cfg, 1, index, r)
            assert abs(np.linalg.norm(sample.n) - 1.0) <= 1e-14
            w = sample.w
            assert np.max(np.abs(w - w.conj().T)) <= 1e-15
            assert abs(np.trace(w) - 1.0) <= 1e-14
            assert np.max(np.abs(w @ w - w)) <= 1e-13


def test_draw_is_deterministic():
    cfg = SamplerConfig(seed=42, stream_count=1)
    first = sample_unit_vector(cfg, 0, 7, 2).n
    second = sample_unit_vector(cfg, 0, 7, 2).n
    assert np.array_equal(first, second)


def test_vectorized_rows_match_single_draws():
    cfg = SamplerConfig(seed=42, stream_count=3)
    batch = sample_unit_vectors(cfg, 2, 5, 10, 3)
    for i in range(10):
        assert np.array_equal(batch[i], sample_unit_vector(cfg, 2, 5 + i, 3).n)


def test_streams_and_seeds_differ():
    cfg = SamplerConfig(seed=1, stream_count=2)
    assert not np.array_equal(sample_unit_vectors(cfg, 0, 0, 4, 2), sample_unit_vectors(cfg, 1, 0, 4, 2))
    other = SamplerConfig(seed=2, stream_count=2)
    assert not np.array_equal(sample_unit_vectors(cfg, 0, 0, 4, 2), sample_unit_vectors(other, 0, 0, 4, 2))


def test_stream_out_of_range():
    cfg = SamplerConfig(seed=1, stream_count=2)
    with pytest.raises(ExpmError) as err:
        sample_unit_vector(cfg, 2, 0, 3)
    assert err.value.code == 'index_range'


def test_gaussian_normalization():
    cfg = SamplerConfig(seed=9, stream_count=1)
    x = sample_complex_gaussians(cfg, 0, 0, 200_000, 2)
    mod2 = np.abs(x) ** 2
    assert abs(np.mean(mod2) - 1.0) <= 0.01
    assert abs(np.mean(x)) <= 0.01


def test_mean_projector_is_identity_over_r():
    cfg = SamplerConfig(seed=11, stream_count=4)

    def worker(stream, start, count):
        n = sample_unit_vectors(cfg, stream, start, count, 3)
        return (n.T @ n.conj(),)

    (total,) = run_streams(cfg, 1_000_000, worker)
    assert np.max(np.abs(total / 1_000_000 - np.eye(3) / 3)) <= 5e-3


def test_mean_quadratic_form_is_trace_over_r():
    cfg = SamplerConfig(seed=5, stream_count=2)
    a = random_hermitian(4, 2, 1.0)
    n = sample_unit_vectors(cfg, 0, 0, 100_000, 4)
    lam = np.real(np.einsum('si,ij,sj->s', n.conj(), a.entries, n))
    se = np.std(lam) / math.sqrt(len(lam))
    assert abs(np.mean(lam) - np.trace(a.entries).real / 4) <= 4 * se


def test_unitary_invariance(make_unitary):
    a = random_hermitian(3, 4, 1.0)
    u = make_unitary(3, 8)
    samples = 100_000
    n = sample_unit_vectors(SamplerConfig(seed=1), 0, 0, samples, 3)
    m = sample_unit_vectors(SamplerConfig(seed=2), 0, 0, samples, 3) @ u.T
    lam_n = np.real(np.einsum('si,ij,sj->s', n.conj(), a.entries, n))
    lam_m = np.real(np.einsum('si,ij,sj->s', m.conj(), a.entries, m))
    for power in (1, 2):
        x, y = lam_n ** power, lam_m ** power
        se = math.sqrt((np.var(x) + np.var(y)) / samples)
        assert abs(np.mean(x) - np.mean(y)) <= 4 * se


def test_results_do_not_depend_on_threads():
    cfg = SamplerConfig(seed=3, stream_count=4)

    def worker(stream, start, count):
        n = sample_unit_vectors(cfg, stream, start, count, 2)
        return (n.T @ n.conj(),)

    serial = run_streams(cfg, 50_001, worker, threads=1)[0]
    parallel = run_streams(cfg, 50_001, worker, threads=4)[0]
    assert np.array_equal(serial, parallel)


def test_threads_env_does_not_change_results(monkeypatch):
    cfg = SamplerConfig(seed=3, stream_count=3)

    def worker(stream, start, count):
        return (np.sum(sample_unit_vectors(cfg, stream, start, count, 2), axis=0),)

    monkeypatch.setenv('THREADS', '1')
    serial = run_streams(cfg, 10_000, worker)[0]
    monkeypatch.setenv('THREADS', '3')
    parallel = run_streams(cfg, 10_000, worker)[0]
    assert np.array_equal(serial, parallel)


def test_stream_sizes():
    assert stream_sizes(10, 3) == [4, 3, 3]
    assert stream_sizes(2, 4) == [1, 1, 0, 0]


def test_exact_moment_examples():
    assert sphere_moment_exact(3, 2, [1, 0, 0], [1, 0, 0]) == pytest.approx(1 / 3)
    assert sphere_moment_exact(2, 4, [2, 0], [2, 0]) == pytest.approx(1 / 3)
    assert sphere_moment_exact(2, 2, [1, 0], [0, 1]) == 0.0
    assert sphere_moment_exact(4, 0, [0] * 4, [0] * 4) == 1.0


def test_exact_moment_errors():
    with pytest.raises(ExpmError) as err:
        sphere_moment_exact(2, 3, [2, 0], [1, 0])
    assert err.value.code == 'odd_degree_moment_zero'

    with pytest.raises(ExpmError) as err:
        sphere_moment_exact(2, 2, [1, 0], [0, 1], strict=True)
    assert err.value.code == 'index_range'

    with pytest.raises(ExpmError):
        sphere_moment_exact(2, 4, [1, 0], [1, 0])


def test_fourth_moment_by_sampling():
    cfg = SamplerConfig(seed=13, stream_count=1)
    n = sample_unit_vectors(cfg, 0, 0, 1_000_000, 2)
    assert abs(np.mean(np.abs(n[:, 0]) ** 4) - 1 / 3) <= 2e-3


@pytest.mark.slow
def test_fourth_moment_at_ten_million_samples():
    cfg = SamplerConfig(seed=13, stream_count=4)

    def worker(stream, start, count):
        n = sample_unit_vectors(cfg, stream, start, count, 2)
        return (np.sum(np.abs(n[:, 0]) ** 4),)

    (total,) = run_streams(cfg, 10_000_000, worker)
    assert abs(total / 10_000_000 - 1 / 3) <= 1e-3


def test_gaussian_sphere_ratio():
    assert gaussian_sphere_ratio(1, 1) == 1.0
    assert gaussian_sphere_ratio(2, 1) == 2.0
    assert gaussian_sphere_ratio(3, 2) == 12.0


def test_scalar_ratio_check():
    report = gaussian_vs_sphere_check(1, 1, 1, SamplerConfig(seed=4, stream_count=2), samples=100_000)
    assert report.expected_ratio == 1.0
    assert report.max_relative_deviation <= 0.02


@pytest.mark.slow
@pytest.mark.parametrize('r,n_half', [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)])
def test_gaussian_vs_sphere_ratio(r, n_half):
    report = gaussian_vs_sphere_check(r, n_half, 1, SamplerConfig(seed=21, stream_count=4), samples=1_000_000)
    assert report.expected_ratio == math.factorial(n_half + r - 1) / math.factorial(r - 1)
    assert report.max_sigma <= 4.0


def test_gaussian_moment_monte_carlo_first_order():
    # G[0] = E[x x†] = I
    mean, se = gaussian_moment_monte_carlo(random_hermitian(2, 1, 1.0), 0, 200_000, SamplerConfig(seed=2))
    assert np.all(np.abs(mean - np.eye(2)) <= 5 * se)

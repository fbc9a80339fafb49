import math

import numpy as np
import pandas as pd
import pytest

from expm_core import Backend, ComplexMatrix, HermitianMatrix, oracle_report, random_hermitian
from expm_series import expm_series
from expm_monte_carlo import expm_monte_carlo
from expm_sphere import SamplerConfig
from expm_tables import (
    bench_suite,
    bench_table,
    deviation_table,
    entry_table,
    expand_backends,
    fit_log_slope,
    json_ready,
    mc_convergence_table,
    sample_ladder,
    series_convergence_table,
    unitarity_defect,
)


def test_expand_backends():
    assert expand_backends('all') == [Backend.MONTE_CARLO, Backend.SERIES, Backend.ORACLE]
    assert expand_backends('series') == [Backend.SERIES]


@pytest.mark.parametrize('max_samples,expected', [
    (8000, [1000, 2000, 4000, 8000]),
    (5000, [1000, 2000, 4000, 5000]),
    (1000, [1000]),
    (500, [500]),
])
def test_sample_ladder(max_samples, expected):
    assert sample_ladder(max_samples) == expected


def test_fit_log_slope_on_power_law():
    x = np.array([1000, 2000, 4000, 8000, 16000])
    df = pd.DataFrame({'samples': x, 'max_error': 3.0 * x ** -0.5})
    fit = fit_log_slope(df, 'samples', 'max_error')
    assert fit['slope'] == pytest.approx(-0.5, abs=1e-10)
    assert fit['intercept'] == pytest.approx(math.log(3.0), abs=1e-9)
    assert fit['slope_std_error'] <= 1e-8


def test_fit_log_slope_needs_three_positive_rows():
    df = pd.DataFrame({'samples': [1000, 2000, 4000], 'max_error': [0.1, 0.0, 0.05]})
    assert fit_log_slope(df, 'samples', 'max_error') is None


def test_json_ready():
    data = {'a': float('inf'), 'b': [np.float64(1.5), np.int64(2), np.bool_(True)], 'c': (math.nan,)}
    assert json_ready(data) == {'a': None, 'b': [1.5, 2, True], 'c': [None]}


def test_deviation_table_pairs():
    a = random_hermitian(2, 3, 1.0)
    reports = [expm_series(a, 1e-10), oracle_report(a)]
    table = deviation_table(reports)
    assert list(table.columns) == ['backend_a', 'backend_b', 'max_abs_deviation']
    assert table.iloc[0]['backend_a'] == 'series'
    assert table.iloc[0]['backend_b'] == 'oracle'
    assert table.iloc[0]['max_abs_deviation'] <= 1e-9
    assert deviation_table(reports[:1]).empty


def test_entry_table_columns(sampler):
    a = random_hermitian(2, 4, 1.0)
    series = entry_table(expm_series(a, 1e-10))
    assert len(series) == 4
    assert 'std_error' not in series.columns
    assert set(['backend', 'mode', 'row', 'col', 're', 'im']).issubset(series.columns)

    mc = entry_table(expm_monte_carlo(a, 1000, sampler))
    assert 'std_error' in mc.columns
    assert (mc['std_error'] > 0).all()
    assert (mc['backend'] == 'monte_carlo').all()


def test_unitarity_defect():
    assert unitarity_defect(ComplexMatrix.identity(3)) == 0.0
    assert unitarity_defect(ComplexMatrix(2.0 * np.eye(2))) == pytest.approx(3.0)


def test_series_convergence_of_zero_matrix():
    table = series_convergence_table(HermitianMatrix(np.zeros((3, 3))), [2, 5, 10])
    assert list(table['kmax']) == [2, 5, 10]
    assert (table['residual'] == 0.0).all()


def test_series_convergence_decreases():
    table = series_convergence_table(random_hermitian(3, 2, 2.0), [5, 10, 20, 40])
    residuals = table['residual'].to_numpy()
    assert residuals[-1] <= 1e-10
    assert residuals[0] > residuals[-1]


def test_mc_convergence_table(sampler):
    table = mc_convergence_table(random_hermitian(2, 9, 1.0), 4000, sampler)
    assert list(table['samples']) == [1000, 2000, 4000]
    assert (table['max_error'] > 0).all()
    assert (table['rms_error'] <= table['max_error']).all()


def test_bench_suite_is_deterministic():
    first = bench_suite(dims=[2, 3], seed=10, spectral_norm=1.0)
    second = bench_suite(dims=[2, 3], seed=10, spectral_norm=1.0)
    assert [(r, s) for r, s, _ in first] == [(2, 12), (3, 13)]
    for (_, _, a), (_, _, b) in zip(first, second):
        assert np.array_equal(a.entries, b.entries)


def test_bench_table(sampler):
    matrices = bench_suite(dims=[2, 4])
    backends = expand_backends('all')
    table = bench_table(matrices, backends, 2000, 1e-10, sampler)
    assert len(table) == 6
    assert (table.loc[table['backend'] == 'oracle', 'max_error'] == 0.0).all()
    assert (table.loc[table['backend'] == 'series', 'max_error'] <= 1e-9).all()
    assert (table['wall_time'] >= 0).all()

    again = bench_table(matrices, backends, 2000, 1e-10, sampler)
    assert np.array_equal(table['max_error'].to_numpy(), again['max_error'].to_numpy())


@pytest.mark.slow
def test_mc_ladder_reaches_its_predicted_error():
    a = random_hermitian(3, 21, 1.0)
    table = mc_convergence_table(a, 1_000_000, SamplerConfig(seed=12, stream_count=4))
    final = table.iloc[-1]
    assert final['samples'] == 1_000_000
    assert final['max_error'] <= 4 * final['predicted_std_error']
    assert final['max_error'] < table.iloc[0]['max_error']
    slope = fit_log_slope(table, 'samples', 'max_error')
    assert -0.8 <= slope['slope'] <= -0.2

import io
import json
import math

import numpy as np
import pandas as pd
import pytest

import expm_cli
from expm_cli import build_arg_parser, config_from_args, main
from expm_core import random_hermitian
from expm_diagnostics import DiagnosticResult


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def test_defaults_per_command():
    parser = build_arg_parser()
    assert config_from_args(parser.parse_args(['exp'])).backend == 'series'
    assert config_from_args(parser.parse_args(['converge'])).backend == 'mc'
    assert config_from_args(parser.parse_args(['bench'])).backend == 'all'
    cfg = config_from_args(parser.parse_args(['diagnose', '--seed', '3', '--streams', '2']))
    assert cfg.sampler.seed == 3
    assert cfg.sampler.stream_count == 2


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        main(['logm'])
    assert err.value.code == 2


def test_exp_of_zero_is_identity(capsys, matrix_file):
    path = matrix_file(np.zeros((3, 3)))
    code, data = run_json(capsys, ['exp', '--input', path])
    assert code == 0
    report = data['reports'][0]
    assert report['backend'] == 'series'
    assert report['value']['re'] == np.eye(3).tolist()
    assert report['value']['im'] == np.zeros((3, 3)).tolist()
    assert 'deviations' not in data


def test_exp_scalar_with_one_sample(capsys, matrix_file):
    path = matrix_file([[0.7]])
    code, data = run_json(capsys, ['exp', '--input', path, '--backend', 'mc', '--samples', '1'])
    assert code == 0
    assert abs(data['reports'][0]['value']['re'][0][0] - math.exp(0.7)) <= 1e-13


def test_exp_all_backends_reports_deviations(capsys, matrix_file):
    path = matrix_file(random_hermitian(2, 5, 1.0).entries)
    code, data = run_json(capsys, ['exp', '--input', path, '--backend', 'all', '--samples', '2000'])
    assert code == 0
    assert [r['backend'] for r in data['reports']] == ['monte_carlo', 'series', 'oracle']
    assert len(data['deviations']) == 3
    series_vs_oracle = next(d for d in data['deviations']
                            if d['backend_a'] == 'series' and d['backend_b'] == 'oracle')
    assert series_vs_oracle['max_abs_deviation'] <= 1e-9


def test_exp_csv(capsys, matrix_file):
    path = matrix_file(random_hermitian(2, 6, 1.0).entries)
    assert main(['exp', '--input', path, '--backend', 'all', '--samples', '1000', '--format', 'csv']) == 0
    table = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert len(table) == 12
    assert {'row', 'col', 're', 'im', 'deviation_vs_oracle'}.issubset(table.columns)


def test_output_file(capsys, matrix_file, tmp_path):
    path = matrix_file([[1.0]])
    target = tmp_path / 'out.json'
    assert main(['exp', '--input', path, '--output', str(target)]) == 0
    assert capsys.readouterr().out == ''
    data = json.loads(target.read_text())
    assert abs(data['reports'][0]['value']['re'][0][0] - math.e) <= 1e-10


def test_fourier_reports_unitarity(capsys, matrix_file):
    path = matrix_file(random_hermitian(3, 7, 2.0).entries)
    code, data = run_json(capsys, ['fourier', '--input', path])
    assert code == 0
    assert data['reports'][0]['mode'] == 'fourier'
    assert data['reports'][0]['unitarity_defect'] <= 1e-8


def test_not_hermitian_exit_code(capsys, matrix_file):
    path = matrix_file([[0.0, 1.0], [0.0, 0.0]])
    code, data = run_json(capsys, ['exp', '--input', path])
    assert code == 3
    assert data is None


def test_bad_matrix_file_exit_code(capsys, tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"dim": 2, "re": [[1, 0], [0, 1]]}')
    assert main(['exp', '--input', str(bad)]) == 2
    assert main(['exp', '--input', str(tmp_path / 'missing.json')]) == 2
    assert main(['exp']) == 2
    assert capsys.readouterr().out == ''


def test_truncation_cap_exit_code(matrix_file):
    assert main(['exp', '--input', matrix_file([[200.0]])]) == 4


def test_invalid_samples_exit_code(matrix_file):
    assert main(['exp', '--input', matrix_file([[0.5]]), '--backend', 'mc', '--samples', '0']) == 1


def fake_diagnostics(passed):
    def run(samples, sampler, threads=None):
        return [
            DiagnosticResult('weight_identity_d_equals_2r', True, 0.0, 0.0, ''),
            DiagnosticResult('scalar_exactness', passed, 0.0 if passed else math.nan, 1e-13, ''),
        ]
    return run


def test_diagnose_passes(capsys, monkeypatch):
    monkeypatch.setattr(expm_cli, 'run_diagnostics', fake_diagnostics(True))
    code, data = run_json(capsys, ['diagnose', '--samples', '10'])
    assert code == 0
    assert data['passed'] is True
    assert [c['check'] for c in data['checks']] == ['weight_identity_d_equals_2r', 'scalar_exactness']


def test_diagnose_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(expm_cli, 'run_diagnostics', fake_diagnostics(False))
    code, data = run_json(capsys, ['diagnose'])
    assert code == 5
    assert data['passed'] is False
    assert data['checks'][1]['value'] is None


def test_converge_series_on_zero(capsys, matrix_file):
    code, data = run_json(capsys, ['converge', '--input', matrix_file(np.zeros((2, 2))), '--backend', 'series'])
    assert code == 0
    assert [row['kmax'] for row in data['series']] == list(range(2, 41))
    assert all(row['residual'] == 0.0 for row in data['series'])
    assert 'mc' not in data


def test_converge_mc_fits_slope(capsys, matrix_file):
    path = matrix_file(random_hermitian(2, 3, 1.0).entries)
    code, data = run_json(capsys, ['converge', '--input', path, '--samples', '8000'])
    assert code == 0
    assert [row['samples'] for row in data['mc']] == [1000, 2000, 4000, 8000]
    assert 'slope' in data['mc_slope']


def test_converge_rejects_oracle(matrix_file):
    assert main(['converge', '--input', matrix_file([[0.5]]), '--backend', 'oracle']) == 1


def test_bench_series_and_oracle(capsys):
    code, data = run_json(capsys, ['bench', '--backend', 'series'])
    assert code == 0
    assert [row['dim'] for row in data['rows']] == [2, 4, 8, 16]
    assert all(row['max_error'] <= 1e-9 for row in data['rows'])

    code, data = run_json(capsys, ['bench', '--backend', 'oracle'])
    assert code == 0
    assert all(row['max_error'] == 0.0 for row in data['rows'])


def test_bench_on_input(capsys, matrix_file):
    code, data = run_json(capsys, ['bench', '--input', matrix_file([[0.3]]), '--backend', 'series'])
    assert code == 0
    assert len(data['rows']) == 1
    assert data['rows'][0]['matrix_seed'] is None


def test_status_lines_go_to_stderr(capsys, matrix_file):
    assert main(['exp', '--input', matrix_file([[0.5]])]) == 0
    captured = capsys.readouterr()
    assert 'Running exp' in captured.err
    assert 'Running exp' not in captured.out

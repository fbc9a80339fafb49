import pytest

from expm_settings import settings, thread_count


@pytest.mark.parametrize('raw,expected', [
    (None, 1),
    ('', 1),
    ('3', 3),
    ('0', 1),
    ('-2', 1),
    ('abc', 1),
])
def test_thread_count(monkeypatch, raw, expected):
    if raw is None:
        monkeypatch.delenv('THREADS', raising=False)
    else:
        monkeypatch.setenv('THREADS', raw)
    assert thread_count() == expected


def test_defaults():
    assert settings['series']['kmax_cap'] == 500
    assert settings['cli']['converge_series_kmax'][0] == 2
    assert settings['cli']['converge_series_kmax'][-1] == 40
    assert settings['cli']['bench_dims'] == [2, 4, 8, 16]

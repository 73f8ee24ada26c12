import numpy as np

import invariants
from errors import FitFailureError


def test_kernel_suite_passes():
    results = invariants.kernel_suite(np.random.default_rng(0))
    assert [r['name'] for r in results] == ['bracket antisymmetry', 'jacobi identity', 'revolution determinants']
    assert all(r['passed'] for r in results)


def test_mckeithan_suite_passes():
    assert all(r['passed'] for r in invariants.mckeithan_suite(np.random.default_rng(0), points=20))


def test_run_suite_turns_errors_into_failed_records(monkeypatch):
    def broken(rng):
        raise FitFailureError(0.5, 0.1)

    monkeypatch.setitem(invariants.SUITES, 'broken', broken)
    (record,) = invariants.run_suite('broken')
    assert not record['passed']
    assert record['error'].startswith('FitFailureError')


def test_run_all_is_seeded(monkeypatch):
    def draw(rng):
        return [invariants._result('draw', 'value', rng.random(), 1.0, True)]

    monkeypatch.setattr(invariants, 'SUITES', {'draw': draw})
    assert invariants.run_all(seed=5) == invariants.run_all(seed=5)
    assert invariants.run_all(seed=5) != invariants.run_all(seed=6)

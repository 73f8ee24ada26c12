import json
import logging
import math
import os

import numpy as np
import pytest

import config
from config import SIDECAR_SCHEMA, load_scenario, parse_grid, validate, worker_count
from errors import ConfigError
from utils import (dumps_json, emit, fmt_float, linspace_grid, parallel_map, records_frame, setup_logging,
                   split_results, to_plain)


# --- formatting and emission ---

def test_fmt_float():
    assert fmt_float(0.1) == '0.10000000000000001'
    assert fmt_float(math.nan) == 'nan'
    assert fmt_float(None) == ''


def test_dumps_json_layout():
    text = dumps_json({'a': 1.5, 'b': [1, 2], 'c': {'d': None}, 'e': math.nan, 'f': 0.1})
    assert text == ('{\n  "a": 1.5,\n  "b": [\n    1,\n    2\n  ],\n  "c": {\n    "d": null\n  },\n'
                    '  "e": null,\n  "f": 0.1\n}\n')
    assert json.loads(text)['f'] == 0.1


def test_dumps_json_reals_round_trip():
    values = [1 / 3, -2.5e-17, 6.02214076e23, math.inf]
    assert json.loads(dumps_json({'v': values}))['v'] == values[:3] + [None]


def test_to_plain_numpy_and_complex():
    assert to_plain({'x': np.float64(0.5), 'n': np.int64(3), 'z': 1 + 2j, 'v': np.array([1.0, 2.0])}) == {
        'x': 0.5, 'n': 3, 'z': {'re': 1.0, 'im': 2.0}, 'v': [1.0, 2.0]}


def test_records_frame_rejects_heterogeneous_records():
    with pytest.raises(ValueError):
        records_frame([{'a': 1}, {'b': 2}])


def test_records_frame_empty_keeps_columns():
    assert list(records_frame([], ['w', 's']).columns) == ['w', 's']


def test_emit_csv_is_deterministic(tmp_path):
    rows = [{'w': 0.1, 's': -0.2, 'label': 'split'}, {'w': 1 / 3, 's': 0.0, 'label': 'regular'}]
    first = emit(rows, 'csv', str(tmp_path / 'a' / 'out.csv'), columns=['w', 's', 'label'])
    second = emit(rows, 'csv', str(tmp_path / 'b' / 'out.csv'), columns=['w', 's', 'label'])
    data = open(first, 'rb').read()
    assert data == open(second, 'rb').read()
    assert data.endswith(b'\n')
    assert data.splitlines()[0] == b'w,s,label'
    assert b'0.33333333333333331' in data


def test_emit_json(tmp_path):
    path = emit({'k': [1.0]}, 'json', str(tmp_path / 'out.json'))
    assert open(path, encoding='utf-8').read() == '{\n  "k": [\n    1.0\n  ]\n}\n'


def test_emit_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit([], 'xlsx', str(tmp_path / 'out.xlsx'))


def test_parallel_map_preserves_order():
    assert parallel_map(lambda x: x * x, range(10), workers=4) == [x * x for x in range(10)]
    assert parallel_map(lambda x: -x, [1, 2], workers=1) == [-1, -2]


def test_split_results():
    valid_results, error_results = split_results([{'v': 1, 'error': ''}, {'v': 2, 'error': 'boom'}, {'v': 3}])
    assert [r['v'] for r in valid_results] == [1, 3]
    assert [r['v'] for r in error_results] == [2]


def test_linspace_grid():
    a, b = linspace_grid([-1.0, 1.0, 0.0, 2.0, 3])
    assert list(a) == [-1.0, 0.0, 1.0]
    assert list(b) == [0.0, 1.0, 2.0]


def test_setup_logging_installs_one_handler():
    setup_logging(verbose=True)
    setup_logging(verbose=True)
    root = logging.getLogger()
    assert len(root.handlers) == 1
    assert root.level == logging.DEBUG
    assert 'level=' in root.handlers[0].formatter._fmt


# --- configuration ---

@pytest.mark.parametrize('text', ['', '1,2,3', '1,2,3,4,x', '0.1,-0.1,0,1,5', '0,1,0,1,1'])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text)


def test_parse_grid():
    assert parse_grid('-0.1, 0.1, -0.2, 0.2, 11') == [-0.1, 0.1, -0.2, 0.2, 11]


def test_load_scenario_defaults(write_scenario):
    path = write_scenario({'problem': {'type': 'sing-exc-model', 'b': 1, 'b1': 1, 'c': 0}})
    scenario = load_scenario(path, 'synthesis')
    assert scenario['options']['grid'] == config.GRID_DEFAULTS['synthesis']
    assert scenario['options']['tol'] == config.INTEGRATOR['rtol']
    assert scenario['options']['seed'] == 0


def test_load_scenario_overrides(write_scenario):
    path = write_scenario({'problem': {'type': 'sing-exc-model', 'b': 1, 'b1': 1, 'c': 0},
                           'options': {'seed': 4}})
    scenario = load_scenario(path, 'synthesis', {'grid': [0, 1, 0, 1, 3], 'tol': 1e-8, 'seed': None})
    assert scenario['options']['grid'] == [0.0, 1.0, 0.0, 1.0, 3]
    assert scenario['options']['tol'] == 1e-8
    assert scenario['options']['seed'] == 4


def test_load_scenario_invalid_json(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text('{"problem": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_scenario(str(path), 'synthesis')


def test_load_scenario_missing_field(write_scenario):
    path = write_scenario({'problem': {'type': 'sing-exc-model', 'b': 1, 'b1': 1}})
    with pytest.raises(ConfigError, match='problem'):
        load_scenario(path, 'synthesis')


def test_load_scenario_wrong_problem_for_command(write_scenario):
    path = write_scenario({'problem': {'type': 'historical-model'}})
    with pytest.raises(ConfigError):
        load_scenario(path, 'synthesis')


def test_load_scenario_requires_problem(write_scenario):
    with pytest.raises(ConfigError):
        load_scenario(write_scenario({}), 'mckeithan')


def test_unknown_option_rejected(write_scenario):
    path = write_scenario({'problem': {'type': 'historical-model'}, 'options': {'colour': 'red'}})
    with pytest.raises(ConfigError):
        load_scenario(path, 'geodesic')


def test_nonpositive_tolerance_rejected(write_scenario):
    path = write_scenario({'problem': {'type': 'historical-model'}, 'options': {'tol': 0}})
    with pytest.raises(ConfigError):
        load_scenario(path, 'geodesic')


CONFIGS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')


@pytest.mark.parametrize('name, command', [
    ('historical_geodesic.json', 'geodesic'),
    ('historical_cusp.json', 'cusp'),
    ('revolution_geodesic.json', 'geodesic'),
    ('seminormal_value_gap.json', 'value-gap'),
    ('synthesis_case3.json', 'synthesis'),
    ('mckeithan_example.json', 'mckeithan'),
    ('mckeithan_factorized.json', 'mckeithan'),
])
def test_shipped_configs_validate(name, command):
    scenario = load_scenario(os.path.join(CONFIGS_DIR, name), command)
    assert scenario['problem']['type'] in config.COMMAND_PROBLEMS[command]
    assert scenario['options']['tol'] > 0


def test_sidecar_schema():
    sidecar = {'model': {'b': 1.0, 'b1': 1.0, 'c': 0.0}, 'grid': [-0.1, 0.1, -0.1, 0.1, 5], 'case': 3,
               'validated': True, 'columns': ['w', 's', 'label', 't_star', 'eps']}
    validate(sidecar, SIDECAR_SCHEMA)
    with pytest.raises(ConfigError):
        validate({**sidecar, 'case': 7}, SIDECAR_SCHEMA)


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv(config.THREADS_ENV, '1')
    assert worker_count() == 1
    monkeypatch.setenv(config.THREADS_ENV, 'many')
    assert worker_count() >= 1

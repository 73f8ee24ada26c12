"""
Configuration: numeric defaults, exit codes, scenario schemas and loading
"""
import json
import logging
import os

import jsonschema

from errors import ConfigError

logger = logging.getLogger(__name__)

# Integrator settings (embedded Runge-Kutta pair with dense output)
INTEGRATOR = {
    'method': 'DOP853',
    'rtol': 1e-10,
    'atol': 1e-12,
    'event_time_tol': 1e-12,
}

# Tolerances used across modules
TOLERANCES = {
    'degenerate_d': 1e-9,        # relative: |D| < tol * (1 + ||columns||)
    'exceptional_m': 1e-8,       # |M| after normalizing ||p(0)|| = 1
    'hamiltonian_drift': 1e-8,
    'max_switches_per_unit': 32,
    'regime': 1e-12,
    'exceptional_d2': 1e-9,      # |D''| threshold in classify_point
    'nonimmersion': 1e-6,
    'cusp_control': 1e-6,        # |u_s| below this means equilibrium branch
    'genericity': 1e-8,
    'locus_residual': 1e-10,
    'invertibility': 1e-8,
    'case_boundary': 1e-9,
    'transverse_part': 1e-10,
}

# Jet fitting window for cusp classification
JET_FIT = {
    't_min': 1e-3,
    't_max': 5e-2,
    'samples_per_side': 40,
    'max_relative_residual': 0.1,
    'rtol': 1e-12,
    'atol': 1e-14,
}

# Brute force optimal time oracle
ORACLE = {
    'grid_points': 64,
    'polish_tol': 1e-10,
    'horizon': 1.0,
    'reach_tol': 1e-9,
    'local_horizon': 0.5,
    # arcs this short are dropped; totals this close count as equal and the shorter policy wins
    'tie_tol': 1e-7,
    # policy agreement: start a fraction of t* back along the achieving arc
    'start_fraction': 0.5,
    'regular_lead': 0.02,
}

GRID_DEFAULTS = {
    'synthesis': [-0.2, 0.2, -0.2, 0.2, 41],
    'mckeithan': [0.0, 2.0, 0.0, 2.0, 101],
}

# Exit codes of the command line entry point
EXIT_CODES = {
    'ok': 0,
    'check_failed': 1,
    'schema': 2,
    'unknown_command': 3,
    'numerical': 4,
}

COMMANDS = ['geodesic', 'cusp', 'value-gap', 'synthesis', 'mckeithan', 'check']

THREADS_ENV = 'GSL_THREADS'

# --- JSON schemas ---

_EXPR = {'type': 'string', 'minLength': 1}
_NUM = {'type': 'number'}
_POS = {'type': 'number', 'exclusiveMinimum': 0}
_VEC3 = {'type': 'array', 'items': _NUM, 'minItems': 3, 'maxItems': 3}
_SPAN = {'type': 'array', 'items': _NUM, 'minItems': 2, 'maxItems': 2}
_GRID = {'type': 'array', 'items': _NUM, 'minItems': 5, 'maxItems': 5}

PROBLEM_SCHEMAS = {
    'zermelo-isothermal': {
        'type': 'object',
        'properties': {'type': {'const': 'zermelo-isothermal'}, 'a': _EXPR, 'b': _EXPR, 'c': _EXPR},
        'required': ['type', 'a', 'b', 'c'],
        'additionalProperties': False,
    },
    'zermelo-revolution': {
        'type': 'object',
        'properties': {'type': {'const': 'zermelo-revolution'}, 'm': _EXPR, 'mu': _EXPR},
        'required': ['type', 'm', 'mu'],
        'additionalProperties': False,
    },
    'zermelo-seminormal': {
        'type': 'object',
        'properties': {
            'type': {'const': 'zermelo-seminormal'},
            'coeffs': {
                'type': 'object',
                'patternProperties': {'^[abc][0-2][0-2]$': _NUM},
                'additionalProperties': False,
            },
            'order': {'type': 'integer', 'minimum': 1, 'maximum': 2},
        },
        'required': ['type', 'coeffs'],
        'additionalProperties': False,
    },
    'historical-model': {
        'type': 'object',
        'properties': {'type': {'const': 'historical-model'}},
        'required': ['type'],
        'additionalProperties': False,
    },
    'sing-exc-model': {
        'type': 'object',
        'properties': {'type': {'const': 'sing-exc-model'}, 'b': _NUM, 'b1': _NUM, 'c': _NUM},
        'required': ['type', 'b', 'b1', 'c'],
        'additionalProperties': False,
    },
    'mckeithan': {
        'type': 'object',
        'properties': {
            'type': {'const': 'mckeithan'},
            'beta': {'type': 'array', 'items': {'type': 'number', 'minimum': 0}, 'minItems': 3, 'maxItems': 3},
            'alpha': {'type': 'array', 'items': _POS, 'minItems': 3, 'maxItems': 3},
            'delta': {'type': 'array', 'items': _POS, 'minItems': 2, 'maxItems': 2},
            'd': _POS,
        },
        'required': ['type', 'beta', 'alpha', 'delta', 'd'],
        'additionalProperties': False,
    },
}

OPTIONS_SCHEMA = {
    'type': 'object',
    'properties': {
        'q0': {'type': 'array', 'items': _NUM, 'minItems': 2, 'maxItems': 3},
        'p0': {'type': 'array', 'items': _NUM, 'minItems': 2, 'maxItems': 3},
        'level': {'enum': ['given', 'abnormal', 'hyperbolic', 'elliptic']},
        'root': {'type': 'integer', 'minimum': 0, 'maximum': 1},
        'mode': {'enum': ['direct', 'goh']},
        't_span': _SPAN,
        'tol': _POS,
        'grid': _GRID,
        'seed': {'type': 'integer'},
        'pairs': {'type': 'array', 'items': {'type': 'array', 'items': _NUM, 'minItems': 2, 'maxItems': 2}},
        'scales': {'type': 'array', 'items': _POS, 'minItems': 1},
        'base_pair': {'type': 'array', 'items': _NUM, 'minItems': 2, 'maxItems': 2},
        'points': {'type': 'array', 'items': _VEC3},
        'guesses': {'type': 'array', 'items': _SPAN},
        'oracle': {'type': 'boolean'},
    },
    'additionalProperties': False,
}

SCENARIO_SCHEMA = {
    'type': 'object',
    'properties': {
        'problem': {'type': 'object', 'properties': {'type': {'enum': sorted(PROBLEM_SCHEMAS)}}, 'required': ['type']},
        'options': OPTIONS_SCHEMA,
    },
    'additionalProperties': False,
}

SIDECAR_SCHEMA = {
    'type': 'object',
    'properties': {
        'model': {
            'type': 'object',
            'properties': {'b': _NUM, 'b1': _NUM, 'c': _NUM},
            'required': ['b', 'b1', 'c'],
        },
        'grid': _GRID,
        'case': {'type': ['integer', 'null'], 'minimum': 1, 'maximum': 6},
        'validated': {'type': 'boolean'},
        'columns': {'type': 'array', 'items': {'type': 'string'}},
    },
    'required': ['model', 'grid', 'case', 'validated', 'columns'],
}

# Problem types each command accepts
COMMAND_PROBLEMS = {
    'geodesic': ['zermelo-isothermal', 'zermelo-revolution', 'zermelo-seminormal', 'historical-model'],
    'cusp': ['zermelo-isothermal', 'zermelo-revolution', 'zermelo-seminormal', 'historical-model'],
    'value-gap': ['zermelo-seminormal'],
    'synthesis': ['sing-exc-model'],
    'mckeithan': ['mckeithan'],
    'check': [],
}


def validate(instance, schema, what="scenario"):
    """Validate an object against a schema, raising ConfigError"""
    try:
        jsonschema.validate(instance=instance, schema=schema)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{what} invalid at {path}: {e.message}") from e


def parse_grid(text):
    """Parse 'w_min,w_max,s_min,s_max,n' into a list"""
    parts = [p for p in (text or "").split(',') if p.strip()]
    if len(parts) != 5:
        raise ConfigError(f"grid spec needs 5 comma separated values, got {len(parts)}")
    try:
        grid = [float(p) for p in parts[:4]] + [int(parts[4])]
    except ValueError as e:
        raise ConfigError(f"grid spec not numeric: {text!r}") from e
    return check_grid(grid)


def check_grid(grid):
    """Bounds ordered and at least two nodes per axis"""
    lo_w, hi_w, lo_s, hi_s, n = grid
    if n != int(n) or int(n) < 2:
        raise ConfigError(f"grid node count must be an integer >= 2, got {n}")
    if lo_w > hi_w or lo_s > hi_s:
        raise ConfigError(f"grid bounds reversed: {grid}")
    return [float(lo_w), float(hi_w), float(lo_s), float(hi_s), int(n)]


def load_scenario(path, command, overrides=None):
    """Read a scenario JSON file, validate it and apply CLI overrides"""
    if path is None:
        scenario = {}
    else:
        try:
            with open(path, encoding='utf-8') as fh:
                scenario = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e

    validate(scenario, SCENARIO_SCHEMA)
    problem = scenario.get('problem')
    accepted = COMMAND_PROBLEMS.get(command, [])
    if problem is not None:
        ptype = problem['type']
        validate(problem, PROBLEM_SCHEMAS[ptype], what=f"problem '{ptype}'")
        if accepted and ptype not in accepted:
            raise ConfigError(f"command '{command}' does not accept problem type '{ptype}'")
    elif accepted:
        raise ConfigError(f"command '{command}' needs a 'problem' entry")

    options = dict(scenario.get('options', {}))
    for key, value in (overrides or {}).items():
        if value is not None:
            options[key] = value
    validate(options, OPTIONS_SCHEMA, what="options")
    if 'grid' in options:
        options['grid'] = check_grid(options['grid'])
    elif command in GRID_DEFAULTS:
        options['grid'] = list(GRID_DEFAULTS[command])
    options.setdefault('tol', INTEGRATOR['rtol'])
    options.setdefault('seed', 0)

    logger.debug("scenario loaded command=%s problem=%s options=%s", command,
                 problem and problem['type'], sorted(options))
    return {'problem': problem, 'options': options}


def worker_count():
    """Number of workers for grid workloads, capped by GSL_THREADS"""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return cpus
    try:
        cap = int(raw)
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return cpus
    return max(1, min(cpus, cap))

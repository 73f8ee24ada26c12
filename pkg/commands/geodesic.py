"""
geodesic: direct or Goh-lifted extremal integration written as a trajectory CSV
"""
import logging
import math
import os

import numpy as np

from errors import ConfigError
from extremal import singular_extremal, trajectory_columns, trajectory_records, two_sided_flow
from utils import emit
from zermelo import (abnormal_covectors, direct_extremal, geodesic_records, goh_extend, historical_model,
                     initial_heading, problem_from_config)

logger = logging.getLogger(__name__)

COLUMNS = trajectory_columns(3)


def _initial_covector(prob, q0, options):
    level = options.get('level', 'given')
    if level == 'abnormal':
        roots = abnormal_covectors(prob, q0)
        if not roots:
            raise ConfigError(f"no abnormal covector at q0={tuple(q0)} (weak current)")
        root = options.get('root', 0)
        if root >= len(roots):
            raise ConfigError(f"root {root} requested but only {len(roots)} abnormal covector(s) exist")
        return roots[root]
    if 'p0' not in options:
        raise ConfigError("options.p0 is required unless level is 'abnormal'")
    return np.asarray(options['p0'][:2], dtype=float)


def model_rows(traj):
    """Rows for a plain field trajectory; covector columns are empty"""
    rows = []
    for t, q, u in zip(traj.t, traj.q, traj.u):
        rows.append({
            't': float(t), 'q1': float(q[0]), 'q2': float(q[1]), 'q3': float(q[2]),
            'p1': math.nan, 'p2': math.nan, 'p3': math.nan,
            'u': float(u), 'H_Y': math.nan, 'M': math.nan, 'arc_kind': 'singular',
        })
    return rows


def _direct_rows(prob, q0, options):
    p0 = _initial_covector(prob, q0, options)
    arc = direct_extremal(prob, q0, p0, tuple(options['t_span']), options['tol'])
    wanted = options.get('level', 'given')
    if wanted in ('hyperbolic', 'elliptic') and arc.label != wanted:
        logger.warning("requested level %s but the covector gives %s", wanted, arc.label)
    logger.info("direct extremal label=%s samples=%d drift=%.3e", arc.label, len(arc.t), arc.m_drift)
    return geodesic_records(arc)


def _goh_rows(prob, q0, options):
    if len(q0) == 2:
        alpha = initial_heading(prob, q0, _initial_covector(prob, q0, options))
        q0 = np.append(q0, alpha)
    arc = singular_extremal(goh_extend(prob), q0, tuple(options['t_span']), tol=options['tol'])
    logger.info("goh singular extremal class=%s samples=%d drift=%.3e", arc.klass, len(arc.t), arc.m_drift)
    return trajectory_records([arc])


def run(scenario, out_dir):
    problem = scenario['problem']
    options = scenario['options']
    options.setdefault('t_span', [0.0, 1.0])
    mode = options.get('mode', 'direct')

    if problem['type'] == 'historical-model':
        q0 = np.asarray(options.get('q0', [0.0, 0.0, 0.0]), dtype=float)
        if len(q0) != 3:
            raise ConfigError("the historical model needs q0 = (x, y, alpha)")
        rows = model_rows(two_sided_flow(historical_model(), q0, tuple(options['t_span']), options['tol']))
    else:
        if 'q0' not in options:
            raise ConfigError("options.q0 is required")
        prob = problem_from_config(problem)
        q0 = np.asarray(options['q0'], dtype=float)
        if mode == 'direct':
            rows = _direct_rows(prob, q0[:2], options)
        else:
            rows = _goh_rows(prob, q0, options)

    path = emit(rows, 'csv', os.path.join(out_dir, 'trajectory.csv'), columns=COLUMNS)
    return [path]

"""
cusp: detect non-immersion points along an abnormal geodesic and classify each one
"""
import logging
import os

import numpy as np

from cusp import classify_cusp, detect_nonimmersion, self_intersections
from errors import ConfigError, GeodesicsError
from extremal import singular_field, two_sided_flow
from utils import emit
from zermelo import abnormal_covectors, goh_extend, historical_model, initial_heading, problem_from_config

logger = logging.getLogger(__name__)


def _field_and_start(problem, options):
    if problem['type'] == 'historical-model':
        return historical_model(), np.asarray(options.get('q0', [0.0, 0.0, 0.0]), dtype=float)
    prob = problem_from_config(problem)
    if 'q0' not in options:
        raise ConfigError("options.q0 is required")
    q0 = np.asarray(options['q0'], dtype=float)
    if len(q0) == 2:
        roots = abnormal_covectors(prob, q0)
        if not roots:
            raise ConfigError(f"no abnormal direction at q0={tuple(q0)}; give q0 with a heading")
        q0 = np.append(q0, initial_heading(prob, q0, roots[options.get('root', 0) % len(roots)]))
    return singular_field(goh_extend(prob)), q0


def _classify(field, q, t_c):
    try:
        return classify_cusp(field, q, t_c=t_c).to_dict()
    except GeodesicsError as e:
        logger.error("cusp classification failed t=%.9g error=%s", t_c, e)
        return {'t_c': t_c, 'q_c': list(map(float, q)), 'kind': 'unclassified', 'error': str(e)}


def run(scenario, out_dir):
    options = scenario['options']
    field, q0 = _field_and_start(scenario['problem'], options)
    t_span = tuple(options.get('t_span', [-0.5, 0.5]))

    traj = two_sided_flow(field, q0, t_span, options['tol'])
    hits = detect_nonimmersion(traj, field)
    if not hits and np.linalg.norm(field(q0)[:2]) <= 1e-12:
        hits = [(0.0, q0)]
    logger.info("non-immersion points found=%d over t in %s", len(hits), t_span)

    cusps = [_classify(field, q, t_c) for t_c, q in hits]
    extra = [_classify(field, np.asarray(p, dtype=float), 0.0) for p in options.get('points', [])]
    report = {
        'problem': scenario['problem']['type'],
        't_span': list(t_span),
        'cusps': cusps,
        'points': extra,
        'self_intersections': self_intersections(traj.t, traj.q),
    }
    path = emit(report, 'json', os.path.join(out_dir, 'cusp_report.json'))
    return [path]

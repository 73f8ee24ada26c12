"""
value-gap: times and gap of the discontinuity construction, plus the matching residual sweep
"""
import logging
import math
import os

from cusp import matching_residual, residual_order, value_gap
from errors import GeodesicsError
from utils import emit, split_results
from zermelo import SemiNormalCoeffs, check_normalization

logger = logging.getLogger(__name__)

COLUMNS = ['t0', 't2', 't1', 'alpha2_prime', 'gap', 'matching_residual', 'error']

DEFAULT_PAIRS = [[-0.1, -0.05]]
DEFAULT_SCALES = [0.2, 0.1, 0.05, 0.025]
DEFAULT_BASE_PAIR = [-1.0, -0.5]


def _row(coeffs, t0, t2, tol):
    try:
        report = value_gap(t0, t2, coeffs.delta)
        report.matching_residual = matching_residual(coeffs, t0, t2, tol)
        return {**report.to_dict(), 'error': ''}
    except GeodesicsError as e:
        return {'t0': float(t0), 't2': float(t2), 't1': math.nan, 'alpha2_prime': math.nan,
                'gap': math.nan, 'matching_residual': math.nan, 'error': f"{type(e).__name__}: {e}"}


def run(scenario, out_dir):
    options = scenario['options']
    coeffs = SemiNormalCoeffs.from_mapping(scenario['problem']['coeffs'])
    check_normalization(coeffs)
    tol = options['tol']

    results = [_row(coeffs, t0, t2, tol) for t0, t2 in options.get('pairs', DEFAULT_PAIRS)]
    valid_results, error_results = split_results(results)
    for r in error_results:
        logger.error("value gap failed t0=%g t2=%g error=%s", r['t0'], r['t2'], r['error'])
    logger.info("value gap pairs valid=%d failed=%d", len(valid_results), len(error_results))

    paths = [emit(results, 'csv', os.path.join(out_dir, 'value_gap.csv'), columns=COLUMNS)]

    scales = options.get('scales', DEFAULT_SCALES)
    tau0, tau2 = options.get('base_pair', DEFAULT_BASE_PAIR)
    slope, residuals = residual_order(coeffs, tau0, tau2, scales)
    logger.info("matching residual order=%.3f over %d scales", slope, len(scales))
    order = {'base_pair': [tau0, tau2], 'scales': list(scales), 'residuals': residuals, 'order': slope}
    paths.append(emit(order, 'json', os.path.join(out_dir, 'value_gap_order.json')))
    return paths

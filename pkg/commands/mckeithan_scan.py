"""
mckeithan: exceptional locus on the terminal level x = d and its classification
"""
import logging
import os

from config import worker_count
from errors import GeodesicsError
from mckeithan import LOCUS_COLUMNS, McKeithanParams, classify_locus, locate_singular_exceptional
from utils import emit

logger = logging.getLogger(__name__)


def _located(params, guess):
    try:
        return {'guess': list(guess), **locate_singular_exceptional(params, guess), 'error': ''}
    except GeodesicsError as e:
        logger.error("singular exceptional search from %s failed: %s", tuple(guess), e)
        return {'guess': list(guess), 'y': None, 'v': None, 'residual': None, 'error': str(e)}


def run(scenario, out_dir):
    options = scenario['options']
    params = McKeithanParams.from_config(scenario['problem'])
    records = classify_locus(params, options['grid'], workers=worker_count())

    report = {
        'params': scenario['problem'],
        'grid': options['grid'],
        'points': records,
        'located': [_located(params, g) for g in options.get('guesses', [])],
    }
    return [
        emit([{k: r[k] for k in LOCUS_COLUMNS} for r in records], 'csv',
             os.path.join(out_dir, 'locus.csv'), columns=LOCUS_COLUMNS),
        emit(report, 'json', os.path.join(out_dir, 'classification.json')),
    ]

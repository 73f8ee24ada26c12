"""
check: run every invariant suite and write one row per check
"""
import logging
import os

from invariants import CHECK_COLUMNS, run_all
from utils import emit, split_results

logger = logging.getLogger(__name__)


def run(scenario, out_dir):
    """Returns (paths, failed count)"""
    results = run_all(seed=scenario['options']['seed'])
    path = emit(results, 'csv', os.path.join(out_dir, 'check.csv'), columns=CHECK_COLUMNS)
    failed = [r for r in results if not r['passed']]
    _, errored = split_results(results)
    logger.info("checks run=%d failed=%d errored=%d", len(results), len(failed), len(errored))
    return [path], len(failed)

"""
Utility functions for formatting, record emission, worker pools and logging
"""
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from config import worker_count

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
LOG_FORMAT = 'ts=%(asctime)s level=%(levelname)s logger=%(name)s msg="%(message)s"'


def setup_logging(verbose=False):
    """Configure one key=value stream handler on the root logger"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def fmt_float(value):
    """Format a real with 17 significant digits"""
    if value is None:
        return ''
    value = float(value)
    if math.isnan(value):
        return 'nan'
    return FLOAT_FORMAT % value


def to_plain(value):
    """Convert numpy scalars/arrays and tuples to JSON-friendly python objects"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(value.real), 'im': float(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _finite_or_none(value):
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite_or_none(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps_json(obj):
    """Deterministic JSON text (shortest round-trip reals, NaN as null) with a trailing newline"""
    return json.dumps(_finite_or_none(to_plain(obj)), indent=2, allow_nan=False) + '\n'


def records_frame(records, columns=None):
    """Build a DataFrame from homogeneous records with a stable column order"""
    records = list(records)
    if records:
        keys = list(records[0].keys())
        for i, rec in enumerate(records[1:], start=1):
            if set(rec.keys()) != set(keys):
                raise ValueError(f"record {i} has keys {sorted(rec)} but record 0 has {sorted(keys)}")
        columns = columns or keys
    return pd.DataFrame.from_records(records, columns=columns or [])


def emit(records, fmt, path, columns=None):
    """Write records to path as csv or json and return the path"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if fmt == 'csv':
        df = records_frame(records, columns)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    elif fmt == 'json':
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(dumps_json(records))
    else:
        raise ValueError(f"unknown output format '{fmt}'")
    logger.info("wrote %s format=%s", path, fmt)
    return path


def parallel_map(fn, items, workers=None):
    """Map fn over items, order preserving; serial when a single worker is allowed"""
    items = list(items)
    workers = workers or worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def split_results(results):
    """Split batch records into valid and error records"""
    valid_results = [r for r in results if not r.get('error')]
    error_results = [r for r in results if r.get('error')]
    return valid_results, error_results


def linspace_grid(grid):
    """Axis nodes of a [a_min, a_max, b_min, b_max, n] grid spec"""
    a_min, a_max, b_min, b_max, n = grid
    return np.linspace(a_min, a_max, int(n)), np.linspace(b_min, b_max, int(n))

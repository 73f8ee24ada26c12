"""
synthesis: stratify the terminal surface of a singular exceptional model and sample its loci
"""
import logging
import os

import numpy as np

from config import SIDECAR_SCHEMA, validate, worker_count
from errors import DegenerateCaseError
from synthesis import STRATA_COLUMNS, SingExcModel, locus_singular, locus_splitting, locus_switching, stratify
from utils import emit, linspace_grid

logger = logging.getLogger(__name__)

LOCI_COLUMNS = ['kind', 'param1', 'param2', 'x', 'y', 'z']

SWITCH_KINDS = ((1, 'switch+'), (-1, 'switch-'))


def _point_row(kind, a, b, point):
    return {'kind': kind, 'param1': float(a), 'param2': float(b),
            'x': float(point[0]), 'y': float(point[1]), 'z': float(point[2])}


def loci_rows(model, grid):
    """Switching (eps = +-1) and splitting loci over the (w, s) nodes, singular locus over t <= 0"""
    ws, ss = linspace_grid(grid)
    rows = []
    skipped = set()
    for w in ws:
        for s in ss:
            for eps, kind in SWITCH_KINDS:
                try:
                    rows.append(_point_row(kind, w, s, locus_switching(model, w, s, eps)))
                except DegenerateCaseError:
                    skipped.add(kind)
            try:
                rows.append(_point_row('split', w, s, locus_splitting(model, w, s)))
            except DegenerateCaseError:
                skipped.add('split')
    for kind in sorted(skipped):
        logger.warning("locus %s degenerate for b=%g b1=%g c=%g", kind, model.b, model.b1, model.c)

    span = max(abs(ss[0]), abs(ss[-1]))
    for t in np.linspace(-span, 0.0, len(ss)):
        for w in ws:
            rows.append(_point_row('singular', t, w, locus_singular(model, t, w)))
    return rows


def run(scenario, out_dir):
    problem = scenario['problem']
    options = scenario['options']
    model = SingExcModel(b=float(problem['b']), b1=float(problem['b1']), c=float(problem['c']))
    grid = options['grid']

    strata = stratify(model, grid, workers=worker_count(), use_oracle=options.get('oracle', False))
    counts = strata.cells['label'].value_counts().sort_index().to_dict()
    logger.info("strata case=%s validated=%s labels=%s", strata.case, strata.validated, counts)

    sidecar = strata.sidecar()
    validate(sidecar, SIDECAR_SCHEMA, what="strata sidecar")
    return [
        emit(strata.cells.to_dict('records'), 'csv', os.path.join(out_dir, 'strata.csv'), columns=STRATA_COLUMNS),
        emit(sidecar, 'json', os.path.join(out_dir, 'strata.json')),
        emit(loci_rows(model, grid), 'csv', os.path.join(out_dir, 'loci.csv'), columns=LOCI_COLUMNS),
    ]

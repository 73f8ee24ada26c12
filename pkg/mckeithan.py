"""
McKeithan network in reduced coordinates (x, y, v) and terminal-point classification on N: x = d
"""
import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, root

from config import TOLERANCES
from errors import DegenerateCaseError, DegenerateDError, DomainError, IntegrationError
from extremal import AffineControlSystem, singular_control
from geomkernel import det3, determinants_3d, parse_field
from synthesis import SingExcModel, codim1_case, sing_exc_case
from utils import linspace_grid, parallel_map

logger = logging.getLogger(__name__)

VARIABLES = ('x', 'y', 'v')
LOCUS_COLUMNS = ['y', 'v', 'tag', 'nX', 'nYX']

X_SOURCE = (
    '-beta2*x*v^alpha2 - beta3*x*v^alpha3 - delta3*v*(x+y) + delta4*v + v*(x+y)^2',
    'beta2*x*v^alpha2 - beta4*y*v^alpha4',
    '0',
)


@dataclass(frozen=True)
class McKeithanParams:
    beta2: float
    beta3: float
    beta4: float
    alpha2: float
    alpha3: float
    alpha4: float
    delta1: float
    delta2: float
    d: float

    @classmethod
    def from_config(cls, payload):
        b2, b3, b4 = payload['beta']
        a2, a3, a4 = payload['alpha']
        d1, d2 = payload['delta']
        params = cls(float(b2), float(b3), float(b4), float(a2), float(a3), float(a4),
                     float(d1), float(d2), float(payload['d']))
        if not 0 < params.d < params.delta1:
            logger.warning("target level d=%g outside (0, delta1=%g)", params.d, params.delta1)
        return params

    @property
    def delta3(self):
        return self.delta1 + self.delta2

    @property
    def delta4(self):
        return self.delta1 * self.delta2

    @property
    def alphas(self):
        return (self.alpha2, self.alpha3, self.alpha4)

    def as_parameters(self):
        return {
            'beta2': self.beta2, 'beta3': self.beta3, 'beta4': self.beta4,
            'alpha2': self.alpha2, 'alpha3': self.alpha3, 'alpha4': self.alpha4,
            'delta3': self.delta3, 'delta4': self.delta4,
        }


@functools.lru_cache(maxsize=32)
def affine_lift(params):
    """q' = X(q) + u Y with Y = d/dv, |u| <= 1"""
    x = parse_field(X_SOURCE, VARIABLES, params.as_parameters())
    y = parse_field(('0', '0', '1'), VARIABLES)
    return AffineControlSystem(x, y, bounded=True)


def _integer_exponents(params):
    return all(float(a).is_integer() for a in params.alphas)


def _check_v(params, q):
    if q[2] < 0 and not _integer_exponents(params):
        raise DomainError('v', q, "negative rate with non-integer exponent")


def reduced_dynamics(params, state):
    """Drift (x', y', 0) at state and the control field Y = (0, 0, 1)"""
    q = np.asarray(state, dtype=float)
    _check_v(params, q)
    sys = affine_lift(params)
    return sys.x(q), sys.y(q)


def x_rate(params, x, y, v):
    """Vectorized x' for the locus scan"""
    s = x + y
    return (-params.beta2 * x * v ** params.alpha2 - params.beta3 * x * v ** params.alpha3
            - params.delta3 * v * s + params.delta4 * v + v * s * s)


def check_state_box(params, q):
    """Violations of 0 <= x <= delta1, 0 <= y <= delta2, v >= 0 (reported, never clipped)"""
    x, y, v = q
    violations = []
    if not 0.0 <= x <= params.delta1:
        violations.append(f"x={x:.6g} outside [0, {params.delta1:g}]")
    if not 0.0 <= y <= params.delta2:
        violations.append(f"y={y:.6g} outside [0, {params.delta2:g}]")
    if v < 0.0:
        violations.append(f"v={v:.6g} negative")
    for msg in violations:
        logger.warning("state box violation %s", msg)
    return violations


# --- exceptional locus on N ---

def exceptional_locus_on_target(params, grid):
    """Zeros of x'(d, y, v) over a (y, v) grid: every v = 0 node plus one root per sign-changing edge"""
    ys, vs = linspace_grid(grid)
    if vs[0] < 0 and not _integer_exponents(params):
        raise DomainError('v', (params.d, ys[0], vs[0]), "grid reaches negative rates")
    yy, vv = np.meshgrid(ys, vs, indexing='ij')
    values = x_rate(params, params.d, yy, vv)
    residual = TOLERANCES['locus_residual']

    points = set()
    for i, y in enumerate(ys):
        for j, v in enumerate(vs):
            if v == 0.0 or abs(values[i, j]) <= residual:
                points.add((float(y), float(v)))

    def along_y(j):
        return lambda y: float(x_rate(params, params.d, y, vs[j]))

    def along_v(i):
        return lambda v: float(x_rate(params, params.d, ys[i], v))

    for i in range(len(ys)):
        for j in range(len(vs)):
            if i + 1 < len(ys) and values[i, j] * values[i + 1, j] < 0:
                y0 = brentq(along_y(j), ys[i], ys[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                points.add((float(y0), float(vs[j])))
            if j + 1 < len(vs) and values[i, j] * values[i, j + 1] < 0:
                v0 = brentq(along_v(i), vs[j], vs[j + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                points.add((float(ys[i]), float(v0)))

    out = sorted(points)
    logger.info("exceptional locus on x=%g: %d points", params.d, len(out))
    return out


def locate_singular_exceptional(params, guess):
    """Solve x' = 0 and n.[Y,X] = 0 on N from a (y, v) guess"""
    sys = affine_lift(params)

    def equations(yv):
        q = np.array([params.d, yv[0], yv[1]])
        _check_v(params, q)
        table = determinants_3d(sys.x, sys.y, q)
        return [table.x[0], table.yx[0]]

    # hybr may stop on its xtol test (status 3) at a converged root; the residual decides
    sol = root(equations, np.asarray(guess, dtype=float), method='hybr', options={'xtol': 1e-12})
    residual = float(np.max(np.abs(equations(sol.x))))
    if not np.all(np.isfinite(sol.x)) or residual > TOLERANCES['locus_residual']:
        raise IntegrationError(f"singular exceptional point not located from {tuple(guess)}: {sol.message}")
    return {'y': float(sol.x[0]), 'v': float(sol.x[1]), 'residual': residual}


# --- terminal point classification ---

def _bang_subtag(table, jac, scale, tol):
    """Codim-1 (with X2(0) and its case) or codim-2 from the contact of sigma+- with N"""
    grad = jac[0]
    drift = float(grad @ table.x)
    dv = float(grad[2])
    l_plus, l_minus = drift + dv, drift - dv
    if min(abs(l_plus), abs(l_minus)) <= tol * scale:
        return {'subtag': 'codim-2'}
    x2 = (l_plus + l_minus) / (l_plus - l_minus)
    if 1.0 + x2 <= 0:
        # u -> -u
        x2 = -x2
    return {'subtag': 'codim-1', 'X2': x2, 'case': codim1_case(x2)}


def _fit_sing_exc(sys, table, jac, q):
    """(b, b1, c) of the local model from bracket data at q"""
    u_s = singular_control(sys, q)
    c = float(table.x[2])
    second = -float(table.yxy[0])
    b = math.copysign(1.0, second) * float(jac[0] @ table.x)
    return SingExcModel(b=b, b1=2.0 * (u_s + c), c=c)


def classify_terminal_point(params, point, tol=None):
    """Tag (y, v) on N as ordinary, bang-exceptional, singular-exceptional or degenerate"""
    tol = TOLERANCES['genericity'] if tol is None else tol
    y, v = point
    q = np.array([params.d, float(y), float(v)])
    check_state_box(params, q)
    record = {'y': float(y), 'v': float(v), 'tag': 'degenerate', 'nX': math.nan, 'nYX': math.nan}
    sys = affine_lift(params)

    if v == 0.0 and min(params.alphas) < 1.0:
        record['nX'] = 0.0
        record['reason'] = 'non-differentiable at v=0'
        return record
    try:
        _check_v(params, q)
        table = determinants_3d(sys.x, sys.y, q)
        jac = sys.x.jacobian_at(q)
    except DomainError as e:
        record['reason'] = str(e)
        return record

    n_x, n_yx = float(table.x[0]), float(table.yx[0])
    record.update(nX=n_x, nYX=n_yx)
    scale = 1.0 + float(np.linalg.norm(jac)) + float(np.linalg.norm(table.x))

    if abs(n_x) > tol * scale:
        record['tag'] = 'ordinary'
        return record

    if abs(n_yx) > tol * scale:
        genericity = det3(table.x, table.y, table.yx)
        record['det'] = genericity
        if abs(genericity) <= tol * scale ** 3:
            record['reason'] = 'det(X,Y,[Y,X]) vanishes'
            return record
        try:
            record.update(_bang_subtag(table, jac, scale, tol))
        except DegenerateCaseError as e:
            record['reason'] = str(e)
            return record
        record['tag'] = 'bang-exceptional'
        return record

    record['det'] = table.d
    if abs(float(jac[0, 1])) <= tol * scale:
        record['reason'] = 'exceptional locus not transverse to N'
        return record
    try:
        model = _fit_sing_exc(sys, table, jac, q)
        record.update(model.as_dict())
        record['case'] = sing_exc_case(model)
    except (DegenerateDError, DegenerateCaseError) as e:
        record['reason'] = str(e)
        return record
    record['tag'] = 'singular-exceptional'
    return record


def classify_locus(params, grid, workers=None):
    """Locate the exceptional locus and classify every point of it"""
    points = exceptional_locus_on_target(params, grid)
    records = parallel_map(lambda p: classify_terminal_point(params, p), points, workers)
    counts = {}
    for r in records:
        counts[r['tag']] = counts.get(r['tag'], 0) + 1
    logger.info("terminal point tags %s", counts)
    return records

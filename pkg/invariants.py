"""
Invariant suites run by the check command; every check yields one result record
"""
import logging
import math
import time

import numpy as np

from cusp import classify_cusp, residual_order, value_gap
from errors import GeodesicsError
from extremal import conjugate_system, pushforward, singular_field
from geomkernel import bracket_field, determinants_3d, lie_bracket, parse_field
from mckeithan import McKeithanParams, affine_lift, exceptional_locus_on_target
from synthesis import (SingExcModel, bang_flow, boundary_mask, brute_force_min_time, exact_event_times,
                       policy_agreement, policy_type, stratify, switching_times)
from zermelo import (RevolutionProblem, SemiNormalCoeffs, build_seminormal, clairaut_residual, direct_extremal,
                     goh_extend, historical_model, revolution_determinants)

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ['suite', 'name', 'value', 'limit', 'passed', 'error']

CASE3 = SingExcModel(b=1.0, b1=1.0, c=0.0)


def _result(suite, name, value, limit, passed):
    return {'suite': suite, 'name': name, 'value': float(value), 'limit': float(limit),
            'passed': bool(passed), 'error': ''}


def _random_poly(rng, variables):
    """Random degree-2 polynomial text with a trigonometric term"""
    x, y, z = variables
    c = rng.integers(-3, 4, size=5)
    return f"{c[0]}*{x}*{y} + {c[1]}*{z}^2 + {c[2]}*sin({x}) + {c[3]}*{y} + {c[4]}"


def _random_field(rng, variables):
    return parse_field([_random_poly(rng, variables) for _ in variables], variables)


# --- geometric kernel ---

def kernel_suite(rng):
    v = ('x', 'y', 'z')
    antisym = 0.0
    jacobi = 0.0
    for _ in range(100):
        z1, z2 = (_random_field(rng, v) for _ in range(2))
        q = rng.uniform(-1, 1, 3)
        antisym = max(antisym, float(np.max(np.abs(lie_bracket(z1, z2, q) + lie_bracket(z2, z1, q)))))
    for _ in range(10):
        z1, z2, z3 = (_random_field(rng, v) for _ in range(3))
        q = rng.uniform(-1, 1, 3)
        total = (lie_bracket(bracket_field(z1, z2), z3, q) + lie_bracket(bracket_field(z2, z3), z1, q)
                 + lie_bracket(bracket_field(z3, z1), z2, q))
        jacobi = max(jacobi, float(np.max(np.abs(total))))

    prob = RevolutionProblem.from_text('1 + r^2/4', '0.5 + r - r^2/3')
    goh = goh_extend(prob)
    det_err = 0.0
    for _ in range(500):
        q = np.array([rng.uniform(-1, 1), rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi, np.pi)])
        table = determinants_3d(goh.x, goh.y, q)
        closed = revolution_determinants(prob, q)
        det_err = max(det_err, float(np.max(np.abs(np.array([table.d, table.d_prime, table.d_second]) - closed))))
    return [
        _result('kernel', 'bracket antisymmetry', antisym, 1e-12, antisym <= 1e-12),
        _result('kernel', 'jacobi identity', jacobi, 1e-9, jacobi <= 1e-9),
        _result('kernel', 'revolution determinants', det_err, 1e-9, det_err <= 1e-9),
    ]


# --- extremal ---

def feedback_suite(rng, maps=5, points=20):
    sys = CASE3.system()
    xs = singular_field(sys)
    worst = 0.0
    for _ in range(maps):
        a, b, c = rng.uniform(-0.5, 0.5, 3)
        phi = parse_field([f'x + {a}*y^2', f'y + {b}*z^2', 'z'], sys.variables)
        conj = conjugate_system(sys, phi, f'{c}*x', f'2 + {c}*y', box=([-0.3] * 3, [0.3] * 3))
        xs_new = singular_field(conj)
        for q in rng.uniform(-0.2, 0.2, (points, 3)):
            worst = max(worst, float(np.max(np.abs(xs_new(phi(q)) - pushforward(phi, xs, q)))))
    return [_result('extremal', 'singular field feedback covariance', worst, 1e-6, worst <= 1e-6)]


# --- zermelo ---

def zermelo_suite(rng, arcs=50):
    prob = RevolutionProblem.from_text('1 + r^2/4', '0.5*r')
    clairaut, drift = 0.0, 0.0
    for _ in range(arcs):
        q0 = [rng.uniform(-0.5, 0.5), 0.0]
        angle = rng.uniform(-np.pi, np.pi)
        arc = direct_extremal(prob, q0, [np.cos(angle), np.sin(angle)], (0.0, 2.0))
        p_theta_drift, _ = clairaut_residual(prob, arc)
        clairaut = max(clairaut, p_theta_drift)
        drift = max(drift, arc.m_drift)

    coeffs = SemiNormalCoeffs.from_mapping({'a01': 2.0, 'b01': 0.25, 'b10': 0.5})
    goh = goh_extend(build_seminormal(coeffs))
    table = determinants_3d(goh.x, goh.y, [0.0, 0.0, 0.0])
    d0 = abs(table.d - 1.0)
    d_prime0 = abs(table.d_prime + coeffs.delta)
    return [
        _result('zermelo', 'clairaut p_theta drift', clairaut, 1e-8, clairaut <= 1e-8),
        _result('zermelo', 'hamiltonian drift', drift, 1e-8, drift <= 1e-8),
        _result('zermelo', 'seminormal D(0) = 1', d0, 1e-9, d0 <= 1e-9),
        _result('zermelo', "seminormal D'(0) = -delta", d_prime0, 1e-9, d_prime0 <= 1e-9),
    ]


# --- cusp ---

def cusp_suite(rng, draws=20, pairs=1000):
    report = classify_cusp(historical_model(), [0.0, 0.0, 0.0])
    jet_err = max(abs(report.jet[0] + 0.5) / 0.5, abs(report.jet[1] + 1.0 / 3.0) * 3.0)
    out = [
        _result('cusp', 'historical orders (2,3)', 0.0, 0.0, tuple(report.orders) == (2, 3)),
        _result('cusp', 'historical jet relative error', jet_err, 0.02, jet_err <= 0.02),
    ]

    spec_err = 0.0
    for _ in range(draws):
        c01, kappa2 = rng.uniform(-2, 2), rng.uniform(-2, 2)
        coeffs = SemiNormalCoeffs.from_mapping({'c01': c01, 'a02': -kappa2})
        rep = classify_cusp(goh_extend(build_seminormal(coeffs)), [0.0, 0.0, 0.0])
        lam = complex(c01 * c01 - kappa2)
        want = sorted([0j, np.sqrt(lam), -np.sqrt(lam)], key=lambda z: (z.real, z.imag))
        got = sorted(rep.spectrum, key=lambda z: (z.real, z.imag))
        spec_err = max(spec_err, max(abs(a - b) for a, b in zip(got, want)))
    out.append(_result('cusp', 'equilibrium spectrum', spec_err, 1e-8, spec_err <= 1e-8))

    t0 = -0.2 * rng.random(pairs)
    t2 = t0 * rng.uniform(0.01, 0.99, pairs)
    gaps = [value_gap(a, b, 1.0).gap for a, b in zip(t0, t2)]
    out.append(_result('cusp', 'value gap positive', min(gaps), 0.0, min(gaps) > 0))

    coeffs = SemiNormalCoeffs.from_mapping({'a01': 2.0})
    slope, _ = residual_order(coeffs, -1.0, -0.5, [0.2, 0.1, 0.05, 0.025])
    out.append(_result('cusp', 'matching residual order', slope, 2.5, slope >= 2.5))
    return out


# --- synthesis ---

def _relative(a, b):
    return abs(a - b) / abs(b)


def agreement(model, grid, workers=None):
    """Share of cells where the leading-order label equals the exact-time label, and the off-boundary misses"""
    formula = stratify(model, grid, workers=workers)
    exact = stratify(model, grid, workers=workers, use_oracle=True)
    a, b = formula.label_matrix(), exact.label_matrix()
    differ = a != b
    stray = int(np.sum(differ & ~boundary_mask(a)))
    return 1.0 - float(np.mean(differ)), stray


def synthesis_suite(rng, workers=None):
    formula = switching_times(CASE3, 0.1, 0.06, 1)
    exact = exact_event_times(CASE3, 0.1, 0.06, 1)
    spot = max(_relative(f, e) for f, e in zip(formula, exact))
    out = [_result('synthesis', 'spot switching times within 25%', spot, 0.25, spot <= 0.25)]

    sigma, omega = 0.6, 0.5
    hs = np.array([0.08, 0.04, 0.02, 0.01])
    errors = []
    for h in hs:
        w, s = omega * h * h, sigma * h
        f, e = switching_times(CASE3, w, s, 1), exact_event_times(CASE3, w, s, 1)
        errors.append(max(_relative(f[i], e[i]) for i in range(3) if not math.isnan(e[i])))
    slope = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    out.append(_result('synthesis', 'switching time convergence order', slope, 1.0, round(slope) >= 1))

    share, stray = agreement(CASE3, [-0.05, 0.05, -0.05, 0.05, 41], workers)
    out.append(_result('synthesis', 'formula labels match exact-time labels', share, 0.95, share >= 0.95))
    out.append(_result('synthesis', 'label disagreements off stratum boundaries', stray, 0, stray == 0))

    _, share_off, _ = policy_agreement(CASE3, [-0.05, 0.05, -0.05, 0.05, 41], workers, radius=2)
    out.append(_result('synthesis', 'predicted policy matches oracle policy', share_off, 0.95, share_off >= 0.95))

    start = bang_flow(CASE3, (0.0, 0.1, 0.06), 1.0, -0.05)
    t_min, policy = brute_force_min_time(CASE3, start)
    err = abs(t_min - 0.05)
    out.append(_result('synthesis', 'oracle round trip', err, 1e-4, err <= 1e-4 and policy_type(policy) == '+'))
    return out


# --- mckeithan ---

def mckeithan_suite(rng, points=200):
    factorized = McKeithanParams(0.0, 0.0, 1.0, 2.0, 0.5, 1.0, 1.0, 2.0, 0.3)
    locus = exceptional_locus_on_target(factorized, [0.0, 2.0, 0.0, 2.0, 101])
    branch = max((min(abs(y - 0.7), abs(y - 1.7)) for y, v in locus if v > 0), default=math.inf)

    params = McKeithanParams(1.0, 2.0, 1.0, 2.0, 0.5, 1.0, 1.0, 2.0, 0.3)
    sys = affine_lift(params)
    worst = 0.0
    for q in rng.uniform([0.0, 0.0, 0.05], [1.0, 2.0, 2.0], (points, 3)):
        table = determinants_3d(sys.x, sys.y, q)
        # n.[Y,X] = -dx'/dv
        worst = max(worst, abs(table.yx[0] + sys.x.jacobian_at(q)[0, 2]))
    return [
        _result('mckeithan', 'factorized locus branches', branch, 1e-10, branch <= 1e-10),
        _result('mckeithan', 'bracket projection identity', worst, 1e-9, worst <= 1e-9),
    ]


SUITES = {
    'kernel': kernel_suite,
    'extremal': feedback_suite,
    'zermelo': zermelo_suite,
    'cusp': cusp_suite,
    'synthesis': synthesis_suite,
    'mckeithan': mckeithan_suite,
}


def run_suite(name, seed=0):
    """Run one suite; an exception becomes a failed record carrying the error"""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    try:
        results = SUITES[name](rng)
    except GeodesicsError as e:
        logger.error("suite %s raised %s: %s", name, type(e).__name__, e)
        results = [{'suite': name, 'name': 'suite', 'value': math.nan, 'limit': math.nan,
                    'passed': False, 'error': f"{type(e).__name__}: {e}"}]
    logger.info("suite %s finished in %.2fs", name, time.perf_counter() - start)
    for r in results:
        level = logging.INFO if r['passed'] else logging.ERROR
        logger.log(level, "check suite=%s name=%s value=%.3e limit=%.3e passed=%s",
                   name, r['name'], r['value'], r['limit'], r['passed'])
    return results


def run_all(seed=0, suites=None):
    """Every suite in order; suites share no state"""
    return [r for name in (suites or SUITES) for r in run_suite(name, seed)]

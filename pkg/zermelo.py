"""
Zermelo navigation problems: direct extremals, Goh extension, current regimes,
revolution/Clairaut case and the semi-normal form near a cusp point
"""
import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from config import INTEGRATOR, TOLERANCES
from errors import IntegrationError, NormalizationError, VanishingTransversePartError
from expressions import parse_expression
from extremal import AffineControlSystem, SINGULAR, singular_field
from geomkernel import ExprField, compile_exprs, evaluate_checked, symbol

logger = logging.getLogger(__name__)

ALPHA = 'alpha'


@dataclass(frozen=True)
class ZermeloProblem:
    """Isothermal metric a(x,y)(dx^2+dy^2) with current F0 = b d/dx + c d/dy"""
    a: sp.Expr
    b: sp.Expr
    c: sp.Expr
    variables = ('x', 'y')

    @classmethod
    def from_text(cls, a, b, c):
        v = cls.variables
        return cls(parse_expression(a, v), parse_expression(b, v), parse_expression(c, v))

    def frame(self):
        """(F0, F1, F2) as component lists; F1, F2 are g-orthonormal"""
        s = 1 / sp.sqrt(self.a)
        return [self.b, self.c], [s, sp.Integer(0)], [sp.Integer(0), s]

    def current_norm_expr(self):
        return sp.sqrt(self.a * (self.b ** 2 + self.c ** 2))


@dataclass(frozen=True)
class RevolutionProblem:
    """Metric dr^2 + m(r)^2 dtheta^2 with current F0 = mu(r) d/dtheta"""
    m: sp.Expr
    mu: sp.Expr
    variables = ('r', 'theta')

    @classmethod
    def from_text(cls, m, mu):
        v = cls.variables
        return cls(parse_expression(m, v), parse_expression(mu, v))

    def frame(self):
        return [sp.Integer(0), self.mu], [sp.Integer(1), sp.Integer(0)], [sp.Integer(0), 1 / self.m]

    def current_norm_expr(self):
        return sp.Abs(self.m * self.mu)


@dataclass(frozen=True)
class GohSystem(AffineControlSystem):
    """X = F0 + cos(alpha) F1 + sin(alpha) F2, Y = d/dalpha; the control alpha-dot is unbounded"""
    problem: object = field(default=None, compare=False)


@dataclass
class GeodesicArc:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray
    M: np.ndarray
    label: str  # hyperbolic | elliptic | abnormal
    dense: object = field(default=None, repr=False)

    @property
    def m_drift(self):
        return float(np.max(np.abs(self.M - self.M[0])))


# --- Goh extension ---

@functools.lru_cache(maxsize=64)
def goh_extend(prob):
    """Lift the problem to the 3D affine system on (q, alpha)"""
    variables = tuple(prob.variables) + (ALPHA,)
    alpha = symbol(ALPHA)
    f0, f1, f2 = prob.frame()
    x = [f0[i] + sp.cos(alpha) * f1[i] + sp.sin(alpha) * f2[i] for i in range(2)] + [sp.Integer(0)]
    y = [sp.Integer(0), sp.Integer(0), sp.Integer(1)]
    return GohSystem(ExprField(variables, tuple(x)), ExprField(variables, tuple(y)),
                     bounded=False, problem=prob)


# --- direct parameterization ---

class _DirectHamiltonian:
    """Compiled pieces of M = H0 + sqrt(H1^2 + H2^2) and its flow"""

    def __init__(self, prob):
        qs = [symbol(v) for v in prob.variables]
        ps = [symbol(f'p_{v}') for v in prob.variables]
        f0, f1, f2 = prob.frame()
        h0 = sum(p * f for p, f in zip(ps, f0))
        h1 = sum(p * f for p, f in zip(ps, f1))
        h2 = sum(p * f for p, f in zip(ps, f2))
        rho2 = h1 ** 2 + h2 ** 2
        m = h0 + sp.sqrt(rho2)
        dm_dp = [sp.diff(m, p) for p in ps]
        dm_dq = [sp.diff(m, q) for q in qs]

        def hdot(h):
            return sum(sp.diff(h, q) * dp - sp.diff(h, p) * dq for q, p, dp, dq in zip(qs, ps, dm_dp, dm_dq))

        alpha_dot = (h1 * hdot(h2) - h2 * hdot(h1)) / rho2
        args = qs + ps
        self.rhs_funcs = compile_exprs(args, dm_dp + [-d for d in dm_dq])
        self.m_func = compile_exprs(args, [m])
        self.parts = compile_exprs(args, [h0, h1, h2])
        self.alpha_dot = compile_exprs(args, [alpha_dot])

    def rhs(self, t, state):
        return evaluate_checked(self.rhs_funcs, state)

    def m(self, state):
        return float(evaluate_checked(self.m_func, state)[0])

    def h012(self, state):
        return evaluate_checked(self.parts, state)


@functools.lru_cache(maxsize=64)
def _direct(prob):
    return _DirectHamiltonian(prob)


def _scale_covector(ham, q0, p0):
    p_norm = float(np.linalg.norm(p0))
    if p_norm == 0.0:
        raise VanishingTransversePartError("zero initial covector")
    m0 = ham.m(np.concatenate([q0, p0]))
    if abs(m0) <= TOLERANCES['exceptional_m'] * p_norm:
        return p0 / p_norm, 'abnormal'
    return p0 / abs(m0), ('hyperbolic' if m0 > 0 else 'elliptic')


def direct_extremal(prob, q0, p0, t_span, tol=None):
    """Integrate the true Hamiltonian M = H0 + sqrt(H1^2+H2^2) after scaling p0 to |M| = 1"""
    ham = _direct(prob)
    q0 = np.asarray(q0, dtype=float)
    p0, label = _scale_covector(ham, q0, np.asarray(p0, dtype=float))
    state0 = np.concatenate([q0, p0])
    _, h1, h2 = ham.h012(state0)
    limit = TOLERANCES['transverse_part']
    if np.hypot(h1, h2) <= limit * np.linalg.norm(p0):
        raise VanishingTransversePartError(f"H1^2+H2^2 vanishes at q={tuple(q0)}")

    def transverse(t, state):
        _, a, b = ham.h012(state)
        return np.hypot(a, b) - limit * np.linalg.norm(state[2:])
    transverse.terminal = True

    rtol = tol or INTEGRATOR['rtol']
    sol = solve_ivp(ham.rhs, t_span, state0, method=INTEGRATOR['method'], rtol=rtol, atol=rtol * 1e-2,
                    dense_output=True, events=[transverse])
    if sol.status == -1:
        raise IntegrationError(sol.message)
    if sol.status == 1:
        raise VanishingTransversePartError(f"H1^2+H2^2 vanished at t={sol.t_events[0][0]:.9g}")

    states = sol.y.T
    parts = np.array([ham.h012(s) for s in states])
    alpha = np.unwrap(np.arctan2(parts[:, 2], parts[:, 1]))
    m_values = np.array([ham.m(s) for s in states])
    alpha_dot = np.array([evaluate_checked(ham.alpha_dot, s)[0] for s in states])
    arc = GeodesicArc(t=sol.t.copy(), q=states[:, :2].copy(), p=states[:, 2:].copy(), alpha=alpha,
                      alpha_dot=alpha_dot, M=m_values, label=label, dense=sol.sol)
    if arc.m_drift > TOLERANCES['hamiltonian_drift']:
        logger.warning("direct extremal drift=%.3e label=%s", arc.m_drift, label)
    return arc


def initial_heading(prob, q0, p0):
    """alpha(0) = atan2(H2, H1) matching a covector to the Goh lift"""
    ham = _direct(prob)
    _, h1, h2 = ham.h012(np.concatenate([np.asarray(q0, float), np.asarray(p0, float)]))
    return float(np.arctan2(h2, h1))


def geodesic_records(arc):
    """Rows in the trajectory column layout, lifted to (q, alpha) with p_alpha = 0"""
    rows = []
    for i in range(len(arc.t)):
        rows.append({
            't': float(arc.t[i]),
            'q1': float(arc.q[i, 0]), 'q2': float(arc.q[i, 1]), 'q3': float(arc.alpha[i]),
            'p1': float(arc.p[i, 0]), 'p2': float(arc.p[i, 1]), 'p3': 0.0,
            'u': float(arc.alpha_dot[i]),
            'H_Y': 0.0,
            'M': float(arc.M[i]),
            'arc_kind': SINGULAR,
        })
    return rows


def abnormal_covectors(prob, q, samples=720):
    """Unit covectors with M(q, p) = 0, found on the covector angle; empty in weak current"""
    ham = _direct(prob)
    q = np.asarray(q, dtype=float)

    def level(theta):
        return ham.m(np.concatenate([q, [np.cos(theta), np.sin(theta)]]))

    thetas = np.linspace(-np.pi, np.pi, samples + 1)
    values = np.array([level(t) for t in thetas])
    roots = []
    for k in range(samples):
        if values[k] == 0.0:
            roots.append(thetas[k])
        elif values[k] * values[k + 1] < 0:
            roots.append(brentq(level, thetas[k], thetas[k + 1], xtol=1e-15))
    return [np.array([np.cos(t), np.sin(t)]) for t in roots]


# --- regimes and collinear set ---

def current_norm(prob, q):
    fn = compile_exprs(tuple(symbol(v) for v in prob.variables), [prob.current_norm_expr()])
    return float(evaluate_checked(fn, np.asarray(q, dtype=float))[0])


def current_regime(prob, q, tol=None):
    """('strong' | 'weak' | 'moderate', ||F0||_g)"""
    tol = TOLERANCES['regime'] if tol is None else tol
    value = current_norm(prob, q)
    if value > 1.0 + tol:
        return 'strong', value
    if value < 1.0 - tol:
        return 'weak', value
    return 'moderate', value


def collinear_residual(prob, q, alpha):
    """||F0 + cos(alpha) F1 + sin(alpha) F2|| in coordinates"""
    sys = goh_extend(prob)
    v = sys.x(list(q) + [alpha])
    return float(np.hypot(v[0], v[1]))


def revolution_determinants(prob, q):
    """Closed forms D = 1/m, D' = -mu' sin^2(alpha) + m' sin(alpha)/m^2, D'' = mu sin(alpha) + 1/m at (r, theta, alpha)"""
    r = symbol('r')
    fn = compile_exprs((r,), [prob.m, prob.mu, sp.diff(prob.m, r), sp.diff(prob.mu, r)])
    m, mu, dm, dmu = evaluate_checked(fn, [q[0]], labels=['m', 'mu', "m'", "mu'"])
    s = np.sin(q[2])
    return 1.0 / m, -dmu * s * s + dm * s / (m * m), mu * s + 1.0 / m


def clairaut_residual(prob, arc):
    """(max |p_theta(t) - p_theta(0)|, max |p_theta (mu + 1/(m sin alpha)) + p0|) where |sin alpha| >= 0.1"""
    if isinstance(arc, GeodesicArc):
        r, p_theta, alpha, m_level = arc.q[:, 0], arc.p[:, 1], arc.alpha, arc.M
    else:
        r, p_theta, alpha, m_level = arc.q[:, 0], arc.p[:, 1], arc.q[:, 2], arc.m_values
    rs = (symbol('r'),)
    m_fn = compile_exprs(rs, [prob.m])
    mu_fn = compile_exprs(rs, [prob.mu])
    drift = float(np.max(np.abs(p_theta - p_theta[0])))
    residuals = [0.0]
    for ri, pt, al, level in zip(r, p_theta, alpha, m_level):
        s = np.sin(al)
        if abs(s) < 0.1:
            continue
        m_val = evaluate_checked(m_fn, [ri])[0]
        mu_val = evaluate_checked(mu_fn, [ri])[0]
        # p0 = -M
        residuals.append(abs(pt * (mu_val + 1.0 / (m_val * s)) - level))
    return drift, float(max(residuals))


# --- semi-normal form ---

@dataclass
class SemiNormalCoeffs:
    """Jet coefficients a_ij, b_ij, c_ij (i + j <= 2) keyed by (i, j)"""
    a: dict
    b: dict
    c: dict

    @classmethod
    def from_mapping(cls, values):
        """Build from {'a01': ..., 'b10': ...}; missing normalization terms take their normal values"""
        coeffs = {'a': {}, 'b': {}, 'c': {}}
        for key, value in values.items():
            coeffs[key[0]][(int(key[1]), int(key[2]))] = float(value)
        coeffs['a'].setdefault((0, 0), 1.0)
        coeffs['b'].setdefault((0, 0), -1.0)
        coeffs['c'].setdefault((0, 0), 0.0)
        coeffs['a'].setdefault((1, 0), 2.0 * coeffs['b'].get((1, 0), 0.0))
        return cls(coeffs['a'], coeffs['b'], coeffs['c'])

    def get(self, name, i, j):
        return getattr(self, name).get((i, j), 0.0)

    @property
    def delta(self):
        return self.get('a', 0, 1) / 2 - self.get('b', 0, 1)

    @property
    def kappa1(self):
        return -self.get('a', 1, 1) / 2 + 3 * self.get('b', 0, 1) * self.get('b', 1, 0) + self.get('b', 1, 1)

    @property
    def kappa2(self):
        return -self.get('a', 0, 2) + 3 * self.get('b', 0, 1) ** 2 + 2 * self.get('b', 0, 2)

    @property
    def kappa2p(self):
        return -self.get('a', 2, 0) + 3 * self.get('b', 1, 0) ** 2 + 2 * self.get('b', 2, 0)

    def invariants(self):
        return {'delta': self.delta, 'kappa1': self.kappa1, 'kappa2': self.kappa2, 'kappa2p': self.kappa2p}


def check_normalization(coeffs, tol=1e-12):
    checks = [
        ('a00=1', coeffs.get('a', 0, 0), 1.0),
        ('b00=-1', coeffs.get('b', 0, 0), -1.0),
        ('c00=0', coeffs.get('c', 0, 0), 0.0),
        ('a10=2*b10', coeffs.get('a', 1, 0), 2.0 * coeffs.get('b', 1, 0)),
    ]
    for identity, got, want in checks:
        if abs(got - want) > tol:
            raise NormalizationError(identity, f"(got {got:.12g}, expected {want:.12g})")


def build_seminormal(coeffs, order=2, box=1.0):
    """Polynomial-coefficient problem from the normalized jet"""
    check_normalization(coeffs)
    x, y = symbol('x'), symbol('y')

    def poly(name):
        terms = [sp.nsimplify(v, rational=True) * x ** i * y ** j
                 for (i, j), v in sorted(getattr(coeffs, name).items()) if i + j <= order and v != 0.0]
        return sp.Add(*terms) if terms else sp.Integer(0)

    prob = ZermeloProblem(poly('a'), poly('b'), poly('c'))
    corners = [(sx * box, sy * box) for sx in (-1, 0, 1) for sy in (-1, 0, 1)]
    a_fn = sp.lambdify((x, y), prob.a, modules='math')
    if any(a_fn(*pt) <= 0 for pt in corners):
        logger.warning("conformal factor not positive on the working box |x|,|y| <= %g", box)
    return prob


# --- historical problem ---

def historical_problem():
    """Linear current y d/dx in the Euclidean plane"""
    return ZermeloProblem.from_text('1', 'y', '0')


def historical_model():
    """Order-2 expansion at alpha = 0 of the abnormal geodesic equation, with y shifted by 1"""
    v = ('x', 'y', ALPHA)
    return ExprField(v, tuple(parse_expression(s, v) for s in ('y - alpha^2/2', 'alpha', '-1 + alpha^2')))


def historical_exact():
    """Exact singular geodesic field of the linear-current problem, heading equation alpha' = -cos(alpha)^2"""
    return singular_field(goh_extend(historical_problem()))


def problem_from_config(payload):
    """Build a problem object from a validated JSON payload"""
    kind = payload['type']
    if kind == 'zermelo-isothermal':
        return ZermeloProblem.from_text(payload['a'], payload['b'], payload['c'])
    if kind == 'zermelo-revolution':
        return RevolutionProblem.from_text(payload['m'], payload['mu'])
    if kind == 'zermelo-seminormal':
        coeffs = SemiNormalCoeffs.from_mapping(payload['coeffs'])
        return build_seminormal(coeffs, payload.get('order', 2))
    if kind == 'historical-model':
        return historical_problem()
    raise ValueError(f"not a Zermelo problem type: {kind}")

"""
Maximum Principle machinery: bang and singular extremal flows, switching detection,
singular feedback, classification and feedback covariance
"""
import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from config import INTEGRATOR, TOLERANCES
from errors import (
    ChatteringError,
    DegenerateDError,
    DimensionError,
    IntegrationError,
    NonInvertibleMapError,
    SaturationReachedError,
)
from expressions import parse_expression
from geomkernel import (
    ExprField,
    bracket_field,
    determinant_fields,
    determinants_3d,
)

logger = logging.getLogger(__name__)

BANG_PLUS = 'bang+1'
BANG_MINUS = 'bang-1'
SINGULAR = 'singular'


@dataclass(frozen=True)
class AffineControlSystem:
    """dq/dt = X(q) + u Y(q), with |u| <= 1 when bounded"""
    x: ExprField
    y: ExprField
    bounded: bool = True

    def __post_init__(self):
        if self.x.variables != self.y.variables:
            raise DimensionError(f"X over {self.x.variables} but Y over {self.y.variables}")

    @property
    def dim(self):
        return self.x.dim

    @property
    def variables(self):
        return self.x.variables

    def velocity(self, q, u):
        return self.x(q) + u * self.y(q)


@dataclass
class SwitchEvent:
    t: float
    q: np.ndarray
    kind: str  # ordinary | fold | saturation


@dataclass
class ExtremalArc:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    u: np.ndarray
    kind: str
    klass: str
    M: float
    h_y: np.ndarray = field(default=None)
    m_values: np.ndarray = field(default=None)
    dense: object = field(default=None, repr=False)
    events: list = field(default_factory=list)

    @property
    def samples(self):
        return [(float(t), q, p, float(u)) for t, q, p, u in zip(self.t, self.q, self.p, self.u)]

    @property
    def m_drift(self):
        if self.m_values is None or len(self.m_values) == 0:
            return 0.0
        return float(np.max(np.abs(self.m_values - self.m_values[0])))


@dataclass
class Trajectory:
    """Output of singular_flow; status is completed, degenerate or saturated"""
    t: np.ndarray
    q: np.ndarray
    u: np.ndarray
    status: str
    events: list = field(default_factory=list)
    dense: object = field(default=None, repr=False)


# --- Hamiltonian lifts ---

def hamiltonians(sys, q, p):
    """(H_X, H_Y, H_[Y,X]) at (q, p)"""
    p = np.asarray(p, dtype=float)
    yx = bracket_field(sys.y, sys.x)
    return float(p @ sys.x(q)), float(p @ sys.y(q)), float(p @ yx(q))


def _hamiltonian_rhs(sys, control):
    """Right-hand side of the constrained Hamiltonian system; control(q) gives u"""
    n = sys.dim

    def rhs(t, state):
        q, p = state[:n], state[n:]
        u = control(q)
        qdot = sys.x(q) + u * sys.y(q)
        pdot = -(sys.x.jacobian_at(q).T @ p + u * (sys.y.jacobian_at(q).T @ p))
        return np.concatenate([qdot, pdot])

    return rhs


def _classify_level(m_value, p_norm):
    if abs(m_value) <= TOLERANCES['exceptional_m'] * p_norm:
        return 'exceptional'
    return 'hyperbolic' if m_value > 0 else 'elliptic'


def _solver_options(tol):
    rtol = tol or INTEGRATOR['rtol']
    return {'method': INTEGRATOR['method'], 'rtol': rtol, 'atol': rtol * 1e-2, 'dense_output': True}


def _make_arc(sys, sol, controls, kind, p_norm):
    n = sys.dim
    q = sol.y[:n].T.copy()
    p = sol.y[n:].T.copy()
    h_x = np.array([pi @ sys.x(qi) for qi, pi in zip(q, p)])
    h_y = np.array([pi @ sys.y(qi) for qi, pi in zip(q, p)])
    u = np.asarray(controls, dtype=float)
    m_values = h_x + u * h_y
    arc = ExtremalArc(t=sol.t.copy(), q=q, p=p, u=u, kind=kind,
                      klass=_classify_level(m_values[0], p_norm), M=float(m_values[0]),
                      h_y=h_y, m_values=m_values, dense=sol.sol)
    drift = arc.m_drift
    if drift > TOLERANCES['hamiltonian_drift'] * max(1.0, p_norm):
        logger.warning("hamiltonian drift kind=%s drift=%.3e t=[%.6g, %.6g]", kind, drift, sol.t[0], sol.t[-1])
    return arc


# --- singular feedback ---

def _degeneracy_threshold(table):
    return TOLERANCES['degenerate_d'] * (1.0 + table.columns_norm)


def singular_control(sys, q):
    """Singular feedback u_s(q) = -D'(q)/D(q)"""
    table = determinants_3d(sys.x, sys.y, q)
    threshold = _degeneracy_threshold(table)
    if abs(table.d) < threshold:
        raise DegenerateDError(q, table.d, threshold)
    u = -table.d_prime / table.d
    if is_saturating(sys, u):
        logger.debug("singular control saturating u_s=%.6g q=%s", u, tuple(np.round(q, 12)))
    return u


def is_saturating(sys, u):
    return bool(sys.bounded and abs(u) >= 1.0)


@functools.lru_cache(maxsize=64)
def singular_field(sys):
    """X_s = X + u_s Y with u_s = -D'/D as a symbolic field"""
    d, d_prime, _ = determinant_fields(sys.x, sys.y)
    u_s = -d_prime / d
    return ExprField(sys.variables,
                     tuple(xc + u_s * yc for xc, yc in zip(sys.x.components, sys.y.components)),
                     sys.x.parameters)


def _singular_events(sys, n):
    def degenerate(t, state):
        table = determinants_3d(sys.x, sys.y, state[:n])
        return abs(table.d) - _degeneracy_threshold(table)
    degenerate.terminal = True

    def saturation(t, state):
        table = determinants_3d(sys.x, sys.y, state[:n])
        if table.d == 0.0:
            return 1.0
        return 1.0 - abs(table.d_prime / table.d)
    saturation.terminal = True

    return [degenerate, saturation] if sys.bounded else [degenerate]


def _check_singular_start(sys, q0):
    u0 = singular_control(sys, q0)
    if is_saturating(sys, u0):
        raise SaturationReachedError(q0, u0)
    return u0


def _singular_status(sol, sys, n):
    if sol.status != 1:
        return 'completed', []
    if len(sol.t_events[0]):
        return 'degenerate', []
    t_ev = sol.t_events[1][0]
    event = SwitchEvent(float(t_ev), sol.y_events[1][0][:n].copy(), 'saturation')
    logger.info("saturation reached t=%.9g q=%s", t_ev, tuple(event.q))
    return 'saturated', [event]


def singular_flow(sys, q0, t_span, tol=None):
    """Integrate X_s from q0; stops early on degeneracy of D or saturation"""
    q0 = np.asarray(q0, dtype=float)
    _check_singular_start(sys, q0)
    n = sys.dim

    def controls(q):
        table = determinants_3d(sys.x, sys.y, q)
        return -table.d_prime / table.d

    def rhs(t, q):
        return sys.x(q) + controls(q) * sys.y(q)

    sol = solve_ivp(rhs, t_span, q0, events=_singular_events(sys, n), **_solver_options(tol))
    if sol.status == -1:
        raise IntegrationError(sol.message)
    status, events = _singular_status(sol, sys, n)
    u = np.array([controls(qi) for qi in sol.y.T])
    if status == 'degenerate':
        logger.warning("singular flow stopped on degenerate D at t=%.9g", sol.t[-1])
    return Trajectory(t=sol.t.copy(), q=sol.y.T.copy(), u=u, status=status, events=events, dense=sol.sol)


def singular_covector(sys, q, orientation=1.0):
    """Unit covector annihilating Y and [Y,X] at q (3D)"""
    table = determinants_3d(sys.x, sys.y, q)
    p = np.cross(table.y, table.yx)
    norm = np.linalg.norm(p)
    if norm == 0.0:
        raise DegenerateDError(q, 0.0, 0.0)
    return orientation * p / norm


def singular_extremal(sys, q0, t_span, p0=None, tol=None):
    """Singular flow lifted to (q, p); p0 defaults to the unit covector of the constraint set"""
    q0 = np.asarray(q0, dtype=float)
    _check_singular_start(sys, q0)
    p0 = singular_covector(sys, q0) if p0 is None else np.asarray(p0, dtype=float)
    n = sys.dim

    def control(q):
        table = determinants_3d(sys.x, sys.y, q)
        return -table.d_prime / table.d

    sol = solve_ivp(_hamiltonian_rhs(sys, control), t_span, np.concatenate([q0, p0]),
                    events=_singular_events(sys, n), **_solver_options(tol))
    if sol.status == -1:
        raise IntegrationError(sol.message)
    status, events = _singular_status(sol, sys, n)
    controls = [control(qi) for qi in sol.y[:n].T]
    arc = _make_arc(sys, sol, controls, SINGULAR, float(np.linalg.norm(p0)))
    if status != 'completed':
        logger.info("singular extremal ended status=%s t=%.9g", status, sol.t[-1])
    return arc


# --- bang-bang extremals ---

def _pick_control(sys, q, p, direction, p_norm):
    _, h_y, h_yx = hamiltonians(sys, q, p)
    eps = 1e-12 * p_norm
    if abs(h_y) > eps:
        return (1.0 if h_y > 0 else -1.0), h_y
    if abs(h_yx) > eps:
        # dH_Y/dt = H_[Y,X]
        return (1.0 if direction * h_yx > 0 else -1.0), h_y
    return 0.0, h_y


def _switch_event(sys, u, n):
    def switching(t, state):
        return u * float(state[n:] @ sys.y(state[:n]))
    switching.terminal = True
    switching.direction = -1
    return switching


def extremal_flow(sys, z0, t_span, tol=None, max_switches=None):
    """Integrate the bang extremal u = sign(H_Y), splitting into arcs at switching times"""
    n = sys.dim
    q0 = np.asarray(z0.q, dtype=float)
    p0 = np.asarray(z0.p, dtype=float)
    p_norm = float(np.linalg.norm(p0))
    if p_norm == 0.0:
        raise IntegrationError("extremal flow needs a nonzero covector")
    t_start, t_end = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t_end >= t_start else -1.0
    limit = max_switches or max(TOLERANCES['max_switches_per_unit'],
                                int(math.ceil(TOLERANCES['max_switches_per_unit'] * abs(t_end - t_start))))
    options = _solver_options(tol)

    arcs, events = [], []
    t, state = t_start, np.concatenate([q0, p0])
    forced = None
    while direction * (t_end - t) > 0:
        q, p = state[:n], state[n:]
        if forced is not None:
            u, forced = forced, None
        else:
            u, _ = _pick_control(sys, q, p, direction, p_norm)
        if u == 0.0:
            arcs.append(_singular_tail(sys, q, p, (t, t_end), tol, p_norm))
            break
        sol = solve_ivp(_hamiltonian_rhs(sys, lambda _q, u=u: u), (t, t_end), state,
                        events=[_switch_event(sys, u, n)], **options)
        if sol.status == -1:
            raise IntegrationError(sol.message)
        arcs.append(_make_arc(sys, sol, [u] * len(sol.t), BANG_PLUS if u > 0 else BANG_MINUS, p_norm))
        if sol.status != 1:
            break
        t_ev = float(sol.t_events[0][0])
        state = sol.y_events[0][0].copy()
        _, h_y, h_yx = hamiltonians(sys, state[:n], state[n:])
        kind = 'ordinary' if abs(h_yx) > 1e-6 * p_norm else 'fold'
        events.append(SwitchEvent(t_ev, state[:n].copy(), kind))
        logger.debug("switch t=%.12g kind=%s H_Y=%.3e", t_ev, kind, h_y)
        if len(events) > limit:
            raise ChatteringError(len(events), limit, t_ev)
        t = t_ev
        if kind == 'ordinary':
            forced = -u
    for arc in arcs:
        arc.events = events
    return arcs


def _singular_tail(sys, q, p, t_span, tol, p_norm):
    """H_Y and H_[Y,X] both vanish: follow the singular feedback, or u = 0 if it is undefined"""
    try:
        return singular_extremal(sys, q, t_span, p0=p, tol=tol)
    except (DegenerateDError, SaturationReachedError, DimensionError) as e:
        logger.info("singular start without feedback (%s); integrating u=0", e)
    sol = solve_ivp(_hamiltonian_rhs(sys, lambda _q: 0.0), t_span, np.concatenate([q, p]),
                    **_solver_options(tol))
    if sol.status == -1:
        raise IntegrationError(sol.message)
    return _make_arc(sys, sol, [0.0] * len(sol.t), SINGULAR, p_norm)


def switch_events(arcs):
    return getattr(arcs[0], 'events', []) if arcs else []


# --- classification ---

def legendre_clebsch(sys, z):
    """{{H_Y,H_X},H_Y}(z) = p . [[Y,X],Y](q)"""
    yx = bracket_field(sys.y, sys.x)
    yxy = bracket_field(yx, sys.y)
    return float(np.asarray(z.p, dtype=float) @ yxy(z.q))


def classify_point(sys, q, tol=None):
    """hyperbolic / elliptic by the sign of D*D'', exceptional on D'' = 0"""
    tol = TOLERANCES['exceptional_d2'] if tol is None else tol
    table = determinants_3d(sys.x, sys.y, q)
    threshold = _degeneracy_threshold(table)
    if abs(table.d) < threshold:
        raise DegenerateDError(q, table.d, threshold)
    if abs(table.d_second) <= tol:
        return 'exceptional'
    return 'hyperbolic' if table.d * table.d_second > 0 else 'elliptic'


# --- feedback pseudo-group ---

def pushforward(phi, z, q):
    """(phi_* Z)(phi(q)) = Dphi(q) Z(q)"""
    return phi.jacobian_at(q) @ z(q)


def _as_expr(value, variables):
    if isinstance(value, sp.Basic):
        return value
    return parse_expression(str(value), variables)


def _inverse_map(phi, box, samples, rng):
    targets = sp.symbols(' '.join(f'_w{i}' for i in range(phi.dim)), real=True)
    if phi.dim == 1:
        targets = (targets,)
    equations = [c - w for c, w in zip(phi.components, targets)]
    try:
        solutions = sp.solve(equations, phi.symbols, dict=True)
    except NotImplementedError as e:
        raise NonInvertibleMapError(f"cannot invert map symbolically: {e}") from e
    if not solutions:
        raise NonInvertibleMapError("map has no inverse on the working box")

    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    points = lo + (hi - lo) * rng.random((samples, phi.dim))
    for sol in solutions:
        if any(s not in sol for s in phi.symbols):
            continue
        inverse = tuple(sol[s] for s in phi.symbols)
        inv_fn = sp.lambdify(targets, inverse, modules='math')
        try:
            ok = all(np.allclose(inv_fn(*phi(q)), q, atol=TOLERANCES['invertibility'], rtol=0.0) for q in points)
        except (ValueError, TypeError, ZeroDivisionError):
            ok = False
        if ok:
            return targets, inverse, points
    raise NonInvertibleMapError("no branch of the inverse round-trips on the working box")


def conjugate_system(sys, phi, alpha_fb, beta_fb, box=None, samples=32, seed=0):
    """Image of (X, Y) under the feedback u = alpha + beta v followed by the change of coordinates phi"""
    if phi.variables != sys.variables:
        raise DimensionError(f"phi over {phi.variables} but system over {sys.variables}")
    box = box or ([-1.0] * sys.dim, [1.0] * sys.dim)
    rng = np.random.default_rng(seed)
    targets, inverse, points = _inverse_map(phi, box, samples, rng)

    alpha = _as_expr(alpha_fb, sys.variables)
    beta = _as_expr(beta_fb, sys.variables)
    beta_fn = sp.lambdify(phi.symbols, beta, modules='math')
    for q in points:
        if abs(float(beta_fn(*q))) <= TOLERANCES['invertibility']:
            raise NonInvertibleMapError(f"feedback beta vanishes near {tuple(q)}")
        if abs(np.linalg.det(phi.jacobian_at(q))) <= TOLERANCES['invertibility']:
            raise NonInvertibleMapError(f"phi is singular near {tuple(q)}")

    jac = phi.jacobian_exprs
    x_tilde = sp.Matrix(sys.x.components) + alpha * sp.Matrix(sys.y.components)
    y_tilde = beta * sp.Matrix(sys.y.components)
    back = dict(zip(phi.symbols, inverse))
    rename = dict(zip(targets, phi.symbols))

    def transported(vec):
        image = jac * vec
        return tuple(sp.sympify(c).xreplace(back).xreplace(rename) for c in image)

    x_new = ExprField(sys.variables, transported(x_tilde), sys.x.parameters)
    y_new = ExprField(sys.variables, transported(y_tilde), sys.y.parameters)
    return AffineControlSystem(x_new, y_new, sys.bounded)


# --- output records ---

def trajectory_records(arcs):
    """Rows with columns t, q1..qn, p1..pn, u, H_Y, M, arc_kind"""
    rows = []
    for arc in arcs:
        n = arc.q.shape[1]
        for i in range(len(arc.t)):
            row = {'t': float(arc.t[i])}
            row.update({f'q{j + 1}': float(arc.q[i, j]) for j in range(n)})
            row.update({f'p{j + 1}': float(arc.p[i, j]) for j in range(n)})
            row['u'] = float(arc.u[i])
            row['H_Y'] = float(arc.h_y[i])
            row['M'] = float(arc.m_values[i])
            row['arc_kind'] = arc.kind
            rows.append(row)
    return rows


def trajectory_columns(n):
    return (['t'] + [f'q{j + 1}' for j in range(n)] + [f'p{j + 1}' for j in range(n)]
            + ['u', 'H_Y', 'M', 'arc_kind'])


def field_flow(field, q0, t_span, tol=None):
    """Integrate an autonomous field; u records its last component (the heading rate for Goh fields)"""
    q0 = np.asarray(q0, dtype=float)

    def rhs(t, q):
        return field(q)

    sol = solve_ivp(rhs, t_span, q0, **_solver_options(tol))
    if sol.status == -1:
        raise IntegrationError(sol.message)
    u = np.array([field(qi)[-1] for qi in sol.y.T])
    return Trajectory(t=sol.t.copy(), q=sol.y.T.copy(), u=u, status='completed', dense=sol.sol)


class _JoinedDense:
    """Dense output of a backward and a forward solution meeting at t = 0"""

    def __init__(self, backward, forward):
        self.backward = backward
        self.forward = forward

    def __call__(self, t):
        if t < 0 and self.backward is not None:
            return self.backward(t)
        return self.forward(t)


def two_sided_flow(field, q0, t_span, tol=None):
    """field_flow over [t_lo, t_hi] with q0 placed at t = 0 (t_lo <= 0 <= t_hi)"""
    t_lo, t_hi = t_span
    if not t_lo <= 0.0 <= t_hi:
        return field_flow(field, q0, t_span, tol)
    if t_lo == 0.0:
        return field_flow(field, q0, t_span, tol)
    backward = field_flow(field, q0, (0.0, t_lo), tol)
    if t_hi == 0.0:
        forward = Trajectory(t=backward.t[:1], q=backward.q[:1], u=backward.u[:1], status='completed')
    else:
        forward = field_flow(field, q0, (0.0, t_hi), tol)
    return Trajectory(
        t=np.concatenate([backward.t[:0:-1], forward.t]),
        q=np.concatenate([backward.q[:0:-1], forward.q]),
        u=np.concatenate([backward.u[:0:-1], forward.u]),
        status='completed',
        dense=_JoinedDense(backward.dense, forward.dense or backward.dense),
    )

"""
Non-immersion points of abnormal geodesics: detection, jet classification,
equilibrium spectra and the value-function gap construction
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from config import INTEGRATOR, JET_FIT, TOLERANCES
from errors import FitFailureError, IntegrationError, OrderingError
from extremal import AffineControlSystem, singular_field, singular_flow
from zermelo import build_seminormal, goh_extend

logger = logging.getLogger(__name__)


@dataclass
class CuspReport:
    t_c: float
    q_c: list
    kind: str  # semicubical | ramphoid | higher | equilibrium
    orders: tuple = None
    jet: tuple = None
    alpha_rate: float = 0.0
    residual: float = None
    spectrum: list = field(default_factory=list)

    def to_dict(self):
        data = asdict(self)
        data['spectrum'] = [{'re': float(z.real), 'im': float(z.imag)} for z in self.spectrum]
        return data


@dataclass
class ValueGapReport:
    t0: float
    t2: float
    t1: float
    alpha2_prime: float
    gap: float
    matching_residual: float = None

    def to_dict(self):
        return asdict(self)


def _as_field(obj):
    if isinstance(obj, AffineControlSystem):
        return singular_field(obj)
    return obj


# --- detection ---

def detect_nonimmersion(arc, field=None, tol=None, samples=2001):
    """Times where the planar speed has a local minimum below tol (relative to the arc's peak speed)"""
    tol = TOLERANCES['nonimmersion'] if tol is None else tol
    t_lo, t_hi = float(np.min(arc.t)), float(np.max(arc.t))
    grid = np.linspace(t_lo, t_hi, samples)

    def state(t):
        return np.asarray(arc.dense(t))[:3]

    if field is not None:
        def speed(t):
            return float(np.linalg.norm(field(state(t))[:2]))
    else:
        def speed(t):
            h = 1e-7 * max(1.0, t_hi - t_lo)
            return float(np.linalg.norm((state(t + h)[:2] - state(t - h)[:2]) / (2 * h)))

    speeds = np.array([speed(t) for t in grid])
    scale = max(float(np.max(speeds)), 1e-300)
    found = []
    for k in range(1, samples - 1):
        if not (speeds[k] <= speeds[k - 1] and speeds[k] <= speeds[k + 1]):
            continue
        res = minimize_scalar(speed, bounds=(grid[k - 1], grid[k + 1]), method='bounded',
                              options={'xatol': 1e-12})
        t_c = float(res.x)
        if speed(t_c) / scale <= tol:
            if found and abs(found[-1][0] - t_c) < 1e-9:
                continue
            found.append((t_c, state(t_c)))
    logger.debug("non-immersion scan samples=%d found=%d", samples, len(found))
    return found


# --- classification ---

def _aligned_axis(vec):
    """Unit vector along vec, signed so its largest component is positive"""
    e = vec / np.linalg.norm(vec)
    k = int(np.argmax(np.abs(e)))
    return e if e[k] > 0 else -e


def _loglog_order(ts, values):
    mask = np.abs(values) > 0
    if mask.sum() < 4:
        return None
    slope = np.polyfit(np.log(np.abs(ts[mask])), np.log(np.abs(values[mask])), 1)[0]
    return int(round(slope))


def _fit_power(ts, values, order):
    basis = np.column_stack([ts ** order, ts ** (order + 1)])
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    return float(coef[0])


def _flow_window(field, q_c, t_max):
    def rhs(t, q):
        return field(q)

    out = {}
    for sign in (1.0, -1.0):
        sol = solve_ivp(rhs, (0.0, sign * t_max), q_c, method=INTEGRATOR['method'],
                        rtol=JET_FIT['rtol'], atol=JET_FIT['atol'], dense_output=True)
        if sol.status != 0:
            raise IntegrationError(f"jet window integration failed: {sol.message}")
        out[sign] = sol.sol
    return out


def _equilibrium_spectrum(field, q_c):
    """Eigenvalues of the 3x3 Jacobian from its characteristic polynomial"""
    jac = field.jacobian_at(q_c)
    tr = float(np.trace(jac))
    minors = float(jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
                   + jac[0, 0] * jac[2, 2] - jac[0, 2] * jac[2, 0]
                   + jac[1, 1] * jac[2, 2] - jac[1, 2] * jac[2, 1])
    det = float(np.linalg.det(jac))
    scale = 1.0 + float(np.linalg.norm(jac)) ** 3
    if abs(det) <= 1e-12 * scale:
        # chi(s) = s (s^2 - tr s + minors)
        disc = complex(tr * tr - 4.0 * minors)
        root = np.sqrt(disc)
        return [0j, (tr + root) / 2.0, (tr - root) / 2.0]
    logger.warning("equilibrium Jacobian is invertible (det=%.3e); spectrum has no zero root", det)
    return list(np.roots([1.0, -tr, minors, -det]).astype(complex))


def classify_cusp(system, q_c, tol=None, t_c=0.0):
    """Classify the non-immersion point q_c of the singular flow of system (an affine system or a field)"""
    tol = TOLERANCES['cusp_control'] if tol is None else tol
    field = _as_field(system)
    q_c = np.asarray(q_c, dtype=float)
    rate = float(field(q_c)[-1])
    if abs(rate) <= tol:
        spectrum = _equilibrium_spectrum(field, q_c)
        logger.info("equilibrium non-immersion point spectrum=%s", [complex(np.round(z, 12)) for z in spectrum])
        return CuspReport(t_c=t_c, q_c=q_c.tolist(), kind='equilibrium', alpha_rate=rate, spectrum=spectrum)

    flows = _flow_window(field, q_c, JET_FIT['t_max'])
    side = np.logspace(math.log10(JET_FIT['t_min']), math.log10(JET_FIT['t_max']), JET_FIT['samples_per_side'])
    ts = np.concatenate([-side[::-1], side])
    dq = np.array([flows[1.0 if t > 0 else -1.0](t)[:2] - q_c[:2] for t in ts])

    basis = np.column_stack([ts ** k for k in range(2, 6)])
    coef, *_ = np.linalg.lstsq(basis, dq, rcond=None)
    residual = float(np.linalg.norm(dq - basis @ coef) / max(np.linalg.norm(dq), 1e-300))
    if residual > JET_FIT['max_relative_residual']:
        raise FitFailureError(residual, JET_FIT['max_relative_residual'])

    primary = coef[0]
    if np.linalg.norm(primary) <= 1e-12 * max(1.0, np.linalg.norm(coef)):
        e1 = _aligned_axis(coef[1] if np.linalg.norm(coef[1]) > 0 else np.array([1.0, 0.0]))
    else:
        e1 = _aligned_axis(primary)
    e2 = np.array([-e1[1], e1[0]])
    e2 = e2 if e2[int(np.argmax(np.abs(e2)))] > 0 else -e2

    u = dq @ e1
    w = dq @ e2
    p = _loglog_order(ts, u)
    q = _loglog_order(ts, w) if np.max(np.abs(w)) > 1e-13 * max(np.max(np.abs(u)), 1e-300) else None
    if p == 2 and q == 3:
        kind = 'semicubical'
    elif p == 2 and q == 4:
        kind = 'ramphoid'
    else:
        kind = 'higher'
    jet = (_fit_power(ts, u, p) if p else None, _fit_power(ts, w, q) if q else None)
    logger.info("cusp classified kind=%s orders=(%s,%s) jet=%s residual=%.2e", kind, p, q, jet, residual)
    return CuspReport(t_c=t_c, q_c=q_c.tolist(), kind=kind, orders=(p, q), jet=jet,
                      alpha_rate=rate, residual=residual)


# --- value function gap ---

def value_gap(t0, t2, delta):
    """Times and gap of the construction showing the value function jumps along the abnormal geodesic"""
    t0, t2 = float(t0), float(t2)
    if not t0 < t2 < 0:
        raise OrderingError(f"need t0 < t2 < 0, got t0={t0}, t2={t2}")
    root = math.sqrt(t0 * t0 + t0 * t2 + t2 * t2)
    t1 = t2 - t0 - 2.0 * root
    alpha2 = (delta / 2.0) * (t0 * t0 - t2 * t2 - t1 * t1) / t1
    gap = (-t1 - t2) - (-t0)
    return ValueGapReport(t0=t0, t2=t2, t1=t1, alpha2_prime=alpha2, gap=gap)


def matching_residual(coeffs, t0, t2, tol=None):
    """Distance between sigma_a(t0) and the hyperbolic geodesic from (sigma_a(t2), alpha2') after time t1"""
    report = value_gap(t0, t2, coeffs.delta)
    goh = goh_extend(build_seminormal(coeffs))
    rtol = tol or 1e-12
    abnormal = singular_flow(goh, [0.0, 0.0, 0.0], (0.0, report.t0), tol=rtol)
    if abnormal.status != 'completed':
        raise IntegrationError(f"abnormal flow stopped early ({abnormal.status})")
    q0 = abnormal.q[-1]
    q2 = np.asarray(abnormal.dense(report.t2))
    start = [q2[0], q2[1], report.alpha2_prime]
    hyperbolic = singular_flow(goh, start, (0.0, report.t1), tol=rtol)
    if hyperbolic.status != 'completed':
        raise IntegrationError(f"hyperbolic flow stopped early ({hyperbolic.status})")
    residual = float(np.linalg.norm(hyperbolic.q[-1][:2] - q0[:2]))
    report.matching_residual = residual
    return residual


def residual_order(coeffs, tau0, tau2, scales):
    """Least-squares slope of log(residual) against log(h) for (t0, t2) = h (tau0, tau2)"""
    residuals = [matching_residual(coeffs, h * tau0, h * tau2) for h in scales]
    slope = np.polyfit(np.log(scales), np.log(residuals), 1)[0]
    return float(slope), residuals


# --- self-intersections ---

def self_intersections(t, q):
    """Crossing points of the polyline q (N x 2) found by a segment-pair scan"""
    q = np.asarray(q, dtype=float)[:, :2]
    t = np.asarray(t, dtype=float)
    a, b = q[:-1], q[1:]
    d = b - a
    hits = []
    for i in range(len(a) - 2):
        j = np.arange(i + 2, len(a))
        r = d[i]
        s = d[j]
        denom = r[0] * s[:, 1] - r[1] * s[:, 0]
        diff = a[j] - a[i]
        ok = np.abs(denom) > 1e-300
        with np.errstate(divide='ignore', invalid='ignore'):
            u = (diff[:, 0] * s[:, 1] - diff[:, 1] * s[:, 0]) / denom
            v = (diff[:, 0] * r[1] - diff[:, 1] * r[0]) / denom
        mask = ok & (u >= 0) & (u < 1) & (v >= 0) & (v < 1)
        for k in np.nonzero(mask)[0]:
            jj = j[k]
            point = a[i] + u[k] * r
            hits.append({
                't_first': float(t[i] + u[k] * (t[i + 1] - t[i])),
                't_second': float(t[jj] + v[k] * (t[jj + 1] - t[jj])),
                'point': point.tolist(),
            })
    return hits

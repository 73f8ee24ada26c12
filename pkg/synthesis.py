"""
Local time-minimal synthesis near a codimension-one terminal manifold N: x = 0
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from config import ORACLE, TOLERANCES
from errors import DegenerateCaseError, NoReachError
from extremal import AffineControlSystem
from geomkernel import parse_field
from utils import linspace_grid, parallel_map

logger = logging.getLogger(__name__)

MODEL_VARIABLES = ('x', 'y', 'z')
LABELS = ('switch', 'split', 'reintersect', 'singular', 'regular')
STRATA_COLUMNS = ['w', 's', 'label', 't_star', 'eps']

# candidate index -> stratum label
_CANDIDATE_LABELS = {0: 'switch', 1: 'reintersect', 2: 'split'}


@dataclass(frozen=True)
class SingExcModel:
    """x' = y + z^2, y' = b + b1 z, z' = c + u, |u| <= 1"""
    b: float
    b1: float
    c: float

    @property
    def u_singular(self):
        """u_s(0) = b1/2 - c"""
        return self.b1 / 2.0 - self.c

    def system(self):
        x = parse_field(['y + z^2', 'b + b1*z', 'c'], MODEL_VARIABLES, {'b': self.b, 'b1': self.b1, 'c': self.c})
        y = parse_field(['0', '0', '1'], MODEL_VARIABLES)
        return AffineControlSystem(x, y, bounded=True)

    def as_dict(self):
        return {'b': self.b, 'b1': self.b1, 'c': self.c}


def bang_flow(model, q, u, tau):
    """Closed-form flow of the model under constant control u for time tau"""
    x0, y0, z0 = q
    k = model.c + u
    b, b1 = model.b, model.b1
    z = z0 + k * tau
    y = y0 + b * tau + b1 * (z0 * tau + k * tau ** 2 / 2)
    x = (x0 + (y0 + z0 ** 2) * tau + (b / 2 + b1 * z0 / 2 + z0 * k) * tau ** 2
         + (b1 * k / 6 + k ** 2 / 3) * tau ** 3)
    return np.array([x, y, z])


def normal_drift(model, w, s):
    """n . X(0, w, s) = w + s^2"""
    return w + s * s


def exceptional_loci(model, w, s, tol=1e-12):
    """n.X and n.[Y,X] on N, with the region E-, E+ or E"""
    n_x = normal_drift(model, w, s)
    n_yx = -2.0 * s
    if abs(n_x) <= tol:
        region = 'E'
    else:
        region = 'E-' if n_x < 0 else 'E+'
    return {'nX': n_x, 'nYX': n_yx, 'region': region, 'singular_trace': abs(n_yx) <= tol}


# --- case classification ---

CODIM1_SYNTHESIS = {
    'Case1': {
        'locally_reachable': False,
        'description': 'N is not accessible from the points in x>0 above the arc sigma- ending at 0',
    },
    'Case2': {
        'locally_reachable': True,
        'description': 'every point steered in minimum time; U+ = {x<0}, U- = {x>0}',
        'U_plus': 'x<0',
        'U_minus': 'x>0',
    },
}


def codim1_case(x2_at_0, tol=None):
    """Case1 if X2(0) > 1, Case2 if X2(0) < 1"""
    tol = TOLERANCES['case_boundary'] if tol is None else tol
    if 1.0 + x2_at_0 <= 0:
        raise DegenerateCaseError(f"normalization 1 + X2(0) > 0 fails for X2(0)={x2_at_0}")
    if abs(x2_at_0 - 1.0) <= tol:
        raise DegenerateCaseError("X2(0) = 1 is the excluded boundary between the codim-1 cases")
    return 'Case1' if x2_at_0 > 1.0 else 'Case2'


def codim1_system(x2_at_0, b=1.0):
    """Planar semi-normal form x' = b y, y' = X2(0) + u"""
    x = parse_field(['b*y', 'x2'], ('x', 'y'), {'b': b, 'x2': x2_at_0})
    y = parse_field(['0', '1'], ('x', 'y'))
    return AffineControlSystem(x, y, bounded=True)


def codim2_bang_synthesis(b):
    """Synthesis descriptor of the codimension-two bang exceptional model"""
    if b == 0:
        raise DegenerateCaseError("b = 0 is degenerate for the codimension-two model")
    if b < 0:
        return {
            'b': b,
            'locally_controllable': True,
            'steerable': True,
            'U_plus': 'x<0',
            'U_minus': 'x>0',
            'sigma_minus_arrivals': '(0,w,s<0) or (0,w>=0,s)',
        }
    return {
        'b': b,
        'locally_controllable': False,
        'steerable': False,
    }


def codim2_system(b):
    """x' = z, y' = b, z' = 1 + u + y"""
    x = parse_field(['z', 'b', '1 + y'], MODEL_VARIABLES, {'b': b})
    y = parse_field(['0', '0', '1'], MODEL_VARIABLES)
    return AffineControlSystem(x, y, bounded=True)


def sing_exc_case(model, tol=None):
    """Case id 1..6 from the sign of b and the bin of u_s(0)"""
    tol = TOLERANCES['case_boundary'] if tol is None else tol
    if abs(model.b) <= tol:
        raise DegenerateCaseError("b = 0")
    # z -> -z, u -> -u maps (b1, c) to (-b1, -c)
    u_s = abs(model.u_singular)
    for boundary in (0.0, 1.0, 3.0):
        if abs(u_s - boundary) <= tol and not (boundary == 0.0 and model.b < 0):
            raise DegenerateCaseError(f"u_s(0)={u_s} on the boundary {boundary}")
    if u_s > 3.0:
        bin_id = 0
    elif u_s > 1.0:
        bin_id = 1
    else:
        bin_id = 2
    return bin_id + (1 if model.b > 0 else 4)


# --- switching times and loci ---

def switching_times(model, w, s, eps):
    """Leading-order (t1^eps, t2^eps, t3)"""
    den1 = model.u_singular - eps
    den3 = model.u_singular - 3.0
    if abs(den1) <= 1e-15 or abs(den3) <= 1e-15 or model.b == 0:
        raise DegenerateCaseError(f"vanishing denominator for model {model.as_dict()} eps={eps}")
    t1 = 2.0 * s / den1
    t2 = (-2.0 / model.b) * (w + s * s)
    t3 = 3.0 * s / den3
    return t1, t2, t3


def locus_switching(model, w, s, eps):
    """Point of the switching surface W at (w, s); x from the flow at the leading switch time"""
    nu1 = model.b1 - 2.0 * (model.c + eps)
    if abs(nu1) <= 1e-15:
        raise DegenerateCaseError("nu1 = b1 - 2(c + eps) vanishes")
    t1 = 4.0 * s / nu1
    x = bang_flow(model, (0.0, w, s), eps, t1)[0]
    y = 4.0 * s * (model.b * nu1 + model.b1 ** 2 * s) / nu1 ** 2 + w
    z = s * (model.b1 + 2.0 * (model.c + eps)) / nu1
    return np.array([x, y, z])


def locus_singular(model, t, w):
    """Gamma_s(t, w)"""
    b, b1 = model.b, model.b1
    return np.array([
        b * t ** 2 / 2 + b1 ** 2 * t ** 3 / 6 + t * w,
        b * t + b1 ** 2 * t ** 2 / 4 + w,
        b1 * t / 2,
    ])


def locus_splitting(model, w, s):
    """Point of the splitting locus C_s at (w, s); x from the sigma+ flow at the leading splitting time"""
    nu2 = model.b1 - 2.0 * model.c - 6.0
    if abs(nu2) <= 1e-15:
        raise DegenerateCaseError("nu2 = b1 - 2c - 6 vanishes")
    t3 = 6.0 * s / nu2
    x = bang_flow(model, (0.0, w, s), 1.0, t3)[0]
    y = 6.0 * s * (model.b * nu2 + model.b1 * s * (model.b1 + model.c - 3.0)) / nu2 ** 2 + w
    z = s * (model.b1 + 4.0 * model.c) / nu2
    return np.array([x, y, z])


# --- exact event times from the closed-form flows ---

def _largest_negative(roots, horizon):
    cands = [r.real for r in np.atleast_1d(roots)
             if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and -horizon <= r.real < -1e-15]
    return max(cands) if cands else math.nan


def exact_event_times(model, w, s, eps, horizon=None):
    """Exact backward switch, re-intersection and splitting times; NaN when none within the horizon"""
    horizon = ORACLE['local_horizon'] if horizon is None else horizon
    b, b1, c = model.b, model.b1, model.c
    k = c + eps

    # p3(t) = -lambda t (2 s + (c + eps - b1/2) t)
    t1 = _largest_negative(np.roots([k - b1 / 2.0, 2.0 * s]) if k != b1 / 2.0 else [], horizon)

    # x(t) / t along the eps arc from (0, w, s)
    quad = [b1 * k / 6 + k * k / 3, b / 2 + b1 * s / 2 + s * k, w + s * s]
    t2 = _largest_negative(np.roots(np.trim_zeros(quad, 'f')) if any(quad[:2]) else [], horizon)

    t3 = _exact_split_time(model, w, s, horizon)
    return t1, t2, t3


def _exact_split_time(model, w, s, horizon):
    q0 = (0.0, w, s)

    def landing(t):
        q3 = bang_flow(model, q0, 1.0, t)
        return bang_flow(model, q3, -1.0, -t)[0] / (t * t)

    if s == 0.0:
        return math.nan
    # landing(t) -> -2s as t -> 0
    ts = -np.logspace(-7, math.log10(horizon), 400)
    previous_t, previous_g = ts[0], landing(ts[0])
    for t in ts[1:]:
        g = landing(t)
        if previous_g * g < 0:
            return brentq(landing, t, previous_t, xtol=1e-15)
        previous_t, previous_g = t, g
    return math.nan


# --- stratification ---

def _eps_rule(model, w, s, tol):
    value = s * normal_drift(model, w, s)
    if abs(s) <= tol or abs(normal_drift(model, w, s)) <= tol:
        return None
    return 1 if value > 0 else -1


def _decide(times_for_eps, model, w, s, tol):
    """Pick eps, t* and the label from a callable eps -> (t1, t2, t3)"""
    rule = _eps_rule(model, w, s, tol)
    options = [rule] if rule is not None else [1, -1]
    best = (math.nan, None, options[0])
    for eps in options:
        times = times_for_eps(eps)
        negative = [(t, i) for i, t in enumerate(times) if not math.isnan(t) and t < -tol]
        if not negative:
            continue
        t_star, idx = max(negative)
        if math.isnan(best[0]) or t_star > best[0]:
            best = (t_star, idx, eps)
    t_star, idx, eps = best
    # on s = 0 the candidates t1, t3 vanish and t2 alone decides the side of w
    if idx is not None:
        label = _CANDIDATE_LABELS[idx]
    elif abs(s) <= tol:
        label = 'singular'
    else:
        label = 'regular'
    return {'w': float(w), 's': float(s), 'label': label, 't_star': t_star,
            'eps': int(eps) if idx is not None or rule is not None else 0}


def stratum_cell(model, w, s, tol=1e-12):
    """Label of one terminal point from the leading-order times"""
    def formula(eps):
        try:
            return switching_times(model, w, s, eps)
        except DegenerateCaseError:
            return (math.nan, math.nan, math.nan)
    return _decide(formula, model, w, s, tol)


def oracle_label(model, w, s, tol=1e-12):
    """Label of one terminal point from the exact event times"""
    return _decide(lambda eps: exact_event_times(model, w, s, eps), model, w, s, tol)


@dataclass
class StratumGrid:
    model: SingExcModel
    grid: list
    cells: pd.DataFrame
    case: int
    validated: bool
    errors: list = field(default_factory=list)

    def label_matrix(self):
        n = int(self.grid[4])
        return self.cells['label'].to_numpy().reshape(n, n)

    def sidecar(self):
        return {
            'model': self.model.as_dict(),
            'grid': list(self.grid),
            'case': self.case,
            'validated': self.validated,
            'columns': list(STRATA_COLUMNS),
        }


def stratify(model, grid, workers=None, use_oracle=False):
    """Label every (w, s) node of the grid; rows are ordered w-major"""
    try:
        case = sing_exc_case(model)
    except DegenerateCaseError as e:
        logger.warning("model on a case boundary (%s); stratification not validated", e)
        case = None
    validated = case == 3 and 0.0 <= model.u_singular < 1.0
    if not validated:
        logger.warning("stratify on a non Case-3 model b=%g b1=%g c=%g: results are not validated",
                       model.b, model.b1, model.c)
    ws, ss = linspace_grid(grid)
    labeler = oracle_label if use_oracle else stratum_cell

    def row(w):
        out = []
        for s in ss:
            try:
                out.append(labeler(model, float(w), float(s)))
            except Exception as e:  # noqa: BLE001 - one cell never aborts a grid
                out.append({'w': float(w), 's': float(s), 'label': 'error', 't_star': math.nan,
                            'eps': 0, 'error': str(e)})
        return out

    rows = [cell for chunk in parallel_map(row, list(ws), workers) for cell in chunk]
    errors = [r for r in rows if 'error' in r]
    for r in errors:
        logger.error("stratum cell failed w=%g s=%g error=%s", r['w'], r['s'], r['error'])
    cells = pd.DataFrame.from_records([{k: r[k] for k in STRATA_COLUMNS} for r in rows], columns=STRATA_COLUMNS)
    return StratumGrid(model=model, grid=list(grid), cells=cells, case=case, validated=validated, errors=errors)


def boundary_mask(labels, radius=2):
    """Cells within radius (Chebyshev) of a label change"""
    n, m = labels.shape
    change = np.zeros_like(labels, dtype=bool)
    change[:-1, :] |= labels[:-1, :] != labels[1:, :]
    change[1:, :] |= labels[:-1, :] != labels[1:, :]
    change[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    change[:, 1:] |= labels[:, :-1] != labels[:, 1:]
    out = np.zeros_like(change)
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            shifted = np.zeros_like(change)
            shifted[max(di, 0):n + min(di, 0), max(dj, 0):m + min(dj, 0)] = \
                change[max(-di, 0):n + min(-di, 0), max(-dj, 0):m + min(-dj, 0)]
            out |= shifted
    return out


# --- brute force oracle ---

def _hit_times(model, states, u, horizon):
    """First positive time each state reaches x = 0 under constant u (inf if none within horizon)"""
    states = np.atleast_2d(states)
    k = model.c + u
    a3 = model.b1 * k / 6 + k * k / 3
    a2 = model.b / 2 + model.b1 * states[:, 2] / 2 + states[:, 2] * k
    a1 = states[:, 1] + states[:, 2] ** 2
    a0 = states[:, 0]
    if abs(a3) > 1e-14:
        comp = np.zeros((len(states), 3, 3))
        comp[:, 0, :] = -np.column_stack([a2, a1, a0]) / a3
        comp[:, 1, 0] = 1.0
        comp[:, 2, 1] = 1.0
        roots = np.linalg.eigvals(comp)
    else:
        roots = np.array([np.pad(np.roots(np.trim_zeros([a2[i], a1[i], a0[i]], 'f')), (0, 3))[:3]
                          if np.any([a2[i], a1[i]]) else np.zeros(3)
                          for i in range(len(states))], dtype=complex)
    real = np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots.real))
    valid = real & (roots.real > 1e-14) & (roots.real <= horizon)
    candidates = np.where(valid, roots.real, np.inf)
    out = np.min(candidates, axis=1)
    out[np.abs(a0) <= ORACLE['reach_tol']] = 0.0
    return out


def _two_arc_time(model, q, first, second, tau, horizon):
    if tau < 0 or tau > horizon:
        return np.inf
    if _hit_times(model, q, first, tau)[0] < tau:
        return np.inf
    q1 = bang_flow(model, q, first, tau)
    return tau + _hit_times(model, q1, second, horizon - tau)[0]


def _three_arc_time(model, q, first, last, tau1, tau2, horizon):
    u_s = model.u_singular
    if tau1 < 0 or tau2 < 0 or tau1 + tau2 > horizon:
        return np.inf
    if _hit_times(model, q, first, tau1)[0] < tau1:
        return np.inf
    q1 = bang_flow(model, q, first, tau1)
    if _hit_times(model, q1, u_s, tau2)[0] < tau2:
        return np.inf
    q2 = bang_flow(model, q1, u_s, tau2)
    return tau1 + tau2 + _hit_times(model, q2, last, horizon - tau1 - tau2)[0]


def _polish(fn, center, step, tol):
    lo, hi = max(0.0, center - step), center + step
    res = minimize_scalar(fn, bounds=(lo, hi), method='bounded', options={'xatol': tol})
    return (res.x, res.fun) if res.fun <= fn(center) else (center, fn(center))


def _sign(u):
    return '+' if u > 0 else '-'


def _compact(policy, tol):
    """Drop arcs of length <= tol and merge neighbours with the same label"""
    out = []
    for label, length in policy:
        if length <= tol:
            continue
        if out and out[-1][0] == label:
            out[-1] = (label, out[-1][1] + length)
        else:
            out.append((label, length))
    return tuple(out) if out else tuple(policy)


def _consider(best, total, policy):
    """Keep the faster policy; within tie_tol the one with fewer arcs"""
    tie = ORACLE['tie_tol']
    policy = _compact(policy, tie)
    if not np.isfinite(total):
        return best
    if total < best[0] - tie:
        return (total, policy)
    if abs(total - best[0]) <= tie and len(policy) < len(best[1]):
        return (total, policy)
    return best


def brute_force_min_time(model, q_start, grid_points=None, horizon=None):
    """Minimum time to N over the policy families sigma+-, sigma+- sigma-+, sigma+- sigma_s sigma+-"""
    grid_points = grid_points or ORACLE['grid_points']
    horizon = horizon or ORACLE['horizon']
    tol = ORACLE['polish_tol']
    q = np.asarray(q_start, dtype=float)
    if abs(q[0]) <= ORACLE['reach_tol']:
        return 0.0, ()

    best = (np.inf, ())
    for u in (1.0, -1.0):
        t = _hit_times(model, q, u, horizon)[0]
        best = _consider(best, t, ((_sign(u), t),))

    taus = np.linspace(0.0, horizon, grid_points)
    step = taus[1] - taus[0]
    for first in (1.0, -1.0):
        second = -first
        states = np.array([bang_flow(model, q, first, tau) for tau in taus])
        pre_hit = _hit_times(model, q, first, horizon)[0]
        totals = taus + _hit_times(model, states, second, horizon)
        totals[taus > pre_hit] = np.inf
        totals[totals > horizon] = np.inf
        k = int(np.argmin(totals))
        if not np.isfinite(totals[k]):
            continue
        tau, total = _polish(lambda t: _two_arc_time(model, q, first, second, t, horizon), taus[k], step, tol)
        best = _consider(best, total, ((_sign(first), tau), (_sign(second), total - tau)))

    if abs(model.u_singular) <= 1.0:
        best = _best_three_arc(model, q, taus, horizon, tol, best)

    if not np.isfinite(best[0]):
        raise NoReachError(f"no policy reaches N within horizon {horizon} from {tuple(q)}")
    logger.debug("oracle from %s: t=%.12g policy=%s", tuple(q), best[0], policy_type(best[1]))
    return float(best[0]), best[1]


def _best_three_arc(model, q, taus, horizon, tol, best):
    coarse = taus[:: max(1, len(taus) // 16)]
    # the polish window must cover a whole coarse cell
    step = coarse[1] - coarse[0]
    for first in (1.0, -1.0):
        for last in (1.0, -1.0):
            def total(t1, t2):
                return _three_arc_time(model, q, first, last, t1, t2, horizon)
            grid = [(total(a, c), a, c) for a in coarse for c in coarse if a + c <= horizon]
            value, t1, t2 = min(grid)
            if not np.isfinite(value):
                continue
            for _ in range(3):
                t1, _ = _polish(lambda t: total(t, t2), t1, step, tol)
                t2, value = _polish(lambda t: total(t1, t), t2, step, tol)
            best = _consider(best, value, ((_sign(first), t1), ('s', t2), (_sign(last), value - t1 - t2)))
    return best


def policy_type(policy):
    """Compact label of an achieving policy, e.g. '+', '-+', '+s+'"""
    return ''.join(label for label, _ in policy)


# --- oracle policy agreement ---

def _expected_start(model, cell):
    """Start point one arc back from the terminal point of a cell and the policies the cell allows"""
    w, s = cell['w'], cell['s']
    lead = ORACLE['regular_lead']
    if cell['label'] == 'singular':
        return locus_singular(model, -lead, w), ('s',)
    eps = cell['eps'] or 1
    tau = ORACLE['start_fraction'] * cell['t_star'] if cell['label'] in _CANDIDATE_LABELS.values() else -lead
    # on s = 0 the sign rule is silent and both bang arcs qualify
    allowed = ('+', '-') if s == 0.0 else (_sign(eps),)
    return bang_flow(model, (0.0, w, s), eps, tau), allowed


def _policy_matches(kind, allowed):
    if allowed == ('s',):
        return 's' in kind
    return kind in allowed


def policy_agreement(model, grid, workers=None, radius=1):
    """Compare each cell's predicted achieving policy with the one found by brute force

    Returns (share, share_off_boundary, disagreements) where disagreements is a list of cell records.
    """
    strata = stratify(model, grid, workers=workers)
    cells = strata.cells.to_dict('records')

    def check(cell):
        start, allowed = _expected_start(model, cell)
        try:
            _, policy = brute_force_min_time(model, start)
        except NoReachError as e:
            return {**cell, 'found': '', 'expected': '|'.join(allowed), 'match': False, 'error': str(e)}
        kind = policy_type(policy)
        return {**cell, 'found': kind, 'expected': '|'.join(allowed), 'match': _policy_matches(kind, allowed)}

    checked = parallel_map(check, cells, workers)
    n = int(grid[4])
    match = np.array([c['match'] for c in checked]).reshape(n, n)
    interior = ~boundary_mask(strata.label_matrix(), radius=radius)
    share = float(np.mean(match))
    share_off = float(np.mean(match[interior])) if np.any(interior) else 1.0
    misses = [c for c in checked if not c['match']]
    for c in misses:
        logger.debug("policy mismatch w=%g s=%g label=%s expected=%s found=%s",
                     c['w'], c['s'], c['label'], c['expected'], c['found'])
    logger.info("policy agreement share=%.4f off-boundary=%.4f misses=%d", share, share_off, len(misses))
    return share, share_off, misses

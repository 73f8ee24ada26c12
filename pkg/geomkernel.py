"""
Expression-defined vector fields, exact derivatives, Lie/Poisson brackets and 3D determinants
"""
import functools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from errors import DimensionError, DomainError
from expressions import parse_expression

logger = logging.getLogger(__name__)

_EVAL_ERRORS = (ZeroDivisionError, ValueError, OverflowError, TypeError)


def symbol(name):
    return sp.Symbol(name, real=True)


def _checked_value(value, component, q):
    if isinstance(value, complex):
        if value.imag != 0.0:
            raise DomainError(component, q, "complex value")
        value = value.real
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(component, q, "non-finite value")
    return value


def compile_exprs(symbols, exprs):
    """Lambdify each expression separately (math module) for checked evaluation"""
    return tuple(sp.lambdify(symbols, e, modules='math') for e in exprs)


def evaluate_checked(funcs, q, labels=None):
    """Evaluate compiled expressions at q; any domain violation is a hard error"""
    out = np.empty(len(funcs))
    for i, fn in enumerate(funcs):
        label = labels[i] if labels is not None else i
        try:
            value = fn(*q)
        except _EVAL_ERRORS as e:
            raise DomainError(label, q, str(e)) from e
        out[i] = _checked_value(value, label, q)
    return out


@dataclass(frozen=True)
class ExprField:
    """Vector field whose components are sympy trees over named variables"""
    variables: tuple
    components: tuple
    parameters: tuple = field(default=())

    def __post_init__(self):
        if len(self.components) != len(self.variables):
            raise DimensionError(
                f"{len(self.components)} components for {len(self.variables)} variables")

    @property
    def dim(self):
        return len(self.variables)

    @cached_property
    def symbols(self):
        return tuple(symbol(v) for v in self.variables)

    @cached_property
    def _funcs(self):
        return compile_exprs(self.symbols, self.components)

    @cached_property
    def jacobian_exprs(self):
        return sp.Matrix(self.components).jacobian(sp.Matrix(self.symbols))

    @cached_property
    def _jac_funcs(self):
        return compile_exprs(self.symbols, list(self.jacobian_exprs))

    def __call__(self, q):
        return evaluate_checked(self._funcs, np.asarray(q, dtype=float))

    def jacobian_at(self, q):
        n = self.dim
        labels = [(i, j) for i in range(n) for j in range(n)]
        return evaluate_checked(self._jac_funcs, np.asarray(q, dtype=float), labels).reshape(n, n)

    def with_components(self, components):
        return ExprField(self.variables, tuple(components), self.parameters)

    def __neg__(self):
        return self.with_components(-c for c in self.components)

    def __add__(self, other):
        _check_compatible(self, other)
        return ExprField(self.variables, tuple(a + b for a, b in zip(self.components, other.components)),
                         _merge_parameters(self, other))

    def scaled(self, factor):
        """Multiply every component by a scalar expression"""
        return self.with_components(factor * c for c in self.components)

    def dot(self, covector):
        """Scalar expression p . Z for a sequence of sympy expressions or numbers"""
        return sum((sp.sympify(p) * c for p, c in zip(covector, self.components)), sp.Integer(0))

    def source(self):
        return [str(c) for c in self.components]


@dataclass(frozen=True)
class PhasePoint:
    q: tuple
    p: tuple

    def __post_init__(self):
        if len(self.q) != len(self.p):
            raise DimensionError(f"state dim {len(self.q)} but covector dim {len(self.p)}")


@dataclass
class BracketTable:
    """Bracket vectors and the determinants D, D', D'' at one point"""
    q: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yx: np.ndarray
    yxx: np.ndarray
    yxy: np.ndarray
    d: float
    d_prime: float
    d_second: float

    @property
    def columns_norm(self):
        """Frobenius norm of the columns entering D"""
        return float(np.linalg.norm(np.column_stack([self.y, self.yx, self.yxy])))

    def as_dict(self):
        return {'D': self.d, 'D_prime': self.d_prime, 'D_second': self.d_second}


def _check_compatible(z1, z2):
    if tuple(z1.variables) != tuple(z2.variables):
        raise DimensionError(f"fields over {z1.variables} and {z2.variables}")


def _merge_parameters(z1, z2):
    merged = dict(z1.parameters)
    merged.update(dict(z2.parameters))
    return tuple(sorted(merged.items()))


def parse_field(source, variables, parameters=None):
    """Parse component texts (sequence, or one string separated by ';') into an ExprField"""
    variables = tuple(variables)
    if isinstance(source, str):
        source = [s for s in source.split(';')]
    components = tuple(parse_expression(text, variables, parameters) for text in source)
    params = tuple(sorted((k, float(v)) for k, v in (parameters or {}).items()))
    return ExprField(variables, components, params)


def jacobian(f, q):
    """Exact Jacobian matrix df_i/dq_j evaluated at q"""
    return f.jacobian_at(q)


def lie_bracket(z1, z2, q):
    """[Z1,Z2](q) = (dZ1/dq) Z2 - (dZ2/dq) Z1"""
    _check_compatible(z1, z2)
    q = np.asarray(q, dtype=float)
    return z1.jacobian_at(q) @ z2(q) - z2.jacobian_at(q) @ z1(q)


@functools.lru_cache(maxsize=256)
def bracket_field(z1, z2):
    """Symbolic Lie bracket [Z1,Z2] as a new field, same convention as lie_bracket"""
    _check_compatible(z1, z2)
    v1 = sp.Matrix(z1.components)
    v2 = sp.Matrix(z2.components)
    comps = z1.jacobian_exprs * v2 - z2.jacobian_exprs * v1
    return ExprField(z1.variables, tuple(comps), _merge_parameters(z1, z2))


def poisson_bracket(z1, z2, z):
    """{H_Z1, H_Z2}(q, p) = p . [Z1,Z2](q)"""
    return float(np.dot(np.asarray(z.p, dtype=float), lie_bracket(z1, z2, z.q)))


def det3(a, b, c):
    """3x3 determinant of the columns a, b, c by cofactor expansion"""
    return float(a[0] * (b[1] * c[2] - b[2] * c[1])
                 - b[0] * (a[1] * c[2] - a[2] * c[1])
                 + c[0] * (a[1] * b[2] - a[2] * b[1]))


def _det3_expr(a, b, c):
    return sp.Matrix([list(a), list(b), list(c)]).T.det(method='berkowitz')


def _require_3d(*fields):
    for f in fields:
        if f.dim != 3:
            raise DimensionError(f"3D fields required, got dim {f.dim}")


@functools.lru_cache(maxsize=64)
def bracket_fields(x, y):
    """([Y,X], [[Y,X],X], [[Y,X],Y]) as symbolic fields"""
    yx = bracket_field(y, x)
    return yx, bracket_field(yx, x), bracket_field(yx, y)


def determinants_3d(x, y, q):
    """Evaluate Y, [Y,X], [[Y,X],X], [[Y,X],Y] and D, D', D'' at q"""
    _require_3d(x, y)
    q = np.asarray(q, dtype=float)
    yx, yxx, yxy = bracket_fields(x, y)
    xv, yv = x(q), y(q)
    yxv, yxxv, yxyv = yx(q), yxx(q), yxy(q)
    return BracketTable(
        q=q, x=xv, y=yv, yx=yxv, yxx=yxxv, yxy=yxyv,
        d=det3(yv, yxv, yxyv),
        d_prime=det3(yv, yxv, yxxv),
        d_second=det3(yv, yxv, xv),
    )


@functools.lru_cache(maxsize=64)
def determinant_fields(x, y):
    """Symbolic D, D', D'' expressions"""
    _require_3d(x, y)
    yx, yxx, yxy = bracket_fields(x, y)
    d = _det3_expr(y.components, yx.components, yxy.components)
    d_prime = _det3_expr(y.components, yx.components, yxx.components)
    d_second = _det3_expr(y.components, yx.components, x.components)
    return d, d_prime, d_second

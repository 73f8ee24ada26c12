import math

import pytest

from errors import ArityError, ExpressionSyntaxError, UnknownIdentifierError
from expressions import parse_expression, tokenize
from geomkernel import parse_field


def value(text, variables=('x',), at=(0.0,)):
    return parse_field([text], variables)(list(at))[0]


def test_sine_evaluation():
    assert value('sin(alpha)', ('alpha',), (0.5,)) == pytest.approx(0.479425538604203, abs=1e-15)


def test_power_is_right_associative():
    assert value('2^3^2') == 512


def test_power_binds_tighter_than_unary_minus():
    assert value('-2^2') == -4


def test_precedence_and_parentheses():
    assert value('1 + 2*x - (x - 3)/2', at=(4.0,)) == pytest.approx(1 + 8 - 0.5)


def test_scientific_literal_and_pi():
    assert value('1.5e-3*x + cos(pi)', at=(2.0,)) == pytest.approx(0.003 - 1.0)


def test_parameters_substituted():
    f = parse_field(['k*x^2'], ('x',), {'k': 2.5})
    assert f([2.0])[0] == pytest.approx(10.0)


def test_tokenize_positions():
    kinds = [(kind, tok, pos) for kind, tok, pos in tokenize('x+ 12')]
    assert kinds == [('name', 'x', 0), ('op', '+', 1), ('num', '12', 3), ('end', '', 5)]


def test_syntax_error_carries_position():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression('x + * y', ('x', 'y'))
    assert info.value.position == 4


def test_unexpected_character():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression('x $ 2', ('x',))
    assert info.value.position == 2


def test_empty_expression():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression('   ', ('x',))


def test_unbalanced_parenthesis():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression('(x + 1', ('x',))


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expression('x + q', ('x',))
    assert info.value.name == 'q'


def test_function_arity():
    with pytest.raises(ArityError):
        parse_expression('sin(x, x)', ('x',))


def test_parameter_may_not_shadow_variable():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression('x', ('x',), {'x': 1.0})


def test_exp_log_sqrt_closure():
    assert value('exp(log(x)) - sqrt(x^2)', at=(3.0,)) == pytest.approx(0.0, abs=1e-14)
    assert value('log(exp(x))', at=(0.25,)) == pytest.approx(0.25)
    assert math.isfinite(value('sqrt(x)', at=(2.0,)))


def test_tangent_matches_sine_over_cosine():
    assert value('tan(x) - sin(x)/cos(x)', at=(0.7,)) == pytest.approx(0.0, abs=1e-15)
    assert value('tan(pi/4)') == pytest.approx(1.0, abs=1e-15)

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import ChatteringError, DegenerateDError, IntegrationError, SaturationReachedError
from extremal import (BANG_MINUS, BANG_PLUS, SINGULAR, AffineControlSystem, classify_point, conjugate_system,
                      extremal_flow, hamiltonians, legendre_clebsch, pushforward, singular_control,
                      singular_extremal, singular_field, singular_flow, trajectory_columns, trajectory_records,
                      two_sided_flow)
from geomkernel import PhasePoint, bracket_field, parse_field, poisson_bracket
from synthesis import SingExcModel
from zermelo import goh_extend, historical_model


@pytest.fixture
def double_integrator():
    """x' = y, y' = u"""
    v = ('x', 'y')
    return AffineControlSystem(parse_field(['y', '0'], v), parse_field(['0', '1'], v))


def test_singular_control_of_model(case3):
    # u_s(0) = b1/2 - c
    assert singular_control(case3.system(), [0.0, 0.0, 0.0]) == pytest.approx(0.5)
    other = SingExcModel(b=1.0, b1=1.2, c=0.3)
    assert singular_control(other.system(), [0.0, 0.0, 0.0]) == pytest.approx(0.3)


def test_singular_control_historical_heading(historical):
    field = singular_field(goh_extend(historical))
    for alpha in (0.0, 0.4, -1.1):
        assert field([0.0, 0.3, alpha])[2] == pytest.approx(-np.cos(alpha) ** 2, abs=1e-14)


def test_degenerate_d_raises():
    flat = SingExcModel(b=1.0, b1=0.0, c=0.0)
    with pytest.raises(DegenerateDError):
        singular_control(flat.system(), [0.0, 0.0, 0.0])


def test_saturated_start_raises():
    fast = SingExcModel(b=1.0, b1=3.0, c=0.0)
    with pytest.raises(SaturationReachedError):
        singular_flow(fast.system(), [0.0, 0.0, 0.0], (0.0, 0.1))


def test_singular_flow_follows_closed_form(case3):
    traj = singular_flow(case3.system(), [0.0, 0.0, 0.0], (0.0, 0.2))
    assert traj.status == 'completed'
    # z = u_s t, y = t + t^2/4, x = t^2/2 + t^3/6
    t = traj.t[-1]
    assert_allclose(traj.q[-1], [t ** 2 / 2 + t ** 3 / 6, t + t ** 2 / 4, t / 2], atol=1e-9)
    assert_allclose(traj.u, 0.5, atol=1e-12)


def test_classify_point_by_sign_of_d_d_second(case3):
    sys = case3.system()
    assert classify_point(sys, [0.0, 0.0, 0.0]) == 'exceptional'
    # D = -2 b1, D'' = b1 (y + z^2)
    assert classify_point(sys, [0.0, 0.1, 0.0]) == 'elliptic'
    assert classify_point(sys, [0.0, -0.1, 0.0]) == 'hyperbolic'


def test_legendre_clebsch(case3):
    # [[Y,X],Y] = (-2, 0, 0)
    assert legendre_clebsch(case3.system(), PhasePoint((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))) == pytest.approx(-2.0)


def test_hamiltonians(double_integrator):
    h_x, h_y, h_yx = hamiltonians(double_integrator, [0.0, 2.0], [1.0, 0.5])
    assert (h_x, h_y, h_yx) == pytest.approx((2.0, 0.5, -1.0))


def test_bang_extremal_switches_once(double_integrator):
    arcs = extremal_flow(double_integrator, PhasePoint((0.0, 0.0), (1.0, 0.5)), (0.0, 2.0))
    assert [a.kind for a in arcs] == [BANG_PLUS, BANG_MINUS]
    events = arcs[0].events
    assert len(events) == 1
    assert events[0].t == pytest.approx(0.5, abs=1e-10)
    assert events[0].kind == 'ordinary'
    assert arcs[-1].t[-1] == pytest.approx(2.0)
    # y = t on [0, 0.5], then y = 1 - t
    assert arcs[-1].q[-1][1] == pytest.approx(-1.0, abs=1e-8)
    for arc in arcs:
        assert arc.m_drift <= 1e-8


def test_bang_extremal_backward_in_time(double_integrator):
    arcs = extremal_flow(double_integrator, PhasePoint((0.0, 0.0), (1.0, -0.5)), (0.0, -2.0))
    assert arcs[0].events[0].t == pytest.approx(-0.5, abs=1e-10)


def test_zero_covector_rejected(double_integrator):
    with pytest.raises(IntegrationError):
        extremal_flow(double_integrator, PhasePoint((0.0, 0.0), (0.0, 0.0)), (0.0, 1.0))


def test_vanishing_switching_function_gives_singular_arc(case3):
    # p annihilates Y and [Y,X] at the origin
    arcs = extremal_flow(case3.system(), PhasePoint((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)), (0.0, 0.2))
    assert arcs[-1].kind == SINGULAR
    assert_allclose(arcs[-1].u, 0.5, atol=1e-12)
    assert_allclose(arcs[-1].q[-1], [0.02 + 0.008 / 6, 0.21, 0.1], atol=1e-9)


def test_feedback_covariance_of_singular_field(case3):
    sys = case3.system()
    phi = parse_field(['x + 0.3*y^2', 'y - 0.2*z^2', 'z'], sys.variables)
    conj = conjugate_system(sys, phi, '0.1*x', '2 + 0.1*y', box=([-0.3] * 3, [0.3] * 3))
    xs = singular_field(sys)
    xs_new = singular_field(conj)
    for q in ([0.05, 0.1, -0.02], [-0.1, 0.0, 0.1], [0.0, -0.05, 0.03]):
        assert_allclose(xs_new(phi(q)), pushforward(phi, xs, q), atol=1e-8)


def test_two_sided_flow_places_start_at_zero():
    field = historical_model()
    traj = two_sided_flow(field, [0.0, 0.0, 0.0], (-0.2, 0.3))
    assert traj.t[0] == pytest.approx(-0.2)
    assert traj.t[-1] == pytest.approx(0.3)
    assert np.all(np.diff(traj.t) > 0)
    assert_allclose(traj.dense(0.0), [0.0, 0.0, 0.0], atol=1e-14)
    # alpha ~ -t near the origin
    assert traj.dense(-0.01)[2] == pytest.approx(0.01, rel=1e-3)


def test_trajectory_records_columns(case3):
    arc = singular_extremal(case3.system(), [0.0, 0.0, 0.0], (0.0, 0.1))
    rows = trajectory_records([arc])
    assert list(rows[0]) == trajectory_columns(3)
    assert rows[0]['arc_kind'] == SINGULAR
    assert abs(rows[0]['H_Y']) <= 1e-12


def test_model_switch_at_leading_order_time(case3):
    # p3(t) = -t (2s + (c + eps - b1/2) t) vanishes at t = -0.24 for (w, s) = (0.1, 0.06)
    arcs = extremal_flow(case3.system(), PhasePoint((0.0, 0.1, 0.06), (1.0, 0.0, 0.0)), (0.0, -0.5))
    assert arcs[0].kind == BANG_PLUS
    event = arcs[0].events[0]
    assert event.t == pytest.approx(-0.24, abs=1e-8)
    assert event.kind == 'ordinary'
    assert arcs[1].kind == BANG_MINUS


def test_repeated_switching_raises_chattering():
    """x' = y, y' = -x + u switches every pi"""
    v = ('x', 'y')
    oscillator = AffineControlSystem(parse_field(['y', '-x'], v), parse_field(['0', '1'], v))
    with pytest.raises(ChatteringError):
        extremal_flow(oscillator, PhasePoint((0.0, 0.0), (0.3, 1.0)), (0.0, 20.0), max_switches=1)


def test_legendre_clebsch_of_revolution_lift(revolution):
    goh = goh_extend(revolution)
    z = PhasePoint((1.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    assert legendre_clebsch(goh, z) == pytest.approx(1.0)
    yx = bracket_field(goh.y, goh.x)
    assert legendre_clebsch(goh, z) == pytest.approx(poisson_bracket(yx, goh.y, z))


def test_control_reversal_keeps_singular_field(case3):
    sys = case3.system()
    identity = parse_field(['x', 'y', 'z'], sys.variables)
    flipped = conjugate_system(sys, identity, '0', '-1')
    xs, xs_flipped = singular_field(sys), singular_field(flipped)
    for q in ([0.05, 0.1, -0.02], [0.0, -0.05, 0.03]):
        assert_allclose(flipped.y(q), -sys.y(q))
        assert_allclose(flipped.x(q), sys.x(q))
        assert_allclose(xs_flipped(q), xs(q), atol=1e-12)
    assert singular_control(flipped, [0.0, 0.0, 0.0]) == pytest.approx(-0.5)

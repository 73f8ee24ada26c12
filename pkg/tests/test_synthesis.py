import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from config import SIDECAR_SCHEMA, validate
from errors import DegenerateCaseError, NoReachError
from invariants import agreement
from synthesis import (STRATA_COLUMNS, SingExcModel, _compact, bang_flow, brute_force_min_time, codim1_case,
                       codim1_system, codim2_bang_synthesis, codim2_system, exact_event_times, exceptional_loci,
                       locus_singular, locus_splitting, locus_switching, oracle_label, policy_agreement, policy_type,
                       sing_exc_case, stratify, stratum_cell, switching_times)


def test_switching_times_spot(case3):
    assert switching_times(case3, 0.1, 0.06, 1) == pytest.approx((-0.24, -0.2072, -0.072))


def test_exact_event_times_spot(case3):
    t1, t2, t3 = exact_event_times(case3, 0.1, 0.06, 1)
    assert t1 == pytest.approx(-0.24)
    assert t2 == pytest.approx(-0.214634, abs=1e-6)
    assert t3 == pytest.approx(-0.072, rel=1e-9)


def test_exact_times_within_a_quarter_of_formulas(case3):
    formula = switching_times(case3, 0.1, 0.06, 1)
    exact = exact_event_times(case3, 0.1, 0.06, 1)
    for f, e in zip(formula, exact):
        assert abs(f - e) <= 0.25 * abs(e)


def test_degenerate_switching_denominator():
    with pytest.raises(DegenerateCaseError):
        switching_times(SingExcModel(b=1.0, b1=2.0, c=0.0), 0.1, 0.1, 1)


def test_split_dominated_cell(case3):
    cell = stratum_cell(case3, 0.1, 0.06)
    assert cell['label'] == 'split'
    assert cell['t_star'] == pytest.approx(-0.072)
    assert cell['eps'] == 1


def test_switch_dominated_cell(case3):
    cell = stratum_cell(case3, 0.1, -0.06)
    assert cell['eps'] == -1
    assert cell['label'] == 'switch'
    assert cell['t_star'] == pytest.approx(-0.08)


def test_regular_cell_has_no_time(case3):
    cell = stratum_cell(case3, -0.1, -0.06)
    assert cell['label'] == 'regular'
    assert math.isnan(cell['t_star'])


def test_singular_trace_on_the_hyperbolic_side(case3):
    cell = stratum_cell(case3, -0.03, 0.0)
    assert cell['label'] == 'singular'
    assert math.isnan(cell['t_star'])
    assert oracle_label(case3, -0.03, 0.0)['label'] == 'singular'


def test_trace_reintersects_on_the_elliptic_side(case3):
    # t2 = -2 (w + s^2) / b is the only nonzero candidate on s = 0
    cell = stratum_cell(case3, 0.03, 0.0)
    assert cell['label'] == 'reintersect'
    assert cell['t_star'] == pytest.approx(-0.06)
    assert oracle_label(case3, 0.03, 0.0)['label'] == 'reintersect'
    assert stratum_cell(case3, 0.1, 0.0)['label'] == 'reintersect'


@pytest.mark.parametrize('model, case', [
    (SingExcModel(1.0, 1.0, 0.0), 3),
    (SingExcModel(1.0, 4.0, 0.0), 2),
    (SingExcModel(1.0, 8.0, 0.0), 1),
    (SingExcModel(-1.0, 1.0, 0.0), 6),
    (SingExcModel(-1.0, 4.0, 0.0), 5),
    (SingExcModel(-1.0, 8.0, 0.0), 4),
    (SingExcModel(1.0, -1.0, 0.0), 3),
])
def test_sing_exc_case(model, case):
    assert sing_exc_case(model) == case


@pytest.mark.parametrize('model', [SingExcModel(0.0, 1.0, 0.0), SingExcModel(1.0, 2.0, 0.0),
                                   SingExcModel(1.0, 6.0, 0.0)])
def test_sing_exc_case_boundaries(model):
    with pytest.raises(DegenerateCaseError):
        sing_exc_case(model)


def test_codim1_cases():
    assert codim1_case(2.0) == 'Case1'
    assert codim1_case(0.5) == 'Case2'
    with pytest.raises(DegenerateCaseError):
        codim1_case(1.0)
    with pytest.raises(DegenerateCaseError):
        codim1_case(-2.0)


def test_codim1_and_codim2_systems():
    assert codim1_system(0.5).dim == 2
    assert_allclose(codim1_system(0.5, b=2.0).x([0.0, 1.0]), [2.0, 0.5])
    assert_allclose(codim2_system(-1.0).x([0.0, 0.5, 0.2]), [0.2, -1.0, 1.5])


def test_codim2_descriptor():
    assert codim2_bang_synthesis(-1.0)['steerable']
    assert not codim2_bang_synthesis(1.0)['locally_controllable']
    with pytest.raises(DegenerateCaseError):
        codim2_bang_synthesis(0.0)


def test_exceptional_loci(case3):
    assert exceptional_loci(case3, -0.0036, 0.06)['region'] == 'E'
    loci = exceptional_loci(case3, 0.1, 0.06)
    assert loci['region'] == 'E+'
    assert loci['nYX'] == pytest.approx(-0.12)
    assert exceptional_loci(case3, -0.1, 0.0)['singular_trace']


def test_loci_pass_through_terminal_point(case3):
    assert_allclose(locus_singular(case3, 0.0, 0.02), [0.0, 0.02, 0.0])
    assert_allclose(locus_switching(case3, 0.02, 0.0, 1), [0.0, 0.02, 0.0])
    assert_allclose(locus_splitting(case3, 0.02, 0.0), [0.0, 0.02, 0.0])


def test_locus_spot_values(case3):
    switching = locus_switching(case3, 0.1, 0.06, -1)
    assert switching[1:] == pytest.approx([0.1816, -0.02])
    assert switching[0] == pytest.approx(bang_flow(case3, (0.0, 0.1, 0.06), -1.0, 0.08)[0])
    splitting = locus_splitting(case3, 0.1, 0.06)
    assert splitting[1:] == pytest.approx([0.026272, -0.012])
    assert_allclose(splitting, bang_flow(case3, (0.0, 0.1, 0.06), 1.0, -0.072), atol=1e-14)


def test_bang_flow_is_a_flow(case3):
    q = np.array([0.01, -0.02, 0.03])
    there = bang_flow(case3, q, 1.0, 0.2)
    assert_allclose(bang_flow(case3, there, 1.0, -0.2), q, atol=1e-14)
    assert_allclose(bang_flow(case3, bang_flow(case3, q, -1.0, 0.1), -1.0, 0.15),
                    bang_flow(case3, q, -1.0, 0.25), atol=1e-14)


def test_stratify_grid_and_sidecar(case3):
    grid = [-0.05, 0.05, -0.05, 0.05, 5]
    strata = stratify(case3, grid, workers=1)
    assert list(strata.cells.columns) == STRATA_COLUMNS
    assert len(strata.cells) == 25
    assert strata.case == 3
    assert strata.validated
    assert strata.errors == []
    validate(strata.sidecar(), SIDECAR_SCHEMA)
    # w-major ordering
    assert strata.cells['w'].iloc[0] == strata.cells['w'].iloc[4] == -0.05


def test_stratify_marks_unvalidated_models():
    strata = stratify(SingExcModel(b=1.0, b1=1.0, c=0.6), [-0.01, 0.01, -0.01, 0.01, 3], workers=1)
    assert not strata.validated


def test_stratify_case_boundary_is_null_case():
    strata = stratify(SingExcModel(b=1.0, b1=2.0, c=0.0), [-0.01, 0.01, -0.01, 0.01, 3], workers=1)
    assert strata.case is None
    validate(strata.sidecar(), SIDECAR_SCHEMA)


def test_formula_labels_agree_with_exact_labels(case3):
    share, _ = agreement(case3, [-0.05, 0.05, -0.05, 0.05, 21], workers=1)
    assert share >= 0.9


def test_oracle_recovers_a_single_bang_arc(case3):
    start = bang_flow(case3, (0.0, 0.1, 0.06), 1.0, -0.05)
    t_min, policy = brute_force_min_time(case3, start)
    assert t_min == pytest.approx(0.05, abs=1e-4)
    assert policy_type(policy) == '+'


def test_oracle_policy_has_no_empty_arcs(case3):
    for tau in (-0.01, -0.03, -0.05):
        _, policy = brute_force_min_time(case3, bang_flow(case3, (0.0, 0.1, 0.06), 1.0, tau))
        assert policy_type(policy) == '+'
        assert all(length > 0 for _, length in policy)


def test_oracle_follows_a_hyperbolic_singular_arc(case3):
    start = locus_singular(case3, -0.02, -0.03)
    t_min, policy = brute_force_min_time(case3, start)
    assert 's' in policy_type(policy)
    assert t_min == pytest.approx(0.02, abs=1e-4)


def test_compact_drops_and_merges_arcs():
    assert _compact((('+', 0.3), ('-', 0.0)), 1e-7) == (('+', 0.3),)
    assert _compact((('+', 0.1), ('s', 1e-9), ('+', 0.2)), 1e-7) == (('+', pytest.approx(0.3)),)
    assert _compact((('-', 0.0),), 1e-7) == (('-', 0.0),)


def test_predicted_policies_match_the_oracle(case3):
    share, share_off, misses = policy_agreement(case3, [-0.05, 0.05, -0.05, 0.05, 7], workers=1)
    assert share_off >= 0.9
    assert share >= 0.8
    assert all({'w', 's', 'label', 'expected', 'found'} <= set(m) for m in misses)


def test_oracle_on_target():
    assert brute_force_min_time(SingExcModel(1.0, 1.0, 0.0), (0.0, 0.3, 0.1)) == (0.0, ())


def test_oracle_no_reach(case3):
    with pytest.raises(NoReachError):
        brute_force_min_time(case3, (1.0, 0.0, 0.0), horizon=0.01)


def test_policy_type():
    assert policy_type((('+', 0.1), ('s', 0.2), ('-', 0.3))) == '+s-'

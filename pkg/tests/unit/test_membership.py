"""Tests for envelope membership and the hypothesis checks."""

import numpy as np
import pytest

from src.advect_eig.core.coefficients import Constant, Negated, RampProfile, SigmaProfile
from src.advect_eig.core.membership import S_D, S_N, check_membership, validate_hypotheses
from src.advect_eig.core.params import breakpoints
from src.advect_eig.core.potential import fold, smooth_md, unidirectional
from src.advect_eig.utils.constants import MEMBERSHIP_SLACK


def _grid(m, samples=200001):
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, samples), m.boundaries()]))


@pytest.mark.unit
class TestMembership:
    """m >= step_tilde (S_D) and m <= step_bar (S_N)."""

    def test_smooth_potential_in_s_d(self, paper_md, paper_params):
        report = check_membership(paper_md, paper_params, S_D, _grid(paper_md))
        assert report.passed
        assert report.first_violation is None
        assert report.worst_margin >= 0.0
        assert report.nodes_checked > 1000

    def test_folded_tail_in_s_n(self, paper_md, paper_params):
        """Past a fold at z_2 the potential sits under the envelope of the shifted params."""
        folded = fold(paper_md, breakpoints(paper_params, 2).z[2])
        report = check_membership(folded, paper_params.shifted(3), S_N, _grid(folded))
        assert report.passed

    def test_negated_potential_leaves_s_d(self, paper_md, paper_params):
        report = check_membership(paper_md.negate(), paper_params, S_D, _grid(paper_md))
        assert not report.passed
        assert report.first_violation is not None
        assert report.worst_margin < 0.0
        assert report.to_dict()["which"] == S_D

    def test_mesh_nodes_accepted(self, paper_md, paper_params, zero_mesh):
        report = check_membership(paper_md, paper_params, S_D, zero_mesh)
        assert report.nodes_checked > 0

    def test_empty_comparison_window(self, paper_md, paper_params):
        report = check_membership(paper_md, paper_params, S_D, np.array([0.0, 0.5, 1.0]))
        assert not report.passed
        assert report.nodes_checked == 0

    def test_unknown_family(self, paper_md, paper_params):
        with pytest.raises(ValueError):
            check_membership(paper_md, paper_params, "S_X", _grid(paper_md, 11))


@pytest.mark.unit
class TestHypotheses:
    """Symmetry, m = 0 on [a, b] and the size of c."""

    def test_all_clauses_hold(self, paper_md, paper_params):
        c = RampProfile(paper_params.a, paper_params.b, c_in=1.0, c_out=200.0)
        report = validate_hypotheses(paper_md, c, lambda_D=100.0)
        assert report.passed
        assert report.failed() == []
        assert report.clause("c_exceeds_lambda_D").margin == pytest.approx(100.0)

    def test_c_below_lambda_d(self, paper_md):
        report = validate_hypotheses(paper_md, Constant(50.0), lambda_D=100.0)
        assert not report.passed
        assert report.failed() == ["c_exceeds_lambda_D"]

    def test_asymmetric_potential(self):
        report = validate_hypotheses(unidirectional(-1), Constant(10.0), lambda_D=1.0)
        assert not report.clause("symmetry").passed
        assert not report.clause("zero_on_ab").passed

    def test_positivity_not_enforced_for_growth_profiles(self, paper_md):
        c = Negated(SigmaProfile.example())
        enforced = validate_hypotheses(paper_md, c, lambda_D=10.0)
        relaxed = validate_hypotheses(paper_md, c, lambda_D=10.0, require_positive_c=False)
        assert not enforced.clause("c_positive").passed
        assert relaxed.clause("c_positive").passed
        assert relaxed.clause("c_positive").detail == "not enforced"

    def test_unknown_clause(self, paper_md):
        report = validate_hypotheses(paper_md, Constant(5.0), lambda_D=1.0)
        with pytest.raises(KeyError):
            report.clause("c_smooth")


@pytest.mark.unit
class TestMembershipOverRandomParams:
    """smooth_md sits above the lower envelope for every valid geometry."""

    def test_smooth_potential_in_s_d(self, random_step_params):
        rng = np.random.default_rng(20240611)
        for _ in range(25):
            params = random_step_params(rng)
            m = smooth_md(params, width_floor=1e-5, amplitude_floor=1e-10)
            report = check_membership(m, params, S_D, _grid(m, 20001))
            assert report.nodes_checked > 0
            assert report.passed, f"{params.to_dict()}: margin {report.worst_margin} at {report.worst_location}"
            assert report.worst_margin >= -MEMBERSHIP_SLACK

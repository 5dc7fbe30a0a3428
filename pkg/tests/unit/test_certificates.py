"""Tests for the explicit test functions and their certified bounds."""

import math

import numpy as np
import pytest

from src.advect_eig.core.certificates import (
    certificate_rows,
    certify_neumann,
    dirichlet_test_function,
    log_sigma,
    neumann_test_function,
    staircase,
    staircase_params,
)
from src.advect_eig.core.coefficients import RampProfile
from src.advect_eig.core.eigen import EigenProblem, EigenSolver, reference_pair
from src.advect_eig.core.mesh import build_mesh
from src.advect_eig.core.params import breakpoints
from src.advect_eig.core.potential import fold, smooth_md


@pytest.fixture
def coarse_md(paper_params):
    return smooth_md(paper_params, width_floor=1e-3, amplitude_floor=1e-12)


@pytest.fixture
def ramp(paper_params):
    return RampProfile(paper_params.a, paper_params.b, c_in=1.0, c_out=3000.0)


@pytest.fixture
def folded(coarse_md, paper_params):
    """coarse_md folded at z_2: the tail past z_2 lies in S_N."""
    return fold(coarse_md, breakpoints(paper_params, 2).z[2])


def _mesh_and_refs(m, c, params):
    mesh = build_mesh(m, p_min=4, base_intervals=200, breakpoints=c.kinks())
    refs = reference_pair(params.a, params.b, c, mesh=mesh, richardson=False)
    return mesh, refs


@pytest.mark.unit
class TestStaircase:
    """sigma_n(s) and p_n(s) in log space."""

    def test_sigma_at_zero_strength(self, desk_params):
        """At s = 0 and l = 1, sigma_n = (1/32)^((n + 1)/2)."""
        bundle = staircase(desk_params, 0.0, 6)
        expected = [(1 / 32) ** ((n + 1) / 2) for n in range(8)]
        assert np.allclose(bundle.sigma(), expected, rtol=1e-12)
        assert bundle.n_max == 6

    def test_sigma_at_zero_strength_without_offset(self, paper_params):
        """With l = 0 the exponent is n/2."""
        bundle = staircase(paper_params, 0.0, 4)
        expected = [(1 / 32) ** (n / 2) for n in range(6)]
        assert np.allclose(bundle.sigma(), expected, rtol=1e-12)

    @pytest.mark.parametrize("s", [0.0, 5.0, 50.0])
    def test_product_identity(self, desk_params, s):
        """p_{n+1} - p_n = sigma_n p_n."""
        bundle = staircase(desk_params, s, 3)
        assert bundle.identity_error() < 1e-10

    def test_p_increases_with_n(self, desk_params):
        p = staircase(desk_params, 2.0, 10).p()
        assert np.all(np.diff(p) > 0)
        assert p[-1] <= 1.0

    def test_p_decreases_with_s(self, desk_params):
        weak = staircase(desk_params, 1.0, 5).log_p
        strong = staircase(desk_params, 10.0, 5).log_p
        assert np.all(strong < weak)

    def test_log_space_survives_underflow(self, desk_params):
        """At large s, p_0 underflows binary64 but its log stays finite."""
        bundle = staircase(desk_params, 1e4, 2)
        assert bundle.p()[0] == 0.0
        assert np.isfinite(bundle.log_p[0])

    def test_log_sigma_vectorized(self, paper_params):
        values = log_sigma(paper_params, 3.0, [0, 1, 2])
        assert values[1] == pytest.approx(0.5 * math.log(1 / 32) + 3.0 * 3.0 * 0.1)

    def test_bad_arguments(self, desk_params):
        with pytest.raises(ValueError):
            staircase(desk_params, -1.0, 3)
        with pytest.raises(ValueError):
            staircase(desk_params, 1.0, -1)

    def test_to_dict(self, desk_params):
        data = staircase(desk_params, 1.0, 2).to_dict()
        assert data["s"] == 1.0
        assert data["params"]["l"] == 1


@pytest.mark.unit
class TestDirichletTestFunction:
    """phi^D extended by zero certifies lambda^D."""

    def test_support(self, coarse_md, ramp, paper_params):
        mesh, refs = _mesh_and_refs(coarse_md, ramp, paper_params)
        phi = dirichlet_test_function(refs.phi_D, paper_params.a, paper_params.b, mesh, refs.mesh.nodes)
        outside = (mesh.nodes < float(paper_params.a)) | (mesh.nodes > float(paper_params.b))
        assert np.all(phi[outside] == 0.0)
        assert np.max(phi) > 0.0

    @pytest.mark.parametrize("s", [0.0, 10.0, 1000.0])
    def test_quotient_equals_lambda_d(self, coarse_md, ramp, paper_params, s):
        """m vanishes on [a, b], so the quotient does not see s."""
        mesh, refs = _mesh_and_refs(coarse_md, ramp, paper_params)
        phi = dirichlet_test_function(refs.phi_D, paper_params.a, paper_params.b, mesh, refs.mesh.nodes)
        rq = EigenSolver().rayleigh_quotient(phi, EigenProblem.full(coarse_md, ramp, s), mesh, form="phi")
        assert rq == pytest.approx(refs.lambda_D, rel=1e-9)


@pytest.mark.unit
class TestNeumannTestFunction:
    """The staircase function on folded potentials."""

    def test_staircase_params(self, coarse_md, folded, paper_params):
        assert staircase_params(paper_params, coarse_md) is None
        assert staircase_params(paper_params, folded) == paper_params.shifted(3)

    def test_matches_phi_n_on_ab(self, folded, ramp, paper_params):
        mesh, refs = _mesh_and_refs(folded, ramp, paper_params)
        params = staircase_params(paper_params, folded)
        log_phi = neumann_test_function(params, 10.0, refs.phi_N, mesh, refs.mesh.nodes)
        i = mesh.index_of(paper_params.a)
        j = mesh.index_of(paper_params.b)
        assert np.allclose(log_phi[i:j + 1], np.log(refs.phi_N), rtol=0.0, atol=1e-12)
        assert log_phi[0] == -np.inf

    def test_rejects_non_positive_phi(self, folded, ramp, paper_params):
        mesh, refs = _mesh_and_refs(folded, ramp, paper_params)
        with pytest.raises(ValueError):
            neumann_test_function(paper_params.shifted(3), 1.0, -refs.phi_N, mesh, refs.mesh.nodes)

    def test_certified_upper_bound(self, folded, ramp, paper_params):
        """Any nonzero test function bounds the discrete principal eigenvalue from above."""
        mesh, refs = _mesh_and_refs(folded, ramp, paper_params)
        params = staircase_params(paper_params, folded)
        problem = EigenProblem.full(folded, ramp, 0.0)
        solver = EigenSolver()
        for s in (1.0, 20.0, 100.0):
            bundle = certify_neumann(params, s, refs, problem, mesh, solver)
            value = solver.principal_eigenvalue(problem.with_s(s), mesh, richardson=False).eigenvalue
            assert bundle.rayleigh >= value - 1e-9 * abs(value)
            assert bundle.values.size == mesh.n_nodes


@pytest.mark.unit
class TestCertificateRows:
    """The certify table."""

    def test_rows_without_neumann_geometry(self, coarse_md, ramp, paper_params):
        mesh, refs = _mesh_and_refs(coarse_md, ramp, paper_params)
        problem = EigenProblem.full(coarse_md, ramp, 0.0)
        rows = certificate_rows(problem, mesh, [1.0, 100.0], refs)
        assert [row[0] for row in rows] == [1.0, 100.0]
        for s, rq_d, rq_n, value in rows:
            assert rq_n is None
            assert rq_d == pytest.approx(refs.lambda_D, rel=1e-9)
            assert value <= rq_d + 1e-9 * rq_d

    def test_rows_with_staircase(self, folded, ramp, paper_params):
        mesh, refs = _mesh_and_refs(folded, ramp, paper_params)
        problem = EigenProblem.full(folded, ramp, 0.0)
        rows = certificate_rows(problem, mesh, [10.0], refs, staircase_params(paper_params, folded))
        _, _, rq_n, value = rows[0]
        assert rq_n is not None
        assert value <= rq_n + 1e-9 * abs(rq_n)

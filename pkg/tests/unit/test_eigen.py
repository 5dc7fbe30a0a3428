"""Tests for the principal-eigenvalue solver."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from src.advect_eig.config import apply_fixture, get_config
from src.advect_eig.core.coefficients import Constant, RampProfile
from src.advect_eig.core.eigen import (
    DIRICHLET,
    FITTED,
    NEUMANN,
    WEIGHTED,
    EigenProblem,
    EigenSolver,
    bernoulli,
    constant_problem,
    continuity_bound,
    factored_solve,
    reference_pair,
    shifted_factor,
    sturm_count,
)
from src.advect_eig.core.exceptions import DynamicRangeExceeded, SolverError, ZeroFunction
from src.advect_eig.core.instance import build_instance
from src.advect_eig.core.mesh import build_mesh, uniform_mesh
from src.advect_eig.core.potential import smooth_md, unidirectional, zero_potential


@pytest.fixture
def coarse_md(paper_params):
    """Three retained levels: small enough for dense comparisons."""
    return smooth_md(paper_params, width_floor=1e-3, amplitude_floor=1e-12)


@pytest.fixture
def coarse_mesh(coarse_md):
    return build_mesh(coarse_md, p_min=4, base_intervals=200)


@pytest.mark.unit
class TestSturmCount:
    """Negative-pivot counting on the factored form."""

    # L diag(1, 1, 0) L^T + diag(1, 0, 1) with unit couplings is tridiag(-1, 2, -1)
    DELTA = [1.0, 1.0, 0.0]
    COUPLING = [1.0, 1.0]
    DIAGONAL = [1.0, 0.0, 1.0]

    @pytest.mark.parametrize("x,expected", [(0.0, 0), (1.0, 1), (3.0, 2), (4.0, 3)])
    def test_counts(self, x, expected):
        """tridiag(-1, 2, -1) of size 3 has eigenvalues 2 - sqrt 2, 2, 2 + sqrt 2."""
        assert sturm_count(self.DELTA, self.COUPLING, x, self.DIAGONAL) == expected

    def test_single_entry(self):
        assert sturm_count([5.0], [], 6.0) == 1
        assert sturm_count([5.0], [], 4.0) == 0

    @pytest.mark.parametrize("boundary", [NEUMANN, DIRICHLET])
    def test_counts_match_dense_spectrum(self, coarse_md, coarse_mesh, boundary):
        solver = EigenSolver()
        if boundary == NEUMANN:
            asm = solver.assemble(EigenProblem.full(coarse_md, Constant(3.0), 2.0), coarse_mesh)
        else:
            asm = solver.assemble(EigenProblem.sub_interval(0.0, 1.0, Constant(3.0)), uniform_mesh(101))
        values = eigh_tridiagonal(asm.diag, asm.off, eigvals_only=True, select="i", select_range=(0, 5))
        for k in range(5):
            assert asm.count_below(0.5 * (values[k] + values[k + 1])) == k + 1
        assert asm.count_below(values[0] - 1e-6 * max(1.0, abs(values[0]))) == 0


@pytest.mark.unit
class TestShiftedFactor:
    DELTA = np.array([1.0, 1.0, 0.0])
    COUPLING = np.array([1.0, 1.0])
    DIAGONAL = np.array([1.0, 0.0, 1.0])

    def test_solve_matches_dense(self):
        pivots, multipliers = shifted_factor(self.DELTA, self.COUPLING, self.DIAGONAL, -1.0)
        dense = np.array([[3.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 3.0]])
        rhs = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(dense @ factored_solve(pivots, multipliers, rhs), rhs, rtol=1e-14)

    def test_shift_above_spectrum_has_no_factor(self):
        assert shifted_factor(self.DELTA, self.COUPLING, self.DIAGONAL, 1.0) is None


@pytest.mark.integration
class TestDefaultDeskSolves:
    """Full solves on the default desk mesh: element widths down to the width floor."""

    @pytest.fixture
    def desk_instance(self):
        apply_fixture("desk")
        return build_instance()

    @pytest.mark.parametrize("s", [1.0, 10.0, 100.0, 1e3, 1e4, 1e5])
    def test_certified_within_tolerance(self, desk_instance, s):
        result = EigenSolver().principal_eigenvalue(desk_instance.problem(s), desk_instance.mesh, richardson=False)
        c_out = desk_instance.c.c_out
        slack = get_config().eigen_tol * c_out
        assert result.residual <= get_config().eigen_tol
        assert 1.0 - slack <= result.eigenvalue <= c_out + slack
        assert np.all(result.eigvec >= 0.0)

    @pytest.mark.slow
    def test_geometric_sweep(self, desk_instance):
        s_values = [1.25 ** j for j in range(52) if 1.25 ** j < 1e5]
        results = EigenSolver().solve_sweep(desk_instance.problem(), desk_instance.mesh, s_values, workers=1,
                                            richardson=False)
        c_out = desk_instance.c.c_out
        for result in results:
            assert result.residual <= get_config().eigen_tol
            assert 1.0 - 1e-6 <= result.eigenvalue <= c_out * (1.0 + 1e-9)


@pytest.mark.unit
class TestBernoulli:
    def test_limits(self):
        assert bernoulli(0.0) == 1.0
        assert bernoulli(1e-12) == pytest.approx(1.0)
        assert bernoulli(2.0) == pytest.approx(2.0 / math.expm1(2.0))
        # B(-y) = B(y) + y
        assert bernoulli(-3.0) == pytest.approx(bernoulli(3.0) + 3.0)


@pytest.mark.unit
class TestConstantModes:
    """Exact values the discretization must reproduce."""

    @pytest.mark.parametrize("s", [0.0, 10.0, 1e3])
    def test_constant_coefficient_without_advection(self, s):
        """m = 0, c = 7 gives lambda = 7 whatever s is."""
        result = EigenSolver().principal_eigenvalue(constant_problem(7.0, s), uniform_mesh(1001))
        assert result.eigenvalue == pytest.approx(7.0, rel=1e-9)
        assert result.residual <= 1e-10
        assert result.form == FITTED
        assert np.allclose(result.eigvec, result.eigvec[0], rtol=1e-6)

    def test_dirichlet_interval(self):
        """-phi'' = lambda phi on (1/4, 3/4) with zero ends: 4 pi^2."""
        mesh = uniform_mesh(5001, 0.25, 0.75)
        problem = EigenProblem.sub_interval(0.25, 0.75, Constant(0.0), boundary=DIRICHLET)
        result = EigenSolver().principal_eigenvalue(problem, mesh)
        assert result.eigenvalue == pytest.approx(4 * math.pi ** 2, rel=1e-6)
        assert result.extrapolated == pytest.approx(4 * math.pi ** 2, rel=1e-7)
        assert result.form == WEIGHTED
        assert np.all(result.eigvec > 0)

    def test_error_estimate_is_half_mesh_difference(self):
        """h_estimate = |lambda_h - lambda_{h/2}|; the coarse error is about 4/3 of it for a second-order scheme."""
        coarse = uniform_mesh(101, 0.25, 0.75)
        fine = uniform_mesh(201, 0.25, 0.75)
        problem = EigenProblem.sub_interval(0.25, 0.75, Constant(0.0), boundary=DIRICHLET)
        solver = EigenSolver()
        result = solver.principal_eigenvalue(problem, coarse)
        lam_h = solver.principal_eigenvalue(problem, coarse, richardson=False).eigenvalue
        lam_h2 = solver.principal_eigenvalue(problem, fine, richardson=False).eigenvalue
        assert result.h_estimate == pytest.approx(abs(lam_h - lam_h2), rel=1e-6)
        assert abs(result.eigenvalue - 4 * math.pi ** 2) <= 2.0 * result.h_estimate
        assert abs(result.extrapolated - 4 * math.pi ** 2) < result.h_estimate

    def test_radial_neumann_constant(self):
        mesh = uniform_mesh(1001)
        problem = EigenProblem.full(zero_potential(), Constant(0.0), 0.0, d=2)
        result = EigenSolver().principal_eigenvalue(problem, mesh, richardson=False)
        assert result.eigenvalue == pytest.approx(0.0, abs=1e-7)
        assert math.isnan(result.h_estimate)

    def test_bounded_by_coefficient(self, coarse_md, paper_params):
        """min c <= lambda <= max c for the Neumann problem, for any s."""
        c = RampProfile(paper_params.a, paper_params.b, c_in=1.0, c_out=50.0)
        mesh = build_mesh(coarse_md, p_min=4, base_intervals=200, breakpoints=c.kinks())
        for s in (0.0, 2.0, 10.0):
            value = EigenSolver().principal_eigenvalue(EigenProblem.full(coarse_md, c, s), mesh,
                                                       richardson=False).eigenvalue
            assert 1.0 - 1e-9 <= value <= 50.0 + 1e-9


@pytest.mark.unit
class TestReferencePair:
    """lambda^D and lambda^N on (a, b)."""

    def test_constant_coefficient(self):
        pair = reference_pair(Fraction(1, 4), Fraction(3, 4), Constant(3.0))
        assert pair.lambda_N == pytest.approx(3.0, rel=1e-9)
        assert pair.lambda_D == pytest.approx(3.0 + 4 * math.pi ** 2, rel=1e-5)
        assert pair.result_D.extrapolated == pytest.approx(3.0 + 4 * math.pi ** 2, rel=1e-7)
        assert pair.gap > 0

    def test_eigenfunctions_on_sub_mesh(self):
        pair = reference_pair(Fraction(1, 4), Fraction(3, 4), Constant(3.0), richardson=False)
        assert pair.phi_D.size == pair.mesh.n_nodes
        assert pair.phi_D[0] == 0.0 and pair.phi_D[-1] == 0.0
        assert pair.phi_N.size == pair.mesh.n_nodes
        lambda_D, lambda_N, _, _ = pair
        assert lambda_D == pair.lambda_D
        assert set(pair.to_dict()) >= {"lambda_D", "lambda_N", "gap", "nodes"}

    def test_restricted_from_full_mesh(self, paper_md, paper_params, small_mesh_config):
        mesh = build_mesh(paper_md)
        pair = reference_pair(paper_params.a, paper_params.b, Constant(1.0), mesh=mesh, richardson=False)
        assert pair.mesh.nodes[0] == pytest.approx(float(paper_params.a), abs=1e-14)
        assert pair.mesh.offset == mesh.index_of(paper_params.a)


@pytest.mark.unit
class TestSolverAgreement:
    """Bisection against the dense oracle, and Rayleigh quotients."""

    def test_dense_oracle(self, coarse_md, coarse_mesh, paper_params):
        c = RampProfile(paper_params.a, paper_params.b, c_in=1.0, c_out=20.0)
        problem = EigenProblem.full(coarse_md, c, 5.0)
        solver = EigenSolver()
        asm = solver.assemble(problem, coarse_mesh)
        norm = float(np.max(np.abs(asm.diag)) + 2.0 * np.max(np.abs(asm.off)))
        value = solver.principal_eigenvalue(problem, coarse_mesh, richardson=False).eigenvalue
        oracle = solver.dense_oracle(problem, coarse_mesh)
        assert abs(value - oracle) <= 1e-12 * norm + 1e-9 * abs(oracle)

    def test_rayleigh_quotient_of_eigenvector(self, coarse_md, coarse_mesh):
        problem = EigenProblem.full(coarse_md, Constant(2.0), 3.0)
        solver = EigenSolver()
        result = solver.principal_eigenvalue(problem, coarse_mesh, richardson=False)
        assert solver.rayleigh_quotient(result.eigvec, problem, coarse_mesh) == pytest.approx(result.eigenvalue,
                                                                                             rel=1e-9)

    def test_rayleigh_quotient_upper_bound(self, coarse_md, coarse_mesh, paper_params):
        """Any positive test function bounds lambda from above."""
        c = RampProfile(paper_params.a, paper_params.b, c_in=1.0, c_out=20.0)
        problem = EigenProblem.full(coarse_md, c, 2.0)
        solver = EigenSolver()
        value = solver.principal_eigenvalue(problem, coarse_mesh, richardson=False).eigenvalue
        phi = 1.0 + coarse_mesh.nodes * (1.0 - coarse_mesh.nodes)
        assert solver.rayleigh_quotient(phi, problem, coarse_mesh, form="phi") >= value - 1e-9

    def test_constant_rayleigh_quotient(self):
        mesh = uniform_mesh(101)
        rq = EigenSolver().rayleigh_quotient(np.ones(101), constant_problem(5.0, 10.0), mesh, form="phi")
        assert rq == pytest.approx(5.0, rel=1e-12)

    def test_zero_function(self):
        mesh = uniform_mesh(11)
        with pytest.raises(ZeroFunction):
            EigenSolver().rayleigh_quotient(np.zeros(11), constant_problem(1.0), mesh, form="phi")

    def test_wrong_length(self):
        with pytest.raises(SolverError):
            EigenSolver().rayleigh_quotient(np.ones(7), constant_problem(1.0), uniform_mesh(11))


@pytest.mark.unit
class TestInvariances:
    """Properties that hold bit for bit."""

    def test_shift_of_potential(self, coarse_md, coarse_mesh):
        problem = EigenProblem.full(coarse_md, Constant(2.0), 4.0)
        solver = EigenSolver()
        base = solver.principal_eigenvalue(problem, coarse_mesh, richardson=False).eigenvalue
        moved = solver.principal_eigenvalue(problem.with_potential(coarse_md.shifted(Fraction(1, 4))), coarse_mesh,
                                            richardson=False).eigenvalue
        assert moved == base

    def test_sweep_keeps_order(self, coarse_md, coarse_mesh):
        problem = EigenProblem.full(coarse_md, Constant(2.0), 0.0)
        s_values = [1.0, 4.0, 2.0]
        serial = EigenSolver().solve_sweep(problem, coarse_mesh, s_values, workers=1, richardson=False)
        threaded = EigenSolver().solve_sweep(problem, coarse_mesh, s_values, workers=2, richardson=False)
        assert [r.s for r in serial] == s_values
        assert [r.eigenvalue for r in serial] == [r.eigenvalue for r in threaded]


@pytest.mark.unit
class TestProblemValidation:
    """Guards on problems and the weighted form."""

    def test_dynamic_range_guard(self):
        mesh = uniform_mesh(201)
        solver = EigenSolver()
        solver.assemble(EigenProblem.full(unidirectional(-1), Constant(1.0), 400.0, d=3), mesh)
        with pytest.raises(DynamicRangeExceeded) as exc_info:
            solver.assemble(EigenProblem.full(unidirectional(-1), Constant(1.0), 1e4, d=3), mesh)
        assert exc_info.value.context["budget"] == 600.0
        assert exc_info.value.suggestion is not None

    def test_negative_s(self):
        with pytest.raises(SolverError):
            EigenProblem.full(zero_potential(), Constant(1.0), -1.0)

    def test_full_problem_is_neumann(self):
        with pytest.raises(SolverError):
            EigenProblem(c=Constant(1.0), boundary=DIRICHLET)

    def test_mesh_must_span_sub_interval(self):
        problem = EigenProblem.sub_interval(0.25, 0.75, Constant(1.0), boundary=NEUMANN)
        with pytest.raises(SolverError) as exc_info:
            EigenSolver().assemble(problem, uniform_mesh(11))
        assert "Restrict" in exc_info.value.suggestion


@pytest.mark.unit
class TestContinuityBound:
    def test_zero_distance(self, paper_md):
        assert continuity_bound(10.0, paper_md, paper_md, 5.0) == 0.0

    def test_formula(self):
        assert continuity_bound(2.0, zero_potential(), zero_potential(), 3.0, distance=0.125) == pytest.approx(
            3.0 * math.expm1(1.0))

    def test_overflow(self):
        assert continuity_bound(1e6, zero_potential(), zero_potential(), 1.0, distance=1.0) == math.inf

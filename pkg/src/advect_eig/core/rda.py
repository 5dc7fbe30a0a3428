"""Reaction-diffusion-advection model and its persistence/extinction switch.

    u_t = u_xx + 2s m_x u_x + u (sigma(x) - u),   u_x = 0 at x = 0, 1

The linearization at u = 0 is the eigenproblem with c = -sigma, so the sign
of lambda_1(s) decides between decay (lambda_1 > 0) and persistence
(lambda_1 < 0). Time stepping is implicit in diffusion and advection
(the exponentially fitted operator of the eigen module, written as an
M-matrix in u) and explicit in the logistic reaction.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

from .coefficients import Negated, SigmaProfile
from .eigen import EigenProblem, EigenSolver, ReferencePair, reference_pair
from .exceptions import StepUnstable, ValidationError
from .fold import construct_divergent
from .instance import Instance, params_from_config, parse_potential
from .membership import S_D, ClauseResult, HypothesisReport
from .mesh import Mesh, build_mesh
from .potential import PiecewisePotential, zero_potential
from .utils.logging import LogManager
from ..config import fixture_overrides, get_config
from ..utils.constants import (
    EXTINCTION_RATE,
    EXTINCTION_SUP,
    PERSISTENCE_CHANGE,
    PERSISTENCE_SUP,
    RATE_WINDOW_FRACTION,
)

PERSISTENCE = "persistence"
EXTINCTION = "extinction"
UNDECIDED = "undecided"

# Runs stop once the solution is this small; the decay rate is settled long before
_SUP_FLOOR = 1e-30


# ---------------------------------------------------------------------------
# Assumptions on sigma
# ---------------------------------------------------------------------------

def _sample(profile: SigmaProfile, extra: Sequence[float] = ()) -> np.ndarray:
    points = [float(k) for k in profile.kinks()] + [float(profile.a), float(profile.b)] + list(extra)
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, 20001), points]))


def dip_bound(a, b, eps: float) -> float:
    """(32/3) (b - a - 4 eps)^-2, the energy quotient of the bump test function."""
    width = float(b) - float(a) - 4.0 * eps
    if width <= 0:
        return math.inf
    return 32.0 / 3.0 / width ** 2


def validate_sigma(profile: SigmaProfile, eps: float) -> HypothesisReport:
    """Check the three assumptions on sigma by quadrature and sampling.

    (1) int_a^b sigma > 0; (2) pi^2/(b - a)^2 > max sigma; (3) sigma < 0 on
    [a, a + eps) and (b - eps, b], sigma >= 0 on [a + 2 eps, b - 2 eps],
    sigma <= sigma(a) on [0, a) and (b, 1], and sigma(a) < -(32/3)(b - a - 4 eps)^-2.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}", validation_field="eps")
    a, b = float(profile.a), float(profile.b)
    report = HypothesisReport()

    kinks = [float(k) for k in profile.kinks() if a < float(k) < b]
    mass, _ = quad(lambda x: float(profile(x)), a, b, points=kinks or None, limit=200)
    report.clauses.append(ClauseResult("positive_mass", mass > 0, mass, f"int_a^b sigma = {mass:.6g}"))

    r = _sample(profile, [a + eps, b - eps, a + 2 * eps, b - 2 * eps])
    values = np.asarray(profile(r), dtype=float)
    sigma_star = float(values.max())
    principal = math.pi ** 2 / (b - a) ** 2 - sigma_star
    report.clauses.append(ClauseResult("principal_bound", principal > 0, principal,
                                       f"pi^2/(b-a)^2 = {math.pi ** 2 / (b - a) ** 2:.6g} vs sigma* = {sigma_star:.6g}"))

    sigma_a = float(profile(a))
    near_edges = ((r >= a) & (r < a + eps)) | ((r > b - eps) & (r <= b))
    middle = (r >= a + 2 * eps) & (r <= b - 2 * eps)
    outside = (r < a) | (r > b)
    margins = [
        -float(values[near_edges].max()) if near_edges.any() else math.inf,
        float(values[middle].min()) if middle.any() else -math.inf,
        sigma_a - float(values[outside].max()) if outside.any() else math.inf,
        -dip_bound(a, b, eps) - sigma_a,
    ]
    passed = margins[0] > 0 and margins[1] >= 0 and margins[2] >= 0 and margins[3] > 0
    report.clauses.append(ClauseResult(
        "boundary_dip", passed, min(margins),
        f"edge max {-margins[0]:.6g}, middle min {margins[1]:.6g}, sigma(a) = {sigma_a:.6g} "
        f"vs -{dip_bound(a, b, eps):.6g}",
    ))
    return report


def bump_breakpoints(a, b, eps: float) -> Tuple[float, float, float, float]:
    """Corners of the bump: a + 2eps, a + 2eps + d, b - 2eps - d, b - 2eps with d = (3/8)(b - a - 4eps)."""
    a, b = float(a), float(b)
    width = 3.0 / 8.0 * (b - a - 4.0 * eps)
    return a + 2 * eps, a + 2 * eps + width, b - 2 * eps - width, b - 2 * eps


def bump_test_function(a, b, eps: float, mesh: Mesh) -> np.ndarray:
    """Piecewise linear bump: ramps of width (3/8)(b - a - 4eps), plateau 1, zero off [a + 2eps, b - 2eps]."""
    if float(b) - float(a) - 4.0 * eps <= 0:
        raise ValidationError(f"eps = {eps} leaves no room for the bump in ({float(a)}, {float(b)})",
                              validation_field="eps")
    corners = bump_breakpoints(a, b, eps)
    return np.interp(mesh.nodes, corners, [0.0, 1.0, 1.0, 0.0], left=0.0, right=0.0)


@dataclass
class ReferenceSignReport:
    """lambda~^N < 0 < lambda~^D < -sigma outside (a, b), plus the bump certificate."""

    lambda_N: float
    lambda_D: float
    outside_min: float
    bump_quotient: float
    bump_bound: float
    slack: float
    checks: HypothesisReport = field(default_factory=HypothesisReport)

    @property
    def passed(self) -> bool:
        return self.checks.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_N": self.lambda_N,
            "lambda_D": self.lambda_D,
            "outside_min": self.outside_min,
            "bump_quotient": self.bump_quotient,
            "bump_bound": self.bump_bound,
            "slack": self.slack,
            "passed": self.passed,
            "checks": self.checks.to_dict(),
        }


def rda_mesh(profile: SigmaProfile, eps: Optional[float] = None,
             m: Optional[PiecewisePotential] = None) -> Mesh:
    """Mesh with a node on every kink of sigma, on a, b and on the bump corners."""
    cfg = get_config()
    eps = cfg.rda_eps if eps is None else eps
    extra: List[Any] = [profile.a, profile.b] + list(profile.kinks())
    if float(profile.b) - float(profile.a) - 4.0 * eps > 0:
        extra += list(bump_breakpoints(profile.a, profile.b, eps))
    return build_mesh(zero_potential() if m is None else m, breakpoints=extra)


def reference_sign_check(profile: SigmaProfile, mesh: Optional[Mesh] = None, tol: Optional[float] = None,
                         eps: Optional[float] = None) -> ReferenceSignReport:
    """Solve the references with c = -sigma and test the sign chain and the bump bound."""
    eps = get_config().rda_eps if eps is None else eps
    mesh = rda_mesh(profile, eps) if mesh is None else mesh
    c = Negated(profile)
    refs: ReferencePair = reference_pair(profile.a, profile.b, c, 1, mesh, tol)

    r = mesh.nodes
    outside = (r < float(profile.a)) | (r > float(profile.b))
    outside_min = float(np.min(-np.asarray(profile(r[outside]), dtype=float)))

    bound = dip_bound(profile.a, profile.b, eps)
    solver = EigenSolver(tol)
    local = refs.mesh
    problem = EigenProblem.sub_interval(local.nodes[0], local.nodes[-1], c, 1)
    quotient = solver.rayleigh_quotient(bump_test_function(profile.a, profile.b, eps, local), problem, local, form="phi")
    slack = 1e-8 * max(1.0, bound)

    checks = HypothesisReport()
    checks.clauses.append(ClauseResult("lambda_N_negative", refs.lambda_N < 0, -refs.lambda_N))
    checks.clauses.append(ClauseResult("lambda_D_positive", refs.lambda_D > 0, refs.lambda_D))
    checks.clauses.append(ClauseResult("lambda_D_below_outside", refs.lambda_D < outside_min,
                                       outside_min - refs.lambda_D))
    checks.clauses.append(ClauseResult("bump_bound", quotient <= bound + slack, bound + slack - quotient,
                                       f"quotient {quotient:.6g} vs (32/3)(b-a-4eps)^-2 = {bound:.6g}"))
    checks.clauses.append(ClauseResult("bump_above_lambda_D", quotient >= refs.lambda_D - slack,
                                       quotient - refs.lambda_D))
    return ReferenceSignReport(refs.lambda_N, refs.lambda_D, outside_min, quotient, bound, slack, checks)


# ---------------------------------------------------------------------------
# Time integration
# ---------------------------------------------------------------------------

def default_u0(x, seed: Optional[int] = None, perturbation: float = 0.0) -> np.ndarray:
    """0.1 (1 + cos 2 pi x)/2 + 0.05, optionally times (1 + perturbation * U(-1, 1))."""
    x = np.asarray(x, dtype=float)
    u0 = 0.1 * (1.0 + np.cos(2.0 * math.pi * x)) / 2.0 + 0.05
    if perturbation:
        rng = np.random.default_rng(seed)
        u0 = u0 * (1.0 + perturbation * rng.uniform(-1.0, 1.0, size=x.shape))
    return u0


@dataclass
class RdaSummary:
    """Recorded trajectory and the late-time diagnostics of one run."""

    s: float
    times: np.ndarray
    sup_norm: np.ndarray
    mass: np.ndarray
    final_state: np.ndarray
    nodes: np.ndarray
    dt: float
    steps: int
    halvings: int = 0
    fitted_rate: float = math.nan
    relative_change: float = math.nan

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def final_sup(self) -> float:
        return float(self.sup_norm[-1])

    def rate_estimate(self) -> np.ndarray:
        """d log(sup u)/dt along the record (NaN where sup u vanishes)."""
        if self.times.size < 2:
            return np.full(self.times.size, math.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_sup = np.where(self.sup_norm > 0, np.log(self.sup_norm), np.nan)
            return np.gradient(log_sup, self.times)

    def to_rows(self) -> List[Tuple[float, float, float, float]]:
        rates = self.rate_estimate()
        return [(float(t), float(v), float(w), float(q))
                for t, v, w, q in zip(self.times, self.sup_norm, self.mass, rates)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s": self.s,
            "t_final": self.t_final,
            "final_sup": self.final_sup,
            "final_mass": float(self.mass[-1]),
            "dt": self.dt,
            "steps": self.steps,
            "halvings": self.halvings,
            "fitted_rate": self.fitted_rate,
            "relative_change": self.relative_change,
        }


def _late_window(summary: RdaSummary) -> np.ndarray:
    start = summary.t_final * (1.0 - RATE_WINDOW_FRACTION)
    return summary.times >= start


def principal_rate(m: PiecewisePotential, s: float, profile: SigmaProfile, mesh: Mesh,
                   solver: Optional[EigenSolver] = None) -> float:
    """lambda_1(s) of the linearization, c = -sigma."""
    solver = EigenSolver() if solver is None else solver
    problem = EigenProblem.full(m, Negated(profile), s, 1)
    return solver.principal_eigenvalue(problem, mesh, richardson=False).eigenvalue


class RdaIntegrator:
    """Implicit-explicit stepper for the logistic model with Neumann data."""

    def __init__(self, solver: Optional[EigenSolver] = None):
        self.config = get_config()
        self.logger = LogManager(self.config.log_level)
        self.solver = EigenSolver() if solver is None else solver

    def operator(self, m: PiecewisePotential, s: float, profile: SigmaProfile,
                 mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(diag, upper, lower, mass, sigma) of M A, the fitted generator in u.

        Rows of M A sum to zero and its off-diagonals are -B(-2x_e)/h and
        -B(2x_e)/h, so M + dt M A is an M-matrix.
        """
        asm = self.solver.assemble(EigenProblem.full(m, Negated(profile), s, 1), mesh)
        return (asm.stiffness[0], -asm.element_left ** 2, -asm.element_right ** 2,
                asm.mass, -asm.c_nodes)

    @staticmethod
    def _banded(diag, upper, lower, mass, dt: float) -> np.ndarray:
        ab = np.zeros((3, diag.size))
        ab[0, 1:] = dt * upper
        ab[1, :] = mass + dt * diag
        ab[2, :-1] = dt * lower
        return ab

    def run(self, m: PiecewisePotential, s: float, profile: SigmaProfile, u0=None,
            t_max: Optional[float] = None, mesh: Optional[Mesh] = None,
            dt: Optional[float] = None) -> RdaSummary:
        """Integrate from u0 to t_max (or until sup u < 1e-30).

        Raises:
            ValidationError: if u0 is negative somewhere or identically zero
            StepUnstable: if 1 + dt (sigma - u) stays negative after all halvings
        """
        cfg = self.config
        mesh = rda_mesh(profile, m=m) if mesh is None else mesh
        t_max = cfg.rda_t_max if t_max is None else t_max
        if dt is None:
            dt = cfg.rda_dt if cfg.rda_dt is not None else (float(profile.b) - float(profile.a)) ** 2 / 50.0

        r = mesh.nodes
        u = default_u0(r) if u0 is None else (np.asarray(u0(r) if callable(u0) else u0, dtype=float).copy())
        if u.shape != r.shape:
            raise ValidationError(f"u0 has {u.size} values for {r.size} nodes", validation_field="u0")
        if np.any(u < 0) or not np.any(u > 0):
            raise ValidationError("Initial data must be nonnegative and not identically zero",
                                  validation_field="u0")

        diag, upper, lower, mass, sigma = self.operator(m, s, profile, mesh)
        ab, ab_dt = self._banded(diag, upper, lower, mass, dt), dt
        stride = max(1, math.ceil(t_max / dt) // cfg.rda_record_points)
        self.logger.info(f"RDA run: s={s:.6g}, {r.size} nodes, dt={dt:.3e}, t_max={t_max:.6g}")

        times, sups, masses = [0.0], [float(u.max())], [float(mass @ u)]
        t, steps, halvings = 0.0, 0, 0
        while t < t_max * (1.0 - 1e-12):
            step = min(dt, t_max - t)
            growth = 1.0 + step * (sigma - u)
            while growth.min() < 0.0:
                if halvings >= cfg.rda_max_halvings:
                    raise StepUnstable(t, step, s=s)
                dt /= 2.0
                halvings += 1
                step = min(dt, t_max - t)
                growth = 1.0 + step * (sigma - u)
                self.logger.debug(f"t={t:.6g}: halving dt to {dt:.3e} to keep u >= 0")
            if step != ab_dt:
                ab, ab_dt = self._banded(diag, upper, lower, mass, step), step
            u = np.maximum(solve_banded((1, 1), ab, mass * u * growth, check_finite=False), 0.0)
            t += step
            steps += 1
            sup = float(u.max())
            done = sup < _SUP_FLOOR or t >= t_max * (1.0 - 1e-12)
            if steps % stride == 0 or done:
                times.append(t)
                sups.append(sup)
                masses.append(float(mass @ u))
            if sup < _SUP_FLOOR:
                self.logger.debug(f"t={t:.6g}: sup u below {_SUP_FLOOR:.0e}, stopping")
                break

        summary = RdaSummary(s=float(s), times=np.array(times), sup_norm=np.array(sups), mass=np.array(masses),
                             final_state=u, nodes=r, dt=dt, steps=steps, halvings=halvings)
        window = _late_window(summary) & (summary.sup_norm > 0)
        if window.sum() >= 2:
            summary.fitted_rate = float(np.polyfit(summary.times[window], np.log(summary.sup_norm[window]), 1)[0])
            first = summary.sup_norm[window][0]
            summary.relative_change = abs(summary.final_sup - first) / max(summary.final_sup, np.finfo(float).tiny)
        self.logger.info(f"RDA run finished at t={summary.t_final:.6g}: sup u = {summary.final_sup:.3e}, "
                         f"rate {summary.fitted_rate:.4g}")
        return summary


def rda_run(m: PiecewisePotential, s: float, profile: SigmaProfile, u0=None, t_max: Optional[float] = None,
            mesh: Optional[Mesh] = None) -> RdaSummary:
    return RdaIntegrator().run(m, s, profile, u0, t_max, mesh)


def classify(summary: RdaSummary, lambda1: Optional[float] = None) -> str:
    """persistence, extinction or undecided from the late-time diagnostics.

    When lambda1 is given a verdict that contradicts its sign is logged.
    """
    if summary.final_sup < EXTINCTION_SUP and summary.fitted_rate < EXTINCTION_RATE:
        verdict = EXTINCTION
    elif summary.relative_change < PERSISTENCE_CHANGE and summary.final_sup > PERSISTENCE_SUP:
        verdict = PERSISTENCE
    else:
        verdict = UNDECIDED
    if lambda1 is not None and not consistent(verdict, lambda1):
        LogManager(get_config().log_level).warning(
            f"Verdict {verdict} at s={summary.s:.6g} contradicts lambda_1 = {lambda1:.6g}"
        )
    return verdict


def consistent(verdict: str, lambda1: float) -> bool:
    """Whether a decided verdict matches the sign of lambda_1 (undecided always does)."""
    if verdict == EXTINCTION:
        return lambda1 > 0
    if verdict == PERSISTENCE:
        return lambda1 < 0
    return True


def phase_diagram(m: PiecewisePotential, profile: SigmaProfile, s_values: Sequence[float],
                  mesh: Optional[Mesh] = None, u0=None, t_max: Optional[float] = None,
                  workers: Optional[int] = None) -> List[Tuple[float, float, str]]:
    """Rows ``s, lambda1, verdict``; cells run in parallel with independent state."""
    mesh = rda_mesh(profile, m=m) if mesh is None else mesh
    workers = get_config().workers if workers is None else workers

    def cell(s: float) -> Tuple[float, float, str]:
        lambda1 = principal_rate(m, s, profile, mesh)
        summary = RdaIntegrator().run(m, s, profile, u0, t_max, mesh)
        return float(s), lambda1, classify(summary, lambda1)

    if workers <= 1:
        return [cell(s) for s in s_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(cell, s_values))


# ---------------------------------------------------------------------------
# Switching along the fold construction
# ---------------------------------------------------------------------------

@dataclass
class PhaseStudyRow:
    stage: int
    s: float
    lambda1: float
    verdict: str
    expected: str
    fitted_rate: float

    @property
    def matches(self) -> bool:
        return self.verdict == self.expected

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage,
            "s": self.s,
            "lambda1": self.lambda1,
            "verdict": self.verdict,
            "expected": self.expected,
            "fitted_rate": self.fitted_rate,
        }


def rda_instance(profile: Optional[SigmaProfile] = None) -> Instance:
    """The fold-construction instance on the reaction-diffusion geometry (a = 1/4, l = 1, c = -sigma).

    The potential is smooth_mn:1, so stage 1 approaches lambda~^N.
    """
    profile = SigmaProfile.example() if profile is None else profile
    cfg = get_config().model_copy(update=fixture_overrides("rda"))
    params = params_from_config(cfg)
    if float(profile.a) != float(params.a):
        raise ValidationError(f"sigma lives on a = {float(profile.a)}, the geometry on a = {float(params.a)}",
                              validation_field="a")
    m = parse_potential(cfg.potential, params, cfg)
    c = Negated(profile)
    extra = [params.a, params.b] + list(c.kinks())
    mesh = build_mesh(m, cfg.p_min, cfg.mesh_cap, cfg.base_intervals, breakpoints=extra)
    refs = reference_pair(params.a, params.b, c, 1, mesh)
    return Instance(params=params, m=m, c=c, mesh=mesh, d=1, refs=refs)


def fold_phase_study(profile: Optional[SigmaProfile] = None, stages: int = 2, u0=None,
                     t_max: Optional[float] = None) -> List[PhaseStudyRow]:
    """Run the fold construction with c = -sigma and classify the model at each stage strength.

    Odd stages sit near lambda~^N < 0 (persistence expected), even stages
    near lambda~^D > 0 (extinction expected). Dynamics use the terminal
    potential.
    """
    profile = SigmaProfile.example() if profile is None else profile
    inst = rda_instance(profile)
    seq = construct_divergent(stages, inst)
    integrator = RdaIntegrator()
    rows = []
    for st, lambda1 in zip(seq.stages, seq.terminal_eigenvalues):
        summary = integrator.run(seq.terminal, st.s, profile, u0, t_max, inst.mesh)
        expected = EXTINCTION if st.regime == S_D else PERSISTENCE
        rows.append(PhaseStudyRow(st.index, st.s, lambda1, classify(summary, lambda1), expected,
                                  summary.fitted_rate))
    return rows

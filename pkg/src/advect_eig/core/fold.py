"""Alternating fold construction of a potential whose lambda(s) has two limits.

Stage k searches the first strength s_k (on a geometric grid) at which
lambda(s, m_k) is within the stage tolerance of lambda^D (odd k) or
lambda^N (even k). A start from an already folded potential (mn:<n0>)
swaps the two. Between stages the potential is folded at a zero-touch
point z_n beyond a - delta(tau_k), which flips the tail into the other
regime while leaving lambda(s_k) almost untouched.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .coefficients import Coefficient, Negated, SigmaProfile
from .eigen import EigenProblem, EigenResult, EigenSolver, ReferencePair, continuity_bound
from .exceptions import AdvectEigError, NoConvergence, NotAFoldPoint, SweepExhausted, ValidationError
from .instance import Instance, build_instance
from .membership import S_D, S_N, MembershipReport, check_membership, validate_hypotheses
from .mesh import Mesh
from .params import StepParams, breakpoints
from .potential import PiecewisePotential, envelope_delta, fold, potential_distance
from .utils.logging import DebugManager, LogManager
from ..config import get_config


@dataclass
class TargetHit:
    """First grid strength meeting a target, with the solve there."""

    s: float
    result: EigenResult
    evaluations: int


def search_target(m: PiecewisePotential, c: Coefficient, target: float, tol: float, s_start: float,
                  mesh: Mesh, d: int = 1, solver: Optional[EigenSolver] = None,
                  s_ratio: Optional[float] = None, s_cap: Optional[float] = None) -> TargetHit:
    """Walk s_start * ratio^j until |lambda(s) - target| < tol.

    Raises:
        SweepExhausted: if the target is out of reach of [min c, max c] or s passes s_cap
    """
    solver = EigenSolver() if solver is None else solver
    ratio = solver.config.s_ratio if s_ratio is None else s_ratio
    cap = solver.config.s_cap if s_cap is None else s_cap
    c_min, c_max = c.bounds(mesh.nodes)
    if target <= c_min - tol or target >= c_max + tol:
        raise SweepExhausted(target, tol, cap, s=s_start,
                             context={'c_min': c_min, 'c_max': c_max})

    problem = EigenProblem.full(m, c, s_start, d)
    s, evaluations = float(s_start), 0
    while s <= cap:
        result = solver.principal_eigenvalue(problem.with_s(s), mesh, richardson=False)
        evaluations += 1
        solver.logger.debug(f"search s={s:.6g}: lambda={result.eigenvalue:.10g}, target {target:.10g} +- {tol:.3g}")
        if abs(result.eigenvalue - target) < tol:
            return TargetHit(s, result, evaluations)
        s *= ratio
    raise SweepExhausted(target, tol, cap, s=s)


def find_s_for_target(m: PiecewisePotential, c: Coefficient, target: float, tol: float, s_start: float,
                      mesh: Mesh, d: int = 1, solver: Optional[EigenSolver] = None) -> float:
    """Smallest grid strength with |lambda(s) - target| < tol."""
    return search_target(m, c, target, tol, s_start, mesh, d, solver).s


@dataclass
class ContinuityReport:
    """Both sides of |lambda(s, m1) - lambda(s, m2)| <= c*(e^{4s|m1 - m2|} - 1) + slack."""

    s: float
    lambda1: float
    lambda2: float
    distance: float
    bound: float
    slack: float

    @property
    def difference(self) -> float:
        return abs(self.lambda1 - self.lambda2)

    @property
    def passed(self) -> bool:
        return self.difference <= self.bound + self.slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s": self.s,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "difference": self.difference,
            "distance": self.distance,
            "bound": self.bound,
            "slack": self.slack,
            "passed": self.passed,
        }


def continuity_certificate(s: float, m1: PiecewisePotential, m2: PiecewisePotential, c_star_max: float,
                           lambda1: float, lambda2: float, residual: float = 0.0,
                           scale: Optional[float] = None) -> ContinuityReport:
    """Compare the eigenvalue change with the Lipschitz bound in the potential.

    ``residual`` is the larger solver residual of the two solves; the slack
    is 2 * residual * scale, scale defaulting to max(1, c_star_max).
    """
    scale = max(1.0, abs(c_star_max)) if scale is None else scale
    distance = potential_distance(m1, m2)
    bound = continuity_bound(s, m1, m2, abs(c_star_max), distance)
    return ContinuityReport(float(s), float(lambda1), float(lambda2), distance, bound, 2.0 * residual * scale)


def analytic_threshold(stage: int, c_star: float) -> float:
    """8 / ln(1 + 1/((k + 1) c*)): the sufficient strength of the existence argument."""
    return 8.0 / math.log1p(1.0 / ((stage + 1) * c_star))


def regime_of(stage: int, first: str = S_D) -> str:
    """Regime of stage k when stage 1 is in ``first``; folds alternate it."""
    other = S_N if first == S_D else S_D
    return first if stage % 2 == 1 else other


@dataclass
class FoldStage:
    """One stage: the search on m_k and the fold that produced m_{k+1}."""

    index: int
    regime: str
    target: float
    tol: float
    s: float
    eigenvalue: float
    residual: float
    evaluations: int
    analytic_bound: float
    tau: Optional[float] = None
    envelope_width: Optional[float] = None
    fold_index: Optional[int] = None
    fold_point: Optional[float] = None
    folded_eigenvalue: Optional[float] = None
    candidates_tried: int = 0
    prefix_agrees: Optional[bool] = None
    membership: Optional[MembershipReport] = None
    continuity: Optional[ContinuityReport] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.index,
            "regime": self.regime,
            "target": self.target,
            "tol": self.tol,
            "s": self.s,
            "lambda": self.eigenvalue,
            "residual": self.residual,
            "evaluations": self.evaluations,
            "analytic_bound": self.analytic_bound,
            "tau": self.tau,
            "envelope_delta": self.envelope_width,
            "fold_index": self.fold_index,
            "fold_point": self.fold_point,
            "lambda_after_fold": self.folded_eigenvalue,
            "candidates_tried": self.candidates_tried,
            "prefix_agrees": self.prefix_agrees,
            "membership": None if self.membership is None else self.membership.to_dict(),
            "continuity": None if self.continuity is None else self.continuity.to_dict(),
        }


@dataclass
class FoldSequence:
    """Record of a construction: potentials m_1..m_K, one stage per strength."""

    params: StepParams
    c: Coefficient
    refs: ReferencePair
    mesh: Mesh
    d: int
    potentials: List[PiecewisePotential] = field(default_factory=list)
    stages: List[FoldStage] = field(default_factory=list)
    terminal_eigenvalues: List[float] = field(default_factory=list)
    initial_membership: Optional[MembershipReport] = None

    @property
    def terminal(self) -> PiecewisePotential:
        return self.potentials[-1]

    @property
    def strengths(self) -> List[float]:
        return [st.s for st in self.stages]

    @property
    def targets(self) -> List[float]:
        return [st.target for st in self.stages]

    @property
    def achieved(self) -> List[float]:
        return [st.eigenvalue for st in self.stages]

    @property
    def fold_points(self) -> List[float]:
        return [st.fold_point for st in self.stages if st.fold_point is not None]

    @property
    def midpoint(self) -> float:
        return (self.refs.lambda_D + self.refs.lambda_N) / 2.0

    def alternates(self, values: Optional[Sequence[float]] = None) -> bool:
        """Whether values (default: terminal eigenvalues) sit on the target's side of the midpoint."""
        values = self.terminal_eigenvalues if values is None else values
        mid = self.midpoint
        for st, value in zip(self.stages, values):
            if (st.regime == S_D) != (value > mid):
                return False
        return True

    def regimes_confirmed(self) -> bool:
        reports = [self.initial_membership] + [st.membership for st in self.stages if st.membership is not None]
        return all(r is not None and r.passed for r in reports)

    def certificates_pass(self) -> bool:
        return all(st.continuity.passed for st in self.stages if st.continuity is not None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "coefficient": self.c.describe(),
            "d": self.d,
            "references": self.refs.to_dict(),
            "mesh": self.mesh.stats(),
            "stages": [st.to_dict() for st in self.stages],
            "terminal_eigenvalues": self.terminal_eigenvalues,
            "fold_points": self.fold_points,
            "alternates": self.alternates(),
            "regimes_confirmed": self.regimes_confirmed(),
            "certificates_pass": self.certificates_pass(),
            "initial_membership": None if self.initial_membership is None else self.initial_membership.to_dict(),
        }

    def report_text(self) -> str:
        refs = self.refs
        lines = [
            "# advect-eig fold sequence",
            f"lambda_D = {refs.lambda_D!r}",
            f"lambda_N = {refs.lambda_N!r}",
            f"gap = {refs.gap!r}",
            f"mesh: nodes={self.mesh.n_nodes}",
            "stage tolerances: max(fold_tol_fraction * gap / k, 3 * h_estimate)"
            " (numerical stand-in for the analytic 1/k bounds)",
            "",
        ]
        for st, terminal in zip(self.stages, self.terminal_eigenvalues):
            lines.append(f"[stage {st.index}] regime={st.regime} target={st.target!r} tol={st.tol!r}")
            lines.append(f"  s = {st.s!r} (analytic sufficient s = {st.analytic_bound:.6g})")
            lines.append(f"  lambda(s, m_{st.index}) = {st.eigenvalue!r}  residual {st.residual:.3e}")
            lines.append(f"  lambda(s, terminal) = {terminal!r}")
            if st.fold_point is not None:
                lines.append(f"  tau = {st.tau!r}, delta(tau) = {st.envelope_width!r}")
                lines.append(f"  fold at z_{st.fold_index} = {st.fold_point!r} "
                             f"({st.candidates_tried} candidate(s)); lambda after fold = {st.folded_eigenvalue!r}")
                if st.membership is not None:
                    lines.append(f"  membership {st.membership.which}: "
                                 f"{'pass' if st.membership.passed else 'FAIL'} "
                                 f"(worst margin {st.membership.worst_margin:.3e})")
                if st.continuity is not None:
                    cert = st.continuity
                    lines.append(f"  continuity: |dlambda| = {cert.difference:.3e} <= {cert.bound:.3e} + "
                                 f"{cert.slack:.1e}: {'pass' if cert.passed else 'FAIL'}")
                lines.append(f"  prefix unchanged on [0, a - delta]: {st.prefix_agrees}")
        lines.append("")
        lines.append(f"alternation across (lambda_D + lambda_N)/2: {'yes' if self.alternates() else 'no'}")
        lines.append(f"regimes confirmed: {'yes' if self.regimes_confirmed() else 'no'}")
        return "\n".join(lines) + "\n"


def _is_sigma(c: Coefficient) -> bool:
    while isinstance(c, Negated):
        c = c.inner
    return isinstance(c, SigmaProfile)


class FoldPipeline:
    """Runs the construction stage by stage with logging and state capture."""

    def __init__(self, instance: Instance, stages: Optional[int] = None, solver: Optional[EigenSolver] = None):
        self.config = get_config()
        self.instance = instance
        self.n_stages = self.config.stages if stages is None else stages
        self.solver = EigenSolver() if solver is None else solver
        self.logger = LogManager(self.config.log_level)
        self.debugger = DebugManager(self.config.log_level)
        if self.n_stages < 2:
            raise ValidationError(f"The construction needs at least two stages, got {self.n_stages}",
                                  validation_field="stages")
        if instance.refs is None:
            raise ValidationError("The construction needs the references lambda_D, lambda_N",
                                  validation_field="refs")
        self.first_regime, self.start_level = self._start()

    # -- setup --------------------------------------------------------------

    def _levels(self) -> int:
        levels = self.instance.m.metadata.get("levels")
        if levels is None:
            levels = self.instance.params.retained_levels(self.config.width_floor, self.config.amplitude_floor)
        return int(levels)

    def _start(self) -> Tuple[str, int]:
        """Regime of stage 1 and the level of the deepest fold already in the initial potential.

        smooth_md starts in S_D with no fold; every fold point the potential
        already carries flips the regime once.
        """
        points = [float(p) for p in self.instance.m.metadata.get("fold_points", ())]
        if not points:
            return S_D, -1
        z = breakpoints(self.instance.params, self._levels()).z
        levels = [n for n in range(len(z)) if any(abs(float(z[n]) - p) <= 1e-15 for p in points)]
        if len(levels) != len(points):
            raise ValidationError("The initial potential is folded away from the zero-touch points",
                                  validation_field="potential",
                                  suggestion="Start from md or mn:<n0>")
        return regime_of(len(points) + 1), max(levels)

    def _validate(self) -> MembershipReport:
        inst = self.instance
        report = validate_hypotheses(inst.m, inst.c, inst.refs.lambda_D, grid=inst.mesh,
                                     require_positive_c=not _is_sigma(inst.c))
        self.debugger.capture_state("hypotheses", report.to_dict())
        if not report.passed:
            raise ValidationError(f"Hypotheses fail: {', '.join(report.failed())}",
                                  validation_field=report.failed()[0],
                                  suggestion="Use a symmetric potential vanishing on [a, b] and c above lambda_D outside")
        params = inst.params if self.start_level < 0 else inst.params.shifted(self.start_level + 1)
        membership = check_membership(inst.m, params, self.first_regime, inst.mesh)
        if not membership.passed:
            self.logger.warning(f"Initial potential is not in {self.first_regime} "
                                f"(worst margin {membership.worst_margin:.3e} at r={membership.worst_location})")
        return membership

    def _tolerance(self, k: int) -> float:
        refs = self.instance.refs
        h_est = np.nanmax([refs.result_D.h_estimate, refs.result_N.h_estimate, 0.0])
        return max(self.config.fold_tol_fraction * refs.gap / k, 3.0 * float(h_est))

    # -- stages -------------------------------------------------------------

    def _search(self, k: int, m: PiecewisePotential, s_start: float) -> FoldStage:
        inst = self.instance
        regime = regime_of(k, self.first_regime)
        target = inst.refs.lambda_D if regime == S_D else inst.refs.lambda_N
        tol = self._tolerance(k)
        self.logger.info(f"Stage {k}: searching s >= {s_start:.6g} for lambda within {tol:.3g} of {target:.10g}")
        hit = search_target(m, inst.c, target, tol, s_start, inst.mesh, inst.d, self.solver)
        c_star = float(np.max(inst.c(inst.mesh.nodes)))
        bound = analytic_threshold(k, c_star) if c_star > 0 else math.inf
        self.logger.info(f"Stage {k}: s = {hit.s:.6g}, lambda = {hit.result.eigenvalue:.10g} "
                         f"after {hit.evaluations} solves (analytic sufficient s = {bound:.3g})")
        return FoldStage(index=k, regime=regime, target=target, tol=tol, s=hit.s,
                         eigenvalue=hit.result.eigenvalue, residual=hit.result.residual,
                         evaluations=hit.evaluations, analytic_bound=bound)

    def _candidates(self, m: PiecewisePotential, previous: int, width: float) -> List[Tuple[int, Any]]:
        params = self.instance.params
        levels = self._levels()
        z = breakpoints(params, levels).z
        edge = float(params.a) - width
        return [(n, z[n]) for n in range(previous + 1, levels + 1) if float(z[n]) > edge]

    def _fold(self, stage: FoldStage, m: PiecewisePotential, previous: int) -> Tuple[PiecewisePotential, int]:
        inst = self.instance
        tau = self.config.fold_tau_scale * stage.s ** (-self.config.fold_tau_power)
        width = envelope_delta(m, tau)
        stage.tau, stage.envelope_width = tau, width
        candidates = self._candidates(m, previous, width)[: self.config.fold_max_advance + 1]
        if not candidates:
            raise NoConvergence(
                f"No fold point beyond a - delta = {float(inst.params.a) - width:.6g} among the kept levels",
                stage="fold", s=stage.s,
                suggestion="Lower width_floor / amplitude_floor to keep more levels",
            )

        problem = inst.problem(stage.s)
        for tried, (n, z) in enumerate(candidates, start=1):
            try:
                folded = fold(m, z)
            except NotAFoldPoint as e:
                self.logger.debug(f"Stage {stage.index}: z_{n} rejected: {e.message}")
                continue
            after = self.solver.principal_eigenvalue(problem.with_potential(folded), inst.mesh, richardson=False)
            self.logger.debug(f"Stage {stage.index}: fold at z_{n} gives lambda {after.eigenvalue:.10g}")
            if abs(after.eigenvalue - stage.target) < stage.tol:
                stage.fold_index, stage.fold_point = n, float(z)
                stage.folded_eigenvalue = after.eigenvalue
                stage.candidates_tried = tried
                c_abs = float(np.max(np.abs(inst.c(inst.mesh.nodes))))
                stage.continuity = continuity_certificate(
                    stage.s, m, folded, c_abs, stage.eigenvalue, after.eigenvalue,
                    residual=max(stage.residual, after.residual),
                )
                return folded, n
        raise NoConvergence(
            f"Stage {stage.index}: no fold among z_{candidates[0][0]}..z_{candidates[-1][0]} "
            f"keeps lambda(s_{stage.index}) within {stage.tol:.3g} of the target",
            stage="fold", s=stage.s,
            suggestion="Raise fold_max_advance or lower fold_tau_scale",
        )

    def _check(self, stage: FoldStage, before: PiecewisePotential, after: PiecewisePotential) -> None:
        inst = self.instance
        nodes = inst.mesh.nodes
        prefix = nodes[nodes <= float(inst.params.a) - stage.envelope_width]
        stage.prefix_agrees = bool(np.array_equal(before.value(prefix), after.value(prefix)))
        regime = regime_of(stage.index + 1, self.first_regime)
        stage.membership = check_membership(after, inst.params.shifted(stage.fold_index + 1), regime, inst.mesh)
        if not stage.membership.passed:
            self.logger.warning(f"Stage {stage.index}: folded potential is not in {regime} "
                                f"(worst margin {stage.membership.worst_margin:.3e})")
        if not stage.continuity.passed:
            self.logger.warning(f"Stage {stage.index}: continuity certificate fails "
                                f"({stage.continuity.difference:.3e} > {stage.continuity.bound:.3e})")

    # -- driver -------------------------------------------------------------

    def run(self, output_dir: Optional[str] = None) -> FoldSequence:
        """Run all stages; the debug report goes under output_dir when given."""
        inst = self.instance
        seq = FoldSequence(params=inst.params, c=inst.c, refs=inst.refs, mesh=inst.mesh, d=inst.d,
                           potentials=[inst.m])
        self.logger.info(f"Starting fold construction: {self.n_stages} stages, gap {inst.refs.gap:.6g}")
        current_stage = "hypotheses"
        try:
            seq.initial_membership = self._validate()
            m, previous, s_start = inst.m, self.start_level, self.config.s_start
            for k in range(1, self.n_stages + 1):
                current_stage = f"stage_{k}"
                stage = self._search(k, m, s_start)
                if k < self.n_stages:
                    folded, previous = self._fold(stage, m, previous)
                    self._check(stage, m, folded)
                    self.logger.info(f"Stage {k}: folded at z_{previous} = {stage.fold_point:.10g}")
                    m = folded
                    seq.potentials.append(m)
                seq.stages.append(stage)
                self.debugger.capture_state(current_stage, stage.to_dict())
                s_start = stage.s * self.config.s_ratio

            current_stage = "terminal"
            problem = inst.problem(0.0, seq.terminal)
            seq.terminal_eigenvalues = [
                self.solver.principal_eigenvalue(problem.with_s(st.s), inst.mesh, richardson=False).eigenvalue
                for st in seq.stages
            ]
            self.debugger.capture_state("terminal", {"terminal_eigenvalues": seq.terminal_eigenvalues})
        except AdvectEigError as e:
            self.logger.error(f"Error in {current_stage}: {e.message}")
            self.debugger.capture_error(current_stage, e)
            raise
        finally:
            if output_dir is not None:
                self.debugger.generate_debug_report(output_dir)

        self.logger.info(f"Fold construction completed: strengths {[f'{s:.4g}' for s in seq.strengths]}, "
                         f"alternation {'holds' if seq.alternates() else 'fails'}")
        return seq


def construct_divergent(stages: Optional[int] = None, instance: Optional[Instance] = None,
                        solver: Optional[EigenSolver] = None, output_dir: Optional[str] = None) -> FoldSequence:
    """Build the alternating sequence for instance (default: the configured one)."""
    instance = build_instance() if instance is None else instance
    return FoldPipeline(instance, stages, solver).run(output_dir)


def default_s_grid(seq: FoldSequence, s_start: Optional[float] = None, ratio: Optional[float] = None) -> List[float]:
    """s_start * ratio^j up to ratio times the largest stage strength."""
    cfg = get_config()
    s = cfg.s_start if s_start is None else s_start
    ratio = cfg.s_ratio if ratio is None else ratio
    stop = max(seq.strengths) * ratio
    grid = []
    while s <= stop * (1.0 + 1e-12):
        grid.append(s)
        s *= ratio
    return grid


def divergence_table(seq: FoldSequence, s_grid: Optional[Sequence[float]] = None,
                     solver: Optional[EigenSolver] = None,
                     workers: Optional[int] = None) -> List[Tuple[float, float, float, Optional[int], Optional[float]]]:
    """Rows ``s, lambda, residual, stage, target`` for the terminal potential.

    Stage strengths are merged into the grid; their rows carry the stage
    number and its target, all other rows leave both empty.
    """
    solver = EigenSolver() if solver is None else solver
    grid = default_s_grid(seq) if s_grid is None else list(s_grid)
    marks = {st.s: st for st in seq.stages}
    values = sorted(set(float(s) for s in grid) | set(marks))
    problem = EigenProblem.full(seq.terminal, seq.c, 0.0, seq.d)
    results = solver.solve_sweep(problem, seq.mesh, values, workers, richardson=False)
    rows = []
    for s, result in zip(values, results):
        st = marks.get(s)
        rows.append((s, result.eigenvalue, result.residual,
                     None if st is None else st.index, None if st is None else st.target))
    return rows

"""Envelope membership (S_D / S_N) and the hypotheses on (m, c)."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .coefficients import Coefficient
from .params import StepParams
from .potential import PiecewisePotential, step_bar, step_tilde
from ..utils.constants import MEMBERSHIP_SLACK

S_D = "S_D"
S_N = "S_N"


def _nodes(grid) -> np.ndarray:
    return np.asarray(getattr(grid, "nodes", grid), dtype=float)


@dataclass
class MembershipReport:
    """Outcome of comparing a potential with a step envelope on a grid."""

    which: str
    passed: bool
    worst_margin: float
    worst_location: Optional[float]
    first_violation: Optional[float]
    nodes_checked: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "which": self.which,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "worst_location": self.worst_location,
            "first_violation": self.first_violation,
            "nodes_checked": self.nodes_checked,
        }


def check_membership(m: PiecewisePotential, params: StepParams, which: str, grid,
                     width_floor: Optional[float] = None,
                     amplitude_floor: Optional[float] = None) -> MembershipReport:
    """Check m >= step_tilde (S_D) or m <= step_bar (S_N) at the grid nodes.

    Only nodes in [delta, cutoff) and its mirror image are compared, where
    cutoff is the smaller truncation point of m and of the envelope; past it
    both are continued by zero and the comparison carries no information.
    """
    if which not in (S_D, S_N):
        raise ValueError(f"which must be {S_D} or {S_N}, got {which}")
    width_floor = m.metadata.get("width_floor", width_floor) if width_floor is None else width_floor
    amplitude_floor = m.metadata.get("amplitude_floor", amplitude_floor) if amplitude_floor is None else amplitude_floor
    envelope = (step_tilde if which == S_D else step_bar)(params, width_floor, amplitude_floor)

    upper = float(params.a)
    for candidate in (m.metadata.get("cutoff"), envelope.metadata.get("cutoff")):
        if candidate is not None:
            upper = min(upper, float(candidate))
    delta = float(params.delta)

    nodes = _nodes(grid)
    mask = ((nodes >= delta) & (nodes < upper)) | ((nodes > 1.0 - upper) & (nodes <= 1.0 - delta))
    r = nodes[mask]
    if r.size == 0:
        return MembershipReport(which, False, float("nan"), None, None, 0)

    if which == S_D:
        margin = m.value(r) - envelope.value(r)
    else:
        margin = envelope.value(r) - m.value(r)

    worst = int(np.argmin(margin))
    violations = np.nonzero(margin < -MEMBERSHIP_SLACK)[0]
    return MembershipReport(
        which=which,
        passed=violations.size == 0,
        worst_margin=float(margin[worst]),
        worst_location=float(r[worst]),
        first_violation=float(r[violations[0]]) if violations.size else None,
        nodes_checked=int(r.size),
    )


@dataclass
class ClauseResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "margin": self.margin, "detail": self.detail}


@dataclass
class HypothesisReport:
    """Per-clause outcome of validate_hypotheses."""

    clauses: List[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> List[str]:
        return [c.name for c in self.clauses if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "clauses": [c.to_dict() for c in self.clauses]}


def _sample_grid(m: PiecewisePotential, c: Coefficient, grid) -> np.ndarray:
    if grid is not None:
        return _nodes(grid)
    extra = [float(k) for k in c.kinks()]
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, 20001), m.boundaries(), extra]))


def validate_hypotheses(m: PiecewisePotential, c: Coefficient, lambda_D: float, grid=None,
                        require_positive_c: bool = True) -> HypothesisReport:
    """Check symmetry, m = 0 on [a, b], c > 0 and min c outside (a, b) > lambda_D.

    ``require_positive_c=False`` reports the positivity clause without
    enforcing it (the reaction-diffusion study uses c = -sigma).
    """
    r = _sample_grid(m, c, grid)
    report = HypothesisReport()

    asym = float(np.max(np.abs(m.value(r) - m.value(1.0 - r))))
    report.clauses.append(ClauseResult(
        "symmetry", m.is_symmetric() and asym <= 1e-12 * max(1.0, m.max_abs()), -asym,
        "m(r) = m(1 - r)",
    ))

    if m.a is None:
        report.clauses.append(ClauseResult("zero_on_ab", False, float("nan"), "no degenerate interval"))
        outside = np.ones_like(r, dtype=bool)
    else:
        a, b = float(m.a), float(m.b)
        inside = (r >= a) & (r <= b)
        structural = all(p.kind == "zero" and p.offset == 0
                         for p in m.pieces if p.kind != "mirror" and p.lo >= m.a and p.hi <= m.b)
        worst = float(np.max(np.abs(m.value(r[inside])))) if inside.any() else 0.0
        report.clauses.append(ClauseResult("zero_on_ab", structural and worst == 0.0, -worst,
                                           f"m = 0 on [{a:.6g}, {b:.6g}]"))
        outside = ~inside | (r == a) | (r == b)

    c_values = np.asarray(c(r), dtype=float)
    c_min = float(c_values.min())
    if require_positive_c:
        report.clauses.append(ClauseResult("c_positive", c_min > 0, c_min, "c > 0 on [0, 1]"))
    else:
        report.clauses.append(ClauseResult("c_positive", True, c_min, "not enforced"))

    c_out_min = float(c_values[outside].min())
    report.clauses.append(ClauseResult(
        "c_exceeds_lambda_D", c_out_min > lambda_D, c_out_min - lambda_D,
        f"min c on [0,a] U [b,1] = {c_out_min:.6g} vs lambda_D = {lambda_D:.6g}",
    ))
    return report

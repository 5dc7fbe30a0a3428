"""Explicit test functions and the upper bounds they certify.

The Dirichlet test function is phi^D extended by zero; its quotient on the
full problem is lambda^D whatever s is. The Neumann test function is a
staircase built from

    sigma_n(s) = (alpha beta)^((n + l)/2) exp(s (1 + nu) h^(n + k))
    p_n(s)     = 1 / prod_{j >= n} (1 + sigma_j(s))

where k is the params' amplitude level. p_n(s) underflows long before the
construction stops being interesting, so everything here lives in log space.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .eigen import EigenProblem, EigenSolver, ReferencePair
from .mesh import Mesh
from .params import StepParams, breakpoints
from ..utils.constants import STAIRCASE_SIGMA_FLOOR

_LOG_SIGMA_FLOOR = math.log(STAIRCASE_SIGMA_FLOOR)

# Hard stop for the infinite product (alpha beta)^(n/2) reaches the floor long before
_MAX_TERMS = 100_000


@dataclass
class CertificateBundle:
    """log sigma_n and log p_n for n = 0..n_max + 1, plus an optional certified quotient."""

    params: StepParams
    s: float
    log_sigma: np.ndarray
    log_p: np.ndarray
    terms: int
    values: Optional[np.ndarray] = None
    rayleigh: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return int(self.log_p.size) - 2

    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def p(self) -> np.ndarray:
        return np.exp(self.log_p)

    def identity_error(self) -> float:
        """max relative error of p_{n+1} - p_n = sigma_n p_n over representable entries."""
        p, sigma = self.p(), self.sigma()
        lhs = p[1:] - p[:-1]
        rhs = sigma[:-1] * p[:-1]
        ok = (rhs > 0) & np.isfinite(rhs) & (p[:-1] > 0)
        if not ok.any():
            return 0.0
        return float(np.max(np.abs(lhs[ok] - rhs[ok]) / rhs[ok]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s": self.s,
            "log_sigma": self.log_sigma,
            "log_p": self.log_p,
            "terms": self.terms,
            "rayleigh": self.rayleigh,
            "params": self.params.to_dict(),
            **self.extra,
        }


def log_sigma(params: StepParams, s: float, n) -> np.ndarray:
    """log sigma_n(s), vectorized over n.

    sigma_n(s) = (alpha beta)^((n + l)/2) exp(s (1 + nu) h^(n + level)). The
    width offset l enters the exponent, so at s = 0 sigma_n is (alpha beta)^(n/2)
    only for l = 0; the desk and reaction geometries (l = 1) give
    (alpha beta)^((n + 1)/2).
    """
    n = np.asarray(n, dtype=float)
    log_ab = math.log(float(params.alpha)) + math.log(float(params.beta))
    growth = s * (1.0 + float(params.nu)) * float(params.h) ** (n + params.level)
    return (n + params.l) / 2.0 * log_ab + growth


def staircase(params: StepParams, s: float, n_max: int) -> CertificateBundle:
    """sigma_n(s) and p_n(s) for n = 0..n_max + 1, in log space.

    The product defining p_n is accumulated as a sum of log(1 + sigma_j)
    and cut at the first j past n_max + 1 with sigma_j < 1e-18.
    """
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    if n_max < 0:
        raise ValueError(f"n_max must be nonnegative, got {n_max}")
    last = n_max + 1
    k = last
    while k < _MAX_TERMS and log_sigma(params, s, k) >= _LOG_SIGMA_FLOOR:
        k += 1
    logs = log_sigma(params, s, np.arange(k + 1))
    terms = np.logaddexp(0.0, logs)
    tail = np.cumsum(terms[::-1])[::-1]
    log_p = -tail[: last + 1]
    return CertificateBundle(params=params, s=float(s), log_sigma=logs[: last + 1], log_p=log_p, terms=k + 1)


def dirichlet_test_function(phi_D: Sequence[float], a, b, mesh: Mesh,
                            reference_nodes: Optional[np.ndarray] = None) -> np.ndarray:
    """phi^D on [a, b] and zero elsewhere, on every node of mesh.

    ``reference_nodes`` are the nodes phi_D lives on (default: mesh
    restricted to [a, b]).
    """
    if reference_nodes is None:
        reference_nodes = mesh.restrict(a, b).nodes
    r = mesh.nodes
    out = np.zeros(r.size)
    inside = (r >= float(a) - 1e-15) & (r <= float(b) + 1e-15)
    out[inside] = np.interp(r[inside], reference_nodes, np.asarray(phi_D, dtype=float))
    return out


def _level_count(params: StepParams, r: np.ndarray) -> int:
    """Levels needed so that x_{N+1} passes the last node left of a."""
    a = float(params.a)
    inner = r[r < a]
    target = float(inner.max()) if inner.size else float(params.delta)
    n = 0
    bp = breakpoints(params, 1)
    while float(bp.x[-1]) <= target and n < 200:
        n += 8
        bp = breakpoints(params, n + 1)
    return n


def _left_log(r: np.ndarray, params: StepParams, bundle: CertificateBundle, x: np.ndarray, y: np.ndarray,
              delta1: float, log_phi_a: float) -> np.ndarray:
    delta = float(params.delta)
    out = np.full(r.shape, -np.inf)
    log_p, log_s = bundle.log_p, bundle.log_sigma

    ramp = (r >= delta - delta1) & (r < delta)
    with np.errstate(divide="ignore"):
        out[ramp] = log_p[1] + np.log((r[ramp] - (delta - delta1)) / delta1)

    levels = x.size - 1
    for n in range(levels):
        plateau = (r >= x[n]) & (r < y[n])
        out[plateau] = log_p[n + 1]
        slope = (r >= y[n]) & (r < x[n + 1])
        if slope.any():
            with np.errstate(divide="ignore"):
                log_t = np.log((r[slope] - y[n]) / (x[n + 1] - y[n]))
            out[slope] = log_p[n + 1] + np.logaddexp(0.0, log_s[n + 1] + log_t)
    beyond = (r >= x[-1]) & (r < float(params.a))
    out[beyond] = log_p[min(levels + 1, log_p.size - 1)]
    return out + log_phi_a


def neumann_test_function(params: StepParams, s: float, phi_N: Sequence[float], mesh: Mesh,
                          reference_nodes: Optional[np.ndarray] = None,
                          delta1: Optional[float] = None) -> np.ndarray:
    """log of the staircase test function on every node of mesh.

    Zero (log = -inf) on [0, delta - delta1), a linear ramp up to
    phi^N(a) p_1 at delta, the plateau phi^N(a) p_n on [Y_{n-1}, X_n),
    linear interpolation on [X_n, Y_n), phi^N itself on [a, b], and on
    (b, 1] the mirror image scaled by phi^N(b) / phi^N(a).

    ``delta1`` defaults to min(beta^l, delta / 2); for params shifted past
    a fold at z_j the ramp is then exactly [y_j, x_{j+1}).
    """
    if reference_nodes is None:
        reference_nodes = mesh.restrict(params.a, params.b).nodes
    phi_N = np.asarray(phi_N, dtype=float)
    if np.any(phi_N <= 0):
        raise ValueError("phi_N must be strictly positive on [a, b]")
    if delta1 is None:
        delta1 = min(float(params.beta) ** params.l, float(params.delta) / 2.0)

    r = mesh.nodes
    levels = _level_count(params, r)
    bp = breakpoints(params, levels + 1)
    x = np.array([float(v) for v in bp.x])
    y = np.array([float(v) for v in bp.y])
    bundle = staircase(params, s, levels + 1)

    log_a, log_b = math.log(phi_N[0]), math.log(phi_N[-1])
    out = np.full(r.size, -np.inf)
    # Masks follow the reference nodes: 1 - float(a) and float(b) may differ by an ulp
    lo_node, hi_node = reference_nodes[0], reference_nodes[-1]
    left = r < lo_node
    out[left] = _left_log(r[left], params, bundle, x, y, delta1, log_a)
    middle = (r >= lo_node) & (r <= hi_node)
    out[middle] = np.log(np.interp(r[middle], reference_nodes, phi_N))
    right = r > hi_node
    out[right] = _left_log(1.0 - r[right], params, bundle, x, y, delta1, log_a) + (log_b - log_a)
    return out


def certify_neumann(params: StepParams, s: float, refs: ReferencePair, problem: EigenProblem,
                    mesh: Mesh, solver: Optional[EigenSolver] = None) -> CertificateBundle:
    """Staircase bundle at s with its test function and quotient filled in."""
    solver = EigenSolver() if solver is None else solver
    values = neumann_test_function(params, s, refs.phi_N, mesh, refs.mesh.nodes)
    levels = _level_count(params, mesh.nodes)
    bundle = staircase(params, s, levels + 1)
    bundle.values = values
    bundle.rayleigh = solver.rayleigh_quotient(values, problem.with_s(s), mesh, form="log_phi")
    return bundle


def certificate_rows(problem: EigenProblem, mesh: Mesh, s_values: Sequence[float], refs: ReferencePair,
                     params: Optional[StepParams] = None,
                     solver: Optional[EigenSolver] = None) -> List[Tuple[float, float, Optional[float], float]]:
    """Rows ``s, rq_dirichlet_test, rq_neumann_test, lambda`` along s_values.

    The Neumann column is empty when no S_N geometry is given.
    """
    solver = EigenSolver() if solver is None else solver
    phi_d = dirichlet_test_function(refs.phi_D, refs.mesh.nodes[0], refs.mesh.nodes[-1], mesh, refs.mesh.nodes)
    rows = []
    for s in s_values:
        current = problem.with_s(s)
        asm = solver.assemble(current, mesh)
        value = solver.solve_assembled(current, asm).eigenvalue
        rq_d = solver.rayleigh_quotient(phi_d, current, mesh, form="phi", asm=asm)
        rq_n = None
        if params is not None:
            log_phi = neumann_test_function(params, s, refs.phi_N, mesh, refs.mesh.nodes)
            rq_n = solver.rayleigh_quotient(log_phi, current, mesh, form="log_phi", asm=asm)
        solver.logger.debug(f"s={s:.6g}: lambda={value:.10g}, D-test={rq_d:.10g}, N-test={rq_n}")
        rows.append((float(s), rq_d, rq_n, value))
    return rows


def staircase_params(params: StepParams, m) -> Optional[StepParams]:
    """Params whose staircase matches m, or None when m is not in the folded regime.

    An odd number of folds leaves the tail in S_N; the staircase then starts
    past the last fold point z_j, i.e. at params.shifted(j + 1).
    """
    points = tuple(m.metadata.get("fold_points", ()))
    if len(points) % 2 == 0:
        return None
    z = float(points[-1])
    levels = m.metadata.get("levels")
    levels = 200 if levels is None else int(levels) + 1
    bp = breakpoints(params, levels)
    for n, z_n in enumerate(bp.z):
        if abs(float(z_n) - z) <= 1e-14:
            return params.shifted(n + 1)
    return None

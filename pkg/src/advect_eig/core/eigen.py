"""Discrete principal eigenvalues of the advection eigenproblem.

Full problem on (0, 1) with Neumann data:

    -phi'' - (d-1)/r phi' - 2s m'(r) phi' + c(r) phi = lambda phi

For d = 1 the quadratic form is assembled in w = e^{sm} phi with an
exponentially fitted P1 element: element e carries x_e = s * int_e m' and
the vector exp(cumsum x_e) has zero energy. Only m' enters, so shifting m
by a constant does not change a single bit. The increments are clamped at
+-fitting_clamp: an element whose true increment is larger is assembled as
if it were exactly the clamp, so its downstream factor is e^{-clamp} times
the upstream one instead of e^{-|x_e|}, and its stiffness is that of the
clamped increment. The clamped operator is still an M-matrix with zero
energy on exp(cumsum of the clamped x_e), so constant c stays exact.

For d >= 2 the weighted form in phi with weight r^(d-1) e^{2s(m - m_mid)}
is used and the log-range of that weight is guarded.

Sub-interval problems on (lo, hi) (the references lambda^D, lambda^N) use
the weight r^(d-1) alone; Dirichlet drops the end nodes.

Every problem reduces to the symmetric tridiagonal T = M^-1/2 K M^-1/2 +
diag(c) with a lumped (diagonal) mass M. K is kept twice: as T itself, and
as the element factors, T - diag(c) = B^T B with B bidiagonal. On graded
meshes (elements down to 1e-10) the entries of T span twenty orders of
magnitude and only the factored form determines lambda to working
accuracy. So LAPACK bisection (stebz) on T gives a first estimate, inverse
iteration below it factors T - shift by the stationary qd recurrence on the
element factors (``shifted_factor``), lambda is the Rayleigh quotient of the
iterate evaluated from the element factors, and a Sturm count on the
factored form certifies that no eigenvalue lies below lambda - eigen_tol *
scale. When the estimate is not below the spectrum, bisection on the
factored counts replaces it.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .coefficients import Coefficient, Constant
from .exceptions import CapExceeded, DynamicRangeExceeded, NoConvergence, SingularMass, SolverError, ZeroFunction
from .mesh import Mesh, refine, uniform_mesh
from .potential import PiecewisePotential, potential_distance, zero_potential
from .utils.logging import LogManager
from ..config import get_config

FULL = "full"
SUB = "sub"
NEUMANN = "neumann"
DIRICHLET = "dirichlet"

FITTED = "fitted"
WEIGHTED = "weighted"

# Gauss-Legendre nodes and weights on [0, 1]
_GAUSS3_T = np.array([0.5 - math.sqrt(0.15), 0.5, 0.5 + math.sqrt(0.15)])
_GAUSS3_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
_GAUSS2_T = np.array([0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0])

# s_i / D+_i after a zero pivot; coupling * cap stays finite
_RATIO_CAP = 1e280
# first distance of the inverse-iteration shift below the estimate, relative to scale
_SHIFT_GAP = 1e-4
_SHIFT_RETREATS = 4


def bernoulli(y) -> np.ndarray:
    """B(y) = y / (e^y - 1), with B(0) = 1."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-8
    safe = np.where(small, 1.0, y)
    return np.where(small, 1.0 - y / 2.0, safe / np.expm1(safe))


@dataclass(frozen=True)
class EigenProblem:
    """One eigenproblem: full (0, 1) Neumann, or a sub-interval with D/N data."""

    c: Coefficient
    m: PiecewisePotential = field(default_factory=zero_potential)
    s: float = 0.0
    d: int = 1
    domain: str = FULL
    boundary: str = NEUMANN
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.s < 0:
            raise SolverError(f"Advection strength must be nonnegative, got {self.s}", stage="problem", s=self.s)
        if int(self.d) != self.d or self.d < 1:
            raise SolverError(f"Dimension must be a positive integer, got {self.d}", stage="problem")
        if self.domain not in (FULL, SUB):
            raise SolverError(f"Unknown domain '{self.domain}'", stage="problem")
        if self.boundary not in (NEUMANN, DIRICHLET):
            raise SolverError(f"Unknown boundary condition '{self.boundary}'", stage="problem")
        if self.domain == FULL and self.boundary != NEUMANN:
            raise SolverError("The full problem carries Neumann data", stage="problem")
        if not 0.0 <= float(self.lo) < float(self.hi) <= 1.0:
            raise SolverError(f"Bad interval ({float(self.lo)}, {float(self.hi)})", stage="problem")

    @classmethod
    def full(cls, m: PiecewisePotential, c: Coefficient, s: float, d: int = 1) -> "EigenProblem":
        return cls(c=c, m=m, s=float(s), d=d)

    @classmethod
    def sub_interval(cls, lo, hi, c: Coefficient, d: int = 1, boundary: str = DIRICHLET) -> "EigenProblem":
        return cls(c=c, d=d, domain=SUB, boundary=boundary, lo=float(lo), hi=float(hi))

    def with_s(self, s: float) -> "EigenProblem":
        return replace(self, s=float(s))

    def with_potential(self, m: PiecewisePotential) -> "EigenProblem":
        return replace(self, m=m)

    @property
    def form(self) -> str:
        return FITTED if (self.domain == FULL and self.d == 1) else WEIGHTED

    def describe(self) -> str:
        if self.domain == SUB:
            return f"{self.boundary} on ({self.lo:.6g}, {self.hi:.6g}), d={self.d}"
        return f"full Neumann, d={self.d}, s={self.s:.6g}, m={self.m.metadata.get('name', '?')}"


@dataclass
class Assembly:
    """Assembled pencil of one problem on one mesh.

    ``diag``/``off`` hold T. ``stiffness`` is (K diagonal, K off-diagonal),
    ``mass`` the lumped M, all restricted to the unknowns ``nodes``.
    ``log_scale`` (fitted form only) is cumsum(x_e), the log of the
    zero-energy vector; ``element_left``/``element_right`` are the factors
    sqrt(B(-2x))/sqrt(h) and sqrt(B(2x))/sqrt(h) whose difference squared is
    the element energy (for the weighted form both are sqrt(rho/h)).

    ``delta``, ``coupling`` and ``extra`` are the same T in factored form:
    T = L diag(delta) L^T + diag(extra + c_nodes), L unit lower bidiagonal
    with (L_{i+1,i})^2 delta_i = coupling_i. ``extra`` carries the element
    next to a dropped Dirichlet node.
    """

    diag: np.ndarray
    off: np.ndarray
    stiffness: Tuple[np.ndarray, np.ndarray]
    mass: np.ndarray
    c_nodes: np.ndarray
    nodes: np.ndarray
    form: str
    keep: slice
    element_left: np.ndarray
    element_right: np.ndarray
    delta: np.ndarray
    coupling: np.ndarray
    extra: np.ndarray
    dirichlet: bool = False
    log_scale: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.diag.size)

    def count_below(self, x: float) -> int:
        """Eigenvalues of T below x, counted on the factored form."""
        return sturm_count(self.delta, self.coupling, x, self.extra + self.c_nodes)

    def quotient(self, v: np.ndarray) -> Tuple[float, float]:
        """(energy + sum c M v^2, sum M v^2) of unknowns v, energy from the element factors."""
        if self.dirichlet:
            full = np.zeros(v.size + 2)
            full[1:-1] = v
            v_left, v_right = full[:-1], full[1:]
        else:
            v_left, v_right = v[:-1], v[1:]
        energy = float(np.sum((self.element_left * v_left - self.element_right * v_right) ** 2))
        weighted = self.mass * v * v
        return energy + float(np.sum(self.c_nodes * weighted)), float(weighted.sum())


@dataclass
class EigenResult:
    """Principal eigenpair of one problem on one mesh.

    ``eigvec`` is w (fitted full problems) or phi (everything else) on the
    unknowns, positive, normalized so that sum(M * v^2) = 1.
    ``eigenvalue`` is the Rayleigh quotient of ``eigvec``; ``residual`` is
    (eigenvalue - certified lower bound) / scale, so the discrete eigenvalue
    lies in [eigenvalue - residual * scale, eigenvalue].
    ``h_estimate`` is |lambda_h - lambda_{h/2}| and ``extrapolated`` the
    Richardson value (4 lambda_{h/2} - lambda_h)/3.
    """

    eigenvalue: float
    eigvec: np.ndarray
    residual: float
    h_estimate: float
    extrapolated: float
    s: float
    nodes: int
    iterations: int
    seconds: float = 0.0
    form: str = FITTED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.eigenvalue,
            "residual": self.residual,
            "h_estimate": self.h_estimate,
            "extrapolated": self.extrapolated,
            "s": self.s,
            "nodes": self.nodes,
            "iterations": self.iterations,
            "seconds": self.seconds,
            "form": self.form,
        }


def sturm_count(delta: Sequence[float], coupling: Sequence[float], x: float,
                diagonal: Optional[Sequence[float]] = None) -> int:
    """Number of eigenvalues below x of L diag(delta) L^T + diag(diagonal).

    L is unit lower bidiagonal with (L_{i+1,i})^2 delta_i = coupling_i: the
    matrix has diagonal delta_i + coupling_{i-1} + diagonal_i and
    off-diagonal magnitudes sqrt(coupling_i delta_i). Negative pivots of the
    shifted factorization come from the stationary qd recurrence

        D+_i = delta_i + s_i,   s_{i+1} = coupling_i s_i / D+_i - (x - diagonal_{i+1})

    which never forms the large diagonal, so the count keeps the relative
    accuracy of delta and coupling. A zero pivot is replaced by -pivmin.
    """
    delta = np.asarray(delta, dtype=float)
    coupling = np.asarray(coupling, dtype=float)
    n = delta.size
    tau = (x - (np.zeros(n) if diagonal is None else np.asarray(diagonal, dtype=float))).tolist()
    pivmin = float(np.finfo(float).tiny) * max(1.0, float(coupling.max()) if coupling.size else 1.0)
    d = delta.tolist()
    w = coupling.tolist()
    count = 0
    s = -tau[0]
    for i in range(n - 1):
        pivot = d[i] + s
        if pivot <= 0.0:
            count += 1
            if pivot == 0.0:
                pivot = -pivmin
        ratio = min(max(s / pivot, -_RATIO_CAP), _RATIO_CAP)
        s = w[i] * ratio - tau[i + 1]
    if d[n - 1] + s <= 0.0:
        count += 1
    return count


def shifted_factor(delta: np.ndarray, coupling: np.ndarray, diagonal: np.ndarray,
                   shift: float) -> Optional[Tuple[List[float], List[float]]]:
    """Pivots and multipliers of L+ diag(D+) L+^T = L diag(delta) L^T + diag(diagonal) - shift.

    Same recurrence as :func:`sturm_count`. Returns None unless every pivot
    is positive, that is unless shift lies below the smallest eigenvalue.
    """
    n = delta.size
    d = delta.tolist()
    w = coupling.tolist()
    tau = (shift - np.asarray(diagonal, dtype=float)).tolist()
    pivots: List[float] = []
    multipliers: List[float] = []
    s = -tau[0]
    for i in range(n - 1):
        pivot = d[i] + s
        if not pivot > 0.0:
            return None
        pivots.append(pivot)
        # L+_{i+1,i} D+_i = L_{i+1,i} delta_i = -sqrt(coupling_i delta_i)
        multipliers.append(-math.sqrt(w[i] * d[i]) / pivot)
        s = w[i] * (s / pivot) - tau[i + 1]
    last = d[n - 1] + s
    if not last > 0.0:
        return None
    pivots.append(last)
    return pivots, multipliers


def factored_solve(pivots: List[float], multipliers: List[float], rhs: np.ndarray) -> np.ndarray:
    """Solve L+ diag(D+) L+^T u = rhs by bidiagonal substitution."""
    n = len(pivots)
    z = np.asarray(rhs, dtype=float).tolist()
    for i in range(n - 1):
        z[i + 1] -= multipliers[i] * z[i]
    u = [z[i] / pivots[i] for i in range(n)]
    for i in range(n - 2, -1, -1):
        u[i] -= multipliers[i] * u[i + 1]
    return np.array(u)


class EigenSolver:
    """Assembles and solves principal eigenproblems with configured tolerances."""

    def __init__(self, tol: Optional[float] = None):
        self.config = get_config()
        self.tol = self.config.eigen_tol if tol is None else tol
        self.logger = LogManager(self.config.log_level)

    # -- assembly -----------------------------------------------------------

    def assemble(self, problem: EigenProblem, mesh: Mesh) -> Assembly:
        """Lumped-mass P1 assembly of the problem's quadratic form.

        Raises:
            DynamicRangeExceeded: weighted full form with s * osc(m) above budget
            SingularMass: if a lumped mass entry is not positive
        """
        r = mesh.nodes
        if problem.domain == SUB and (abs(r[0] - problem.lo) > 1e-14 or abs(r[-1] - problem.hi) > 1e-14):
            raise SolverError(
                f"Mesh spans [{r[0]:.6g}, {r[-1]:.6g}] but the problem lives on "
                f"[{problem.lo:.6g}, {problem.hi:.6g}]",
                stage="assemble",
                suggestion="Restrict the mesh to the sub-interval first",
            )
        h = np.diff(r)
        c_nodes = np.asarray(problem.c(r), dtype=float)

        if problem.form == FITTED:
            k_ii_left, k_jj_right, k_off, left, right, log_scale = self._fitted_elements(problem, r, h)
            mass = np.empty(r.size)
            mass[0] = h[0] / 2.0
            mass[-1] = h[-1] / 2.0
            mass[1:-1] = (h[:-1] + h[1:]) / 2.0
        else:
            rho_bar, mass = self._weighted_elements(problem, r, h)
            k_ii_left = k_jj_right = rho_bar / h
            k_off = -rho_bar / h
            left = right = np.sqrt(rho_bar / h)
            log_scale = None

        k_diag = np.zeros(r.size)
        k_diag[:-1] += k_ii_left
        k_diag[1:] += k_jj_right

        keep = slice(1, r.size - 1) if problem.boundary == DIRICHLET else slice(0, r.size)
        k_diag, mass_kept, c_kept = k_diag[keep], mass[keep], c_nodes[keep]
        k_off_kept = k_off[1:-1] if problem.boundary == DIRICHLET else k_off
        bad = np.nonzero(~(mass_kept > 0.0))[0]
        if bad.size:
            raise SingularMass(int(bad[0]), float(mass_kept[bad[0]]))

        inv_sqrt = 1.0 / np.sqrt(mass_kept)
        diag = k_diag * inv_sqrt * inv_sqrt + c_kept
        off = k_off_kept * inv_sqrt[:-1] * inv_sqrt[1:]

        # element e is row e of B: left factor at node e, right factor at node e + 1
        extra = np.zeros(mass_kept.size)
        if problem.boundary == DIRICHLET:
            delta = left[1:] ** 2 / mass_kept
            coupling = right[1:-1] ** 2 / mass_kept[1:]
            extra[0] = right[0] ** 2 / mass_kept[0]
        else:
            delta = np.append(left ** 2 / mass_kept[:-1], 0.0)
            coupling = right ** 2 / mass_kept[1:]
        return Assembly(
            diag=diag, off=off, stiffness=(k_diag, k_off_kept), mass=mass_kept, c_nodes=c_kept,
            nodes=r[keep], form=problem.form, keep=keep, element_left=left, element_right=right,
            delta=delta, coupling=coupling, extra=extra, dirichlet=problem.boundary == DIRICHLET,
            log_scale=log_scale,
        )

    def _fitted_elements(self, problem: EigenProblem, r: np.ndarray, h: np.ndarray):
        if problem.s == 0.0:
            x = np.zeros(h.size)
        else:
            points = r[:-1, None] + h[:, None] * _GAUSS3_T[None, :]
            slope = problem.m.derivative(points.ravel()).reshape(points.shape) @ _GAUSS3_W
            x = problem.s * h * slope
            clamp = self.config.fitting_clamp
            x = np.clip(x, -clamp, clamp)
        b_minus = bernoulli(-2.0 * x)
        b_plus = bernoulli(2.0 * x)
        coupling = np.sqrt(b_minus * b_plus)
        log_scale = np.concatenate([[0.0], np.cumsum(x)])
        return (b_minus / h, b_plus / h, -coupling / h,
                np.sqrt(b_minus / h), np.sqrt(b_plus / h), log_scale)

    def _log_weight(self, problem: EigenProblem, points: np.ndarray) -> np.ndarray:
        out = np.zeros_like(points)
        if problem.d > 1:
            with np.errstate(divide="ignore"):
                out = (problem.d - 1) * np.log(points)
        if problem.domain == FULL and problem.s > 0.0:
            lo, hi = problem.m.value_range()
            out = out + 2.0 * problem.s * (problem.m.value(points) - (lo + hi) / 2.0)
        return out

    def _weighted_elements(self, problem: EigenProblem, r: np.ndarray, h: np.ndarray):
        if problem.domain == FULL and problem.s > 0.0:
            log_range = problem.s * problem.m.oscillation()
            budget = self.config.dynamic_range
            if log_range > budget:
                raise DynamicRangeExceeded(log_range, budget, s=problem.s)
        points = r[:-1, None] + h[:, None] * _GAUSS3_T[None, :]
        rho = np.exp(self._log_weight(problem, points.ravel())).reshape(points.shape)
        rho_bar = rho @ _GAUSS3_W

        # Dual-cell quadrature: each node owns half of each adjacent element
        half = h / 2.0
        left_pts = r[:-1, None] + half[:, None] * _GAUSS2_T[None, :]
        right_pts = r[1:, None] - half[:, None] * _GAUSS2_T[None, ::-1]
        left_int = np.exp(self._log_weight(problem, left_pts.ravel())).reshape(left_pts.shape).mean(axis=1) * half
        right_int = np.exp(self._log_weight(problem, right_pts.ravel())).reshape(right_pts.shape).mean(axis=1) * half
        mass = np.zeros(r.size)
        mass[:-1] += left_int
        mass[1:] += right_int
        return rho_bar, mass

    # -- solve --------------------------------------------------------------

    def _scale(self, problem: EigenProblem, asm: Assembly) -> float:
        scale = max(1.0, float(np.max(np.abs(asm.c_nodes))))
        if problem.domain == SUB and problem.boundary == DIRICHLET:
            scale = max(scale, math.pi ** 2 / (problem.hi - problem.lo) ** 2)
        return scale

    def _bisect(self, problem: EigenProblem, asm: Assembly, upper: float, slack: float) -> Tuple[float, float]:
        """Certified bracket [lo, hi] of the smallest eigenvalue, hi - lo <= slack / 10.

        Counts run on the factored form; upper is a Rayleigh quotient, so
        it bounds the eigenvalue from above.
        """
        lo = float(asm.c_nodes.min()) - 1.0
        width = max(1.0, upper - lo)
        for _ in range(self.config.max_bisection_doublings):
            if asm.count_below(lo) == 0:
                break
            lo -= width
            width *= 2.0
            self.logger.debug(f"Lowering the eigenvalue bracket to {lo:.6g}")
        else:
            raise NoConvergence(f"No eigenvalue-free lower bound found down to {lo:.6g}",
                                stage="bracket", s=problem.s)
        hi = upper + 0.1 * slack
        step = slack
        for _ in range(self.config.max_bisection_doublings):
            if asm.count_below(hi) >= 1:
                break
            hi += step
            step *= 2.0
        else:
            raise NoConvergence(f"No eigenvalue found below {hi:.6g}", stage="bracket", s=problem.s)
        while hi - lo > 0.1 * slack:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if asm.count_below(mid) >= 1:
                hi = mid
            else:
                lo = mid
        return lo, hi

    def _inverse_iteration(self, asm: Assembly, center: float, scale: float,
                           gap: float) -> Tuple[np.ndarray, float, int]:
        """Inverse iteration with the factored T - (center - gap).

        The shift retreats by a factor 100 while a pivot is not positive.
        Stops once the Rayleigh quotient changes by less than
        tol * scale / 100; returns (y, quotient, iterations), y the unit
        vector of T.
        """
        n = asm.size
        inv_sqrt = 1.0 / np.sqrt(asm.mass)
        diagonal = asm.extra + asm.c_nodes
        for _ in range(_SHIFT_RETREATS):
            shift = center - gap
            factor = shifted_factor(asm.delta, asm.coupling, diagonal, shift)
            if factor is None:
                self.logger.debug(f"T - {shift:.17g} is not positive definite; retreating")
                gap *= 100.0
                continue
            pivots, multipliers = factor
            y = np.full(n, 1.0 / math.sqrt(n))
            value = previous = math.inf
            for iteration in range(1, self.config.max_inverse_iterations + 1):
                u = factored_solve(pivots, multipliers, y)
                peak = float(np.max(np.abs(u)))
                if not np.isfinite(peak) or peak == 0.0:
                    break
                u /= peak
                y = u / math.sqrt(float(u @ u))
                energy, norm = asm.quotient(y * inv_sqrt)
                value = energy / norm
                self.logger.debug(f"Inverse iteration {iteration}: quotient {value:.17g}")
                if abs(previous - value) <= 1e-2 * self.tol * scale:
                    return y, value, iteration
                previous = value
            else:
                return y, value, self.config.max_inverse_iterations
            gap *= 100.0
        raise NoConvergence(f"No usable shift below {center:.17g}", stage="inverse_iteration")

    def solve_assembled(self, problem: EigenProblem, asm: Assembly) -> EigenResult:
        """Smallest eigenvalue and its positive eigenvector from an assembly.

        Raises:
            NoConvergence: if the Rayleigh quotient cannot be certified within
                eigen_tol * scale of the smallest eigenvalue
        """
        if asm.size == 1:
            value = float(asm.diag[0])
            vec = np.array([1.0 / math.sqrt(asm.mass[0])])
            return EigenResult(value, vec, 0.0, math.nan, math.nan, problem.s, 1, 0, form=asm.form)

        scale = self._scale(problem, asm)
        slack = self.tol * scale
        estimate = float(eigh_tridiagonal(asm.diag, asm.off, eigvals_only=True, select="i",
                                          select_range=(0, 0), lapack_driver="stebz", tol=0.1 * slack)[0])
        try:
            y, value, iterations = self._inverse_iteration(asm, estimate, scale, _SHIFT_GAP * scale)
        except NoConvergence:
            # the estimate from the stored T can sit above the smallest eigenvalue
            self.logger.debug(f"Estimate {estimate:.17g} is not below the spectrum; bisecting")
            lower, _ = self._bisect(problem, asm, estimate, slack)
            y, value, iterations = self._inverse_iteration(asm, lower, scale, 0.1 * slack)
            estimate = lower

        lower = min(estimate, value) - 0.1 * slack
        if value - lower > slack or asm.count_below(lower) > 0:
            self.logger.debug(f"Estimate {estimate:.17g} and quotient {value:.17g} disagree; bisecting")
            lower, upper = self._bisect(problem, asm, value, slack)
            if value - lower > slack:
                y, value, more = self._inverse_iteration(asm, lower, scale, 0.1 * slack)
                iterations += more
            if value - lower > slack:
                raise NoConvergence(
                    f"Rayleigh quotient {value:.17g} is {value - lower:.3e} above the certified bound "
                    f"{lower:.17g} (allowed {slack:.1e})",
                    stage="certify", s=problem.s,
                )

        if y.sum() < 0:
            y = -y
        vec = y / np.sqrt(asm.mass)
        vec /= math.sqrt(float(np.sum(asm.mass * vec * vec)))
        residual = max(value - lower, 0.0) / scale
        return EigenResult(value, vec, residual, math.nan, math.nan, problem.s, int(asm.size),
                           iterations, form=asm.form)

    def principal_eigenvalue(self, problem: EigenProblem, mesh: Mesh, richardson: bool = True) -> EigenResult:
        """Principal eigenpair on mesh, with a Richardson estimate from one refinement.

        If the refined mesh would exceed the cap the estimate is NaN and a
        warning is logged.
        """
        start = time.perf_counter()
        result = self.solve_assembled(problem, self.assemble(problem, mesh))
        if richardson:
            try:
                fine_mesh = refine(mesh, self.config.mesh_cap)
            except CapExceeded as e:
                self.logger.warning(f"No Richardson estimate at s={problem.s:.6g}: {e.message}")
            else:
                fine = self.solve_assembled(problem, self.assemble(problem, fine_mesh))
                result.h_estimate = abs(result.eigenvalue - fine.eigenvalue)
                result.extrapolated = (4.0 * fine.eigenvalue - result.eigenvalue) / 3.0
        result.seconds = time.perf_counter() - start
        self.logger.debug(f"{problem.describe()}: lambda = {result.eigenvalue:.12g} "
                          f"(h_est {result.h_estimate:.3e}, {result.seconds:.3f}s)")
        return result

    def rayleigh_quotient(self, values, problem: EigenProblem, mesh: Mesh, form: str = "solver",
                          asm: Optional[Assembly] = None) -> float:
        """Discrete quadratic-form ratio of a nodal function.

        ``form`` says what ``values`` holds: ``solver`` (w for fitted full
        problems, phi otherwise), ``phi`` or ``log_phi`` (log of a
        nonnegative phi, -inf where phi vanishes). Values may be given on
        every mesh node or on the unknowns only.

        Raises:
            ZeroFunction: if the function vanishes identically
        """
        asm = self.assemble(problem, mesh) if asm is None else asm
        values = np.asarray(values, dtype=float)
        if values.size == mesh.n_nodes and values.size != asm.size:
            values = values[asm.keep]
        if values.size != asm.size:
            raise SolverError(f"Expected {asm.size} nodal values, got {values.size}", stage="rayleigh_quotient")

        if form == "log_phi":
            log_abs, sign = values, np.where(np.isneginf(values), 0.0, 1.0)
        elif form in ("phi", "solver"):
            with np.errstate(divide="ignore"):
                log_abs = np.log(np.abs(values))
            sign = np.sign(values)
        else:
            raise SolverError(f"Unknown form '{form}'", stage="rayleigh_quotient")

        if form != "solver" and asm.log_scale is not None:
            log_abs = log_abs + asm.log_scale[asm.keep]
        if not np.any(np.isfinite(log_abs)) or np.all(sign == 0):
            raise ZeroFunction(s=problem.s)
        top = float(np.max(log_abs[np.isfinite(log_abs)]))
        v = sign * np.exp(log_abs - top)

        energy, norm = asm.quotient(v)
        if norm == 0.0:
            raise ZeroFunction(s=problem.s)
        return energy / norm

    def dense_oracle(self, problem: EigenProblem, mesh: Mesh) -> float:
        """Smallest eigenvalue of the same reduced matrix from a dense full-spectrum solve."""
        asm = self.assemble(problem, mesh)
        dense = np.diag(asm.diag) + np.diag(asm.off, 1) + np.diag(asm.off, -1)
        return float(eigh(dense, eigvals_only=True)[0])

    def solve_sweep(self, problem: EigenProblem, mesh: Mesh, s_values: Sequence[float],
                    workers: Optional[int] = None, richardson: bool = True) -> List[EigenResult]:
        """Solve along an s-grid; results keep the order of s_values."""
        workers = self.config.workers if workers is None else workers
        self.logger.info(f"Sweeping {len(s_values)} strengths on {mesh.n_nodes} nodes ({workers} workers)")

        def one(s: float) -> EigenResult:
            return self.principal_eigenvalue(problem.with_s(s), mesh, richardson)

        if workers <= 1:
            return [one(s) for s in s_values]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, s_values))


@dataclass
class ReferencePair:
    """lambda^D > lambda^N on (a, b) with their eigenfunctions on the sub-mesh nodes."""

    lambda_D: float
    lambda_N: float
    phi_D: np.ndarray
    phi_N: np.ndarray
    mesh: Mesh
    result_D: EigenResult
    result_N: EigenResult

    @property
    def gap(self) -> float:
        return self.lambda_D - self.lambda_N

    def __iter__(self):
        return iter((self.lambda_D, self.lambda_N, self.phi_D, self.phi_N))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_D": self.lambda_D,
            "lambda_N": self.lambda_N,
            "gap": self.gap,
            "h_estimate_D": self.result_D.h_estimate,
            "h_estimate_N": self.result_N.h_estimate,
            "extrapolated_D": self.result_D.extrapolated,
            "extrapolated_N": self.result_N.extrapolated,
            "nodes": self.mesh.n_nodes,
        }


def sub_mesh(a, b, mesh: Optional[Mesh] = None) -> Mesh:
    """Mesh on [a, b]: restricted from mesh when given, else uniform at base resolution."""
    if mesh is not None:
        if abs(mesh.nodes[0] - float(a)) <= 1e-14 and abs(mesh.nodes[-1] - float(b)) <= 1e-14:
            return mesh
        return mesh.restrict(a, b)
    cfg = get_config()
    intervals = max(64, math.ceil((float(b) - float(a)) * cfg.base_intervals))
    return uniform_mesh(intervals + 1, float(a), float(b))


def reference_pair(a, b, c: Coefficient, d: int = 1, mesh: Optional[Mesh] = None,
                   tol: Optional[float] = None, richardson: bool = True) -> ReferencePair:
    """Principal Dirichlet and Neumann eigenpairs on (a, b) with weight r^(d-1).

    Eigenfunctions are normalized so that int r^(d-1) phi^2 = 1.

    Raises:
        SolverError: if lambda^D > lambda^N fails
    """
    solver = EigenSolver(tol)
    local = sub_mesh(a, b, mesh)
    dirichlet = solver.principal_eigenvalue(EigenProblem.sub_interval(local.nodes[0], local.nodes[-1], c, d, DIRICHLET),
                                            local, richardson)
    neumann = solver.principal_eigenvalue(EigenProblem.sub_interval(local.nodes[0], local.nodes[-1], c, d, NEUMANN),
                                          local, richardson)
    phi_D = np.concatenate([[0.0], dirichlet.eigvec, [0.0]])
    if not dirichlet.eigenvalue > neumann.eigenvalue:
        raise SolverError(
            f"Reference ordering failed: lambda_D = {dirichlet.eigenvalue:.12g}, "
            f"lambda_N = {neumann.eigenvalue:.12g}",
            stage="reference_pair",
        )
    solver.logger.info(f"References on ({float(a):.6g}, {float(b):.6g}): lambda_D = {dirichlet.eigenvalue:.10g}, "
                       f"lambda_N = {neumann.eigenvalue:.10g}")
    return ReferencePair(dirichlet.eigenvalue, neumann.eigenvalue, phi_D, neumann.eigvec, local, dirichlet, neumann)


def assemble(problem: EigenProblem, mesh: Mesh) -> Assembly:
    return EigenSolver().assemble(problem, mesh)


def principal_eigenvalue(problem: EigenProblem, mesh: Mesh, tol: Optional[float] = None,
                         richardson: bool = True) -> EigenResult:
    return EigenSolver(tol).principal_eigenvalue(problem, mesh, richardson)


def rayleigh_quotient(values, problem: EigenProblem, mesh: Mesh, form: str = "solver") -> float:
    return EigenSolver().rayleigh_quotient(values, problem, mesh, form)


def dense_oracle(problem: EigenProblem, mesh: Mesh) -> float:
    return EigenSolver().dense_oracle(problem, mesh)


def solve_sweep(problem: EigenProblem, mesh: Mesh, s_values: Sequence[float],
                workers: Optional[int] = None, richardson: bool = True) -> List[EigenResult]:
    return EigenSolver().solve_sweep(problem, mesh, s_values, workers, richardson)


def continuity_bound(s: float, m1: PiecewisePotential, m2: PiecewisePotential, c_abs: float,
                     distance: Optional[float] = None) -> float:
    """c_abs * (exp(4 s ||m1 - m2||_inf) - 1); inf once the exponent overflows."""
    distance = potential_distance(m1, m2) if distance is None else distance
    exponent = 4.0 * s * distance
    if exponent > 700.0:
        return math.inf
    return c_abs * math.expm1(exponent)


def constant_problem(value: float, s: float = 0.0) -> EigenProblem:
    """m = 0, c = value: the exact constant-mode problem."""
    return EigenProblem.full(zero_potential(), Constant(value), s)

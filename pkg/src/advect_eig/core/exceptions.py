"""
advect-eig Exception Classes

Structured exception hierarchy for potentials, meshes, eigen solves and
time integration. Every error carries a message, an optional suggestion and
a context dictionary so the CLI can explain what went wrong and what to try.
"""

from typing import Optional, Dict, Any


class AdvectEigError(Exception):
    """Base exception class for advect-eig errors."""

    def __init__(
        self,
        message: str,
        suggestion: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
        original_error: Optional[Exception] = None
    ):
        self.message = message
        self.suggestion = suggestion
        self.context = context or {}
        self.original_error = original_error
        super().__init__(message)


class PotentialError(AdvectEigError):
    """Raised when a potential or its parameters are invalid."""

    def __init__(
        self,
        message: str,
        parameter: Optional[str] = None,
        **kwargs
    ):
        context = kwargs.get('context', {})
        context.update({'parameter': parameter})
        kwargs['context'] = context
        super().__init__(message, **kwargs)


class InvalidParams(PotentialError):
    """Raised when step parameters violate 0 < h < alpha < beta < 1 < nu or the geometry."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault(
            'suggestion',
            "Check that 0 < h < alpha < beta < 1 < nu, l >= 0, 0 < a < 1/2 and b = 1 - a"
        )
        super().__init__(message, **kwargs)


class NonPositiveDelta(PotentialError):
    """Raised when the geometric tails of the construction do not fit inside [0, a)."""

    def __init__(self, a, alpha, beta, l, delta, **kwargs):
        message = (
            f"Derived delta = {float(delta):.6g} is not positive "
            f"(a={float(a):.6g}, alpha={float(alpha):.6g}, beta={float(beta):.6g}, l={l})"
        )
        suggestion = "Increase the offset l or a, or decrease alpha/beta"
        context = kwargs.get('context', {})
        context.update({'a': float(a), 'alpha': float(alpha), 'beta': float(beta), 'l': l})
        kwargs['context'] = context
        super().__init__(message, parameter='delta', suggestion=suggestion, **kwargs)


class NotAFoldPoint(PotentialError):
    """Raised when folding is requested at a point where m or m' does not vanish."""

    def __init__(self, z: float, value: float, derivative: float, **kwargs):
        message = f"r = {z:.17g} is not a fold point (m = {value:.3e}, m' = {derivative:.3e})"
        suggestion = "Fold only at zero-touch points z_n listed in the potential's breakpoint ledger"
        context = kwargs.get('context', {})
        context.update({'z': z, 'value': value, 'derivative': derivative})
        kwargs['context'] = context
        super().__init__(message, parameter='z', suggestion=suggestion, **kwargs)


class PotentialFormatError(PotentialError):
    """Raised when a potential-spec file cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None, **kwargs):
        context = kwargs.get('context', {})
        context.update({'line_number': line_number})
        kwargs['context'] = context
        kwargs.setdefault('suggestion', "Regenerate the file with 'advect-eig potential' or fix the listed line")
        super().__init__(message, **kwargs)


class MeshError(AdvectEigError):
    """Raised when a mesh cannot be built."""

    def __init__(self, message: str, nodes: Optional[int] = None, **kwargs):
        context = kwargs.get('context', {})
        context.update({'nodes': nodes})
        kwargs['context'] = context
        super().__init__(message, **kwargs)


class CapExceeded(MeshError):
    """Raised when resolving all retained pieces needs more nodes than allowed."""

    def __init__(self, needed: int, cap: int, **kwargs):
        message = f"Mesh needs {needed} nodes but the cap is {cap}"
        suggestion = "Raise width_floor (fewer retained levels) or raise mesh_cap"
        context = kwargs.get('context', {})
        context.update({'cap': cap})
        kwargs['context'] = context
        super().__init__(message, nodes=needed, suggestion=suggestion, **kwargs)


class SolverError(AdvectEigError):
    """Raised when a numerical solve fails."""

    def __init__(
        self,
        message: str,
        stage: Optional[str] = None,
        s: Optional[float] = None,
        **kwargs
    ):
        context = kwargs.get('context', {})
        context.update({'stage': stage, 's': s})
        kwargs['context'] = context
        super().__init__(message, **kwargs)


class NoConvergence(SolverError):
    """Raised when bracketing, bisection or inverse iteration does not converge."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault('suggestion', "Loosen eigen_tol or raise max_inverse_iterations / max_bisection_doublings")
        super().__init__(message, **kwargs)


class DynamicRangeExceeded(SolverError):
    """Raised when the weighted form would over- or underflow binary64."""

    def __init__(self, log_range: float, budget: float, **kwargs):
        message = f"Weight log-range {log_range:.4g} exceeds the budget {budget:.4g}"
        suggestion = "Use d = 1 (transformed form) or lower s; the budget is the dynamic_range setting"
        context = kwargs.get('context', {})
        context.update({'log_range': log_range, 'budget': budget})
        kwargs['context'] = context
        super().__init__(message, stage='assemble', suggestion=suggestion, **kwargs)


class SingularMass(SolverError):
    """Raised when a lumped mass entry is not positive."""

    def __init__(self, index: int, value: float, **kwargs):
        message = f"Lumped mass entry {index} is {value:.3e}"
        suggestion = "Check the mesh spacing and the weight r^(d-1) near r = 0"
        context = kwargs.get('context', {})
        context.update({'index': index, 'value': value})
        kwargs['context'] = context
        super().__init__(message, stage='assemble', suggestion=suggestion, **kwargs)


class ZeroFunction(SolverError):
    """Raised when a Rayleigh quotient is requested for the zero function."""

    def __init__(self, **kwargs):
        super().__init__(
            "Rayleigh quotient of an identically zero function",
            stage='rayleigh_quotient',
            suggestion="Check the support of the test function against the mesh",
            **kwargs
        )


class SweepExhausted(SolverError):
    """Raised when an s-grid search reaches its cap without meeting the tolerance."""

    def __init__(self, target: float, tol: float, s_cap: float, **kwargs):
        message = f"No s <= {s_cap:.3g} brings lambda within {tol:.3g} of {target:.6g}"
        suggestion = "Loosen the stage tolerance, refine the mesh, or raise s_cap"
        context = kwargs.get('context', {})
        context.update({'target': target, 'tol': tol, 's_cap': s_cap})
        kwargs['context'] = context
        super().__init__(message, stage='find_s_for_target', suggestion=suggestion, **kwargs)


class StepUnstable(SolverError):
    """Raised when time stepping cannot keep the solution nonnegative."""

    def __init__(self, t: float, dt: float, **kwargs):
        message = f"Positivity lost at t = {t:.6g} even with dt = {dt:.3e}"
        suggestion = "Lower rda_dt or raise rda_max_halvings"
        context = kwargs.get('context', {})
        context.update({'t': t, 'dt': dt})
        kwargs['context'] = context
        super().__init__(message, stage='rda_run', suggestion=suggestion, **kwargs)


class ConfigurationError(AdvectEigError):
    """Raised when configuration is invalid."""

    def __init__(self, message: str, config_field: Optional[str] = None, **kwargs):
        context = kwargs.get('context', {})
        context.update({'config_field': config_field})
        kwargs['context'] = context
        suggestion = "Check configuration values and ensure they meet validation requirements"
        kwargs.setdefault('suggestion', suggestion)
        super().__init__(message, **kwargs)


class FileHandlingError(AdvectEigError):
    """Raised when file operations fail."""

    def __init__(
        self,
        message: str,
        file_path: Optional[str] = None,
        operation: Optional[str] = None,
        **kwargs
    ):
        context = kwargs.get('context', {})
        context.update({
            'file_path': file_path,
            'operation': operation
        })
        kwargs['context'] = context
        super().__init__(message, **kwargs)


class OutputWriteError(FileHandlingError):
    """Raised when output file writing fails."""

    def __init__(self, file_path: str, **kwargs):
        message = f"Failed to write output file: {file_path}"
        suggestion = "Check write permissions and available disk space"
        super().__init__(message, file_path=file_path, operation="write", suggestion=suggestion, **kwargs)


class ValidationError(AdvectEigError):
    """Raised when a hypothesis or certificate check fails and the caller asked for strictness."""

    def __init__(
        self,
        message: str,
        validation_field: Optional[str] = None,
        **kwargs
    ):
        context = kwargs.get('context', {})
        context.update({'validation_field': validation_field})
        kwargs['context'] = context
        super().__init__(message, **kwargs)

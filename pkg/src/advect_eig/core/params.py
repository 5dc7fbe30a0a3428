"""Step parameters and the breakpoint ledger of the oscillating construction.

All breakpoint arithmetic is exact: parameters are held as Fractions
(binary64 inputs convert exactly), so breakpoints twenty levels deep still
coincide with the piece boundaries they are compared against.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any, Dict, Optional, Tuple, Union

from .exceptions import InvalidParams, NonPositiveDelta

Number = Union[Fraction, float, int, str]

# Tolerance for consistency checks when callers pass rounded binary64 inputs
_FLOAT_SLACK = Fraction(1, 10**14)


def as_fraction(value: Number) -> Fraction:
    """Convert a number (or a "p/q" string) to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Rational, str)):
        return Fraction(value)
    return Fraction(float(value))


def derive_delta(a: Number, alpha: Number, beta: Number, l: int) -> Fraction:
    """Return delta = a - alpha^(l+1)/(1-alpha) - beta^(l+1)/(1-beta).

    This is the closed form of sum_{i>=1} (alpha^(i+l) + beta^(i+l)) = a - delta.

    Raises:
        InvalidParams: if 0 < alpha < beta < 1, l >= 0 or a in (0, 1/2) fails
        NonPositiveDelta: if the geometric tails do not fit inside [0, a)
    """
    a, alpha, beta = as_fraction(a), as_fraction(alpha), as_fraction(beta)
    if not (0 < alpha < beta < 1):
        raise InvalidParams(f"Need 0 < alpha < beta < 1, got alpha={float(alpha)}, beta={float(beta)}",
                            parameter='alpha')
    if int(l) != l or l < 0:
        raise InvalidParams(f"Offset l must be a nonnegative integer, got {l}", parameter='l')
    if not (0 < a < Fraction(1, 2)):
        raise InvalidParams(f"Need 0 < a < 1/2, got a={float(a)}", parameter='a')
    l = int(l)
    delta = a - alpha ** (l + 1) / (1 - alpha) - beta ** (l + 1) / (1 - beta)
    if delta <= 0:
        raise NonPositiveDelta(a, alpha, beta, l, delta)
    return delta


@dataclass(frozen=True)
class Breakpoints:
    """Breakpoint ledger of a StepParams instance, levels 0..n_levels.

    ``x[n]``, ``y[n]`` and ``z[n]`` are x_n, y_n and z_n = (x_n + y_n)/2.
    ``Y[n]`` is Y_n (Y_0 = delta) and ``X[n - 1]`` is X_n for n >= 1, the
    partition used by the upper envelope. Y_n coincides with x_n and X_n
    with y_{n-1}.
    """

    x: Tuple[Fraction, ...]
    y: Tuple[Fraction, ...]
    z: Tuple[Fraction, ...]
    X: Tuple[Fraction, ...]
    Y: Tuple[Fraction, ...]

    def level_of(self, r: float) -> Optional[int]:
        """Level n with x_n <= r < x_{n+1}, or None outside [x_0, x_last)."""
        for n in range(len(self.x) - 1):
            if self.x[n] <= r < self.x[n + 1]:
                return n
        return None


@dataclass(frozen=True)
class StepParams:
    """Parameters (delta, h, alpha, beta, nu, l) of the step envelopes on [0, 1].

    ``level`` shifts every amplitude exponent: level k uses h^(n+k) where the
    plain definition uses h^n. A potential folded at z_j is described on
    its tail by ``shifted(j + 1)``.
    """

    delta: Fraction
    h: Fraction
    alpha: Fraction
    beta: Fraction
    nu: Fraction
    l: int
    a: Fraction
    b: Optional[Fraction] = None
    level: int = 0

    def __post_init__(self):
        for name in ("delta", "h", "alpha", "beta", "nu", "a"):
            try:
                object.__setattr__(self, name, as_fraction(getattr(self, name)))
            except (TypeError, ValueError, ZeroDivisionError) as e:
                raise InvalidParams(f"Parameter {name} is not a number: {getattr(self, name)!r}",
                                    parameter=name, original_error=e) from e

        if not (0 < self.h < self.alpha < self.beta < 1 < self.nu):
            raise InvalidParams(
                "Need 0 < h < alpha < beta < 1 < nu, got "
                f"h={float(self.h)}, alpha={float(self.alpha)}, beta={float(self.beta)}, nu={float(self.nu)}",
                parameter='h',
            )
        if int(self.l) != self.l or self.l < 0:
            raise InvalidParams(f"Offset l must be a nonnegative integer, got {self.l}", parameter='l')
        if int(self.level) != self.level or self.level < 0:
            raise InvalidParams(f"Level must be a nonnegative integer, got {self.level}", parameter='level')
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "level", int(self.level))

        if not (0 < self.a < Fraction(1, 2)):
            raise InvalidParams(f"Need 0 < a < 1/2, got a={float(self.a)}", parameter='a')
        if self.b is None:
            object.__setattr__(self, "b", 1 - self.a)
        else:
            b = as_fraction(self.b)
            if abs(self.a + b - 1) > _FLOAT_SLACK:
                raise InvalidParams(f"Need a + b = 1, got a={float(self.a)}, b={float(b)}", parameter='b')
            object.__setattr__(self, "b", 1 - self.a)

        expected = derive_delta(self.a, self.alpha, self.beta, self.l)
        if abs(self.delta - expected) > _FLOAT_SLACK * max(1, abs(expected)):
            raise InvalidParams(
                f"delta={float(self.delta)} does not match the geometric tails "
                f"(expected {float(expected)})",
                parameter='delta',
            )
        object.__setattr__(self, "delta", expected)

    @classmethod
    def from_geometry(
        cls,
        a: Number,
        h: Number,
        alpha: Number,
        beta: Number,
        nu: Number,
        l: int,
        level: int = 0,
    ) -> "StepParams":
        """Build params from the geometry, deriving delta."""
        delta = derive_delta(a, alpha, beta, l)
        return cls(delta=delta, h=h, alpha=alpha, beta=beta, nu=nu, l=l, a=a, level=level)

    def shifted(self, j: int) -> "StepParams":
        """Params describing the tail beyond x_j.

        The result has delta = x_j, width offset l + j and amplitude level
        + j, so its breakpoints are this ledger's breakpoints from level j on.
        """
        if j < 0:
            raise InvalidParams(f"Shift must be nonnegative, got {j}", parameter='j')
        return StepParams.from_geometry(self.a, self.h, self.alpha, self.beta, self.nu,
                                        self.l + j, level=self.level + j)

    def amplitude(self, exponent: int) -> Fraction:
        """nu * h^(exponent + level): plateau and arch heights."""
        return self.nu * self.h ** (exponent + self.level)

    def floor_ok(self, n: int, width_floor: float, amplitude_floor: float) -> bool:
        """Whether level n is kept under the truncation floors."""
        return (self.alpha ** (n + self.l + 1) >= as_fraction(width_floor)
                and self.amplitude(n) >= as_fraction(amplitude_floor))

    def retained_levels(self, width_floor: float, amplitude_floor: float, hard_limit: int = 200) -> int:
        """Largest N such that levels 0..N pass the truncation floors (-1 if none)."""
        n = -1
        while n + 1 < hard_limit and self.floor_ok(n + 1, width_floor, amplitude_floor):
            n += 1
        return n

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta": self.delta,
            "h": self.h,
            "alpha": self.alpha,
            "beta": self.beta,
            "nu": self.nu,
            "l": self.l,
            "a": self.a,
            "b": self.b,
            "level": self.level,
        }


def breakpoints(params: StepParams, n_levels: int) -> Breakpoints:
    """Exact x_n, y_n, z_n for n = 0..n_levels and the X/Y partition.

    x_0 = delta, y_n - x_n = alpha^(n+l+1), x_{n+1} - y_n = beta^(n+l+1).
    """
    if n_levels < 0:
        raise InvalidParams(f"n_levels must be nonnegative, got {n_levels}", parameter='n_levels')
    alpha, beta, l = params.alpha, params.beta, params.l
    x, y, z = [], [], []
    current = params.delta
    for n in range(n_levels + 1):
        x.append(current)
        y_n = current + alpha ** (n + l + 1)
        y.append(y_n)
        z.append((current + y_n) / 2)
        current = y_n + beta ** (n + l + 1)
    Y = tuple(x)
    X = tuple(y[:-1])
    return Breakpoints(x=tuple(x), y=tuple(y), z=tuple(z), X=X, Y=Y)

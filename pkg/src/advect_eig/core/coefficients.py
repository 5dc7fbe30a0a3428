"""Reaction coefficients c(r) and growth profiles sigma(x).

Every coefficient is a callable on [0, 1] (vectorized) and reports its
kinks so the mesh can place nodes on them.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .exceptions import ConfigurationError, InvalidParams

Real = Union[Fraction, float]


class Coefficient:
    """Base class: vectorized evaluation plus the kink ledger."""

    def __call__(self, r):
        raise NotImplementedError

    def kinks(self) -> Tuple[Real, ...]:
        return ()

    def bounds(self, nodes: np.ndarray) -> Tuple[float, float]:
        values = np.asarray(self(nodes), dtype=float)
        return float(values.min()), float(values.max())

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class Constant(Coefficient):
    """c(r) = value."""

    value: float

    def __call__(self, r):
        return np.full(np.shape(r), float(self.value)) if np.ndim(r) else float(self.value)

    def describe(self) -> str:
        return f"const:{self.value!r}"


@dataclass(frozen=True)
class RampProfile(Coefficient):
    """c_out outside (a, b), c_in on the middle, linear ramps of width ramp_fraction*(b - a)."""

    a: Real
    b: Real
    c_in: float = 1.0
    c_out: float = 2.0
    ramp_fraction: float = 0.125

    def __post_init__(self):
        if not 0 < self.a < self.b < 1:
            raise InvalidParams("Need 0 < a < b < 1 for the ramp profile", parameter='a')
        if not 0 < self.ramp_fraction < 0.5:
            raise InvalidParams("ramp_fraction must lie in (0, 1/2)", parameter='ramp_fraction')

    def kinks(self) -> Tuple[Real, ...]:
        width = (self.b - self.a) * Fraction(self.ramp_fraction)
        return (self.a, self.a + width, self.b - width, self.b)

    def __call__(self, r):
        a, b = float(self.a), float(self.b)
        width = (b - a) * self.ramp_fraction
        xs = [0.0, a, a + width, b - width, b, 1.0]
        ys = [self.c_out, self.c_out, self.c_in, self.c_in, self.c_out, self.c_out]
        out = np.interp(np.asarray(r, dtype=float), xs, ys)
        return float(out) if np.ndim(r) == 0 else out

    def with_c_out(self, c_out: float) -> "RampProfile":
        return RampProfile(self.a, self.b, self.c_in, c_out, self.ramp_fraction)

    def describe(self) -> str:
        return f"ramp(c_in={self.c_in!r}, c_out={self.c_out!r})"


@dataclass(frozen=True)
class Negated(Coefficient):
    """-f."""

    inner: Coefficient

    def __call__(self, r):
        return -self.inner(r)

    def kinks(self):
        return self.inner.kinks()

    def describe(self) -> str:
        return f"-({self.inner.describe()})"


@dataclass(frozen=True)
class Shifted(Coefficient):
    """f + shift."""

    inner: Coefficient
    shift: float

    def __call__(self, r):
        return self.inner(r) + self.shift

    def kinks(self):
        return self.inner.kinks()

    def describe(self) -> str:
        return f"({self.inner.describe()}) + {self.shift!r}"


@dataclass(frozen=True)
class Mirrored(Coefficient):
    """f(1 - r)."""

    inner: Coefficient

    def __call__(self, r):
        return self.inner(1.0 - np.asarray(r, dtype=float)) if np.ndim(r) else self.inner(1.0 - float(r))

    def kinks(self):
        return tuple(1 - k for k in self.inner.kinks())


@dataclass(frozen=True)
class SigmaProfile(Coefficient):
    """Growth profile sigma(x) of the reaction-diffusion model, with its geometry."""

    func: Callable
    a: Real = Fraction(1, 4)
    b: Real = Fraction(3, 4)
    breakpoints: Tuple[Real, ...] = ()
    name: str = "sigma"

    def __call__(self, x):
        out = self.func(np.asarray(x, dtype=float))
        return float(out) if np.ndim(x) == 0 else np.asarray(out, dtype=float)

    def kinks(self) -> Tuple[Real, ...]:
        return tuple(self.breakpoints)

    def describe(self) -> str:
        return self.name

    @classmethod
    def example(cls) -> "SigmaProfile":
        """Symmetric three-piece profile with a = 1/4, b = 3/4:
        -96 outside, 3072x - 864 up to 9/32, -512(x - 1/2)^2 + 49/2 in the middle.
        """
        return cls(func=sigma_example, a=Fraction(1, 4), b=Fraction(3, 4),
                   breakpoints=(Fraction(1, 4), Fraction(9, 32), Fraction(1, 2), Fraction(23, 32), Fraction(3, 4)),
                   name="example")

    @classmethod
    def constant(cls, value: float, a: Real = Fraction(1, 4), b: Real = Fraction(3, 4)) -> "SigmaProfile":
        return cls(func=lambda x: np.full(np.shape(x), float(value)), a=a, b=b, name=f"const:{value!r}")

    def shifted(self, value: float) -> "SigmaProfile":
        inner = self.func
        return SigmaProfile(func=lambda x: inner(x) + value, a=self.a, b=self.b,
                            breakpoints=self.breakpoints, name=f"{self.name}+{value!r}")


def sigma_example(x):
    """The example growth profile, vectorized; symmetric about 1/2."""
    x = np.asarray(x, dtype=float)
    y = np.minimum(x, 1.0 - x)
    out = np.where(
        y < 0.25, -96.0,
        np.where(y < 9.0 / 32.0, 3072.0 * y - 864.0, -512.0 * (y - 0.5) ** 2 + 24.5),
    )
    return float(out) if out.ndim == 0 else out


def parse_coefficient(text: str, a: Optional[Real] = None, b: Optional[Real] = None,
                      c_in: float = 1.0, c_out: Optional[float] = None,
                      ramp_fraction: float = 0.125) -> Coefficient:
    """Parse a coefficient spec: ``const:<v>``, ``ramp``, ``sigma`` (c = -sigma) or ``sigma+<v>``.

    ``ramp`` without c_out returns a provisional profile with c_out = c_in;
    callers derive c_out from lambda_D afterwards.
    """
    text = text.strip()
    if text.startswith("const:"):
        try:
            return Constant(float(text.split(":", 1)[1]))
        except ValueError as e:
            raise ConfigurationError(f"Bad constant coefficient '{text}'", config_field="coefficient",
                                     original_error=e) from e
    if text == "ramp":
        if a is None or b is None:
            raise ConfigurationError("The ramp coefficient needs a geometry", config_field="coefficient")
        return RampProfile(a, b, c_in, c_in if c_out is None else c_out, ramp_fraction)
    if text == "sigma":
        return Negated(SigmaProfile.example())
    if text.startswith("sigma+") or text.startswith("sigma-"):
        try:
            shift = float(text[len("sigma"):])
        except ValueError as e:
            raise ConfigurationError(f"Bad sigma shift '{text}'", config_field="coefficient",
                                     original_error=e) from e
        return Negated(SigmaProfile.example().shifted(shift))
    raise ConfigurationError(
        f"Unknown coefficient '{text}'",
        config_field="coefficient",
        suggestion="Use const:<value>, ramp, sigma or sigma+<shift>",
    )

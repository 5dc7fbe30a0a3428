"""Piecewise-analytic advection potentials.

A potential is an ordered tuple of pieces tiling [0, 1]. Symmetric
potentials store only the left half plus the zero piece(s) on [a, b); the
final ``mirror`` piece on [b, 1] evaluates m(1 - r).

Piece kinds (t = (r - lo) / (hi - lo)):

    const    amplitude + offset
    cosd     amplitude * (1 + cos(pi t)) / 2 + offset   (falls to 0 at hi)
    cosu     amplitude * (1 - cos(pi t)) / 2 + offset   (rises from 0 at lo)
    linear   amplitude * t + offset
    zero     offset
    mirror   m(1 - r)
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidParams, NotAFoldPoint
from .params import StepParams, as_fraction, breakpoints
from ..utils.constants import FOLD_DERIVATIVE_TOL, FOLD_VALUE_TOL

Real = Union[Fraction, float]

PIECE_KINDS = ("const", "cosd", "cosu", "zero", "mirror", "linear")
_KIND_CODE = {kind: code for code, kind in enumerate(PIECE_KINDS)}

# Pieces whose value is not constant on their interval
_VARYING = ("cosd", "cosu", "linear")


@dataclass(frozen=True)
class Piece:
    """One analytic piece on [lo, hi)."""

    lo: Real
    hi: Real
    kind: str
    amplitude: Real = Fraction(0)
    offset: Real = Fraction(0)

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise InvalidParams(f"Unknown piece kind '{self.kind}'", parameter='kind')
        if not self.lo < self.hi:
            raise InvalidParams(f"Empty piece [{float(self.lo)}, {float(self.hi)})", parameter='lo')

    @property
    def width(self) -> Real:
        return self.hi - self.lo

    def negated(self) -> "Piece":
        if self.kind == "mirror":
            return self
        return replace(self, amplitude=-self.amplitude, offset=-self.offset)

    def value_range(self) -> Tuple[float, float]:
        """(min, max) of the piece's values; mirror pieces report (0, 0)."""
        amp, off = float(self.amplitude), float(self.offset)
        if self.kind == "mirror":
            return 0.0, 0.0
        if self.kind == "zero":
            return off, off
        if self.kind == "const":
            return amp + off, amp + off
        return min(off, off + amp), max(off, off + amp)

    def peak(self) -> float:
        """sup |m| over the piece, from the amplitude ledger."""
        lo, hi = self.value_range()
        return max(abs(lo), abs(hi))

    def max_abs_derivative(self) -> float:
        w = float(self.width)
        if self.kind in ("cosd", "cosu"):
            return abs(float(self.amplitude)) * math.pi / (2.0 * w)
        if self.kind == "linear":
            return abs(float(self.amplitude)) / w
        return 0.0


@dataclass(frozen=True)
class PiecewisePotential:
    """An immutable C1 potential on [0, 1] given by its pieces.

    ``a`` is the left end of the degenerate interval (None for potentials
    without one, such as m(x) = -x). ``metadata`` records the generating
    params, the retained level count, the truncation cutoff and fold points.
    """

    pieces: Tuple[Piece, ...]
    a: Optional[Real] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise InvalidParams("A potential needs at least one piece", parameter='pieces')
        if pieces[0].lo != 0 or pieces[-1].hi != 1:
            raise InvalidParams("Pieces must start at 0 and end at 1", parameter='pieces')
        for left, right in zip(pieces, pieces[1:]):
            if left.hi != right.lo:
                raise InvalidParams(
                    f"Pieces leave a gap or overlap at {float(left.hi)} / {float(right.lo)}",
                    parameter='pieces',
                )
        mirrors = [i for i, p in enumerate(pieces) if p.kind == "mirror"]
        if mirrors:
            if mirrors != [len(pieces) - 1] or self.a is None:
                raise InvalidParams("A mirror piece must be last and needs a", parameter='pieces')
            if abs(float(pieces[-1].lo) - (1.0 - float(self.a))) > 1e-15:
                raise InvalidParams("Mirror piece must start at b = 1 - a", parameter='pieces')

        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(self, "_lo", np.array([float(p.lo) for p in pieces]))
        object.__setattr__(self, "_hi", np.array([float(p.hi) for p in pieces]))
        object.__setattr__(self, "_amp", np.array([float(p.amplitude) for p in pieces]))
        object.__setattr__(self, "_off", np.array([float(p.offset) for p in pieces]))
        object.__setattr__(self, "_kind", np.array([_KIND_CODE[p.kind] for p in pieces]))

    # -- evaluation ---------------------------------------------------------

    def _locate(self, r: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._lo, r, side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def value(self, r) -> Union[float, np.ndarray]:
        """m(r), vectorized over r."""
        scalar = np.ndim(r) == 0
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = self._locate(r)
        kind = self._kind[idx]
        lo, amp, off = self._lo[idx], self._amp[idx], self._off[idx]
        width = self._hi[idx] - lo
        t = (r - lo) / width
        cos_pt = np.cos(np.pi * t)
        out = off + np.select(
            [kind == _KIND_CODE["const"], kind == _KIND_CODE["cosd"],
             kind == _KIND_CODE["cosu"], kind == _KIND_CODE["linear"]],
            [amp, amp * (1.0 + cos_pt) / 2.0, amp * (1.0 - cos_pt) / 2.0, amp * t],
            default=0.0,
        )
        mirror = kind == _KIND_CODE["mirror"]
        if mirror.any():
            out[mirror] = self.value(1.0 - r[mirror])
        return float(out[0]) if scalar else out

    __call__ = value

    def derivative(self, r) -> Union[float, np.ndarray]:
        """m'(r), vectorized over r (right-sided at piece boundaries)."""
        scalar = np.ndim(r) == 0
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = self._locate(r)
        kind = self._kind[idx]
        lo, amp = self._lo[idx], self._amp[idx]
        width = self._hi[idx] - lo
        t = (r - lo) / width
        sin_pt = np.sin(np.pi * t)
        out = np.select(
            [kind == _KIND_CODE["cosd"], kind == _KIND_CODE["cosu"], kind == _KIND_CODE["linear"]],
            [-amp * np.pi * sin_pt / (2.0 * width), amp * np.pi * sin_pt / (2.0 * width), amp / width],
            default=0.0,
        )
        mirror = kind == _KIND_CODE["mirror"]
        if mirror.any():
            out[mirror] = -self.derivative(1.0 - r[mirror])
        return float(out[0]) if scalar else out

    # -- ledger queries -----------------------------------------------------

    @property
    def b(self) -> Optional[Real]:
        return None if self.a is None else 1 - self.a

    @property
    def params(self) -> Optional[StepParams]:
        return self.metadata.get("params")

    @property
    def has_mirror(self) -> bool:
        return self.pieces[-1].kind == "mirror"

    def left_pieces(self) -> Tuple[Piece, ...]:
        """Pieces lying in [0, a) (all non-mirror pieces when a is None)."""
        if self.a is None:
            return tuple(p for p in self.pieces if p.kind != "mirror")
        return tuple(p for p in self.pieces if p.hi <= self.a)

    def exact_boundaries(self) -> List[Real]:
        """Every piece boundary in [0, 1], mirrored boundaries included."""
        own = [p.lo for p in self.pieces] + [Fraction(1)]
        if self.has_mirror:
            own += [1 - p.lo for p in self.left_pieces()]
        unique: Dict[float, Real] = {}
        for value in own:
            unique.setdefault(float(value), value)
        return [unique[k] for k in sorted(unique)]

    def boundaries(self) -> np.ndarray:
        return np.array(sorted({float(v) for v in self.exact_boundaries()}))

    def value_range(self) -> Tuple[float, float]:
        ranges = [p.value_range() for p in self.pieces if p.kind != "mirror"]
        return min(r[0] for r in ranges), max(r[1] for r in ranges)

    def max_abs(self) -> float:
        return max(p.peak() for p in self.pieces if p.kind != "mirror")

    def max_abs_derivative(self) -> float:
        return max(p.max_abs_derivative() for p in self.pieces)

    def oscillation(self) -> float:
        """max m - min m, exact from the ledger."""
        lo, hi = self.value_range()
        return hi - lo

    def is_symmetric(self, samples: int = 2001) -> bool:
        """m(r) == m(1 - r): structural for mirrored potentials, sampled otherwise."""
        if self.has_mirror:
            middle = [p for p in self.pieces if p.lo >= self.a and p.kind != "mirror"]
            return all(p.kind in ("zero", "const") and p.offset == middle[0].offset
                       and p.amplitude == middle[0].amplitude for p in middle)
        r = np.linspace(0.0, 0.5, samples)
        left, right = self.value(r), self.value(1.0 - r)
        scale = max(1.0, self.max_abs())
        return bool(np.max(np.abs(left - right)) <= 1e-12 * scale)

    # -- transformations ----------------------------------------------------

    def negate(self) -> "PiecewisePotential":
        return replace(self, pieces=tuple(p.negated() for p in self.pieces))

    def shifted(self, c: Real) -> "PiecewisePotential":
        """m + c."""
        pieces = tuple(p if p.kind == "mirror" else replace(p, offset=p.offset + c) for p in self.pieces)
        return replace(self, pieces=pieces)

    def mirrored(self) -> "PiecewisePotential":
        """r -> 1 - r. Mirrored potentials are their own reflection."""
        if self.has_mirror:
            return self
        flipped = {"cosd": "cosu", "cosu": "cosd"}
        pieces = []
        for p in reversed(self.pieces):
            lo, hi = 1 - p.hi, 1 - p.lo
            if p.kind == "linear":
                pieces.append(Piece(lo, hi, "linear", -p.amplitude, p.offset + p.amplitude))
            else:
                pieces.append(Piece(lo, hi, flipped.get(p.kind, p.kind), p.amplitude, p.offset))
        return replace(self, pieces=tuple(pieces))

    def with_metadata(self, **updates) -> "PiecewisePotential":
        meta = dict(self.metadata)
        meta.update(updates)
        return replace(self, metadata=meta)

    def to_dict(self) -> Dict[str, Any]:
        meta = {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in self.metadata.items()}
        return {
            "a": self.a,
            "pieces": [[p.lo, p.hi, p.kind, p.amplitude, p.offset] for p in self.pieces],
            "metadata": meta,
        }


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _floors(width_floor: Optional[float], amplitude_floor: Optional[float]) -> Tuple[float, float]:
    if width_floor is None or amplitude_floor is None:
        from ..config import get_config
        cfg = get_config()
        width_floor = cfg.width_floor if width_floor is None else width_floor
        amplitude_floor = cfg.amplitude_floor if amplitude_floor is None else amplitude_floor
    return width_floor, amplitude_floor


def _retained(params: StepParams, width_floor: float, amplitude_floor: float) -> int:
    n = params.retained_levels(width_floor, amplitude_floor)
    if n < 0:
        raise InvalidParams(
            "No level survives the truncation floors",
            parameter='width_floor',
            suggestion="Lower width_floor / amplitude_floor or lower l",
        )
    return n


def _close(pieces: List[Piece], start: Fraction, params: StepParams) -> Tuple[Piece, ...]:
    """Continue by zero up to a, zero on [a, b), mirror on [b, 1]."""
    if start < params.a:
        pieces.append(Piece(start, params.a, "zero"))
    pieces.append(Piece(params.a, params.b, "zero"))
    pieces.append(Piece(params.b, Fraction(1), "mirror"))
    return tuple(pieces)


def _metadata(name: str, params: StepParams, levels: int, cutoff: Fraction,
              width_floor: float, amplitude_floor: float) -> Dict[str, Any]:
    return {
        "name": name,
        "params": params,
        "levels": levels,
        "cutoff": cutoff,
        "fold_points": (),
        "width_floor": width_floor,
        "amplitude_floor": amplitude_floor,
    }


def step_tilde(params: StepParams, width_floor: Optional[float] = None,
               amplitude_floor: Optional[float] = None) -> PiecewisePotential:
    """Lower envelope: -h^(n+k) on [x_n, y_n), nu h^(n+k) on [y_n, x_{n+1}).

    Zero on [0, delta) (outside the envelope's domain), beyond the last kept
    level and on [a, b]; mirrored on [b, 1].
    """
    width_floor, amplitude_floor = _floors(width_floor, amplitude_floor)
    levels = _retained(params, width_floor, amplitude_floor)
    bp = breakpoints(params, levels + 1)
    k = params.level
    pieces = [Piece(Fraction(0), params.delta, "zero")]
    for n in range(levels + 1):
        pieces.append(Piece(bp.x[n], bp.y[n], "const", -params.h ** (n + k)))
        pieces.append(Piece(bp.y[n], bp.x[n + 1], "const", params.amplitude(n)))
    cutoff = bp.x[levels + 1]
    return PiecewisePotential(
        _close(pieces, cutoff, params), a=params.a,
        metadata=_metadata("step_tilde", params, levels, cutoff, width_floor, amplitude_floor),
    )


def step_bar(params: StepParams, width_floor: Optional[float] = None,
             amplitude_floor: Optional[float] = None) -> PiecewisePotential:
    """Upper envelope: h^(n+k) on [Y_{n-1}, X_n), -nu h^(n+k) on [X_n, Y_n), n >= 1."""
    width_floor, amplitude_floor = _floors(width_floor, amplitude_floor)
    levels = _retained(params, width_floor, amplitude_floor)
    bp = breakpoints(params, levels + 1)
    k = params.level
    pieces = [Piece(Fraction(0), params.delta, "zero")]
    for n in range(1, levels + 2):
        pieces.append(Piece(bp.Y[n - 1], bp.X[n - 1], "const", params.h ** (n + k)))
        pieces.append(Piece(bp.X[n - 1], bp.Y[n], "const", -params.amplitude(n)))
    cutoff = bp.x[levels + 1]
    return PiecewisePotential(
        _close(pieces, cutoff, params), a=params.a,
        metadata=_metadata("step_bar", params, levels, cutoff, width_floor, amplitude_floor),
    )


def smooth_md(params: StepParams, width_floor: Optional[float] = None,
              amplitude_floor: Optional[float] = None) -> PiecewisePotential:
    """The C1 cosine-arch potential of the lower regime.

    Plateau nu h^(k-1) on [0, delta); for each kept level n an arch falling
    from nu h^(n+k-1) to 0 at z_n, an arch rising to nu h^(n+k) at y_n and
    the plateau nu h^(n+k) up to x_{n+1}. The next level's falling arch
    closes the construction at z_{N+1}, followed by zero up to a.
    """
    width_floor, amplitude_floor = _floors(width_floor, amplitude_floor)
    levels = _retained(params, width_floor, amplitude_floor)
    bp = breakpoints(params, levels + 1)
    pieces = [Piece(Fraction(0), bp.x[0], "const", params.amplitude(-1))]
    for n in range(levels + 1):
        pieces.append(Piece(bp.x[n], bp.z[n], "cosd", params.amplitude(n - 1)))
        pieces.append(Piece(bp.z[n], bp.y[n], "cosu", params.amplitude(n)))
        pieces.append(Piece(bp.y[n], bp.x[n + 1], "const", params.amplitude(n)))
    last = levels + 1
    pieces.append(Piece(bp.x[last], bp.z[last], "cosd", params.amplitude(last - 1)))
    return PiecewisePotential(
        _close(pieces, bp.z[last], params), a=params.a,
        metadata=_metadata("smooth_md", params, levels, bp.x[last], width_floor, amplitude_floor),
    )


def smooth_mn(params: StepParams, n0: int, width_floor: Optional[float] = None,
              amplitude_floor: Optional[float] = None) -> PiecewisePotential:
    """smooth_md folded at z_{n0}."""
    md = smooth_md(params, width_floor, amplitude_floor)
    if not 0 <= n0 <= md.metadata["levels"]:
        raise InvalidParams(f"Fold level {n0} is outside the kept levels 0..{md.metadata['levels']}",
                            parameter='n0')
    z = breakpoints(params, n0).z[n0]
    return fold(md, z).with_metadata(name=f"smooth_mn:{n0}")


def unidirectional(slope: Real = -1) -> PiecewisePotential:
    """m(x) = slope * x on [0, 1]."""
    slope = as_fraction(slope)
    return PiecewisePotential(
        (Piece(Fraction(0), Fraction(1), "linear", slope),),
        metadata={"name": f"linear:{slope}", "fold_points": ()},
    )


def zero_potential() -> PiecewisePotential:
    """m = 0."""
    return PiecewisePotential((Piece(Fraction(0), Fraction(1), "zero"),),
                              metadata={"name": "zero", "fold_points": ()})


# ---------------------------------------------------------------------------
# Folding and envelopes
# ---------------------------------------------------------------------------

def fold(m: PiecewisePotential, z: Real) -> PiecewisePotential:
    """Negate m on (z, a); unchanged on [0, z] and [a, b], re-mirrored on [b, 1].

    Raises:
        NotAFoldPoint: if m(z) or m'(z) does not vanish, or z is not in (0, a)
    """
    if m.a is None:
        raise InvalidParams("Folding needs a potential with a degenerate interval", parameter='a')
    zf = float(z)
    value = float(m.value(zf))
    slope = float(m.derivative(zf))
    if not 0 < zf < float(m.a):
        raise NotAFoldPoint(zf, value, slope)
    if (abs(value) > FOLD_VALUE_TOL * m.max_abs()
            or abs(slope) > FOLD_DERIVATIVE_TOL * m.max_abs_derivative()):
        raise NotAFoldPoint(zf, value, slope)

    pieces = list(m.pieces)
    starts = [p.lo for p in pieces]
    nearest = min(range(len(starts)), key=lambda i: abs(float(starts[i]) - zf))
    if abs(float(starts[nearest]) - zf) <= 1e-15:
        z_exact = starts[nearest]
    else:
        # Interior points are only admissible inside a zero run
        host = int(np.searchsorted([float(s) for s in starts], zf, side="right") - 1)
        piece = pieces[host]
        if piece.kind != "zero" or piece.offset != 0:
            raise NotAFoldPoint(zf, value, slope)
        z_exact = as_fraction(z) if isinstance(piece.lo, Fraction) else zf
        pieces[host:host + 1] = [replace(piece, hi=z_exact), replace(piece, lo=z_exact)]

    folded = tuple(p.negated() if (p.lo >= z_exact and p.hi <= m.a) else p for p in pieces)

    points = list(m.metadata.get("fold_points", ()))
    if z_exact in points:
        points.remove(z_exact)
    else:
        points.append(z_exact)
    meta = dict(m.metadata)
    meta["fold_points"] = tuple(sorted(points))
    return PiecewisePotential(folded, a=m.a, metadata=meta)


def envelope_delta(m: PiecewisePotential, tau: float) -> float:
    """Largest delta with sup |m| < tau on (a - delta, a), from the piece ledger.

    Pieces are walked backward from a. A falling arch that crosses tau is
    cut at the exact crossing point; any other piece reaching tau ends the
    interval at its right end. If nothing reaches tau before delta_0 the
    result is clamped to a - delta_0.
    """
    if tau <= 0:
        raise InvalidParams(f"tau must be positive, got {tau}", parameter='tau')
    if m.a is None:
        raise InvalidParams("envelope_delta needs a potential with a degenerate interval", parameter='a')
    a = float(m.a)
    params = m.params
    floor = float(params.delta) if params is not None else 0.0

    for p in reversed(m.left_pieces()):
        if float(p.hi) <= floor:
            break
        if p.peak() < tau:
            continue
        lo, width = float(p.lo), float(p.width)
        if p.kind == "cosd" and p.offset == 0:
            # |A| (1 + cos pi t) / 2 = tau
            t = math.acos(min(1.0, 2.0 * tau / abs(float(p.amplitude)) - 1.0)) / math.pi
            return a - max(lo + width * t, floor)
        return a - float(p.hi)
    return a - floor


def _same_layout(m1: PiecewisePotential, m2: PiecewisePotential) -> bool:
    if len(m1.pieces) != len(m2.pieces):
        return False
    return all(p.lo == q.lo and p.hi == q.hi and p.kind == q.kind for p, q in zip(m1.pieces, m2.pieces))


def potential_distance(m1: PiecewisePotential, m2: PiecewisePotential, samples: int = 200001) -> float:
    """sup |m1 - m2| on [0, 1].

    Exact from the ledgers when both potentials share their piece layout
    (the difference of two pieces of one kind is again of that kind);
    otherwise sampled on a fine grid plus every boundary of either one.
    """
    if _same_layout(m1, m2):
        worst = 0.0
        for p, q in zip(m1.pieces, m2.pieces):
            if p.kind == "mirror":
                continue
            d_amp = float(p.amplitude - q.amplitude)
            d_off = float(p.offset - q.offset)
            if p.kind == "zero":
                worst = max(worst, abs(d_off))
            elif p.kind == "const":
                worst = max(worst, abs(d_amp + d_off))
            else:
                worst = max(worst, abs(d_off), abs(d_amp + d_off))
        return worst
    r = np.unique(np.concatenate([np.linspace(0.0, 1.0, samples), m1.boundaries(), m2.boundaries()]))
    return float(np.max(np.abs(m1.value(r) - m2.value(r))))

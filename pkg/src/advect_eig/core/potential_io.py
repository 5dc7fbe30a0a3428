"""Potential-spec text format.

    # advect-eig potential v1
    # a = 41/84
    # name = smooth_md
    # levels = 8
    # cutoff = <p/q>
    # fold_points =
    # width_floor = <float.hex>
    # amplitude_floor = <float.hex>
    # params = delta=1/84 h=1/10 alpha=1/8 beta=1/4 nu=2 l=0 level=0
    0 1/84 const 20 0
    1/84 25/336 cosd 20 0
    ...

One piece per line: ``lo hi kind amplitude offset``. Rationals are written
as ``p/q`` and binary64 values with ``float.hex``, so reading a written
potential reproduces every number bit-exactly.
"""

from fractions import Fraction
from typing import Any, Dict, List, Optional, Union

from .exceptions import AdvectEigError, PotentialFormatError
from .params import StepParams
from .potential import PIECE_KINDS, Piece, PiecewisePotential

HEADER = "# advect-eig potential v1"

_PARAM_KEYS = ("delta", "h", "alpha", "beta", "nu", "l", "level")


def format_number(value: Union[Fraction, float, int]) -> str:
    if isinstance(value, float):
        return value.hex()
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_number(token: str, line_number: Optional[int] = None) -> Union[Fraction, float]:
    try:
        if "0x" in token.lower():
            return float.fromhex(token)
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as e:
        raise PotentialFormatError(f"Bad number '{token}'", line_number=line_number, original_error=e) from e


def write_potential(m: PiecewisePotential) -> str:
    """Serialize a potential to the potential-spec text format."""
    meta = m.metadata
    lines = [HEADER]
    if m.a is not None:
        lines.append(f"# a = {format_number(m.a)}")
    if "name" in meta:
        lines.append(f"# name = {meta['name']}")
    if meta.get("levels") is not None:
        lines.append(f"# levels = {meta['levels']}")
    if meta.get("cutoff") is not None:
        lines.append(f"# cutoff = {format_number(meta['cutoff'])}")
    if "fold_points" in meta:
        lines.append("# fold_points = " + ",".join(format_number(z) for z in meta["fold_points"]))
    for key in ("width_floor", "amplitude_floor"):
        if meta.get(key) is not None:
            lines.append(f"# {key} = {format_number(meta[key])}")
    params = meta.get("params")
    if params is not None:
        fields = " ".join(f"{key}={format_number(getattr(params, key))}" for key in _PARAM_KEYS)
        lines.append(f"# params = {fields}")
    for p in m.pieces:
        lines.append(" ".join([format_number(p.lo), format_number(p.hi), p.kind,
                               format_number(p.amplitude), format_number(p.offset)]))
    return "\n".join(lines) + "\n"


def _parse_params(value: str, a: Any, line_number: int) -> StepParams:
    fields: Dict[str, Any] = {}
    for item in value.split():
        if "=" not in item:
            raise PotentialFormatError(f"Bad params item '{item}'", line_number=line_number)
        key, raw = item.split("=", 1)
        if key not in _PARAM_KEYS:
            raise PotentialFormatError(f"Unknown params key '{key}'", line_number=line_number)
        fields[key] = parse_number(raw, line_number)
    missing = set(_PARAM_KEYS) - set(fields)
    if missing or a is None:
        raise PotentialFormatError(f"Incomplete params (missing {sorted(missing) or ['a']})",
                                   line_number=line_number)
    try:
        return StepParams(delta=fields["delta"], h=fields["h"], alpha=fields["alpha"], beta=fields["beta"],
                          nu=fields["nu"], l=int(fields["l"]), a=a, level=int(fields["level"]))
    except AdvectEigError as e:
        raise PotentialFormatError(f"Invalid params: {e.message}", line_number=line_number,
                                   original_error=e) from e


def read_potential(text: str) -> PiecewisePotential:
    """Parse the potential-spec text format.

    Raises:
        PotentialFormatError: on a missing header, unknown kinds, bad numbers
            or pieces that do not tile [0, 1]
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise PotentialFormatError(f"Missing header line '{HEADER}'", line_number=1)

    a = None
    meta: Dict[str, Any] = {}
    params_line = None
    pieces: List[Piece] = []
    for number, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                continue
            key, value = (part.strip() for part in body.split("=", 1))
            if key == "a":
                a = parse_number(value, number)
            elif key == "name":
                meta["name"] = value
            elif key == "levels":
                meta["levels"] = int(value)
            elif key == "cutoff":
                meta["cutoff"] = parse_number(value, number)
            elif key == "fold_points":
                meta["fold_points"] = tuple(parse_number(v, number) for v in value.split(",") if v)
            elif key in ("width_floor", "amplitude_floor"):
                meta[key] = parse_number(value, number)
            elif key == "params":
                params_line = (value, number)
            continue

        tokens = line.split()
        if len(tokens) != 5:
            raise PotentialFormatError(f"Expected 'lo hi kind amplitude offset', got {len(tokens)} fields",
                                       line_number=number)
        lo, hi, kind, amplitude, offset = tokens
        if kind not in PIECE_KINDS:
            raise PotentialFormatError(f"Unknown piece kind '{kind}'", line_number=number)
        try:
            pieces.append(Piece(parse_number(lo, number), parse_number(hi, number), kind,
                                parse_number(amplitude, number), parse_number(offset, number)))
        except PotentialFormatError:
            raise
        except AdvectEigError as e:
            raise PotentialFormatError(e.message, line_number=number, original_error=e) from e

    if params_line is not None:
        meta["params"] = _parse_params(params_line[0], a, params_line[1])
    if not pieces:
        raise PotentialFormatError("No pieces found", line_number=len(lines))
    try:
        return PiecewisePotential(tuple(pieces), a=a, metadata=meta)
    except PotentialFormatError:
        raise
    except AdvectEigError as e:
        raise PotentialFormatError(e.message, original_error=e) from e

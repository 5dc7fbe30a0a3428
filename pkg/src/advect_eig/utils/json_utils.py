"""JSON utilities backed by orjson.

Reports, fold sequences and debug states are serialized through this module.
numpy arrays and scalars serialize natively; Fractions and Paths are written
as strings so exact breakpoints survive a round trip.
"""

import json as _stdlib_json
from fractions import Fraction
from pathlib import Path
from typing import Any, TextIO, Union

try:
    import orjson
    HAS_ORJSON = True
except ImportError:
    HAS_ORJSON = False


def _default(obj: Any) -> Any:
    """Fallback serializer for types orjson does not know."""
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, 'to_dict'):
        return obj.to_dict()
    if hasattr(obj, 'tolist'):
        return obj.tolist()
    raise TypeError(f"Type is not JSON serializable: {type(obj).__name__}")


def dumps(obj: Any, indent: Union[int, None] = None, sort_keys: bool = False) -> str:
    """Serialize object to a JSON string.

    Args:
        obj: Object to serialize
        indent: None for compact output, any int for 2-space pretty printing
        sort_keys: Sort dictionary keys (used for config hashing)

    Returns:
        JSON string
    """
    if HAS_ORJSON:
        option = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS
        if indent is not None:
            option |= orjson.OPT_INDENT_2
        if sort_keys:
            option |= orjson.OPT_SORT_KEYS
        return orjson.dumps(obj, default=_default, option=option).decode('utf-8')
    return _stdlib_json.dumps(obj, indent=indent, sort_keys=sort_keys, default=_default)


def dump(obj: Any, fp: TextIO, indent: Union[int, None] = None) -> None:
    """Serialize object to an open text file."""
    fp.write(dumps(obj, indent=indent))


def loads(s: Union[str, bytes]) -> Any:
    """Deserialize a JSON string."""
    if HAS_ORJSON:
        return orjson.loads(s)
    return _stdlib_json.loads(s)


def load(fp: TextIO) -> Any:
    """Deserialize JSON from an open text file."""
    return loads(fp.read())


# For compatibility with json.JSONDecodeError
JSONDecodeError = _stdlib_json.JSONDecodeError


def save_json(data: Any, filepath: Union[str, Path], indent: Union[int, None] = 2) -> None:
    """Save data to a JSON file."""
    filepath = Path(filepath)
    with open(filepath, 'w', encoding='utf-8') as f:
        dump(data, f, indent=indent)


def get_json_backend() -> str:
    """Return 'orjson' if orjson is in use, 'json' otherwise."""
    return 'orjson' if HAS_ORJSON else 'json'

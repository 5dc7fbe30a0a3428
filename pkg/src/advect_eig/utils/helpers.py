"""Shared helper functions for the advect_eig package."""

import numbers
import os
from fractions import Fraction
from typing import Optional, Union


def ensure_output_dir(output_dir: Union[str, os.PathLike]) -> str:
    """Ensure the output directory exists and return its path."""
    os.makedirs(output_dir, exist_ok=True)
    return str(output_dir)


def get_base_name(input_path: Optional[str] = None, basename: Optional[str] = None) -> str:
    """Get the base name for output files.

    Args:
        input_path: Path to an input file (potential spec or config file), if any
        basename: Optional explicit base name to use

    Returns:
        Base name for output files, with any known output suffixes removed
    """
    if basename:
        return basename
    if not input_path:
        return "advect_eig"

    base = os.path.splitext(os.path.basename(input_path))[0]

    # Remove known output suffixes so re-running on an output keeps the stem
    known_suffixes = ['_potential', '_terminal_potential', '_mesh', '_sweep', '_config']
    for suffix in known_suffixes:
        if base.endswith(suffix):
            return base[:-len(suffix)]

    return base


def format_float(value: Optional[float]) -> str:
    """Format a number for CSV output.

    ``repr`` is the shortest string that round-trips, so identical inputs
    always give identical bytes. None becomes an empty field.
    """
    if value is None:
        return ""
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, numbers.Integral) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def format_rational(value: Union[Fraction, float, int]) -> str:
    """Write a Fraction as p/q and anything else as a shortest float."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return format_float(value)

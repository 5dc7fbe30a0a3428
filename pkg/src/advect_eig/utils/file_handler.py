"""File handling utilities for advect-eig.

Every artifact (tables, reports, potential specs, plots) goes through one
FileHandler so names follow ``{base}_{stage}.{ext}`` and every CSV starts
with the same reproducibility header.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

from .json_utils import dump, load, JSONDecodeError
from .helpers import ensure_output_dir, format_float
from .constants import VERSION
from ..core.exceptions import OutputWriteError, FileHandlingError
from ..core.utils.logging import LogManager


def csv_header(config_hash: str, mesh_stats: Optional[Mapping[str, Any]], config_text: str) -> str:
    """Build the comment block written at the top of every CSV.

    The ``# config:`` lines hold the effective configuration in the
    key-value file format, so stripping the prefix gives a loadable config.
    """
    lines = [f"# advect-eig {VERSION}", f"# config_hash: {config_hash}"]
    if mesh_stats:
        lines.append(
            "# mesh: nodes={nodes} h_min={h_min} h_max={h_max}".format(
                nodes=mesh_stats["nodes"],
                h_min=format_float(mesh_stats["h_min"]),
                h_max=format_float(mesh_stats["h_max"]),
            )
        )
    for line in config_text.splitlines():
        if line.strip():
            lines.append(f"# config: {line}")
    return "\n".join(lines) + "\n"


def config_text_from_header(text: str) -> str:
    """Recover the ``key = value`` config text echoed in a CSV header."""
    prefix = "# config: "
    return "\n".join(line[len(prefix):] for line in text.splitlines() if line.startswith(prefix)) + "\n"


class FileHandler:
    """Handles file operations for advect-eig.

    Saves tables, JSON reports, text reports and SVG plots with consistent
    naming inside one output directory.
    """

    _instance = None

    def __new__(cls, output_dir: str = "output", debug_level: str = "INFO"):
        """Create or return the singleton instance."""
        if cls._instance is None:
            cls._instance = super(FileHandler, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self, output_dir: str = "output", debug_level: str = "INFO"):
        """Initialize the file handler if not already initialized.

        Args:
            output_dir: Base directory for all output files
            debug_level: Logging level for the handler
        """
        if not self._initialized:
            self.output_dir = str(output_dir)
            self.logger = LogManager(debug_level)
            self._initialized = True
        else:
            self.output_dir = str(output_dir)
            self.logger = LogManager(debug_level)

    def get_file_path(self, base_name: str, stage: str, extension: str = "json") -> Path:
        """Get the path for a file without saving it."""
        return Path(self.output_dir) / f"{base_name}_{stage}.{extension}"

    def _write(self, text: str, base_name: str, stage: str, extension: str) -> Path:
        output_file = self.get_file_path(base_name, stage, extension)
        try:
            ensure_output_dir(self.output_dir)
            with open(output_file, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            self.logger.error(f"Error saving {stage} {extension}: {e}")
            raise OutputWriteError(str(output_file), original_error=e) from e
        self.logger.info(f"Saved {stage} {extension} to {output_file}")
        return output_file

    def save_csv(
        self,
        rows: Iterable[Sequence[Any]],
        columns: Sequence[str],
        base_name: str,
        stage: str,
        header: str = "",
    ) -> Path:
        """Save a table as CSV, header block first, numbers via repr."""
        out = [header.rstrip("\n")] if header else []
        out.append(",".join(columns))
        for row in rows:
            if len(row) != len(columns):
                raise FileHandlingError(
                    f"Row has {len(row)} fields, expected {len(columns)}",
                    operation="write",
                )
            out.append(",".join(_field(v) for v in row))
        return self._write("\n".join(out) + "\n", base_name, stage, "csv")

    def save_json(self, data: Dict[str, Any], base_name: str, stage: str) -> Path:
        """Save data as a JSON file."""
        output_file = self.get_file_path(base_name, stage, "json")
        try:
            ensure_output_dir(self.output_dir)
            with open(output_file, "w", encoding="utf-8") as f:
                dump(data, f, indent=2)
        except (OSError, TypeError) as e:
            self.logger.error(f"Error saving {stage} data: {e}")
            raise OutputWriteError(str(output_file), original_error=e) from e
        self.logger.info(f"Saved {stage} data to {output_file}")
        return output_file

    def load_json(self, base_name: str, stage: str) -> Optional[Dict[str, Any]]:
        """Load data from a JSON file, None if it does not exist."""
        input_file = self.get_file_path(base_name, stage, "json")
        if not input_file.exists():
            self.logger.warning(f"No {stage} data found at {input_file}")
            return None
        try:
            with open(input_file, "r", encoding="utf-8") as f:
                return load(f)
        except (OSError, JSONDecodeError) as e:
            raise FileHandlingError(
                f"Cannot load {input_file}: {e}",
                file_path=str(input_file),
                operation="read",
                original_error=e,
            ) from e

    def save_text(self, text: str, base_name: str, stage: str, extension: str = "txt") -> Path:
        """Save text (reports, potential specs) to a file."""
        return self._write(text, base_name, stage, extension)

    def save_svg(self, svg: str, base_name: str, stage: str) -> Path:
        """Save an SVG document."""
        return self._write(svg, base_name, stage, "svg")


def _field(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    return format_float(value)

"""Configuration management for advect-eig using Pydantic."""

import hashlib
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Union

from pydantic import Field, ValidationError as PydanticValidationError, field_validator
from pydantic_settings import BaseSettings

from .core.exceptions import ConfigurationError
from .utils.constants import FIXTURE_NAMES
from .utils.json_utils import dumps


class AdvectEigConfig(BaseSettings):
    """advect-eig configuration with environment variable support."""

    # Geometry (exact rationals written as "p/q")
    a: str = Field(default="7/20", description="Left end of the degenerate interval, in (0, 1/2)")
    h: str = Field(default="1/10", description="Amplitude ratio of successive levels")
    alpha: str = Field(default="1/8", description="Width ratio of the dipping pieces")
    beta: str = Field(default="1/4", description="Width ratio of the plateau pieces")
    nu: str = Field(default="2", description="Overshoot factor of the plateaus")
    l: int = Field(default=1, ge=0, description="Width exponent offset")

    # Problem
    d: int = Field(default=1, ge=1, description="Radial dimension")
    potential: str = Field(
        default="md",
        description="Potential: zero, md, mn:<n0>, linear:<slope>, or a potential-spec file path"
    )
    coefficient: str = Field(
        default="ramp",
        description="Reaction coefficient c: ramp, sigma, const:<value>"
    )
    c_in: float = Field(default=1.0, description="Value of c on the middle of (a, b)")
    c_out: Optional[float] = Field(
        default=None,
        description="Value of c outside (a, b); None derives c_out_factor * lambda_D"
    )
    c_out_factor: float = Field(default=1.5, gt=1.0, description="c_out = factor * lambda_D when derived")
    c_ramp_fraction: float = Field(default=0.125, gt=0.0, lt=0.5, description="Ramp width as a fraction of b - a")

    # Truncation and mesh
    width_floor: float = Field(default=1e-9, gt=0.0, description="Smallest piece width kept")
    amplitude_floor: float = Field(default=1e-12, gt=0.0, description="Smallest level amplitude kept")
    p_min: int = Field(default=8, ge=2, description="Minimum interior nodes per retained piece")
    mesh_cap: int = Field(default=2_000_000, ge=3, description="Maximum node count")
    base_intervals: int = Field(default=1000, ge=1, description="Quasi-uniform intervals per unit length")

    # Eigen solver
    eigen_tol: float = Field(default=1e-10, gt=0.0, lt=1e-2, description="Relative eigenvalue tolerance")
    max_bisection_doublings: int = Field(default=60, ge=1, description="Bracket expansions before giving up")
    max_inverse_iterations: int = Field(default=50, ge=1, description="Inverse iteration steps per attempt")
    dynamic_range: float = Field(default=600.0, gt=0.0, description="Log-range budget of the weighted form (d >= 2)")
    fitting_clamp: float = Field(default=30.0, gt=0.0, description="Clamp on per-element advection increments")

    # s-grids
    s_start: float = Field(default=1.0, gt=0.0, description="First strength of searches and sweeps")
    s_ratio: float = Field(default=1.25, gt=1.0, description="Geometric ratio of s-grids")
    s_cap: float = Field(default=1e7, gt=0.0, description="Largest strength a search may reach")
    s_stop: float = Field(default=1e5, gt=0.0, description="Last strength of a sweep")

    # Fold construction
    stages: int = Field(default=3, ge=2, description="Number of construction stages K")
    fold_tol_fraction: float = Field(default=0.2, gt=0.0, lt=0.5, description="Stage tolerance fraction of the reference gap")
    fold_tau_scale: float = Field(default=1.0, gt=0.0, description="Envelope tolerance tau_k = scale * s_k^-power")
    fold_tau_power: float = Field(default=2.0, gt=0.0, description="Power in the envelope tolerance")
    fold_max_advance: int = Field(default=4, ge=0, description="Extra fold points tried when a stage is not preserved")

    # Reaction-diffusion-advection
    rda_t_max: float = Field(default=100.0, gt=0.0, description="Integration horizon")
    rda_dt: Optional[float] = Field(default=None, description="Time step; None uses (b - a)^2 / 50")
    rda_max_halvings: int = Field(default=10, ge=0, description="Step halvings allowed to keep u >= 0")
    rda_eps: float = Field(default=1 / 48, gt=0.0, description="Assumption margin epsilon")
    rda_record_points: int = Field(default=2000, ge=10, description="Trajectory rows kept")

    # Run control
    workers: int = Field(default=1, ge=1, description="Parallel solves for sweeps")
    record_timing: bool = Field(default=False, description="Fill the seconds column of sweep tables")
    seed: int = Field(default=0, description="Seed for initial-data perturbations")

    # Directories and logging
    output_dir: Path = Field(default=Path("output"), description="Default output directory for results")
    log_level: str = Field(default="INFO", description="Logging level (DEBUG, INFO, WARNING, ERROR)")

    model_config = {
        "env_file": ".env",
        "env_prefix": "ADVECT_EIG_",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }

    @field_validator("a", "h", "alpha", "beta", "nu")
    @classmethod
    def _rational(cls, value: str) -> str:
        try:
            Fraction(str(value).strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational number: {value!r}") from e
        return str(value).strip()

    @field_validator("log_level")
    @classmethod
    def _level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError(f"unknown log level {value}")
        return value

    def fraction(self, name: str) -> Fraction:
        """Return a geometry field as an exact Fraction."""
        return Fraction(getattr(self, name))


# Fields that do not change numerical results; left out of the config hash
_NON_NUMERIC = {"output_dir", "log_level", "workers", "record_timing"}


def _build(values: Dict) -> AdvectEigConfig:
    try:
        return AdvectEigConfig(**values)
    except PydanticValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first.get("loc", ())) or None
        raise ConfigurationError(
            f"Invalid configuration: {first.get('msg')}",
            config_field=field,
            original_error=e,
        ) from e


# Global configuration instance
config = AdvectEigConfig()


def get_config() -> AdvectEigConfig:
    """Get the global configuration instance."""
    return config


def update_config(**kwargs) -> AdvectEigConfig:
    """Update configuration with new values (validated)."""
    global config
    unknown = set(kwargs) - set(AdvectEigConfig.model_fields)
    if unknown:
        raise ConfigurationError(f"Unknown configuration keys: {sorted(unknown)}", config_field=sorted(unknown)[0])
    config = _build({**config.model_dump(), **kwargs})
    return config


def reset_config() -> AdvectEigConfig:
    """Reset configuration to defaults."""
    global config
    config = AdvectEigConfig()
    return config


class GeometryFixtures:
    """Named problem instances."""

    @staticmethod
    def paper() -> dict:
        """The worked example geometry: delta = 1/84, b - a = 1/42."""
        return {
            "a": "41/84",
            "h": "1/10",
            "alpha": "1/8",
            "beta": "1/4",
            "nu": "2",
            "l": 0,
            "coefficient": "ramp",
            "c_in": 1.0,
            "base_intervals": 4000,
        }

    @staticmethod
    def desk() -> dict:
        """A wider degenerate interval keeping lambda_D of order 10^2."""
        return {
            "a": "7/20",
            "h": "1/10",
            "alpha": "1/8",
            "beta": "1/4",
            "nu": "2",
            "l": 1,
            "coefficient": "ramp",
            "c_in": 1.0,
            "base_intervals": 1000,
        }

    @staticmethod
    def rda() -> dict:
        """Geometry of the reaction-diffusion study: a = 1/4, c = -sigma, starting folded at z_1."""
        return {
            "a": "1/4",
            "h": "1/10",
            "alpha": "1/8",
            "beta": "1/4",
            "nu": "2",
            "l": 1,
            "potential": "mn:1",
            "coefficient": "sigma",
            "base_intervals": 1000,
            "stages": 2,
        }


def fixture_overrides(name: str) -> dict:
    """Return the override dict of a named fixture."""
    fixtures = {
        "paper": GeometryFixtures.paper,
        "desk": GeometryFixtures.desk,
        "rda": GeometryFixtures.rda,
    }
    if name not in fixtures:
        available = ", ".join(FIXTURE_NAMES)
        raise ConfigurationError(f"Unknown fixture '{name}'. Available: {available}", config_field="fixture")
    return fixtures[name]()


def apply_fixture(name: str) -> AdvectEigConfig:
    """Apply a named fixture to the configuration."""
    return update_config(**fixture_overrides(name))


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Parse a key-value config file into raw override strings.

    Lines look like ``key = value``; blank lines and ``#`` comments are
    ignored. ``none`` (any case) maps to None.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}", config_field="config_file", original_error=e) from e
    return parse_config_text(text, source=str(path))


def parse_config_text(text: str, source: str = "<text>") -> Dict[str, Optional[str]]:
    """Parse ``key = value`` lines; unknown keys are an error."""
    values: Dict[str, Optional[str]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value'", config_field=line)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in AdvectEigConfig.model_fields:
            raise ConfigurationError(f"{source}:{number}: unknown key '{key}'", config_field=key)
        values[key] = None if value.lower() == "none" else value
    return values


def config_to_text(cfg: AdvectEigConfig) -> str:
    """Render a config as ``key = value`` lines that parse back to an equal config."""
    lines = []
    for key, value in cfg.model_dump(mode="json").items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: AdvectEigConfig) -> str:
    """SHA-256 of the numerically relevant settings."""
    payload = {k: v for k, v in cfg.model_dump(mode="json").items() if k not in _NON_NUMERIC}
    return hashlib.sha256(dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]

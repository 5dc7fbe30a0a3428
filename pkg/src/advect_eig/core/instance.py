"""Problem instances assembled from the configuration.

An instance bundles the step params, the potential, the reaction
coefficient, a mesh carrying every breakpoint of both, and the references
lambda^D / lambda^N on (a, b).
"""

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

from .coefficients import Coefficient, RampProfile, parse_coefficient
from .eigen import EigenProblem, ReferencePair, reference_pair
from .exceptions import ConfigurationError, FileHandlingError
from .mesh import Mesh, build_mesh
from .params import StepParams
from .potential import PiecewisePotential, smooth_md, smooth_mn, unidirectional, zero_potential
from .potential_io import read_potential
from .utils.logging import LogManager
from ..config import AdvectEigConfig, get_config


@dataclass
class Instance:
    params: StepParams
    m: PiecewisePotential
    c: Coefficient
    mesh: Mesh
    d: int = 1
    refs: Optional[ReferencePair] = None

    def problem(self, s: float = 0.0, m: Optional[PiecewisePotential] = None) -> EigenProblem:
        """The full Neumann problem at strength s (on this or another potential)."""
        return EigenProblem.full(self.m if m is None else m, self.c, s, self.d)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "potential": self.m.metadata.get("name"),
            "levels": self.m.metadata.get("levels"),
            "coefficient": self.c.describe(),
            "d": self.d,
            "mesh": self.mesh.stats(),
            "references": None if self.refs is None else self.refs.to_dict(),
        }


def params_from_config(cfg: Optional[AdvectEigConfig] = None) -> StepParams:
    cfg = get_config() if cfg is None else cfg
    return StepParams.from_geometry(cfg.fraction("a"), cfg.fraction("h"), cfg.fraction("alpha"),
                                    cfg.fraction("beta"), cfg.fraction("nu"), cfg.l)


def parse_potential(spec: str, params: StepParams, cfg: Optional[AdvectEigConfig] = None) -> PiecewisePotential:
    """``zero``, ``md``, ``mn:<n0>``, ``linear:<slope>`` or a potential-spec file path."""
    cfg = get_config() if cfg is None else cfg
    spec = spec.strip()
    if spec == "zero":
        return zero_potential()
    if spec == "md":
        return smooth_md(params, cfg.width_floor, cfg.amplitude_floor)
    if spec.startswith("mn:"):
        try:
            n0 = int(spec.split(":", 1)[1])
        except ValueError as e:
            raise ConfigurationError(f"Bad fold level in '{spec}'", config_field="potential", original_error=e) from e
        return smooth_mn(params, n0, cfg.width_floor, cfg.amplitude_floor)
    if spec.startswith("linear:"):
        try:
            slope = Fraction(spec.split(":", 1)[1])
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigurationError(f"Bad slope in '{spec}'", config_field="potential", original_error=e) from e
        return unidirectional(slope)
    path = Path(spec)
    if path.exists():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise FileHandlingError(f"Cannot read potential file {path}", file_path=str(path),
                                    operation="read", original_error=e) from e
        return read_potential(text)
    raise ConfigurationError(
        f"Unknown potential '{spec}'",
        config_field="potential",
        suggestion="Use zero, md, mn:<n0>, linear:<slope> or the path of a potential-spec file",
    )


def build_instance(cfg: Optional[AdvectEigConfig] = None, potential: Optional[str] = None,
                   coefficient: Optional[str] = None, with_refs: bool = True) -> Instance:
    """Build params, potential, coefficient, mesh and references from the configuration.

    A ramp coefficient without c_out is calibrated once: lambda^D is solved
    with c = c_in, c_out is set to c_out_factor * lambda^D, and the
    references are solved again with the final profile.
    """
    cfg = get_config() if cfg is None else cfg
    logger = LogManager(cfg.log_level)
    params = params_from_config(cfg)
    m = parse_potential(cfg.potential if potential is None else potential, params, cfg)
    c = parse_coefficient(cfg.coefficient if coefficient is None else coefficient, params.a, params.b,
                          cfg.c_in, cfg.c_out, cfg.c_ramp_fraction)

    extra = list(c.kinks()) + [params.a, params.b]
    mesh = build_mesh(m, cfg.p_min, cfg.mesh_cap, cfg.base_intervals, breakpoints=extra)
    logger.info(f"Mesh: {mesh.n_nodes} nodes for potential {m.metadata.get('name', '?')}")

    refs = None
    if isinstance(c, RampProfile) and cfg.c_out is None:
        provisional = reference_pair(params.a, params.b, c, cfg.d, mesh)
        c = c.with_c_out(cfg.c_out_factor * provisional.lambda_D)
        logger.info(f"Derived c_out = {c.c_out:.10g} from lambda_D = {provisional.lambda_D:.10g}")
        with_refs = True
    if with_refs:
        refs = reference_pair(params.a, params.b, c, cfg.d, mesh)
    return Instance(params=params, m=m, c=c, mesh=mesh, d=cfg.d, refs=refs)


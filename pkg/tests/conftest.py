"""Shared pytest fixtures for advect-eig tests."""

import tempfile
from fractions import Fraction
from pathlib import Path

import pytest

from src.advect_eig.config import reset_config, update_config
from src.advect_eig.core.coefficients import Constant, RampProfile, SigmaProfile
from src.advect_eig.core.exceptions import InvalidParams, NonPositiveDelta
from src.advect_eig.core.mesh import build_mesh
from src.advect_eig.core.params import StepParams
from src.advect_eig.core.potential import smooth_md, zero_potential


@pytest.fixture(autouse=True)
def reset_global_config():
    """Every test starts from (and leaves behind) the default configuration."""
    reset_config()
    yield
    reset_config()


@pytest.fixture
def temp_output_dir():
    """Create a temporary output directory for tests."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture
def paper_params():
    """The worked example: a = 41/84, h = 1/10, alpha = 1/8, beta = 1/4, nu = 2, l = 0 (delta = 1/84)."""
    return StepParams.from_geometry(Fraction(41, 84), Fraction(1, 10), Fraction(1, 8), Fraction(1, 4), 2, 0)


@pytest.fixture
def desk_params():
    """Desk geometry: a = 0.35, l = 1."""
    return StepParams.from_geometry(Fraction(7, 20), Fraction(1, 10), Fraction(1, 8), Fraction(1, 4), 2, 1)


@pytest.fixture
def rda_params():
    """Reaction-diffusion geometry: a = 1/4, l = 1."""
    return StepParams.from_geometry(Fraction(1, 4), Fraction(1, 10), Fraction(1, 8), Fraction(1, 4), 2, 1)


@pytest.fixture
def paper_md(paper_params):
    """smooth_md on the worked example, truncated at the default floors."""
    return smooth_md(paper_params)


@pytest.fixture
def desk_md(desk_params):
    """smooth_md on the desk geometry with coarser floors for quick solves."""
    return smooth_md(desk_params, width_floor=1e-6, amplitude_floor=1e-8)


@pytest.fixture
def small_mesh_config():
    """Coarse mesh settings so eigen solves finish in well under a second."""
    return update_config(p_min=4, base_intervals=200)


@pytest.fixture
def desk_ramp(desk_params):
    """Ramp coefficient on the desk geometry with a fixed c_out."""
    return RampProfile(desk_params.a, desk_params.b, c_in=1.0, c_out=400.0)


@pytest.fixture
def zero_mesh(small_mesh_config):
    """Quasi-uniform mesh of m = 0."""
    return build_mesh(zero_potential())


@pytest.fixture
def constant_seven():
    return Constant(7.0)


@pytest.fixture
def sigma_example():
    """The three-piece growth profile on (1/4, 3/4)."""
    return SigmaProfile.example()


@pytest.fixture
def desk_fixture_config():
    """Desk fixture with a coarser mesh for integration runs."""
    return update_config(
        a="7/20", h="1/10", alpha="1/8", beta="1/4", nu="2", l=1,
        coefficient="ramp", c_in=1.0, base_intervals=400, p_min=4,
        width_floor=1e-6, amplitude_floor=1e-8,
    )


@pytest.fixture
def random_step_params():
    """Draw valid StepParams from a numpy Generator, redrawing until delta > 0."""

    def draw(rng) -> StepParams:
        while True:
            a = Fraction(int(rng.integers(15, 46)), 100)
            h = Fraction(1, int(rng.integers(8, 21)))
            alpha = h + Fraction(int(rng.integers(1, 10)), 100)
            beta = alpha + Fraction(int(rng.integers(1, 30)), 100)
            nu = 1 + Fraction(int(rng.integers(1, 21)), 10)
            l = int(rng.integers(0, 3))
            try:
                return StepParams.from_geometry(a, h, alpha, beta, nu, l)
            except (InvalidParams, NonPositiveDelta):
                continue

    return draw

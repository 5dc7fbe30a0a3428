"""Tests for reaction coefficients and growth profiles."""

from fractions import Fraction

import numpy as np
import pytest

from src.advect_eig.core.coefficients import (
    Constant,
    Mirrored,
    Negated,
    RampProfile,
    Shifted,
    SigmaProfile,
    parse_coefficient,
)
from src.advect_eig.core.exceptions import ConfigurationError, InvalidParams


@pytest.mark.unit
class TestRampProfile:
    """c_out outside (a, b), c_in in the middle."""

    def test_values(self, desk_params):
        c = RampProfile(desk_params.a, desk_params.b, c_in=1.0, c_out=400.0)
        assert c(0.1) == 400.0
        assert c(0.5) == 1.0
        assert c(0.9) == 400.0
        # halfway up the left ramp
        width = 0.3 * 0.125
        assert c(0.35 + width / 2) == pytest.approx(200.5)

    def test_kinks_and_symmetry(self, desk_params):
        c = RampProfile(desk_params.a, desk_params.b, c_in=1.0, c_out=400.0)
        kinks = c.kinks()
        assert kinks[0] == Fraction(7, 20)
        assert kinks[-1] == Fraction(13, 20)
        assert kinks[1] - kinks[0] == Fraction(3, 80)
        r = np.linspace(0.0, 1.0, 1001)
        assert np.allclose(c(r), c(1.0 - r), rtol=0.0, atol=1e-9)

    def test_with_c_out(self, desk_ramp):
        assert desk_ramp.with_c_out(50.0)(0.0) == 50.0
        assert desk_ramp.with_c_out(50.0).c_in == desk_ramp.c_in

    def test_bad_geometry(self):
        with pytest.raises(InvalidParams):
            RampProfile(Fraction(3, 4), Fraction(1, 4))
        with pytest.raises(InvalidParams):
            RampProfile(Fraction(1, 4), Fraction(3, 4), ramp_fraction=0.5)


@pytest.mark.unit
class TestWrappers:
    """Constant, Negated, Shifted, Mirrored."""

    def test_constant(self, constant_seven):
        assert constant_seven(0.3) == 7.0
        assert constant_seven(np.zeros(4)).tolist() == [7.0] * 4
        assert constant_seven.describe() == "const:7.0"

    def test_negated_and_shifted(self, desk_ramp):
        assert Negated(desk_ramp)(0.5) == -1.0
        assert Shifted(desk_ramp, 2.0)(0.5) == 3.0
        assert Negated(desk_ramp).kinks() == desk_ramp.kinks()

    def test_mirrored(self):
        c = RampProfile(Fraction(1, 5), Fraction(3, 5), c_in=1.0, c_out=9.0)
        assert Mirrored(c)(0.1) == c(0.9)
        assert Mirrored(c).kinks()[0] == Fraction(4, 5)

    def test_bounds(self, desk_ramp):
        assert desk_ramp.bounds(np.linspace(0.0, 1.0, 101)) == (1.0, 400.0)


@pytest.mark.unit
class TestSigmaProfile:
    """The three-piece growth profile."""

    @pytest.mark.parametrize("x,expected", [
        (0.1, -96.0), (0.25, -96.0), (9 / 32, 0.0), (0.5, 24.5), (0.9, -96.0), (0.26, 3072 * 0.26 - 864),
    ])
    def test_values(self, sigma_example, x, expected):
        assert sigma_example(x) == pytest.approx(expected, abs=1e-9)

    def test_symmetric(self, sigma_example):
        x = np.linspace(0.0, 1.0, 2001)
        assert np.allclose(sigma_example(x), sigma_example(1.0 - x), rtol=0.0, atol=1e-9)

    def test_continuous_at_breakpoints(self, sigma_example):
        for k in sigma_example.kinks():
            left = sigma_example(float(k) - 1e-12)
            right = sigma_example(float(k) + 1e-12)
            assert left == pytest.approx(right, abs=1e-6)

    def test_constant_and_shift(self, sigma_example):
        flat = SigmaProfile.constant(-1.0)
        assert flat(0.4) == -1.0
        assert flat.a == Fraction(1, 4)
        moved = sigma_example.shifted(-200.0)
        assert moved(0.5) == pytest.approx(-175.5)
        assert moved.kinks() == sigma_example.kinks()


@pytest.mark.unit
class TestParseCoefficient:
    """Coefficient specs from configuration strings."""

    def test_constant(self):
        assert parse_coefficient("const:2.5") == Constant(2.5)

    def test_ramp_needs_geometry(self, desk_params):
        with pytest.raises(ConfigurationError):
            parse_coefficient("ramp")
        c = parse_coefficient("ramp", desk_params.a, desk_params.b, c_in=2.0)
        assert c.c_out == 2.0

    def test_sigma(self):
        c = parse_coefficient("sigma")
        assert isinstance(c, Negated)
        assert c(0.5) == pytest.approx(-24.5)
        shifted = parse_coefficient("sigma-200")
        assert shifted(0.5) == pytest.approx(175.5)

    @pytest.mark.parametrize("text", ["const:abc", "sigma+x", "cubic"])
    def test_bad_specs(self, text):
        with pytest.raises(ConfigurationError) as exc_info:
            parse_coefficient(text)
        assert exc_info.value.context["config_field"] == "coefficient"

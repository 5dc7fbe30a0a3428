"""Tests for step parameters and the breakpoint ledger."""

from fractions import Fraction

import pytest

from src.advect_eig.core.exceptions import InvalidParams, NonPositiveDelta
from src.advect_eig.core.params import StepParams, as_fraction, breakpoints, derive_delta


@pytest.mark.unit
class TestDeriveDelta:
    """delta = a - alpha^(l+1)/(1-alpha) - beta^(l+1)/(1-beta)."""

    def test_worked_example_delta(self):
        """a = 41/84, alpha = 1/8, beta = 1/4, l = 0 gives delta = 1/84 exactly."""
        assert derive_delta(Fraction(41, 84), Fraction(1, 8), Fraction(1, 4), 0) == Fraction(1, 84)

    def test_desk_delta(self):
        """a = 0.35 with l = 1 subtracts the tails 1/56 and 1/12."""
        delta = derive_delta(0.35, Fraction(1, 8), Fraction(1, 4), 1)
        assert float(delta) == pytest.approx(0.35 - 1 / 56 - 1 / 12, abs=1e-15)
        assert float(delta) == pytest.approx(0.248809523809, abs=1e-12)

    def test_tails_too_long(self):
        """Tails that do not fit inside [0, a) raise NonPositiveDelta with a suggestion."""
        with pytest.raises(NonPositiveDelta) as exc_info:
            derive_delta(Fraction(1, 10), Fraction(1, 8), Fraction(1, 4), 0)
        assert "not positive" in exc_info.value.message
        assert "offset l" in exc_info.value.suggestion

    @pytest.mark.parametrize("alpha,beta", [(Fraction(1, 4), Fraction(1, 8)), (Fraction(0), Fraction(1, 4)),
                                            (Fraction(1, 8), Fraction(1))])
    def test_alpha_beta_ordering(self, alpha, beta):
        with pytest.raises(InvalidParams):
            derive_delta(Fraction(2, 5), alpha, beta, 1)

    def test_a_out_of_range(self):
        with pytest.raises(InvalidParams):
            derive_delta(Fraction(1, 2), Fraction(1, 8), Fraction(1, 4), 1)


@pytest.mark.unit
class TestStepParams:
    """Validation and derived quantities of StepParams."""

    def test_from_geometry_derives_b_and_delta(self, paper_params):
        assert paper_params.delta == Fraction(1, 84)
        assert paper_params.b == Fraction(43, 84)
        assert paper_params.level == 0

    def test_float_inputs_are_exact(self):
        """Binary64 inputs convert exactly, strings parse as rationals."""
        assert as_fraction(0.5) == Fraction(1, 2)
        assert as_fraction("7/20") == Fraction(7, 20)
        assert as_fraction(3) == Fraction(3)

    @pytest.mark.parametrize("h,nu", [(Fraction(1, 5), 2), (Fraction(1, 10), 1), (Fraction(0), 2)])
    def test_ordering_violations(self, h, nu):
        """0 < h < alpha < beta < 1 < nu is enforced."""
        with pytest.raises(InvalidParams) as exc_info:
            StepParams.from_geometry(Fraction(7, 20), h, Fraction(1, 8), Fraction(1, 4), nu, 1)
        assert exc_info.value.suggestion is not None

    def test_mismatched_delta_rejected(self):
        with pytest.raises(InvalidParams) as exc_info:
            StepParams(delta=Fraction(1, 80), h=Fraction(1, 10), alpha=Fraction(1, 8), beta=Fraction(1, 4),
                       nu=2, l=0, a=Fraction(41, 84))
        assert exc_info.value.context["parameter"] == "delta"

    def test_b_must_mirror_a(self):
        with pytest.raises(InvalidParams):
            StepParams(delta=Fraction(1, 84), h=Fraction(1, 10), alpha=Fraction(1, 8), beta=Fraction(1, 4),
                       nu=2, l=0, a=Fraction(41, 84), b=Fraction(1, 2))

    def test_negative_offset_rejected(self):
        with pytest.raises(InvalidParams):
            StepParams.from_geometry(Fraction(7, 20), Fraction(1, 10), Fraction(1, 8), Fraction(1, 4), 2, -1)

    def test_shifted_matches_tail_of_ledger(self, paper_params):
        """shifted(j) starts at x_j and continues the ledger level by level."""
        j = 3
        tail = paper_params.shifted(j)
        full = breakpoints(paper_params, j + 5)
        part = breakpoints(tail, 5)
        assert tail.delta == full.x[j]
        assert tail.l == paper_params.l + j
        assert tail.level == paper_params.level + j
        assert part.x == full.x[j:j + 6]
        assert part.y == full.y[j:j + 6]

    def test_shifted_rejects_negative(self, paper_params):
        with pytest.raises(InvalidParams):
            paper_params.shifted(-1)

    def test_amplitude_uses_level(self, paper_params):
        assert paper_params.amplitude(0) == 2
        assert paper_params.amplitude(-1) == 20
        assert paper_params.shifted(2).amplitude(0) == Fraction(2, 100)

    def test_retained_levels(self, paper_params):
        """Level n survives while alpha^(n+l+1) >= width_floor."""
        # alpha^6 = 3.8e-6 passes 1e-6, alpha^7 = 4.8e-7 does not
        assert paper_params.retained_levels(1e-6, 1e-12) == 5
        assert paper_params.retained_levels(1.0, 1e-12) == -1

    def test_to_dict(self, desk_params):
        data = desk_params.to_dict()
        assert data["l"] == 1
        assert data["a"] == Fraction(7, 20)
        assert set(data) == {"delta", "h", "alpha", "beta", "nu", "l", "a", "b", "level"}


@pytest.mark.unit
class TestBreakpoints:
    """Exact x_n, y_n, z_n and the X/Y partition."""

    def test_closed_form_agreement(self, paper_params):
        """x_n = 41/84 - 8^-n (1/7 + 2^n/3), y_n = 41/84 - 8^-n (1/56 + 2^n/3) for n <= 20."""
        bp = breakpoints(paper_params, 20)
        a = Fraction(41, 84)
        for n in range(21):
            scale = Fraction(1, 8 ** n)
            assert bp.x[n] == a - scale * (Fraction(1, 7) + Fraction(2 ** n, 3))
            assert bp.y[n] == a - scale * (Fraction(1, 56) + Fraction(2 ** n, 3))

    def test_midpoints_and_partition(self, desk_params):
        bp = breakpoints(desk_params, 6)
        for n in range(7):
            assert bp.z[n] == (bp.x[n] + bp.y[n]) / 2
            assert bp.x[n] < bp.y[n]
        assert bp.Y == bp.x
        assert bp.X == bp.y[:-1]
        assert all(x < desk_params.a for x in bp.x)

    def test_widths(self, desk_params):
        """y_n - x_n = alpha^(n+l+1) and x_{n+1} - y_n = beta^(n+l+1)."""
        bp = breakpoints(desk_params, 4)
        for n in range(4):
            assert bp.y[n] - bp.x[n] == Fraction(1, 8) ** (n + 2)
            assert bp.x[n + 1] - bp.y[n] == Fraction(1, 4) ** (n + 2)

    def test_level_of(self, paper_params):
        bp = breakpoints(paper_params, 4)
        assert bp.level_of(float(bp.z[2])) == 2
        assert bp.level_of(0.0) is None

    def test_negative_levels_rejected(self, paper_params):
        with pytest.raises(InvalidParams):
            breakpoints(paper_params, -1)

"""Desk-scale runs of the alternating fold construction."""

import pytest

from src.advect_eig.config import update_config
from src.advect_eig.core.fold import construct_divergent, divergence_table
from src.advect_eig.core.instance import build_instance
from src.advect_eig.core.membership import S_D, S_N
from src.advect_eig.core.rda import EXTINCTION, PERSISTENCE, fold_phase_study


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.acceptance
class TestFoldConstruction:
    """Two stages on the desk geometry with a coarse mesh."""

    def test_two_stages_alternate(self, desk_fixture_config, temp_output_dir):
        inst = build_instance()
        seq = construct_divergent(2, inst, output_dir=str(temp_output_dir))

        assert [st.regime for st in seq.stages] == [S_D, S_N]
        assert seq.strengths[0] < seq.strengths[1]
        for st, terminal in zip(seq.stages, seq.terminal_eigenvalues):
            assert abs(terminal - st.target) < st.tol
        assert seq.alternates()

        first = seq.stages[0]
        assert first.fold_point is not None
        assert first.prefix_agrees
        assert len(seq.potentials) == 2

    def test_divergence_table_marks_both_stages(self, desk_fixture_config):
        inst = build_instance()
        seq = construct_divergent(2, inst)
        rows = divergence_table(seq, s_grid=[1.0])
        stages = [row[3] for row in rows if row[3] is not None]
        assert stages == [1, 2]


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.acceptance
class TestFoldFromFoldedStart:
    """A construction starting from smooth_mn begins in S_N."""

    def test_regimes_swap(self, desk_fixture_config):
        inst = build_instance(potential="mn:1")
        seq = construct_divergent(2, inst)

        assert [st.regime for st in seq.stages] == [S_N, S_D]
        assert seq.stages[0].fold_index > 1
        assert seq.stages[0].tau == pytest.approx(seq.stages[0].s ** -2)
        for st, terminal in zip(seq.stages, seq.terminal_eigenvalues):
            assert abs(terminal - st.target) < st.tol
        assert seq.alternates()


@pytest.mark.integration
@pytest.mark.slow
@pytest.mark.acceptance
class TestPhaseStudy:
    """Persistence at the first stage strength, extinction at the second."""

    def test_verdicts_follow_stages(self):
        update_config(p_min=4, width_floor=1e-6, amplitude_floor=1e-8)
        rows = fold_phase_study(stages=2)

        assert [row.expected for row in rows] == [PERSISTENCE, EXTINCTION]
        assert [row.verdict for row in rows] == [PERSISTENCE, EXTINCTION]
        assert rows[0].lambda1 < 0 < rows[1].lambda1
        assert rows[0].s < rows[1].s
        assert all(row.matches for row in rows)

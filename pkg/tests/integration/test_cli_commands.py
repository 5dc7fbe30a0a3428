"""Integration tests for CLI commands."""

import pytest
from click.testing import CliRunner

from src.advect_eig.cli import cli
from src.advect_eig.config import AdvectEigConfig, config_hash, parse_config_text
from src.advect_eig.core.potential_io import read_potential
from src.advect_eig.utils.file_handler import config_text_from_header
from src.advect_eig.utils.json_utils import loads


COARSE = "width_floor = 1e-4\namplitude_floor = 1e-8\np_min = 4\nbase_intervals = 200\n"


@pytest.fixture
def coarse_config_file(temp_output_dir):
    """Truncation and mesh settings that keep every command well under a second."""
    path = temp_output_dir / "coarse.cfg"
    path.write_text(COARSE, encoding="utf-8")
    return str(path)


@pytest.mark.integration
class TestCLICommands:
    """Top-level CLI behavior."""

    def test_cli_help(self):
        runner = CliRunner()
        result = runner.invoke(cli, ['--help'])

        assert result.exit_code == 0
        assert "principal eigenvalues" in result.output
        for command in ("refs", "solve", "sweep", "certify", "fold", "rda", "validate", "potential"):
            assert command in result.output

    def test_cli_version(self):
        runner = CliRunner()
        result = runner.invoke(cli, ['--version'])

        assert result.exit_code == 0
        assert "advect-eig v0.1.0" in result.output

    def test_unknown_fixture_rejected(self):
        runner = CliRunner()
        result = runner.invoke(cli, ['solve', '--fixture', 'lab', '--s', '1'])
        assert result.exit_code == 2


@pytest.mark.integration
class TestSolveCommands:
    """refs, solve and sweep on problems with known answers."""

    def test_solve_constant_coefficient(self, temp_output_dir):
        """With c = 7 the principal eigenvalue is 7 at any strength."""
        runner = CliRunner()
        result = runner.invoke(cli, [
            'solve', '--fixture', 'desk', '--s', '0', '--c', 'const:7', '--m', 'zero',
            '-o', str(temp_output_dir),
        ])

        assert result.exit_code == 0, result.output
        assert "lambda(0.0) =" in result.output
        data = loads((temp_output_dir / "advect_eig_solve.json").read_text(encoding="utf-8"))
        assert data["lambda"] == pytest.approx(7.0, rel=1e-9)
        assert len(data["config_hash"]) == 16

    def test_refs(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            'refs', '--c', 'const:3', '--m', 'zero', '-o', str(temp_output_dir), '-b', 'flat',
        ])

        assert result.exit_code == 0, result.output
        assert "lambda_D" in result.output
        data = loads((temp_output_dir / "flat_refs.json").read_text(encoding="utf-8"))
        assert data["references"]["lambda_N"] == pytest.approx(3.0, rel=1e-9)
        assert data["references"]["lambda_D"] > data["references"]["lambda_N"]

    def test_sweep_is_byte_reproducible(self, temp_output_dir):
        runner = CliRunner()
        outputs = []
        for name in ("first", "second"):
            result = runner.invoke(cli, [
                'sweep', '--c', 'const:3', '--m', 'zero', '--s-start', '1', '--s-stop', '4',
                '--s-ratio', '2', '-o', str(temp_output_dir), '-b', name,
            ])
            assert result.exit_code == 0, result.output
            outputs.append((temp_output_dir / f"{name}_sweep.csv").read_text(encoding="utf-8"))

        assert outputs[0] == outputs[1]
        table = [line for line in outputs[0].splitlines() if not line.startswith("#")]
        assert table[0] == "s,lambda,residual,h_estimate,nodes,seconds"
        assert [line.split(",")[0] for line in table[1:]] == ["1.0", "2.0", "4.0"]
        assert all(line.endswith(",") for line in table[1:])

    def test_sweep_header_reproduces_config(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            'sweep', '--c', 'const:3', '--m', 'zero', '--s-start', '1', '--s-stop', '1',
            '-o', str(temp_output_dir),
        ])
        assert result.exit_code == 0, result.output

        text = (temp_output_dir / "advect_eig_sweep.csv").read_text(encoding="utf-8")
        recorded = [line for line in text.splitlines() if line.startswith("# config_hash: ")][0]
        rebuilt = AdvectEigConfig(**parse_config_text(config_text_from_header(text)))
        assert recorded == f"# config_hash: {config_hash(rebuilt)}"
        assert rebuilt.coefficient == "const:3"

    def test_bad_grid(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            'sweep', '--m', 'zero', '--c', 'const:1', '--s-start', '4', '--s-stop', '1',
            '-o', str(temp_output_dir),
        ])
        assert result.exit_code == 2
        assert "Configuration Error" in result.output


@pytest.mark.integration
class TestPotentialCommand:
    def test_potential_and_mesh(self, temp_output_dir, coarse_config_file):
        runner = CliRunner()
        result = runner.invoke(cli, [
            'potential', '--config-file', coarse_config_file, '--m', 'md', '--mesh',
            '-o', str(temp_output_dir), '-b', 'desk',
        ])

        assert result.exit_code == 0, result.output
        m = read_potential((temp_output_dir / "desk_potential.txt").read_text(encoding="utf-8"))
        assert m.is_symmetric()
        mesh_csv = (temp_output_dir / "desk_mesh.csv").read_text(encoding="utf-8")
        assert "# mesh: nodes=" in mesh_csv


@pytest.mark.integration
class TestErrorExitCodes:
    """Package errors map to exit codes 2, 3 and 4."""

    def test_unknown_potential(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, ['solve', '--s', '1', '--m', 'spiral', '-o', str(temp_output_dir)])
        assert result.exit_code == 2
        assert "Unknown potential" in result.output

    def test_bad_config_file(self, temp_output_dir):
        path = temp_output_dir / "bad.cfg"
        path.write_text("mesh = fine\n", encoding="utf-8")
        runner = CliRunner()
        result = runner.invoke(cli, ['solve', '--config-file', str(path), '--s', '1'])
        assert result.exit_code == 2

    def test_rda_needs_a_mode(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, ['rda', '--m', 'zero', '-o', str(temp_output_dir)])
        assert result.exit_code == 2

    def test_validate_fails_on_asymmetric_potential(self, temp_output_dir):
        runner = CliRunner()
        result = runner.invoke(cli, [
            'validate', '--m', 'linear:-1', '--c', 'const:500', '-o', str(temp_output_dir),
        ])

        assert result.exit_code == 4
        assert "Validation Failed" in result.output
        report = loads((temp_output_dir / "advect_eig_validate.json").read_text(encoding="utf-8"))
        assert report["hypotheses"]["passed"] is False

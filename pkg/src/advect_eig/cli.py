"""Click-based CLI for advect-eig."""

import functools
from pathlib import Path
from typing import List, Optional

import click

# Load environment variables from .env file
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    # dotenv not available, environment variables must be set manually
    pass

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .config import (
    apply_fixture,
    config_hash,
    config_to_text,
    get_config,
    load_config_file,
    update_config,
)
from .core.certificates import certificate_rows, staircase_params
from .core.coefficients import Negated, SigmaProfile
from .core.eigen import EigenSolver
from .core.exceptions import (
    AdvectEigError,
    ConfigurationError,
    FileHandlingError,
    MeshError,
    PotentialError,
    SolverError,
    ValidationError,
)
from .core.fold import construct_divergent, divergence_table
from .core.instance import build_instance, params_from_config, parse_potential
from .core.membership import S_D, S_N, check_membership, validate_hypotheses
from .core.mesh import Mesh
from .core.potential_io import write_potential
from .core.rda import (
    UNDECIDED,
    RdaIntegrator,
    classify,
    default_u0,
    fold_phase_study,
    phase_diagram,
    principal_rate,
    rda_mesh,
    reference_sign_check,
    validate_sigma,
)
from .core.visualizer import divergence_plot
from .utils.constants import (
    CERTIFICATE_COLUMNS,
    DIVERGENCE_COLUMNS,
    FIXTURE_NAMES,
    MESH_COLUMNS,
    PHASE_COLUMNS,
    SWEEP_COLUMNS,
    TRAJECTORY_COLUMNS,
    VERSION,
)
from .utils.file_handler import FileHandler, csv_header
from .utils.helpers import ensure_output_dir, format_float, get_base_name

console = Console()

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


def _fail(title: str, error: AdvectEigError, code: int):
    console.print(f"❌ [red]{title}:[/red] {error.message}")
    if error.suggestion:
        console.print(f"💡 [yellow]Suggestion:[/yellow] {error.suggestion}")
    raise click.exceptions.Exit(code)


def handle_errors(f):
    """Map package errors to messages and exit codes."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigurationError as e:
            _fail("Configuration Error", e, EXIT_CONFIG)
        except PotentialError as e:
            _fail("Potential Error", e, EXIT_CONFIG)
        except MeshError as e:
            _fail("Mesh Error", e, EXIT_CONFIG)
        except FileHandlingError as e:
            _fail("File Error", e, EXIT_CONFIG)
        except ValidationError as e:
            _fail("Validation Failed", e, EXIT_VALIDATION)
        except SolverError as e:
            _fail("Solver Failed", e, EXIT_SOLVER)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except Exception as e:
            console.print(f"❌ [red]Unexpected Error:[/red] {e}")
            console.print("🐛 [dim]This may be a bug. Please report it with the config file used.[/dim]")
            raise click.Abort()

    return wrapper


# Eager callbacks run before the other options resolve their config defaults

def _fixture_callback(ctx, param, value):
    if value:
        try:
            apply_fixture(value)
        except ConfigurationError as e:
            raise click.BadParameter(e.message) from e
    return value


def _config_file_callback(ctx, param, value):
    if value:
        try:
            update_config(**load_config_file(value))
        except ConfigurationError as e:
            raise click.BadParameter(e.message) from e
    return value


def setup_options(f):
    """--fixture and --config-file, accepted on the group and on every command."""
    f = click.option(
        '--config-file',
        type=click.Path(exists=True, dir_okay=False),
        is_eager=True,
        expose_value=False,
        callback=_config_file_callback,
        help='Key-value configuration file (explicit flags win)'
    )(f)
    f = click.option(
        '--fixture',
        type=click.Choice(FIXTURE_NAMES),
        is_eager=True,
        expose_value=False,
        callback=_fixture_callback,
        help='Named geometry fixture'
    )(f)
    return f


@click.group(invoke_without_command=True)
@setup_options
@click.option(
    '--version',
    is_flag=True,
    help='Show version information'
)
@click.option(
    '--log-level',
    type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
    help='Set the logging level'
)
@click.pass_context
def cli(ctx, version, log_level):
    """advect-eig - principal eigenvalues under large oscillating advection.

    Reference solves, s-sweeps, test-function certificates, the alternating
    fold construction and the reaction-diffusion persistence study.
    """
    ctx.ensure_object(dict)

    if version:
        console.print(Panel(f"advect-eig v{VERSION}", title="Version"))
        return

    if log_level:
        update_config(log_level=log_level.upper())

    ctx.obj['config'] = get_config()

    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


def common_options(f):
    """Options shared by every computing command."""
    f = click.option(
        '-o', '--output-dir',
        type=click.Path(file_okay=False, dir_okay=True, path_type=Path),
        default=lambda: get_config().output_dir,
        help='Directory to save output files'
    )(f)
    f = click.option(
        '-b', '--basename',
        help='Base name for output files (default: advect_eig)'
    )(f)
    f = click.option(
        '--potential', '--m', 'potential',
        default=lambda: get_config().potential,
        help='Potential: zero, md, mn:<n0>, linear:<slope> or a potential-spec file'
    )(f)
    f = click.option(
        '--coefficient', '--c', 'coefficient',
        default=lambda: get_config().coefficient,
        help='Reaction coefficient: ramp, sigma, sigma+<shift>, const:<value>'
    )(f)
    f = click.option(
        '--d', 'd',
        type=int,
        default=lambda: get_config().d,
        help='Radial dimension'
    )(f)
    f = setup_options(f)
    return f


def grid_options(f):
    """Geometric s-grid options."""
    f = click.option('--s-start', type=float, default=lambda: get_config().s_start, help='First strength')(f)
    f = click.option('--s-stop', type=float, default=lambda: get_config().s_stop, help='Last strength')(f)
    f = click.option('--s-ratio', type=float, default=lambda: get_config().s_ratio, help='Grid ratio')(f)
    return f


def s_grid(s_start: float, s_stop: float, ratio: float) -> List[float]:
    if s_start <= 0 or s_stop < s_start or ratio <= 1:
        raise ConfigurationError(
            f"Bad s-grid: start={s_start}, stop={s_stop}, ratio={ratio}",
            config_field="s_start",
            suggestion="Use 0 < s_start <= s_stop and s_ratio > 1",
        )
    grid, s = [], s_start
    while s <= s_stop * (1.0 + 1e-12):
        grid.append(s)
        s *= ratio
    return grid


def _writer(output_dir: Path, basename: Optional[str]):
    cfg = get_config()
    output_dir = ensure_output_dir(str(output_dir))
    return FileHandler(output_dir, cfg.log_level), get_base_name(basename=basename)


def _header(mesh: Optional[Mesh]) -> str:
    cfg = get_config()
    return csv_header(config_hash(cfg), None if mesh is None else mesh.stats(), config_to_text(cfg))


@cli.command()
@common_options
@handle_errors
def refs(output_dir, basename, potential, coefficient, d):
    """Compute lambda^D and lambda^N on the degenerate interval (a, b)."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d)
    inst = build_instance()
    pair = inst.refs

    table = Table(title="References on (a, b)")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_column("Richardson", justify="right")
    table.add_row("lambda_D", format_float(pair.lambda_D), format_float(pair.result_D.extrapolated))
    table.add_row("lambda_N", format_float(pair.lambda_N), format_float(pair.result_N.extrapolated))
    table.add_row("gap", format_float(pair.gap), "")
    console.print(table)

    handler, base = _writer(output_dir, basename)
    handler.save_json({"config_hash": config_hash(get_config()), **inst.to_dict()}, base, "refs")


@cli.command()
@common_options
@click.option('--s', 's', type=float, required=True, help='Advection strength')
@click.option('--richardson/--no-richardson', default=True, help='One refinement for the error estimate')
@handle_errors
def solve(output_dir, basename, potential, coefficient, d, s, richardson):
    """Principal eigenvalue lambda(s) of the full problem."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d)
    inst = build_instance(with_refs=False)
    result = EigenSolver().principal_eigenvalue(inst.problem(s), inst.mesh, richardson)

    console.print(f"lambda({format_float(s)}) = [bold]{format_float(result.eigenvalue)}[/bold]")
    console.print(f"  residual {result.residual:.3e}, h_estimate {result.h_estimate:.3e}, "
                  f"{inst.mesh.n_nodes} nodes")
    handler, base = _writer(output_dir, basename)
    handler.save_json({"config_hash": config_hash(get_config()), **result.to_dict()}, base, "solve")


@cli.command()
@common_options
@grid_options
@click.option('--workers', type=int, default=lambda: get_config().workers, help='Parallel solves')
@click.option('--richardson/--no-richardson', default=True, help='One refinement per point')
@handle_errors
def sweep(output_dir, basename, potential, coefficient, d, s_start, s_stop, s_ratio, workers, richardson):
    """lambda(s) over a geometric s-grid, written as CSV."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d,
                  s_start=s_start, s_stop=s_stop, s_ratio=s_ratio, workers=workers)
    cfg = get_config()
    inst = build_instance(with_refs=False)
    grid = s_grid(s_start, s_stop, s_ratio)
    console.print(f"🔎 Sweeping {len(grid)} strengths on {inst.mesh.n_nodes} nodes...")
    results = EigenSolver().solve_sweep(inst.problem(0.0), inst.mesh, grid, workers, richardson)

    rows = [(r.s, r.eigenvalue, r.residual, r.h_estimate, r.nodes, r.seconds if cfg.record_timing else None)
            for r in results]
    handler, base = _writer(output_dir, basename)
    path = handler.save_csv(rows, SWEEP_COLUMNS, base, "sweep", header=_header(inst.mesh))
    console.print(f"lambda({format_float(grid[-1])}) = [bold]{format_float(results[-1].eigenvalue)}[/bold]")
    console.print(f"💾 Saved sweep to [bold]{path}[/bold]")


@cli.command()
@common_options
@grid_options
@handle_errors
def certify(output_dir, basename, potential, coefficient, d, s_start, s_stop, s_ratio):
    """Rayleigh quotients of the Dirichlet and staircase test functions along an s-grid."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d,
                  s_start=s_start, s_stop=s_stop, s_ratio=s_ratio)
    inst = build_instance()
    grid = s_grid(s_start, s_stop, s_ratio)
    stair = staircase_params(inst.params, inst.m)
    if stair is None:
        console.print("ℹ️  Potential is not in the folded regime; the staircase column stays empty")
    rows = certificate_rows(inst.problem(0.0), inst.mesh, grid, inst.refs, stair)

    table = Table(title="Test-function upper bounds")
    for column in CERTIFICATE_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows[:: max(1, len(rows) // 10)]:
        table.add_row(*(format_float(v) for v in row))
    console.print(table)

    handler, base = _writer(output_dir, basename)
    path = handler.save_csv(rows, CERTIFICATE_COLUMNS, base, "certificate", header=_header(inst.mesh))
    console.print(f"💾 Saved certificates to [bold]{path}[/bold]")


@cli.command()
@common_options
@click.option('--stages', type=int, default=lambda: get_config().stages, help='Construction stages K')
@click.option('--plot/--no-plot', default=True, help='Write the SVG plot of lambda(s)')
@handle_errors
def fold(output_dir, basename, potential, coefficient, d, stages, plot):
    """Run the alternating fold construction and tabulate lambda(s) of the result."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d, stages=stages)
    inst = build_instance()
    output_dir = ensure_output_dir(str(output_dir))
    seq = construct_divergent(stages, inst, output_dir=output_dir)
    rows = divergence_table(seq)

    table = Table(title="Fold construction")
    for column in ("stage", "regime", "s", "lambda", "target", "tol", "fold point"):
        table.add_column(column, justify="right")
    for st, terminal in zip(seq.stages, seq.terminal_eigenvalues):
        table.add_row(str(st.index), st.regime, format_float(st.s), format_float(terminal),
                      format_float(st.target), f"{st.tol:.3g}", format_float(st.fold_point))
    console.print(table)
    status = "✅ alternation holds" if seq.alternates() else "⚠️  alternation fails"
    console.print(status)

    handler, base = _writer(output_dir, basename)
    handler.save_text(seq.report_text(), base, "fold_report")
    handler.save_json(seq.to_dict(), base, "fold")
    handler.save_text(write_potential(seq.terminal), base, "terminal_potential")
    handler.save_csv(rows, DIVERGENCE_COLUMNS, base, "divergence", header=_header(inst.mesh))
    if plot:
        svg = divergence_plot(rows, inst.refs.lambda_D, inst.refs.lambda_N, [st.tol for st in seq.stages],
                              title=f"lambda(s), {stages} stages")
        handler.save_svg(svg, base, "divergence")


@cli.command()
@common_options
@click.option('--s', 's', type=float, help='Single run at this strength (trajectory CSV)')
@click.option('--phase', is_flag=True, help='Phase diagram over the s-grid')
@click.option('--fold-study', is_flag=True, help='Classify at the strengths of the fold construction')
@grid_options
@click.option('--sigma-shift', type=float, default=0.0, help='Add a constant to the example sigma')
@click.option('--t-max', type=float, default=lambda: get_config().rda_t_max, help='Integration horizon')
@click.option('--perturbation', type=float, default=0.0, help='Relative seeded perturbation of u0')
@handle_errors
def rda(output_dir, basename, potential, coefficient, d, s, phase, fold_study, s_start, s_stop, s_ratio,
       sigma_shift, t_max, perturbation):
    """Reaction-diffusion-advection runs: one trajectory, a phase diagram, or the fold study."""
    update_config(output_dir=output_dir, potential=potential, rda_t_max=t_max)
    cfg = get_config()
    profile = SigmaProfile.example()
    if sigma_shift:
        profile = profile.shifted(sigma_shift)
    handler, base = _writer(output_dir, basename)

    def u0(x):
        return default_u0(x, cfg.seed, perturbation)

    if fold_study:
        rows = fold_phase_study(profile, cfg.stages, u0, t_max)
        table = Table(title="Persistence along the fold construction")
        for column in ("stage", "s", "lambda1", "verdict", "expected"):
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(str(row.stage), format_float(row.s), format_float(row.lambda1), row.verdict, row.expected)
        console.print(table)
        handler.save_csv([(row.s, row.lambda1, row.verdict) for row in rows], PHASE_COLUMNS, base, "fold_phase",
                         header=_header(None))
        if not all(row.matches for row in rows):
            raise ValidationError("Verdicts do not follow the stage regimes", validation_field="verdict")
        return

    m = parse_potential(potential, params_from_config(cfg), cfg)
    mesh = rda_mesh(profile, m=m)
    if phase:
        grid = s_grid(s_start, s_stop, s_ratio)
        rows = phase_diagram(m, profile, grid, mesh, u0, t_max)
        handler.save_csv(rows, PHASE_COLUMNS, base, "phase", header=_header(mesh))
        for row in rows:
            console.print(f"s = {format_float(row[0])}: lambda1 = {format_float(row[1])} -> {row[2]}")
        return

    if s is None:
        raise ConfigurationError("Give --s, --phase or --fold-study", config_field="s")
    lambda1 = principal_rate(m, s, profile, mesh)
    summary = RdaIntegrator().run(m, s, profile, u0, t_max, mesh)
    verdict = classify(summary, lambda1)
    console.print(f"lambda1({format_float(s)}) = {format_float(lambda1)}; "
                  f"sup u = {summary.final_sup:.3e} at t = {summary.t_final:.6g}; verdict [bold]{verdict}[/bold]")
    if verdict == UNDECIDED:
        console.print("💡 [yellow]Suggestion:[/yellow] raise --t-max; near lambda1 = 0 the dynamics are slow")
    handler.save_csv(summary.to_rows(), TRAJECTORY_COLUMNS, base, "trajectory", header=_header(mesh))
    handler.save_json(summary.to_dict(), base, "rda")


@cli.command()
@common_options
@handle_errors
def validate(output_dir, basename, potential, coefficient, d):
    """Check the hypotheses on (m, c), envelope membership and the sigma assumptions."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d)
    cfg = get_config()
    inst = build_instance()
    sigma = coefficient.strip().startswith("sigma")
    report = {}

    hypotheses = validate_hypotheses(inst.m, inst.c, inst.refs.lambda_D, grid=inst.mesh,
                                     require_positive_c=not sigma)
    report["hypotheses"] = hypotheses.to_dict()
    failures = [f"hypothesis {name}" for name in hypotheses.failed()]

    stair = staircase_params(inst.params, inst.m)
    which, params = (S_N, stair) if stair is not None else (S_D, inst.params)
    membership = check_membership(inst.m, params, which, inst.mesh)
    report["membership"] = membership.to_dict()
    if not membership.passed:
        failures.append(f"membership {which}")

    if sigma:
        profile = inst.c.inner if isinstance(inst.c, Negated) else SigmaProfile.example()
        assumptions = validate_sigma(profile, cfg.rda_eps)
        signs = reference_sign_check(profile, eps=cfg.rda_eps)
        report["sigma"] = assumptions.to_dict()
        report["reference_signs"] = signs.to_dict()
        failures += [f"sigma {name}" for name in assumptions.failed()]
        failures += [f"reference {name}" for name in signs.checks.failed()]

    table = Table(title="Validation")
    table.add_column("check")
    table.add_column("result")
    for clause in hypotheses.clauses:
        table.add_row(f"hypothesis {clause.name}", "pass" if clause.passed else "FAIL")
    table.add_row(f"membership {which}", "pass" if membership.passed else "FAIL")
    console.print(table)

    handler, base = _writer(output_dir, basename)
    handler.save_json(report, base, "validate")
    if failures:
        raise ValidationError(f"{len(failures)} check(s) failed: {', '.join(failures)}",
                              validation_field=failures[0])
    console.print("✅ All checks pass")


@cli.command()
@common_options
@click.option('--mesh', 'with_mesh', is_flag=True, help='Also write the mesh CSV')
@handle_errors
def potential(output_dir, basename, potential, coefficient, d, with_mesh):
    """Write the potential-spec file (and optionally its mesh)."""
    update_config(output_dir=output_dir, potential=potential, coefficient=coefficient, d=d)
    inst = build_instance(with_refs=False)
    handler, base = _writer(output_dir, basename)
    path = handler.save_text(write_potential(inst.m), base, "potential")
    console.print(f"💾 Saved potential ({len(inst.m.pieces)} pieces) to [bold]{path}[/bold]")
    if with_mesh:
        handler.save_csv(inst.mesh.to_csv_rows(), MESH_COLUMNS, base, "mesh", header=_header(inst.mesh))


if __name__ == '__main__':
    cli()

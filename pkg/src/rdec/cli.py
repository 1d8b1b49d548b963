"""Command-line interface for rdec."""

import sys
from typing import Optional

import click

from . import __version__
from .debug import log_debug, setup_debug_logging
from .harness import (
    EXIT_CONFIG,
    HANDLED_ERRORS,
    ConfigError,
    ExperimentConfig,
    classify_error,
    run,
)

FAMILIES = click.Choice(["equispaced", "gausslobatto"], case_sensitive=False)
RELAXATION = click.Choice(["none", "idt", "relaxation"], case_sensitive=False)
ENTROPY = click.Choice(["energy", "general"], case_sensitive=False)
ROOT_METHODS = click.Choice(["brent", "bisection", "newton"], case_sensitive=False)


def load_config_file(path: str) -> dict[str, str]:
    """
    Read `key = value` lines; `#` starts a comment, dashes in keys become underscores.

    Raises:
        ConfigError: On lines without '=' or duplicate keys
    """
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if not key or key in values:
                raise ConfigError(f"{path}:{number}: empty or duplicate key '{key}'")
            values[key] = value
    return values


def _diagnostic(kind: str, exc: BaseException) -> str:
    message = " ".join(str(exc).split())
    return f"error kind={kind} message={message}"


def method_option(default_method: str):
    return click.option(
        "--method",
        "-m",
        "methods",
        default=default_method,
        show_default=True,
        help="Comma-separated methods: dec<d>, ssprk22, ssprk33, rk44",
    )


def common_options(f):
    """Options shared by every experiment."""
    options = [
        click.option("--family", default="equispaced", type=FAMILIES, help="DeC node family"),
        click.option("--relaxation", default="none", type=RELAXATION, help="Relaxation mode"),
        click.option("--entropy", default="energy", type=ENTROPY, help="Entropy mode"),
        click.option(
            "--root-method", default="brent", type=ROOT_METHODS, help="General-mode root solver"
        ),
        click.option(
            "--output-dir",
            "-o",
            default=".",
            envvar="RDEC_OUTPUT_DIR",
            type=click.Path(file_okay=False),
            help="Directory for CSV output [env: RDEC_OUTPUT_DIR]",
        ),
        click.option("--quiet", "-q", is_flag=True, help="Suppress progress and summaries"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _execute(ctx, methods: Optional[str], quiet: bool, **kwargs) -> None:
    """Build the experiment config, run it and map failures to an exit status."""
    if methods is not None:
        kwargs["methods"] = tuple(m.strip() for m in methods.split(",") if m.strip())
    try:
        cfg = ExperimentConfig(**kwargs)
        result = run(cfg, progress=not quiet)
    except HANDLED_ERRORS as e:
        status, kind = classify_error(e)
        log_debug(f"Run aborted: {type(e).__name__}: {e}")
        click.echo(_diagnostic(kind, e), err=True)
        sys.exit(status)

    if not quiet:
        for line in result.lines:
            click.echo(line)
        for path in result.files:
            click.echo(f"Wrote {path}")


@click.group()
@click.version_option(version=__version__, prog_name="rdec")
@click.option("--debug", "-d", is_flag=True, help="Enable debug logging (per-step trace)")
@click.option("--debug-file", type=click.Path(), help="Write debug log to file")
@click.option(
    "--config", "config_file", type=click.Path(exists=True, dir_okay=False),
    help="key = value file with option defaults; explicit flags win",
)
@click.pass_context
def main(ctx, debug: bool, debug_file: Optional[str], config_file: Optional[str]):
    """Relaxation Deferred Correction experiments.

    Arbitrary-order DeC and relaxation DeC time integrators, checked on ODEs,
    entropy-conservative finite volumes and residual distribution.

    \b
    Examples:
        rdec tableau -m dec3
        rdec ode-run --problem pendulum -m dec2 --dt 0.9 --t-final 1000
        rdec --debug ode-run --problem oscillator -m dec4 --relaxation relaxation \\
            --dt 0.9 --t-final 1000
        rdec rd-transport -p 2 --relaxation relaxation
    """
    setup_debug_logging(enabled=debug, log_file=debug_file)

    if config_file:
        try:
            values = load_config_file(config_file)
        except (ConfigError, OSError) as e:
            click.echo(_diagnostic("config", e), err=True)
            sys.exit(EXIT_CONFIG)

        params = {name: {p.name for p in cmd.params} for name, cmd in main.commands.items()}
        known = set().union(*params.values())
        unknown = sorted(set(values) - known)
        if unknown:
            click.echo(
                _diagnostic("config", ConfigError(f"unknown keys: {', '.join(unknown)}")), err=True
            )
            sys.exit(EXIT_CONFIG)
        ctx.default_map = {
            name: {k: v for k, v in values.items() if k in names} for name, names in params.items()
        }
        log_debug(f"Loaded {len(values)} settings from {config_file}")


@main.command()
@method_option("dec3")
@common_options
@click.option("--seed", default=0, show_default=True, help="Seed of the DeC/RK equivalence check")
@click.option("--samples", default=50, show_default=True, help="Random fields in the check")
@click.pass_context
def tableau(ctx, methods: str, quiet: bool, **kwargs):
    """Print Butcher and Shu-Osher coefficients of DeC and RK methods.

    \b
    Examples:
        rdec tableau -m dec3
        rdec tableau -m dec4,rk44 --family gausslobatto
    """
    _execute(ctx, methods, quiet, experiment="tableau", **kwargs)


def ode_options(f):
    options = [
        click.option("--problem", default="oscillator", show_default=True,
                     type=click.Choice(["oscillator", "damped", "pendulum"]), help="ODE problem"),
        click.option("--dt", type=float, help="Time step"),
        click.option("--t-final", type=float, help="End time"),
        click.option("--u1", type=float, help="First initial component"),
        click.option("--u2", type=float, help="Second initial component"),
        click.option("--alpha", type=float, help="Damping of the damped oscillator"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _problem_params(u1, u2, alpha) -> dict:
    params = {"u1_0": u1, "u2_0": u2, "alpha": alpha}
    return {k: v for k, v in params.items() if v is not None}


@main.command("ode-run")
@method_option("dec2")
@common_options
@ode_options
@click.pass_context
def ode_run(ctx, methods: str, quiet: bool, u1, u2, alpha, **kwargs):
    """Integrate an ODE problem and write the per-step history.

    \b
    Examples:
        rdec ode-run --problem pendulum -m dec2 --dt 0.9 --t-final 1000
        rdec ode-run --problem damped -m dec3 --relaxation relaxation --dt 0.5 --t-final 100
    """
    _execute(
        ctx, methods, quiet, experiment="ode-run",
        problem_params=_problem_params(u1, u2, alpha), **kwargs,
    )


@main.command("ode-converge")
@method_option("dec4")
@common_options
@ode_options
@click.option("--refinements", default=5, show_default=True, help="Number of halvings of dt")
@click.pass_context
def ode_converge(ctx, methods: str, quiet: bool, u1, u2, alpha, **kwargs):
    """Measure convergence against the exact solution.

    \b
    Examples:
        rdec ode-converge -m dec4 --family gausslobatto --dt 0.5 --t-final 10
    """
    _execute(
        ctx, methods, quiet, experiment="ode-converge",
        problem_params=_problem_params(u1, u2, alpha), **kwargs,
    )


@main.command("fv-burgers")
@method_option("dec2,dec3,dec4")
@common_options
@click.option("--cells", default=100, show_default=True, help="Number of cells on [-1, 1]")
@click.option("--cfl", default=0.3, show_default=True, help="CFL number")
@click.option("--dt", type=float, help="Time step, overrides --cfl")
@click.option("--t-final", default=0.2, show_default=True, help="End time")
@click.pass_context
def fv_burgers(ctx, methods: str, quiet: bool, cells: int, **kwargs):
    """Entropy-conservative finite volumes for Burgers' equation.

    \b
    Examples:
        rdec fv-burgers -m dec2,dec3,dec4 --relaxation relaxation
    """
    _execute(
        ctx, methods, quiet, experiment="fv-burgers", problem="burgers",
        problem_params={"N": cells}, **kwargs,
    )


@main.command("rd-transport")
@common_options
@click.option("--degree", "-p", "p", default=1, show_default=True, help="Element degree")
@click.option("--n-elem", default=16, show_default=True, help="Elements on the coarsest mesh")
@click.option("--order", type=int, help="DeC order, defaults to degree+1")
@click.option("--refinements", default=4, show_default=True, help="Number of mesh halvings")
@click.option("--nu", type=float,
              help="Jump stabilization coefficient [default: 0.01 for p=1, else 0.1]")
@click.option("--consistent-mass", is_flag=True,
              help="Consistent mass matrix instead of cubature elements")
@click.option("--correction", default="conservative", show_default=True,
              type=click.Choice(["none", "conservative", "conservative+jump"]))
@click.option("--rd-relaxation", default="conservative", show_default=True,
              type=click.Choice(["conservative", "dissipative", "appendix"]))
@click.option("--cfl", default=0.1, show_default=True, help="CFL number on the DOF spacing")
@click.option("--dt", type=float, help="Coarsest time step, overrides --cfl")
@click.option("--t-final", default=1.0, show_default=True, help="End time")
@click.pass_context
def rd_transport(ctx, quiet: bool, **kwargs):
    """Residual distribution for linear transport of 0.1 sin(pi x) on [0, 2].

    Cubature elements with jump stabilization by default. The DeC order
    follows --order (default degree+1), and the time step from --cfl is
    capped by the stiffness of the jump term.

    \b
    Examples:
        rdec rd-transport -p 2 --relaxation relaxation
        rdec rd-transport -p 3 --nu 0.05 --correction conservative+jump
        rdec rd-transport -p 1 --consistent-mass --nu 0
    """
    _execute(ctx, None, quiet, experiment="rd-transport", **kwargs)


if __name__ == "__main__":
    main()

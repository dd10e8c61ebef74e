"""CLI entry point for uwradio-loc."""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import click
import yaml

from . import __version__, csvio, selfloc, sim
from . import config as cfgmod
from .channel_model import DEFAULT_MODEL, fit_linear_model
from .errors import DataError, DataFormatError, NumericalError
from .network import (
    REFERENCE_COLS,
    REFERENCE_COMM_RADIUS,
    REFERENCE_ROWS,
    REFERENCE_SENSE_RADIUS,
    REFERENCE_SPACING,
    Scenario,
    build_grid,
    corner_ids,
    reference_scenario,
)
from .srls import DEFAULT_EPS, solve_detailed

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_DATA = 3
EXIT_NUMERICAL = 4

DEFAULT_OUT_DIR = "results"
REFERENCE_LABEL = "reference"


def get_project_root() -> Path:
    """Get the project root directory."""
    # Try to find the project root by looking for the bundled scenarios
    current = Path.cwd()
    for parent in [current] + list(current.parents):
        if (parent / "scenarios" / "reference_grid.csv").exists():
            return parent
    return current


def _fail(message: str, code: int) -> None:
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def handle_errors(func):
    """Map library errors to exit codes: 3 for bad data, 4 for solver failures."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DataError, FileNotFoundError, ValueError, yaml.YAMLError) as e:
            _fail(str(e), EXIT_DATA)
        except NumericalError as e:
            _fail(f"{type(e).__name__}: {e}", EXIT_NUMERICAL)

    return wrapper


def _set(config: dict, section: str, key: str, value: Any) -> None:
    """Apply a CLI override unless the flag was left unset."""
    if value is not None:
        config[section][key] = value


def _load_scenario(path: Optional[str]) -> Scenario:
    if path is None:
        return reference_scenario()
    return csvio.read_scenario(path)


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DataFormatError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _parse_ids(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DataFormatError(f"anchor ids must be comma-separated integers, got {text!r}") from None


def _header_params(command: str, config: dict, **extra: Any) -> dict:
    params = {"command": command, **extra, **cfgmod.flatten(config)}
    return {k: v for k, v in params.items() if v is not None}


def _format(value: Optional[float], digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


@click.group()
@click.option(
    "--config", "-c",
    type=click.Path(exists=True),
    default=None,
    help="Path to config.yaml file",
)
@click.option("--verbose", "-v", is_flag=True, help="Verbose output")
@click.version_option(__version__, prog_name="uwradio-loc")
@click.pass_context
def cli(ctx, config, verbose):
    """uwradio-loc: self-positioning and target tracking for underwater radio sensor networks."""
    ctx.ensure_object(dict)
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    project_root = get_project_root()

    # Find config file
    config_path = Path(config) if config else cfgmod.find_config(project_root)

    try:
        loaded = cfgmod.load_config(config_path) if config_path else None
        ctx.obj["config"] = cfgmod.resolve_config(loaded)
    except (DataError, FileNotFoundError, yaml.YAMLError) as e:
        _fail(str(e), EXIT_DATA)

    if config_path:
        logger.debug(f"Using config {config_path}")
    ctx.obj["config_path"] = config_path
    ctx.obj["project_root"] = project_root


@cli.command("fit-channel")
@click.argument("samples_csv", required=False, type=click.Path())
@click.option("--out", "-o", type=click.Path(), default=None, help="Write the fitted model file here")
@click.option("--defaults", is_flag=True, help="Report the published model instead of fitting samples")
@handle_errors
def fit_channel(samples_csv, out, defaults):
    """Fit the gain-vs-distance line to a distance_m,gain_db CSV."""
    if defaults:
        model = DEFAULT_MODEL
    elif samples_csv is None:
        raise click.UsageError("SAMPLES_CSV is required unless --defaults is given")
    else:
        samples = csvio.read_gain_samples(samples_csv)
        model = fit_linear_model(samples)
        click.echo(f"Fitted {len(samples)} sample(s)")

    for key, value in model.to_dict().items():
        click.echo(f"{key} = {value!r}")

    if out:
        cfgmod.save_channel_model(model, out)
        click.echo(f"Model written to {out}")


@cli.command("selfloc")
@click.option("--scenario", "-s", type=click.Path(), default=None, help="Scenario CSV (default: reference grid)")
@click.option("--out", "-o", type=click.Path(), default=DEFAULT_OUT_DIR, help="Output directory")
@click.option("--seed", type=int, default=None, help="Master seed")
@click.option("--loss", type=float, default=None, help="Broadcast packet-loss probability")
@click.option("--max-iters", type=int, default=None, help="Number of rounds")
@click.option("--inner-tol", type=float, default=None, help="Gradient tolerance of the local solver")
@click.option("--inner-max-iters", type=int, default=None, help="Iteration cap of the local solver")
@click.option("--tau", type=float, default=None, help="Proximal weight of the local surrogate")
@click.option("--step-size", type=float, default=None, help="Relaxation step in (0, 1]")
@click.option("--init-box", type=float, nargs=4, default=None, help="XMIN XMAX YMIN YMAX of the initial draws")
@click.option("--sigma-d", type=float, default=None, help="Range noise standard deviation in meters")
@click.option("--ranging", type=click.Choice(["distance", "power"]), default=None, help="Measurement back end")
@click.pass_context
@handle_errors
def selfloc_cmd(ctx, scenario, out, seed, loss, max_iters, inner_tol, inner_max_iters, tau, step_size, init_box,
                sigma_d, ranging):
    """Run distributed self-positioning and write trace.csv and summary.csv."""
    config = ctx.obj["config"]
    if seed is not None:
        config["seed"] = seed
    _set(config, "selfloc", "packet_loss_prob", loss)
    _set(config, "selfloc", "max_iters", max_iters)
    _set(config, "selfloc", "inner_tol", inner_tol)
    _set(config, "selfloc", "inner_max_iters", inner_max_iters)
    _set(config, "selfloc", "proximal_tau", tau)
    _set(config, "selfloc", "step_size", step_size)
    _set(config, "selfloc", "init_box", list(init_box) if init_box else None)
    _set(config, "measurements", "sigma_d_m", sigma_d)
    _set(config, "measurements", "ranging", ranging)

    scen = _load_scenario(scenario)
    cfg = cfgmod.selfloc_config(config)
    backend = cfgmod.ranging(config)
    click.echo(f"Scenario: {scen.n_nodes} node(s), {len(scen.anchors)} anchor(s), {len(scen.edges)} link(s)")

    measurements = sim.generate_measurements(scen, float(config["measurements"]["sigma_d_m"]), cfg.seed, backend)
    trace = selfloc.run(scen, measurements, cfg)

    params = _header_params("selfloc", config, scenario=scenario or REFERENCE_LABEL)
    out_dir = Path(out)
    csvio.write_trace(trace, out_dir / "trace.csv", params)
    csvio.write_summary(trace, out_dir / "summary.csv", params)

    click.echo(f"MAE: {_format(float(trace.mae[0]))} m -> {_format(trace.final_mae)} m after {trace.n_iterations} iteration(s)")
    click.echo(f"Wrote {out_dir / 'trace.csv'} and {out_dir / 'summary.csv'}")


@cli.command("loss-sweep")
@click.option("--scenario", "-s", type=click.Path(), default=None, help="Scenario CSV (default: reference grid)")
@click.option("--out", "-o", type=click.Path(), default=DEFAULT_OUT_DIR, help="Output directory")
@click.option("--seed", type=int, default=None, help="Master seed")
@click.option("--levels", type=str, default=None, help="Comma-separated loss probabilities")
@click.option("--n-seeds", type=int, default=None, help="Replications per level")
@click.option("--max-iters", type=int, default=None, help="Number of rounds")
@click.option("--sigma-d", type=float, default=None, help="Range noise standard deviation in meters")
@click.option("--ranging", type=click.Choice(["distance", "power"]), default=None, help="Measurement back end")
@click.pass_context
@handle_errors
def loss_sweep(ctx, scenario, out, seed, levels, n_seeds, max_iters, sigma_d, ranging):
    """Average self-positioning MAE curves over seeds for several loss probabilities."""
    config = ctx.obj["config"]
    if seed is not None:
        config["seed"] = seed
    _set(config, "experiment", "loss_levels", _parse_floats(levels, "loss levels") if levels else None)
    _set(config, "experiment", "n_seeds", n_seeds)
    _set(config, "selfloc", "max_iters", max_iters)
    _set(config, "measurements", "sigma_d_m", sigma_d)
    _set(config, "measurements", "ranging", ranging)

    scen = _load_scenario(scenario)
    cfg = cfgmod.selfloc_config(config)
    curves = sim.run_selfloc_experiment(
        scen,
        config["experiment"]["loss_levels"],
        int(config["experiment"]["n_seeds"]),
        cfg,
        sigma_d=float(config["measurements"]["sigma_d_m"]),
        ranging=cfgmod.ranging(config),
    )

    path = Path(out) / "selfloc_curves.csv"
    csvio.write_curves(curves, path, _header_params("loss-sweep", config, scenario=scenario or REFERENCE_LABEL))
    for p in curves.loss_levels:
        click.echo(f"  loss={p:.2f}: final mean MAE {_format(float(curves.mean_curve(p)[-1]))} m")
    click.echo(f"Wrote {path}")


@cli.command()
@click.option("--scenario", "-s", type=click.Path(), default=None, help="Scenario CSV (default: reference grid)")
@click.option("--trajectory", "-t", type=click.Path(), default=None,
              help="Target positions CSV (default: serpentine through the grid)")
@click.option("--out", "-o", type=click.Path(), default=None, help="Output CSV (default: results/tracking.csv)")
@click.option("--seed", type=int, default=None, help="Master seed")
@click.option("--sigma-d", type=float, default=None, help="Range noise standard deviation in meters")
@click.option("--sense-radius", type=float, default=None, help="Sensing radius in meters (default: scenario's)")
@click.option("--step", type=float, default=None, help="Sample spacing of the default trajectory in meters")
@click.option("--n-seeds", type=int, default=None,
              help="Replications; the CSV holds the first, the printed MAE averages all")
@click.option("--ranging", type=click.Choice(["distance", "power"]), default=None, help="Measurement back end")
@click.pass_context
@handle_errors
def track(ctx, scenario, trajectory, out, seed, sigma_d, sense_radius, step, n_seeds, ranging):
    """Track a moving target with SR-LS and write tracking.csv."""
    config = ctx.obj["config"]
    if seed is not None:
        config["seed"] = seed
    _set(config, "measurements", "sigma_d_m", sigma_d)
    _set(config, "measurements", "ranging", ranging)
    _set(config, "tracking", "sense_radius_m", sense_radius)
    _set(config, "tracking", "step_m", step)
    _set(config, "tracking", "n_seeds", n_seeds)

    scen = _load_scenario(scenario)
    if config["tracking"]["sense_radius_m"] is not None:
        scen = scen.with_radii(sense_radius=float(config["tracking"]["sense_radius_m"]))
    if trajectory:
        samples = csvio.read_trajectory(trajectory)
    else:
        samples = sim.reference_trajectory(scen, float(config["tracking"]["step_m"]))
    if not samples:
        raise DataError("trajectory has no samples")

    sigma = float(config["measurements"]["sigma_d_m"])
    backend = cfgmod.ranging(config)
    seed_value = int(config["seed"])
    replications = int(config["tracking"]["n_seeds"])
    if replications == 1:
        runs = [sim.run_tracking(scen, samples, sigma, seed_value, backend)]
    else:
        runs = sim.run_tracking_experiment(scen, samples, sigma, replications, seed_value, backend)

    path = Path(out) if out else Path(DEFAULT_OUT_DIR) / "tracking.csv"
    params = _header_params(
        "track",
        config,
        scenario=scenario or REFERENCE_LABEL,
        trajectory=trajectory or REFERENCE_LABEL,
        sense_radius_used_m=scen.sense_radius,
    )
    csvio.write_tracking(runs[0], path, params)

    mae = sim.mean_tracking_mae(runs)
    label = "MAE" if replications == 1 else f"Mean MAE over {replications} seeds"
    click.echo(f"{label}: {_format(mae, 6)}" + (" m" if mae is not None else ""))
    click.echo(f"Flagged samples: {runs[0].n_flagged} of {len(samples)}")
    click.echo(f"Wrote {path}")


@cli.command("gen-scenario")
@click.option("--rows", type=int, default=REFERENCE_ROWS, show_default=True, help="Grid rows")
@click.option("--cols", type=int, default=REFERENCE_COLS, show_default=True, help="Grid columns")
@click.option("--spacing", type=float, default=REFERENCE_SPACING, show_default=True, help="Grid spacing in meters")
@click.option("--anchors", type=str, default=None, help="Comma-separated anchor ids (default: the four corners)")
@click.option("--comm-radius", type=float, default=REFERENCE_COMM_RADIUS, show_default=True,
              help="Communication radius in meters")
@click.option("--sense-radius", type=float, default=REFERENCE_SENSE_RADIUS, show_default=True,
              help="Sensing radius in meters")
@click.option("--out", "-o", type=click.Path(), required=True, help="Scenario CSV to write (radii go next to it)")
@handle_errors
def gen_scenario(rows, cols, spacing, anchors, comm_radius, sense_radius, out):
    """Write a grid scenario CSV and its radii sidecar."""
    anchor_ids = _parse_ids(anchors) if anchors else sorted(corner_ids(rows, cols))
    scen = build_grid(rows, cols, spacing, anchor_ids, comm_radius, sense_radius)
    params = {
        "command": "gen-scenario",
        "rows": rows,
        "cols": cols,
        "spacing_m": spacing,
        "anchors": ",".join(str(a) for a in sorted(scen.anchors)),
    }
    csvio.write_scenario(scen, out, params)
    click.echo(f"Wrote {scen.n_nodes} node(s), {len(scen.anchors)} anchor(s) to {out}")


@cli.command()
@click.argument("instance_csv", type=click.Path())
@click.option("--eps", type=float, default=DEFAULT_EPS, show_default=True, help="Bisection tolerance on lambda")
@handle_errors
def solve(instance_csv, eps):
    """Solve one SR-LS instance given as an x_m,y_m,range_m CSV."""
    solution = solve_detailed(csvio.read_instance(instance_csv), eps)
    click.echo("x_est_m,y_est_m,lambda_star,phi_residual")
    click.echo(
        f"{solution.position.x!r},{solution.position.y!r},{solution.lambda_star!r},{solution.phi_residual!r}"
    )


if __name__ == "__main__":
    cli()

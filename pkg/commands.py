"""
Command-line commands for Girder Kit.
One command per pipeline stage plus `run` for the whole chain.
"""
import functools
import logging
from pathlib import Path
from typing import Callable, Optional

import click

from config import Config
from errors import GirderKitError
from models import EvaluationReport, PublishedCheckReport, StageRecord
from services.file_service import read_run_config
from services.pipeline_service import PipelineService, PipelineStage

logger = logging.getLogger(__name__)


def stage_options(func: Callable) -> Callable:
    """Options shared by every stage command."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
                     default=None, help="Run configuration (JSON)."),
        click.option("--seed", type=int, default=None, help="Override the simulation noise seed."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
                     default=None, help=f"Output directory (default {Config.OUTPUT_DIR})."),
        click.option("--plots", is_flag=True, default=False, help="Write evaluation figures."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def handle_errors(func: Callable) -> Callable:
    """Map GirderKitError to its exit code, naming file and field."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except GirderKitError as exc:
            logger.debug("Command failed", exc_info=True)
            click.echo(f"Error: {exc.message}", err=True)
            if exc.file:
                click.echo(f"  file: {exc.file}", err=True)
            if exc.field:
                click.echo(f"  field: {exc.field}", err=True)
            raise SystemExit(exc.exit_code)

    return wrapper


def _pipeline(config_path: Optional[Path], seed: Optional[int], out_dir: Optional[Path], plots: bool) -> PipelineService:
    return PipelineService(read_run_config(config_path), out_dir=out_dir, seed=seed, plots=plots)


def _echo_record(record: StageRecord) -> None:
    click.echo(f"{record.stage}: wrote {', '.join(record.outputs.values())}")


def _echo_report(report: EvaluationReport) -> None:
    click.echo(f"{'point':<8}{'axis':<6}{'variant':<13}{'NRMSE':>8}{'R':>8}{'RPPAE':>8}")
    for entry in report.entries:
        variants = [("w/o SGR", entry.without_sgr)]
        if entry.with_sgr is not None:
            variants.append(("w/ SGR", entry.with_sgr))
        for label, m in variants:
            click.echo(f"{entry.point_id:<8}{entry.axis:<6}{label:<13}{m.nrmse_range:>8.3f}{m.correlation:>8.3f}{m.rppae:>8.3f}")
    if report.sync_lag_s is not None:
        click.echo(f"sync lag: {report.sync_lag_s:+.4f} s")


def _echo_check(report: PublishedCheckReport) -> None:
    for row in report.rows:
        flag = "ok" if row.consistent else "MISMATCH"
        click.echo(
            f"{row.dataset:<8}{row.location:<8}{row.axis:<3}{row.variant:<13}"
            f"published {row.published_rppae:.2f}  computed {row.computed_rppae:.4f}  {flag}"
        )
    for variant, value in report.computed_mean_rppae.items():
        click.echo(f"mean RPPAE {variant}: computed {value:.4f}, published {report.published_mean_rppae.get(variant)}")


# =============================================================================
# Command group
# =============================================================================

@click.group()
@click.version_option(Config.TOOL_VERSION, prog_name=Config.TOOL_NAME)
@click.option("--log-level", default=Config.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level: str):
    """Stereo displacement reconstruction with structural geometry refinement."""
    logging.getLogger().setLevel(log_level.upper())


@cli.command()
@stage_options
@handle_errors
def simulate(config_path, seed, out_dir, plots):
    """Render a synthetic preset into track, rig and accelerometer files."""
    _echo_record(_pipeline(config_path, seed, out_dir, plots).simulate())


@cli.command()
@stage_options
@handle_errors
def triangulate(config_path, seed, out_dir, plots):
    """Triangulate both views into per-point displacement."""
    _echo_record(_pipeline(config_path, seed, out_dir, plots).triangulate())


@cli.command()
@stage_options
@handle_errors
def refine(config_path, seed, out_dir, plots):
    """Refine one view's horizontal track and re-triangulate."""
    record = _pipeline(config_path, seed, out_dir, plots).refine()
    _echo_record(record)
    z_rms = record.details.get("z_rms_mm", {})
    if z_rms:
        click.echo(f"Z RMS: {z_rms['without_sgr']:.4f} mm -> {z_rms['with_sgr']:.4f} mm")


@cli.command()
@stage_options
@handle_errors
def reference(config_path, seed, out_dir, plots):
    """Derive displacement references from the accelerometer record."""
    _echo_record(_pipeline(config_path, seed, out_dir, plots).reference())


@cli.command()
@stage_options
@handle_errors
def sync(config_path, seed, out_dir, plots):
    """Align the reference to the prediction on the vertical axis."""
    record = _pipeline(config_path, seed, out_dir, plots).sync()
    _echo_record(record)
    click.echo(f"lag: {record.details['lag_s']:+.4f} s")


@cli.command()
@stage_options
@click.option("--published-tables", is_flag=True, default=False,
              help="Cross-check published RPPAE values against published amplitudes.")
@handle_errors
def evaluate(config_path, seed, out_dir, plots, published_tables):
    """Compute NRMSE, correlation and RPPAE per point and axis."""
    result = _pipeline(config_path, seed, out_dir, plots).evaluate(published_tables=published_tables)
    if published_tables:
        _echo_check(result)
        if not result.all_consistent:
            raise SystemExit(1)
    else:
        _echo_report(result)


@cli.command()
@stage_options
@handle_errors
def run(config_path, seed, out_dir, plots):
    """Run every stage in order."""
    pipeline = _pipeline(config_path, seed, out_dir, plots)
    click.echo(f"stages: {' -> '.join(PipelineStage.ORDER)}")
    _echo_report(pipeline.run())

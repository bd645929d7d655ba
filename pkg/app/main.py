"""Main CLI interface for the tempering lab."""

from pathlib import Path
from typing import Callable, List, Optional

import typer
from rich.console import Console
from rich.panel import Panel

from app.config import load_config, settings
from app.errors import ConfigError, StudyError, VerificationFailed
from app.pipeline import StudyPipeline
from app.publisher.artifacts import ArtifactWriter
from app.publisher.console_publisher import console_publisher
from app.utils.logging import get_logger, setup_logging

# Initialize Typer app
app = typer.Typer(
    name="stmh",
    help="Simulated tempering for Gaussian mixtures: sampling, partition estimation, "
    "spectral verification and the scaling study",
    rich_markup_mode="rich",
)

console = Console()
logger = get_logger(__name__)

ConfigOption = typer.Option(None, "--config", "-c", help="YAML config (default: data/default.yaml)")
SeedOption = typer.Option(None, "--seed", help="Override the config seed")
ThreadsOption = typer.Option(None, "--threads", help="Worker threads (default: all cores)")
OutDirOption = typer.Option(None, "--out-dir", help="Output directory (default: runs/<command>)")
SetOption = typer.Option([], "--set", help="Override a field, e.g. --set schedule.levels=4")


def _run(
    command: str,
    config_path: Optional[Path],
    seed: Optional[int],
    threads: Optional[int],
    out_dir: Optional[Path],
    overrides: List[str],
    body: Callable[[StudyPipeline, ArtifactWriter], None],
) -> None:
    """Load the config, run one command and map StudyError onto its exit code.

    ValueError from the domain layer means the parameters passed validation but
    describe an unsupported problem, so it exits like a configuration error.
    """
    path = config_path if config_path is not None else settings.default_config
    try:
        sets = list(overrides) + ([f"seed={seed}"] if seed is not None else [])
        config = load_config(path, sets)
        n_threads = settings.resolve_threads(threads, config)
        writer = ArtifactWriter(settings.resolve_out_dir(out_dir, command), command)
        pipeline = StudyPipeline(config, threads=n_threads, source=str(path))

        logger.info(f"{command}: seed={config.seed}, threads={n_threads}, out={writer.out_dir}")
        try:
            body(pipeline, writer)
        finally:
            if writer.written:
                writer.write_manifest(config, n_threads)
    except StudyError as e:
        _fail(command, e)
    except ValueError as e:
        _fail(command, ConfigError(f"unsupported parameters: {e}", path=str(path)))


def _fail(command: str, error: StudyError) -> None:
    logger.error(f"{command} failed: {error}")
    console_publisher.publish_error(str(error), error.exit_code)
    raise typer.Exit(error.exit_code)


@app.command()
def sample(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
    out_dir: Optional[Path] = OutDirOption,
    overrides: List[str] = SetOption,
    steps: Optional[int] = typer.Option(None, "--steps", help="Override sampler.steps"),
):
    """Run one simulated tempering chain and write samples.csv."""

    def body(pipeline: StudyPipeline, writer: ArtifactWriter) -> None:
        frame = pipeline.sample(steps)
        writer.write_csv("samples", frame)
        console_publisher.publish_samples(frame)

    _run("sample", config, seed, threads, out_dir, overrides, body)


@app.command("estimate-z")
def estimate_z(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
    out_dir: Optional[Path] = OutDirOption,
    overrides: List[str] = SetOption,
):
    """Estimate partition-function ratios along the ladder and write ladder.csv."""

    def body(pipeline: StudyPipeline, writer: ArtifactWriter) -> None:
        frame = pipeline.estimate_z()
        writer.write_csv("ladder", frame)
        console_publisher.publish_ladder(frame)

    _run("estimate-z", config, seed, threads, out_dir, overrides, body)


@app.command()
def verify(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
    out_dir: Optional[Path] = OutDirOption,
    overrides: List[str] = SetOption,
):
    """Check the spectral-gap decomposition on randomized discrete chains (verify.csv, radius_sweep.csv)."""

    def body(pipeline: StudyPipeline, writer: ArtifactWriter) -> None:
        frame = pipeline.verify()
        writer.write_csv("verify", frame)
        sweep = pipeline.radius_sweep()
        if not sweep.empty:
            writer.write_csv("radius_sweep", sweep)
        console_publisher.publish_verification(frame)
        failed = int((~frame["passed"]).sum())
        if failed:
            raise VerificationFailed(f"{failed} of {len(frame)} verification rows failed")

    _run("verify", config, seed, threads, out_dir, overrides, body)


@app.command()
def experiment(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
    out_dir: Optional[Path] = OutDirOption,
    overrides: List[str] = SetOption,
):
    """Steps-to-threshold and accuracy study, tempering against plain Metropolis."""

    def body(pipeline: StudyPipeline, writer: ArtifactWriter) -> None:
        frames = pipeline.experiment()
        for name, frame in frames.items():
            writer.write_csv(name, frame)
        console_publisher.publish_experiment(frames)

    _run("experiment", config, seed, threads, out_dir, overrides, body)


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    log_file: Optional[str] = typer.Option(None, "--log-file", help="Also log to this file"),
):
    """Tempering lab - simulated tempering for multimodal Gaussian mixtures."""
    # Setup logging
    log_level = "DEBUG" if verbose else settings.log_level
    setup_logging(log_level, log_file)

    if verbose:
        console.print(Panel.fit(
            "[bold blue]Tempering lab[/bold blue]\n"
            "Simulated tempering sampler and spectral verification",
            border_style="blue",
        ))


if __name__ == "__main__":
    app()

"""Command-line front end: fit, simulate, detect, eval."""

import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
import typer
from typing_extensions import Annotated

from src.bayes import (
    DEFAULT_CUTOFF,
    ClassifierModels,
    fit_gaussian,
    fit_half_gaussian,
    load_models,
    preprocess_diverged,
    save_models,
)
from src.config import RunConfig, configure_logging, load_run_config
from src.criteria import DivergenceWeights
from src.crawler import calculate_file_hash, scan_traces
from src.database import EvalRun, get_engine, record_runs
from src.detector import DetectorConfig, EntrapmentDetector, PriorMode
from src.errors import EntrapmentError, FittingError, UsageError, ValidationError
from src.evaluator import DEFAULT_WINDOW, evaluate_paths, results_frame
from src.kinematics import RoverGeometry
from src.simulator import Scenario, ScenarioKind, parse_script, simulate as run_simulation
from src.telemetry import Trace, extract_training_sets, load_trace, save_trace, write_estimate

logger = logging.getLogger(__name__)

app = typer.Typer(
    add_completion=False,
    no_args_is_help=True,
    help="Rover entrapment detection: fit models, simulate scenarios, detect, evaluate.",
)

ConfigOption = Annotated[Optional[Path], typer.Option("--config", help="YAML run configuration.")]
ModelOption = Annotated[Optional[Path], typer.Option("--model", help="Model file (JSON).")]
OutOption = Annotated[Optional[Path], typer.Option("--out", help="Output path.")]
PriorModeOption = Annotated[Optional[PriorMode], typer.Option("--prior-mode", help="recursive or fixed priors.")]


def fit_classifier(trace: Trace, geom: RoverGeometry, weights: DivergenceWeights,
                   cutoff: float = DEFAULT_CUTOFF) -> ClassifierModels:
    sets = extract_training_sets(trace, geom, weights)
    diverged = preprocess_diverged(sets.diverged, cutoff)
    logger.info("Training set sizes: %s (diverged after cutoff: %d)", sets.counts(), len(diverged))
    if len(diverged) == 0:
        raise FittingError(f"no samples with Q > {cutoff}", "divergence.diverged")
    return ClassifierModels(
        divergence_diverged=fit_gaussian(diverged, "divergence.diverged"),
        divergence_consistent=fit_half_gaussian(sets.consistent, "divergence.consistent"),
        movement_moving=fit_gaussian(sets.moving, "movement.moving"),
        movement_stopped=fit_half_gaussian(sets.stopped, "movement.stopped"),
    )


def _detector_config(run: RunConfig, command: str, prior_mode: Optional[PriorMode]) -> DetectorConfig:
    mode = run.option(command, "prior_mode", prior_mode, run.prior_mode)
    try:
        return dataclasses.replace(run.detector, prior_mode=PriorMode(mode))
    except ValueError:
        raise UsageError(f"prior mode must be recursive or fixed, got {mode!r}")


def _models(run: RunConfig, command: str, model: Optional[Path]) -> ClassifierModels:
    path = run.option(command, "model", model, run.model_path)
    logger.info("Using models from %s", path)
    return load_models(path)


@app.command()
def fit(
    trace: Annotated[Path, typer.Argument(help="Labelled trace to learn from.")],
    cutoff: Annotated[Optional[float], typer.Option(help="Drop diverged samples with Q <= cutoff.")] = None,
    out: OutOption = None,
    config: ConfigOption = None,
):
    """Fit the four likelihood models from a labelled trace and write a model file."""
    run = load_run_config(config)
    cutoff = run.option("fit", "cutoff", cutoff, DEFAULT_CUTOFF)
    out = run.option("fit", "out", out)
    if out is None:
        raise UsageError("fit needs --out")

    models = fit_classifier(load_trace(trace), run.geometry, run.weights, float(cutoff))
    save_models(models, out)
    for name, model in models.entries().items():
        typer.echo(f"{name}: {model.kind.value} mu={model.mu:.6f} var={model.var:.6f}")


def _script_option(value) -> Optional[tuple]:
    if value is None:
        return None
    try:
        if isinstance(value, str):
            return parse_script(value)
        return tuple((int(start), ScenarioKind(kind)) for start, kind in value)
    except (TypeError, ValueError, ValidationError):
        raise UsageError(f"bad script {value!r}")


@app.command()
def simulate(
    kind: Annotated[Optional[ScenarioKind], typer.Option(help="Scenario kind.")] = None,
    duration_ms: Annotated[Optional[int], typer.Option("--duration-ms", help="Trace length in ms.")] = None,
    seed: Annotated[Optional[int], typer.Option(help="Random seed.")] = None,
    command_speed: Annotated[Optional[float], typer.Option("--command-speed", help="Commanded speed, m/s.")] = None,
    steer_angle: Annotated[Optional[float], typer.Option("--steer-angle", help="Single-track steer angle, rad.")] = None,
    script: Annotated[Optional[str], typer.Option(help="Segments START_MS:KIND,... (implies scripted).")] = None,
    out: OutOption = None,
    config: ConfigOption = None,
):
    """Generate a synthetic telemetry trace."""
    run = load_run_config(config)
    segments = _script_option(run.option("simulate", "script", script))
    kind = run.option("simulate", "kind", kind, ScenarioKind.SCRIPTED if segments else None)
    out = run.option("simulate", "out", out)
    if kind is None:
        raise UsageError("simulate needs --kind or --script")
    if out is None:
        raise UsageError("simulate needs --out")

    try:
        scenario = Scenario(
            kind=kind,
            duration_ms=int(run.option("simulate", "duration_ms", duration_ms, 60000)),
            seed=int(run.option("simulate", "seed", seed, 0)),
            command_speed=float(run.option("simulate", "command_speed", command_speed, 0.25)),
            script=segments,
            steer_angle=float(run.option("simulate", "steer_angle", steer_angle, 0.0)),
            noise_overrides=tuple(sorted(run.noise_overrides.items())),
        )
    except ValidationError as e:
        raise UsageError(str(e))

    trace = run_simulation(scenario, run.geometry)
    save_trace(trace, out)
    logger.info("Wrote %d samples to %s", len(trace), out)


@app.command()
def detect(
    trace: Annotated[Path, typer.Argument(help="Trace to run the detector over.")],
    model: ModelOption = None,
    prior_mode: PriorModeOption = None,
    out: OutOption = None,
    config: ConfigOption = None,
):
    """Run the detector and emit one probability record per sample."""
    run = load_run_config(config)
    detector_config = _detector_config(run, "detect", prior_mode)
    models = _models(run, "detect", model)
    data = load_trace(trace)
    if data.metadata.geometry is not None and data.metadata.geometry != detector_config.geometry:
        logger.warning("Trace geometry %s differs from configured geometry %s",
                       data.metadata.geometry, detector_config.geometry)

    out = run.option("detect", "out", out)
    stream = open(out, "w", encoding="utf-8", newline="\n") if out else sys.stdout
    try:
        for estimate in EntrapmentDetector(detector_config, models).run(data.samples):
            stream.write(write_estimate(estimate) + "\n")
    finally:
        if out:
            stream.close()


@app.command(name="eval")
def evaluate(
    traces: Annotated[List[Path], typer.Argument(help="Trace files or directories.")],
    model: ModelOption = None,
    prior_mode: PriorModeOption = None,
    transition_window: Annotated[Optional[int], typer.Option("--transition-window",
                                                             help="Steps excluded after each label change.")] = None,
    jobs: Annotated[Optional[int], typer.Option(help="Traces evaluated in parallel.")] = None,
    db: Annotated[Optional[Path], typer.Option(help="Append results to this SQLite ledger.")] = None,
    out: OutOption = None,
    config: ConfigOption = None,
):
    """Score the detector against labels and ground truth."""
    run = load_run_config(config)
    detector_config = _detector_config(run, "eval", prior_mode)
    models = _models(run, "eval", model)
    window = int(run.option("eval", "transition_window", transition_window, DEFAULT_WINDOW))
    if window < 0:
        raise UsageError("--transition-window must be >= 0")

    paths = scan_traces(traces)
    if not paths:
        raise ValidationError("no traces to evaluate")
    results = evaluate_paths(paths, models, detector_config, window,
                             jobs=int(run.option("eval", "jobs", jobs, 1)))
    report = results_frame(results)

    out = run.option("eval", "out", out)
    if out:
        report.to_csv(out, index=False)
    else:
        typer.echo(report.to_string(index=False))

    db = run.option("eval", "db", db)
    if db:
        model_path = str(run.option("eval", "model", model, run.model_path))
        rows = [
            EvalRun(
                trace_path=str(path),
                trace_hash=calculate_file_hash(path),
                model_path=model_path,
                prior_mode=detector_config.prior_mode.value,
                steps=r.steps,
                accuracy=r.accuracy,
                latency_steps=r.latency_steps,
                false_alarms=r.false_alarms,
                agreement=r.agreement,
            )
            for path, r in zip(paths, results)
        ]
        logger.info("Recorded %d runs in %s", record_runs(get_engine(db), rows), db)


def main(argv: Optional[List[str]] = None) -> int:
    """Exit codes: 0 success, 1 usage, 2 data/validation error, 3 fitting degeneracy."""
    configure_logging()
    try:
        result = app(args=argv, standalone_mode=False, prog_name="entrap")
    except click.exceptions.UsageError as e:
        e.show()
        return UsageError.exit_code
    except click.exceptions.Abort:
        return UsageError.exit_code
    except EntrapmentError as e:
        logger.error("%s", e)
        typer.echo(f"error: {e}", err=True)
        return e.exit_code
    return result if isinstance(result, int) else 0

"""
advamp.cli
~~~~~~~~~~

Command-line interface for advamp.

Commands:
- qvalues: Per-satisfaction Q-values of the Choc-Kale model (exact and learned)
- sweep: Train and evaluate Q-learning policies over the experiment grid
- verify: Run the numerical verification suites; exits 1 on any failure
- bounds: Print every closed-form bound for the given inputs as JSON
- train: Train a single policy and save it as JSON
- eval: Evaluate a saved policy by Monte Carlo rollouts
- metadata: Show the run metadata stored in an advamp JSON output

Configuration comes from an optional YAML/JSON file; flags override its
values. Config errors exit with code 2.
"""

import json
import logging
import os
from pathlib import Path
from typing import List, Optional

import typer
import yaml
from pydantic import ValidationError

from advamp import settings
from advamp.analysis.bounds import BoundInputs
from advamp.harness.config import ExperimentConfig, build_config, parse_wrapper
from advamp.harness.experiments import (
    cmd_bounds,
    cmd_qvalues,
    cmd_sweep,
    cmd_verify,
    derive_seed,
    load_policy,
    save_policy,
    summary_path,
    train_policy,
)
from advamp.learning.qlearn import evaluate
from advamp.learning.temporal import wrapper_label
from advamp.utils.logging_config import configure_logging
from advamp.utils.metadata import (
    extract_metadata_from_json,
    generate_metadata,
    inject_metadata_into_json,
)
from advamp.utils.store import save_json

# Configure logging at module level
configure_logging()

logger = logging.getLogger(__name__)

app = typer.Typer()

CONFIG_ERROR = 2
VERIFY_FAILURE = 1


def load_config(config_path: Optional[str] = None) -> dict:
    """
    Load configuration from a YAML (or JSON) file.

    Args:
        config_path: Path to the configuration file. If None, defaults apply.

    Returns:
        dict: Raw configuration data

    Raises:
        typer.Exit: If the config file doesn't exist or is not a mapping
    """
    if config_path is None:
        return {}
    if not os.path.exists(config_path):
        typer.echo(
            f"Config file not found: {config_path}. Please create it or provide a valid config."
        )
        raise typer.Exit(code=CONFIG_ERROR)
    with open(config_path, "r", encoding="utf-8") as f:
        try:
            config_data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            typer.echo(f"Invalid config file {config_path}: {e}")
            raise typer.Exit(code=CONFIG_ERROR)
    if config_data is None:
        return {}
    if not isinstance(config_data, dict):
        typer.echo(f"Config file {config_path} must contain a mapping")
        raise typer.Exit(code=CONFIG_ERROR)
    logger.info(f"Loaded config from {config_path}")
    return config_data


def _validated(
    config_path: Optional[str], qvalues: Optional[dict] = None, **overrides
) -> ExperimentConfig:
    data = load_config(config_path)
    if qvalues:
        data = {**data, "qvalues": {**data.get("qvalues", {}), **qvalues}}
    try:
        return build_config(data, **overrides)
    except ValidationError as e:
        typer.echo(f"Invalid configuration ({e.error_count()} errors):")
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"])
            typer.echo(f"   {location}: {error['msg']}")
        raise typer.Exit(code=CONFIG_ERROR)


@app.command()
def qvalues(
    config: Optional[str] = typer.Argument(None, help="Path to the configuration file."),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Discount."),
    k: Optional[int] = typer.Option(None, "--k", help="Aggregation horizon of panels c/d."),
    sigma_n: Optional[float] = typer.Option(None, "--sigma-n", help="Noise of panels b/d."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed."),
    out: str = typer.Option(
        f"{settings.DEFAULT_OUTPUT_DIR}/qvalues.csv", "--out", help="Output CSV."
    ),
):
    """
    Write per-satisfaction Q-values of the Choc-Kale model.

    Panels a/c are exact (event level and k-aggregated); panels b/d are the
    Q-tables of noisy Q-learning runs and their mean.
    """
    updates = {}
    if k is not None:
        updates["k"] = k
    if sigma_n is not None:
        updates["sigma_n"] = sigma_n
    experiment = _validated(config, qvalues=updates, gamma=gamma, seed=seed)
    rows = cmd_qvalues(experiment, Path(out))
    typer.echo(f"Q-values ({len(rows)} rows) written to {out}")


@app.command()
def sweep(
    config: Optional[str] = typer.Argument(None, help="Path to the configuration file."),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Single discount."),
    k: Optional[int] = typer.Option(None, "--k", help="Aggregation horizon."),
    T: Optional[float] = typer.Option(None, "--T", help="Switching cost."),
    sigma_n: Optional[float] = typer.Option(None, "--sigma-n", help="Single noise level."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed."),
    out: Optional[str] = typer.Option(None, "--out", help="Output CSV."),
    workers: Optional[int] = typer.Option(None, "--workers", help="Worker processes."),
):
    """
    Train and evaluate Q-learning policies over the experiment grid.

    Writes one row per trained policy and a per-cell summary next to it.
    """
    experiment = _validated(
        config, gamma=gamma, k=k, T=T, sigma_n=sigma_n, seed=seed, out=out
    )
    rows = cmd_sweep(experiment, workers=workers)
    typer.echo(f"Sweep results ({len(rows)} rows) written to {experiment.out}")
    typer.echo(f"Cell summary written to {summary_path(Path(experiment.out))}")


@app.command()
def verify(
    suite: Optional[List[str]] = typer.Option(
        None, "--suite", help="Suite to run (repeatable); all suites by default."
    ),
    seed: int = typer.Option(0, "--seed", help="Seed of the random-MDP suites."),
    out: Optional[str] = typer.Option(None, "--out", help="Write the report as JSON."),
):
    """Run the numerical verification suites; exits 1 if any check fails."""
    try:
        report = cmd_verify(suite, seed)
    except ValueError as e:
        typer.echo(str(e))
        raise typer.Exit(code=CONFIG_ERROR)

    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        note = " (vacuous)" if check.vacuous else ""
        typer.echo(
            f"{status} {check.suite}/{check.name}: slack {check.slack:.3e}{note}"
        )
        if check.detail:
            typer.echo(f"     {check.detail}")

    if out is not None:
        metadata = generate_metadata("verify", seed=seed)
        save_json(inject_metadata_into_json(report.model_dump(), metadata), Path(out))
        typer.echo(f"Verification report written to {out}")

    if not report.passed:
        typer.echo(f"{len(report.failures)} of {len(report.checks)} checks failed")
        raise typer.Exit(code=VERIFY_FAILURE)
    typer.echo(f"All {len(report.checks)} checks passed")


@app.command()
def bounds(
    gamma: float = typer.Option(..., "--gamma", help="Discount in (0, 1)."),
    L: float = typer.Option(..., "--L", help="Smoothness constant."),
    k: int = typer.Option(1, "--k", help="Aggregation horizon."),
    T: float = typer.Option(0.0, "--T", help="Switching cost."),
    r_max: float = typer.Option(1.0, "--r-max", help="Largest reward magnitude."),
    epsilon: float = typer.Option(0.0, "--epsilon", help="Sufficiency error."),
    A: float = typer.Option(0.0, "--A", help="Event-level advantage."),
    sigma: float = typer.Option(
        0.0, "--sigma", help="Largest advantage a policy may get wrong."
    ),
):
    """Print every closed-form quantity for the given inputs as JSON."""
    try:
        inputs = BoundInputs(
            gamma=gamma,
            L=L,
            k=k,
            T=T,
            r_max=r_max,
            epsilon=epsilon,
            A=A,
            sigma=sigma,
        )
    except ValidationError as e:
        typer.echo(f"Invalid inputs: {e}")
        raise typer.Exit(code=CONFIG_ERROR)
    typer.echo(json.dumps(cmd_bounds(inputs), indent=2))


@app.command()
def train(
    config: Optional[str] = typer.Argument(None, help="Path to the configuration file."),
    environment: str = typer.Option("ck", "--environment", help="ck or slate."),
    wrapper: str = typer.Option("none", "--wrapper", help="none, aggregate:K or switch:T."),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Discount."),
    sigma_n: Optional[float] = typer.Option(None, "--sigma-n", help="Observation noise."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed."),
    run: int = typer.Option(0, "--run", help="Run index within the cell."),
    out: str = typer.Option(
        f"{settings.DEFAULT_OUTPUT_DIR}/policy.json", "--out", help="Output JSON."
    ),
):
    """Train one Q-learning policy and save it as JSON."""
    experiment = _validated(config, gamma=gamma, sigma_n=sigma_n, seed=seed)
    if environment not in ("ck", "slate"):
        typer.echo(f"Unknown environment {environment!r}; use ck or slate")
        raise typer.Exit(code=CONFIG_ERROR)
    try:
        parsed = parse_wrapper(wrapper)
    except ValueError as e:
        typer.echo(str(e))
        raise typer.Exit(code=CONFIG_ERROR)

    cell_gamma = experiment.gammas[0]
    cell_sigma_n = experiment.sigma_n_grid[0]
    label = wrapper_label(parsed)
    cell = (environment, label, cell_gamma, cell_sigma_n, run)
    run_seed = derive_seed(experiment.seed, *cell)
    policy = train_policy(
        experiment, environment, parsed, cell_gamma, cell_sigma_n, run_seed
    )
    save_policy(policy, experiment, Path(out), config_file=config)
    typer.echo(f"Policy ({wrapper_label(parsed)}, seed {run_seed}) written to {out}")


@app.command("eval")
def eval_policy(
    policy_path: str = typer.Argument(..., help="Policy JSON written by train."),
    n_rollouts: int = typer.Option(settings.DEFAULT_N_ROLLOUTS, "--n-rollouts"),
    horizon: int = typer.Option(settings.DEFAULT_HORIZON, "--horizon"),
    gamma: Optional[float] = typer.Option(
        None, "--gamma", help="Evaluation discount; the training discount by default."
    ),
    seed: int = typer.Option(0, "--seed", help="Rollout seed."),
):
    """Evaluate a saved policy and print its mean raw return as JSON."""
    if not os.path.exists(policy_path):
        typer.echo(f"Policy file not found: {policy_path}")
        raise typer.Exit(code=CONFIG_ERROR)
    try:
        policy, env, _ = load_policy(Path(policy_path))
        result = evaluate(
            env,
            policy,
            n_rollouts=n_rollouts,
            horizon=horizon,
            gamma=policy.config.gamma if gamma is None else gamma,
            seed=seed,
        )
    except (KeyError, ValueError) as e:
        typer.echo(f"Cannot evaluate {policy_path}: {e}")
        raise typer.Exit(code=CONFIG_ERROR)
    typer.echo(
        json.dumps(
            {
                "mean_return": result.mean_return,
                "std_error": result.std_error,
                "ci95": settings.CI95_Z * result.std_error,
                "penalty_paid": result.penalty_paid,
                "n_rollouts": n_rollouts,
                "horizon": horizon,
            },
            indent=2,
        )
    )


@app.command()
def metadata(
    file_path: str = typer.Argument(..., help="Path to the JSON file to inspect."),
):
    """Show the run metadata stored in an advamp JSON output."""
    if not os.path.exists(file_path):
        typer.echo(f"File not found: {file_path}")
        raise typer.Exit(code=1)
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError:
        typer.echo(f"Invalid JSON in file: {file_path}")
        raise typer.Exit(code=1)

    found = extract_metadata_from_json(data) if isinstance(data, dict) else {}
    if not found:
        typer.echo("No metadata found in file.")
        return
    typer.echo("File Metadata:")
    for key, value in found.get("generation_info", {}).items():
        typer.echo(f"   {key}: {value}")


if __name__ == "__main__":
    app()

"""
advamp.harness.experiments
~~~~~~~~~~~~~~~~~~~~~~~~~~

Experiment commands behind the CLI.

- ``cmd_qvalues``: per-satisfaction Q-values, exact (event level and
  k-aggregated) and learned from noisy observations
- ``cmd_sweep``: train and evaluate policies over the full grid of
  environments, wrappers, discounts and observation noise levels
- ``cmd_verify``: run the numerical verification suites
- ``cmd_bounds``: evaluate every closed-form quantity for given inputs

Sweeps run cells in a process pool. Every run draws its seed from a stable
hash of the master seed and the cell identifiers, and rows are sorted before
they are written, so reruns produce identical CSV files regardless of worker
scheduling.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from advamp import settings
from advamp.analysis.bounds import BoundInputs, all_bounds
from advamp.analysis.verify import VerifyReport, run_suites
from advamp.envs.choc_kale import (
    Action,
    ChocKaleEnv,
    CKParams,
    ObservationModel,
    build_discrete_mdp,
    exposure_grid,
    satisfaction,
)
from advamp.envs.slate import SlateEnv, SlateParams
from advamp.harness.config import ExperimentConfig
from advamp.learning.qlearn import EnvironmentName, TrainedPolicy, evaluate, train
from advamp.learning.temporal import AggregateConfig, Wrapper, wrapper_label
from advamp.mdp.reparam import aggregate_mdp
from advamp.mdp.solvers import solve_q_star
from advamp.utils.metadata import (
    extract_metadata_from_json,
    generate_metadata,
    inject_metadata_into_json,
)
from advamp.utils.store import load_json, save_json, write_csv

logger = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "environment",
    "wrapper",
    "gamma",
    "sigma_n",
    "run",
    "seed",
    "mean_return",
    "std_error",
    "ci95",
    "penalty_paid",
)
SUMMARY_COLUMNS = (
    "environment",
    "wrapper",
    "gamma",
    "sigma_n",
    "n_runs",
    "mean_return",
    "std_error",
    "ci95",
    "penalty_paid",
)
QVALUE_COLUMNS = ("panel", "bucket_satisfaction", "action", "source", "q_value")


class MetricRow(BaseModel):
    """Evaluation of one trained policy."""

    environment: EnvironmentName
    wrapper: str
    gamma: float
    sigma_n: float
    run: int
    seed: int
    mean_return: float
    std_error: float = Field(..., ge=0.0)
    penalty_paid: float = Field(0.0, ge=0.0)

    @property
    def ci95(self) -> float:
        return settings.CI95_Z * self.std_error

    def sort_key(self) -> Tuple:
        return (self.environment, self.wrapper, self.gamma, self.sigma_n, self.run)

    def as_row(self) -> Dict[str, Any]:
        row = self.model_dump()
        row["ci95"] = self.ci95
        return row


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and cell identifiers."""
    key = json.dumps([master_seed, *parts], separators=(",", ":"))
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def make_env(
    environment: EnvironmentName,
    sigma_n: float,
    ck: CKParams,
    slate: SlateParams,
    n_buckets: int = settings.DEFAULT_N_BUCKETS,
):
    """Batched simulator for ``environment`` with observation noise ``sigma_n``."""
    model = ObservationModel(sigma_n=sigma_n, n_buckets=n_buckets)
    if environment == "ck":
        return ChocKaleEnv(ck, model)
    if environment == "slate":
        return SlateEnv(slate, model)
    raise ValueError(f"unknown environment {environment!r}")


def train_policy(
    config: ExperimentConfig,
    environment: EnvironmentName,
    wrapper: Wrapper,
    gamma: float,
    sigma_n: float,
    seed: int,
) -> TrainedPolicy:
    """Train one policy for a single sweep cell."""
    env = make_env(environment, sigma_n, config.ck, config.slate, config.n_buckets)
    qlearn = config.qlearn.model_copy(update={"gamma": gamma, "seed": seed})
    return train(env, wrapper, qlearn, environment=environment, sigma_n=sigma_n)


def run_cell(
    config: ExperimentConfig,
    environment: EnvironmentName,
    wrapper: Wrapper,
    gamma: float,
    sigma_n: float,
    run: int,
) -> MetricRow:
    """Train and evaluate the ``run``-th policy of one cell."""
    label = wrapper_label(wrapper)
    seed = derive_seed(config.seed, environment, label, gamma, sigma_n, run)
    policy = train_policy(config, environment, wrapper, gamma, sigma_n, seed)
    env = make_env(environment, sigma_n, config.ck, config.slate, config.n_buckets)
    result = evaluate(
        env,
        policy,
        n_rollouts=config.eval.n_rollouts,
        horizon=config.eval.horizon,
        gamma=gamma,
        seed=derive_seed(config.seed, environment, label, gamma, sigma_n, run, "eval"),
    )
    logger.debug(
        f"{environment}/{label} gamma={gamma} sigma_n={sigma_n} run={run}: "
        f"{result.mean_return:.4f} ± {result.std_error:.4f}"
    )
    return MetricRow(
        environment=environment,
        wrapper=label,
        gamma=gamma,
        sigma_n=sigma_n,
        run=run,
        seed=seed,
        mean_return=result.mean_return,
        std_error=result.std_error,
        penalty_paid=result.penalty_paid,
    )


def sweep_tasks(config: ExperimentConfig) -> List[Tuple]:
    """Argument tuples of ``run_cell`` for the full cross-product."""
    return [
        (config, environment, wrapper, gamma, sigma_n, run)
        for environment in config.environments
        for wrapper in config.wrappers
        for gamma in config.gammas
        for sigma_n in config.sigma_n_grid
        for run in range(config.n_runs)
    ]


def summarize_rows(rows: Sequence[MetricRow]) -> List[Dict[str, Any]]:
    """
    Aggregate runs per cell.

    The cell mean is the mean of the run means; its standard error is the
    between-run sample standard deviation over ``sqrt(n_runs)``. The penalty
    column is the mean over runs.
    """
    cells: Dict[Tuple, List[MetricRow]] = {}
    for row in rows:
        key = (row.environment, row.wrapper, row.gamma, row.sigma_n)
        cells.setdefault(key, []).append(row)
    summary = []
    for key in sorted(cells):
        returns = np.asarray([row.mean_return for row in cells[key]])
        penalties = [row.penalty_paid for row in cells[key]]
        n = returns.size
        std_error = float(returns.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        environment, wrapper, gamma, sigma_n = key
        summary.append(
            {
                "environment": environment,
                "wrapper": wrapper,
                "gamma": gamma,
                "sigma_n": sigma_n,
                "n_runs": n,
                "mean_return": float(returns.mean()),
                "std_error": std_error,
                "ci95": settings.CI95_Z * std_error,
                "penalty_paid": float(np.mean(penalties)),
            }
        )
    return summary


def summary_path(out: Path) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}.summary{out.suffix or '.csv'}")


def write_sweep(rows: Sequence[MetricRow], out: Path) -> None:
    """Write sorted rows to ``out`` and the per-cell summary next to it."""
    ordered = sorted(rows, key=MetricRow.sort_key)
    write_csv([row.as_row() for row in ordered], METRIC_COLUMNS, out)
    write_csv(summarize_rows(ordered), SUMMARY_COLUMNS, summary_path(out))


def cmd_sweep(
    config: ExperimentConfig, out: Optional[Path] = None, workers: Optional[int] = None
) -> List[MetricRow]:
    """
    Run the full training/evaluation sweep and write its CSV files.

    Args:
        config: Validated experiment config
        out: CSV destination; defaults to ``config.out``
        workers: Process count; 1 runs every cell in this process

    Returns:
        Rows sorted by (environment, wrapper, gamma, sigma_n, run)

    Raises:
        KeyboardInterrupt: Re-raised after the rows completed so far are written
    """
    out = Path(out or config.out)
    workers = workers or config.workers
    tasks = sweep_tasks(config)
    logger.info(f"Sweeping {config.n_cells()} cells × {config.n_runs} runs into {out}")
    rows: List[MetricRow] = []
    try:
        if workers == 1:
            for task in tasks:
                rows.append(run_cell(*task))
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(run_cell, *task) for task in tasks]
                for i, future in enumerate(as_completed(futures)):
                    rows.append(future.result())
                    if (i + 1) % 10 == 0 or (i + 1) == len(tasks):
                        logger.info(f"Progress: {i + 1}/{len(tasks)} runs")
    except KeyboardInterrupt:
        logger.warning(f"Interrupted; writing {len(rows)} of {len(tasks)} rows to {out}")
        write_sweep(rows, out)
        raise
    write_sweep(rows, out)
    return sorted(rows, key=MetricRow.sort_key)


def optimal_start_value(
    ck: CKParams, gamma: float, n_buckets: int = settings.DEFAULT_N_BUCKETS
) -> float:
    """Exact optimal value at exposure 0, interpolated on the discretized MDP."""
    params = ck.model_copy(update={"gamma": gamma})
    mdp = build_discrete_mdp(params, n_buckets)
    values = solve_q_star(mdp).state_values()
    return float(np.interp(0.0, exposure_grid(params, n_buckets), values))


def crossovers(q_values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """
    Satisfaction levels at which ``Q(Kale) − Q(Choc)`` changes sign.

    ``levels`` must be increasing. Each crossing is placed midway between the
    two levels it separates; exact ties carry no sign and are skipped.
    """
    gap = q_values[:, Action.KALE] - q_values[:, Action.CHOC]
    signed = np.sign(gap) != 0
    signs, levels = np.sign(gap)[signed], np.asarray(levels)[signed]
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    return (levels[changes] + levels[changes + 1]) / 2.0


def _exact_rows(panel: str, q: np.ndarray, s: np.ndarray) -> List[Dict[str, Any]]:
    return [
        {
            "panel": panel,
            "bucket_satisfaction": float(s[i]),
            "action": action,
            "source": "exact",
            "q_value": float(q[i, action]),
        }
        for i in range(q.shape[0])
        for action in range(q.shape[1])
    ]


def _learned_rows(
    panel: str, tables: List[np.ndarray], n_buckets: int
) -> List[Dict[str, Any]]:
    centres = (np.arange(n_buckets) + 0.5) / n_buckets
    rows = []
    sources = [(f"run_{i}", table) for i, table in enumerate(tables)]
    sources.append(("mean", np.mean(tables, axis=0)))
    for source, table in sources:
        for i in range(n_buckets):
            for action in range(table.shape[1]):
                rows.append(
                    {
                        "panel": panel,
                        "bucket_satisfaction": float(centres[i]),
                        "action": action,
                        "source": source,
                        "q_value": float(table[i, action]),
                    }
                )
    return rows


def cmd_qvalues(
    config: ExperimentConfig, out: Optional[Path] = None
) -> List[Dict[str, Any]]:
    """
    Q-values per satisfaction level in the Choc-Kale model.

    Panels ``a`` and ``c`` hold exact Q* of the discretized model at event
    level and under k-aggregation, keyed by the satisfaction of each exposure
    grid point. Panels ``b`` and ``d`` hold the tables of ``n_runs``
    Q-learning runs on noisy observations (event level and aggregated),
    keyed by observation bucket centre, plus their mean.

    Uses the first discount of the config and ``config.qvalues`` for k and
    the observation noise.
    """
    gamma = config.gammas[0]
    k = config.qvalues.k
    sigma_n = config.qvalues.sigma_n
    params = config.ck.model_copy(update={"gamma": gamma})
    mdp = build_discrete_mdp(params, config.n_buckets)
    s = satisfaction(exposure_grid(params, config.n_buckets), params.tau)

    q_star = solve_q_star(mdp).values
    levels = ", ".join(f"{level:.3f}" for level in crossovers(q_star, s))
    logger.info(f"Exact Kale/Choc crossover at satisfaction {levels or 'none'}")
    rows = _exact_rows("a", q_star, s)
    rows += _exact_rows("c", solve_q_star(aggregate_mdp(mdp, k)).values, s)

    for panel, wrapper in (("b", None), ("d", AggregateConfig(k=k))):
        label = wrapper_label(wrapper)
        tables = []
        for run in range(config.n_runs):
            seed = derive_seed(config.seed, "qvalues", label, gamma, sigma_n, run)
            policy = train_policy(config, "ck", wrapper, gamma, sigma_n, seed)
            tables.append(policy.q.values)
        logger.info(f"Panel {panel}: trained {config.n_runs} {label} policies")
        rows += _learned_rows(panel, tables, config.n_buckets)

    if out is not None:
        write_csv(rows, QVALUE_COLUMNS, out)
    return rows


def cmd_verify(scope: Optional[List[str]] = None, seed: int = 0) -> VerifyReport:
    """Run the verification suites named in ``scope`` (all by default)."""
    report = run_suites(scope, seed)
    n_failed = len(report.failures)
    logger.info(f"Verification: {len(report.checks) - n_failed} passed, {n_failed} failed")
    return report


def cmd_bounds(inputs: BoundInputs) -> Dict[str, Any]:
    """Every closed-form quantity for ``inputs``; domain errors are reported verbatim."""
    return all_bounds(inputs)


def save_policy(
    policy: TrainedPolicy,
    config: ExperimentConfig,
    path: Path,
    config_file: Optional[str] = None,
) -> None:
    """Save a trained policy together with the environment it was trained on."""
    document = {
        "policy": policy.to_json_dict(),
        "ck": config.ck.model_dump(),
        "slate": config.slate.model_dump(by_alias=True),
        "n_buckets": config.n_buckets,
    }
    metadata = generate_metadata(
        "train", config_file=config_file, seed=policy.config.seed
    )
    save_json(inject_metadata_into_json(document, metadata), path)


def load_policy(path: Path):
    """
    Load a policy saved by ``save_policy``.

    Returns:
        Tuple of (TrainedPolicy, environment simulator, metadata)
    """
    document = load_json(path)
    policy = TrainedPolicy.from_json_dict(document["policy"])
    env = make_env(
        policy.environment,
        policy.sigma_n,
        CKParams(**document.get("ck", {})),
        SlateParams(**document.get("slate", {})),
        document.get("n_buckets", settings.DEFAULT_N_BUCKETS),
    )
    return policy, env, extract_metadata_from_json(document)

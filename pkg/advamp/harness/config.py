"""
advamp.harness.config
~~~~~~~~~~~~~~~~~~~~~

Declarative experiment configuration.

A config file (YAML, or JSON which the YAML loader also reads) is validated
into an ``ExperimentConfig``; command-line flags then override individual
fields. Every nested section falls back to the defaults in ``advamp.settings``.
"""

import logging
import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from advamp import settings
from advamp.envs.choc_kale import CKParams
from advamp.envs.slate import SlateParams
from advamp.learning.qlearn import EnvironmentName, QLearnConfig
from advamp.learning.temporal import AggregateConfig, SwitchConfig, Wrapper

logger = logging.getLogger(__name__)


def default_wrappers() -> List[Wrapper]:
    """Event level plus every aggregation and switching cost of the default grids."""
    wrappers: List[Wrapper] = [None]
    wrappers += [AggregateConfig(k=k) for k in settings.DEFAULT_K_GRID]
    wrappers += [SwitchConfig(T=T) for T in settings.DEFAULT_T_GRID]
    return wrappers


class EvalConfig(BaseModel):
    """Monte Carlo evaluation protocol."""

    model_config = ConfigDict(frozen=True)

    n_rollouts: int = Field(settings.DEFAULT_N_ROLLOUTS, ge=2)
    horizon: int = Field(settings.DEFAULT_HORIZON, ge=1)


class QValuesConfig(BaseModel):
    """Settings of the per-bucket Q-value comparison."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(5, ge=1)
    sigma_n: float = Field(0.3, ge=0.0)


class ExperimentConfig(BaseModel):
    """Full description of a training and evaluation sweep."""

    model_config = ConfigDict(frozen=True)

    environments: List[EnvironmentName] = Field(default_factory=lambda: ["ck"])
    wrappers: List[Wrapper] = Field(default_factory=default_wrappers)
    gammas: List[float] = Field(
        default_factory=lambda: list(settings.DEFAULT_GAMMA_GRID)
    )
    sigma_n_grid: List[float] = Field(
        default_factory=lambda: list(settings.DEFAULT_SIGMA_N_GRID)
    )
    n_runs: int = Field(settings.DEFAULT_N_RUNS, ge=1)
    n_buckets: int = Field(settings.DEFAULT_N_BUCKETS, ge=2)
    ck: CKParams = Field(default_factory=CKParams)
    slate: SlateParams = Field(default_factory=SlateParams)
    qlearn: QLearnConfig = Field(default_factory=QLearnConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    qvalues: QValuesConfig = Field(default_factory=QValuesConfig)
    seed: int = 0
    workers: Optional[int] = Field(None, ge=1)
    out: str = f"{settings.DEFAULT_OUTPUT_DIR}/sweep.csv"

    @field_validator("environments", "wrappers", "gammas", "sigma_n_grid")
    @classmethod
    def validate_nonempty(cls, v):
        if len(v) == 0:
            raise ValueError("grids must not be empty")
        return v

    @field_validator("gammas")
    @classmethod
    def validate_gammas(cls, v):
        for gamma in v:
            if not 0.0 <= gamma < 1.0:
                raise ValueError(f"discount {gamma} must lie in [0, 1)")
        return v

    @field_validator("sigma_n_grid")
    @classmethod
    def validate_sigma_n(cls, v):
        for sigma_n in v:
            if sigma_n < 0.0:
                raise ValueError(f"observation noise {sigma_n} must be nonnegative")
        return v

    def n_cells(self) -> int:
        sizes = (self.environments, self.wrappers, self.gammas, self.sigma_n_grid)
        return math.prod(len(grid) for grid in sizes)


def apply_overrides(
    data: Optional[Dict[str, Any]],
    gamma: Optional[float] = None,
    k: Optional[int] = None,
    T: Optional[float] = None,
    sigma_n: Optional[float] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Merge command-line overrides into raw config data.

    ``--k`` and ``--T`` replace the wrapper list with the wrappers they
    name; ``--gamma`` and ``--sigma-n`` replace their grids with a single
    value.
    """
    merged = dict(data or {})
    if gamma is not None:
        merged["gammas"] = [gamma]
    if sigma_n is not None:
        merged["sigma_n_grid"] = [sigma_n]
    if k is not None or T is not None:
        wrappers: List[Dict[str, Any]] = []
        if k is not None:
            wrappers.append({"kind": "aggregate", "k": k})
        if T is not None:
            wrappers.append({"kind": "switch", "T": T})
        merged["wrappers"] = wrappers
    if seed is not None:
        merged["seed"] = seed
    if out is not None:
        merged["out"] = out
    return merged


def build_config(data: Optional[Dict[str, Any]], **overrides) -> ExperimentConfig:
    """
    Validate raw config data (after overrides) into an ExperimentConfig.

    Raises:
        pydantic.ValidationError: If any field is invalid
    """
    config = ExperimentConfig(**apply_overrides(data, **overrides))
    logger.debug(f"Experiment config with {config.n_cells()} cells, seed {config.seed}")
    return config


def parse_wrapper(spec: str) -> Wrapper:
    """
    Parse a wrapper given on the command line.

    Accepts ``none``, ``aggregate:K`` and ``switch:T``.
    """
    kind, _, value = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "none" and not value:
        return None
    if kind == "aggregate" and value:
        return AggregateConfig(k=int(value))
    if kind == "switch" and value:
        return SwitchConfig(T=float(value))
    raise ValueError(
        f"unrecognised wrapper {spec!r}; use none, aggregate:K or switch:T"
    )

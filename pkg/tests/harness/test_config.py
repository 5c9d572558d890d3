"""
Tests for experiment configuration.
"""

from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from advamp.harness.config import (
    ExperimentConfig,
    apply_overrides,
    build_config,
    parse_wrapper,
)
from advamp.learning.temporal import AggregateConfig, SwitchConfig


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.environments == ["ck"]
        assert config.wrappers == [
            None,
            AggregateConfig(k=3),
            AggregateConfig(k=5),
            SwitchConfig(T=1.0),
            SwitchConfig(T=2.0),
            SwitchConfig(T=3.0),
        ]
        assert config.gammas == [0.95, 0.99]
        assert config.sigma_n_grid == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        assert config.n_runs == 10
        assert config.n_buckets == 50
        assert config.qlearn.n_events == 30000
        assert config.eval.n_rollouts == 100
        assert config.eval.horizon == 1000
        assert config.out == "results/sweep.csv"

    def test_n_cells(self):
        config = ExperimentConfig(
            environments=["ck", "slate"],
            wrappers=[None, {"kind": "aggregate", "k": 5}],
            gammas=[0.95],
            sigma_n_grid=[0.0, 0.3, 0.5],
        )
        assert config.n_cells() == 12

    def test_wrapper_parsing(self):
        config = ExperimentConfig(
            wrappers=[None, {"kind": "aggregate", "k": 3}, {"kind": "switch", "T": 2.0}]
        )
        assert config.wrappers[1] == AggregateConfig(k=3)
        assert config.wrappers[2] == SwitchConfig(T=2.0)

    def test_nested_sections(self):
        config = ExperimentConfig(
            ck={"beta": 0.8}, slate={"lambda": 0.5}, qlearn={"n_events": 100}
        )
        assert config.ck.beta == 0.8
        assert config.slate.lambda_ == 0.5
        assert config.qlearn.n_events == 100
        assert config.qlearn.alpha_decay == 0.3

    @pytest.mark.parametrize(
        "data",
        [
            {"gammas": [1.0]},
            {"gammas": []},
            {"sigma_n_grid": [-0.1]},
            {"environments": ["atari"]},
            {"wrappers": [{"kind": "aggregate", "k": 0}]},
            {"n_runs": 0},
            {"eval": {"n_rollouts": 1}},
            {"workers": 0},
            {"ck": {"mu_choc": 1.0}},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ValidationError):
            ExperimentConfig(**data)

    def test_sample_config_validates(self):
        sample = Path(__file__).parents[2] / "sample_experiment_config.yaml"
        with open(sample, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        config = ExperimentConfig(**data)
        assert config.n_cells() == 72
        assert config.wrappers == ExperimentConfig().wrappers
        assert config.slate.lambda_ == 0.2


class TestOverrides:
    def test_no_overrides(self):
        assert apply_overrides({"n_runs": 3}) == {"n_runs": 3}
        assert apply_overrides(None) == {}

    def test_single_values_replace_grids(self):
        merged = apply_overrides({"gammas": [0.9, 0.95]}, gamma=0.99, sigma_n=0.4)
        assert merged["gammas"] == [0.99]
        assert merged["sigma_n_grid"] == [0.4]

    def test_k_and_T_replace_wrappers(self):
        merged = apply_overrides({"wrappers": [None]}, k=5, T=1.0)
        assert merged["wrappers"] == [
            {"kind": "aggregate", "k": 5},
            {"kind": "switch", "T": 1.0},
        ]

    def test_does_not_mutate_input(self):
        data = {"seed": 1}
        apply_overrides(data, seed=2, out="x.csv")
        assert data == {"seed": 1}

    def test_build_config(self):
        config = build_config({"n_runs": 2}, gamma=0.9, k=3, seed=7)
        assert config.gammas == [0.9]
        assert config.wrappers == [AggregateConfig(k=3)]
        assert config.seed == 7
        assert config.n_runs == 2


class TestParseWrapper:
    def test_none(self):
        assert parse_wrapper("none") is None

    def test_aggregate(self):
        assert parse_wrapper("aggregate:5") == AggregateConfig(k=5)

    def test_switch(self):
        assert parse_wrapper("switch:1.5") == SwitchConfig(T=1.5)

    @pytest.mark.parametrize("text", ["aggregate", "repeat:3", "none:1", ""])
    def test_unrecognised(self, text):
        with pytest.raises(ValueError, match="unrecognised wrapper"):
            parse_wrapper(text)

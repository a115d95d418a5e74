"""Experiment configuration: TOML schema and derived run parameters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from ..errors import ConfigError
from ..lattice import LatticeConfig, RewardSpec


@dataclass
class LearnerSpec:
    name: str
    overrides: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    epsilon: float
    delta: float
    gamma: float
    seeds: list
    env: LatticeConfig
    learners: list
    sizes: list | None = None
    budget_multiplier: float = 1.0
    trace_stride: int = 1000
    output_dir: str = "out"
    fig_b_size: int = 200
    oracle_tolerance: float = 1e-8

    def check(self):
        for name in ("epsilon", "delta", "gamma"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must be in (0, 1), got {v}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.learners:
            raise ConfigError("need at least one learner")
        if self.budget_multiplier < 0:
            raise ConfigError("budget_multiplier must be nonnegative")
        if self.trace_stride < 1:
            raise ConfigError("trace_stride must be >= 1")
        return self

    def cell_budget(self, num_states: int, num_actions: int, learner: LearnerSpec) -> int:
        """Sample budget for one (learner, size, seed) cell.

        Scales the worst-case attempted-update volume S*A*q*(1 + update
        ceiling) by budget_multiplier, using the learner's effective epsilon
        and batch size.
        """
        eps = float(learner.overrides.get("epsilon", self.epsilon))
        q = int(learner.overrides.get("q", 32))
        ceiling = math.ceil(1.0 / (eps * (1.0 - self.gamma)))
        return int(self.budget_multiplier * num_states * num_actions * q * (1 + ceiling))

    def to_json_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "gamma": self.gamma,
            "seeds": list(self.seeds),
            "sizes": list(self.sizes) if self.sizes else None,
            "budget_multiplier": self.budget_multiplier,
            "trace_stride": self.trace_stride,
            "fig_b_size": self.fig_b_size,
            "oracle_tolerance": self.oracle_tolerance,
            "env": {
                "dims": [int(d) for d in self.env.dims],
                "wrap": self.env.wrap,
                "slip_prob": self.env.slip_prob,
                "seed": self.env.seed,
                "absorbing": self.env.absorbing,
                "reward": {
                    "goal_cells": self.env.reward_spec.goal_cells,
                    "n_random_goals": self.env.reward_spec.n_random_goals,
                    "goal_reward": self.env.reward_spec.goal_reward,
                    "goal_region_frac": self.env.reward_spec.goal_region_frac,
                    "hazard_cells": self.env.reward_spec.hazard_cells,
                    "n_random_hazards": self.env.reward_spec.n_random_hazards,
                    "hazard_reward": self.env.reward_spec.hazard_reward,
                },
            },
            "learners": [{"name": l.name, **l.overrides} for l in self.learners],
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def _reward_spec(table: dict) -> RewardSpec:
    known = {"goal_cells", "n_random_goals", "goal_reward", "goal_region_frac",
             "hazard_cells", "n_random_hazards", "hazard_reward"}
    extra = set(table) - known
    if extra:
        raise ConfigError(f"unknown [env.reward] keys: {sorted(extra)}")
    return RewardSpec(**table)


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        exp = dict(doc["experiment"])
        env_doc = dict(doc["env"])
    except KeyError as exc:
        raise ConfigError(f"missing table {exc}")
    learners = [LearnerSpec(d.pop("name"), d)
                for d in (dict(x) for x in doc.get("learner", []))]

    reward = _reward_spec(env_doc.pop("reward", {}))
    sizes = env_doc.pop("sizes", None)
    dims = env_doc.pop("dims", None)
    if dims is None and sizes is None:
        raise ConfigError("[env] needs dims or sizes")
    if dims is None:
        dims = [2]  # placeholder; sweeps re-derive dims per size
    known_env = {"wrap", "slip_prob", "seed", "absorbing"}
    extra = set(env_doc) - known_env
    if extra:
        raise ConfigError(f"unknown [env] keys: {sorted(extra)}")
    env = LatticeConfig(dims=dims, reward_spec=reward, **env_doc)

    known_exp = {"epsilon", "delta", "gamma", "seeds", "budget_multiplier",
                 "trace_stride", "output_dir", "fig_b_size", "oracle_tolerance"}
    extra = set(exp) - known_exp
    if extra:
        raise ConfigError(f"unknown [experiment] keys: {sorted(extra)}")
    seeds = exp.pop("seeds")
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    return ExperimentConfig(seeds=list(seeds), env=env, learners=learners,
                            sizes=sizes, **exp).check()


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment file; parse errors keep tomllib's line info."""
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    return config_from_dict(doc)

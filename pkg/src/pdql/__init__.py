"""Tabular RL laboratory: delayed Q-learning with locality-based unlocking
on metric MDPs, exact value oracles, PAC bound calculators, and a benchmark
harness."""

from . import bounds, harness, lattice, learners, mdp, submdp
from .mdp import (
    MdpSpec,
    finite_horizon_values,
    greedy_policy,
    mean_error,
    sample_transition,
    validate_mdp,
    value_iteration,
)

__version__ = "0.1.0"

__all__ = [
    "MdpSpec", "bounds", "finite_horizon_values", "greedy_policy", "harness",
    "lattice", "learners", "mdp", "mean_error", "sample_transition", "submdp",
    "validate_mdp", "value_iteration", "__version__",
]

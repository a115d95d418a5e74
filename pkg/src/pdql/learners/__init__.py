"""Learner implementations behind a single string-keyed entry point."""

from __future__ import annotations

from ..errors import ConfigError
from ..mdp import MdpSpec
from .baselines import pql_run, qlearning_run, vrql_run
from .delayed import (
    PdqlParams,
    PdqlState,
    default_params,
    dql_batch_size,
    dql_run,
    make_state,
    memory_footprint,
    pdql_run,
    update_decision,
)
from .trace import RunTrace, TracePoint

LEARNER_NAMES = ("pdql", "dql", "qlearning", "pql", "vrql")


def run_learner(name: str, spec: MdpSpec, oracle, seed: int, *, epsilon: float,
                delta: float, budget: int, trace_stride: int = 1000,
                overrides: dict | None = None) -> RunTrace:
    """Run one learner by name with harness-level parameters.

    overrides carries per-learner knobs (and may re-pin epsilon/delta for
    the learner independently of the experiment-level values used for
    convergence detection).
    """
    ov = dict(overrides or {})
    eps = float(ov.pop("epsilon", epsilon))
    dlt = float(ov.pop("delta", delta))
    gamma = spec.discount

    if name in ("pdql", "dql"):
        params = default_params(
            eps, dlt, gamma, spec.num_states, spec.num_actions,
            q=ov.pop("q", None),
            unlock_radius=ov.pop("unlock_radius", None),
            max_timesteps=budget,
            rollout_estimate=bool(ov.pop("rollout_estimate", False)),
        )
        if name == "pdql":
            trace = pdql_run(spec, params, oracle, seed, trace_stride=trace_stride)
        else:
            trace = dql_run(spec, params, oracle, seed, trace_stride=trace_stride,
                            batch_mode=ov.pop("batch_mode", "shared"))
    elif name == "qlearning":
        trace = qlearning_run(spec, ov.pop("lr", None), float(ov.pop("exploration", 0.1)),
                              budget, oracle, seed, trace_stride=trace_stride)
    elif name == "pql":
        trace = pql_run(spec, int(ov.pop("phase_length", 8)), budget, oracle, seed)
    elif name == "vrql":
        trace = vrql_run(spec, int(ov.pop("epoch_samples", 8)),
                         int(ov.pop("inner_iters", 32)), budget, oracle, seed,
                         trace_stride=trace_stride)
    else:
        raise ConfigError(f"unknown learner {name!r}")
    if ov:
        raise ConfigError(f"unused overrides for {name}: {sorted(ov)}")
    return trace


__all__ = [
    "LEARNER_NAMES", "PdqlParams", "PdqlState", "RunTrace", "TracePoint",
    "default_params", "dql_batch_size", "dql_run", "make_state",
    "memory_footprint", "pdql_run", "pql_run", "qlearning_run", "run_learner",
    "update_decision", "vrql_run",
]

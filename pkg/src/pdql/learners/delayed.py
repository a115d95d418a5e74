"""Delayed batched Q-learning with lock/unlock control.

The learner holds every Q-value at the optimistic ceiling 1/(1-gamma) and
only writes a new value when a batch of q generative samples shows the
stored value overshoots the batched estimate by at least 2*epsilon; the
write lands epsilon above the batch mean, so each write descends by at
least epsilon.  A failed write locks the pair.  A successful write at state
s re-opens every pair within the unlock radius of s (local variant) or
every pair outright (global variant).  The run ends when nothing is
unlocked: the lock set is the convergence certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import bounds as bounds_mod
from ..errors import DomainError
from ..mdp import MdpSpec, mean_error, metric_ball
from ..submdp import truncation_radius
from .trace import RunTrace


@dataclass
class PdqlParams:
    epsilon: float
    delta: float
    gamma: float
    q: int
    unlock_radius: int
    max_timesteps: int
    rollout_estimate: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("epsilon", "delta", "gamma"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise DomainError(f"{name} must be in (0, 1), got {v}")
        if self.q < 1:
            raise DomainError("q must be >= 1")
        if self.unlock_radius < 1:
            raise DomainError("unlock_radius must be >= 1")
        if self.max_timesteps < 1:
            raise DomainError("max_timesteps must be >= 1")


def default_params(epsilon, delta, gamma, num_states, num_actions, *,
                   q=None, unlock_radius=None, max_timesteps=None,
                   budget_multiplier=1.0, rollout_estimate=False) -> PdqlParams:
    """Parameters from the closed-form calculators; overrides are recorded.

    q defaults to the sampling-parameter lower bound and the unlock radius
    to the truncation radius; the safety cap defaults to the headline total
    bound scaled by budget_multiplier.
    """
    inp = bounds_mod.BoundInputs(epsilon, delta, gamma, num_states, num_actions)
    meta = {}
    if q is None:
        q = bounds_mod.q_lower_bound(inp)
    else:
        meta["q_overridden"] = True
    if unlock_radius is None:
        unlock_radius = truncation_radius(epsilon, gamma)
    else:
        meta["unlock_radius_overridden"] = True
    if max_timesteps is None:
        max_timesteps = int(math.ceil(bounds_mod.pdql_total_bound(inp) * budget_multiplier))
    else:
        meta["max_timesteps_overridden"] = True
    return PdqlParams(epsilon, delta, gamma, int(q), int(unlock_radius),
                      int(max_timesteps), rollout_estimate, meta)


@dataclass
class PdqlState:
    """Mutable learner state: the four per-(state,action) tables.

    Everything else the runner touches (transition CDFs, unlock balls) is
    environment-side distance-oracle machinery, not learner memory.
    """

    q_values: np.ndarray           # (S, A) float64, init 1/(1-gamma)
    update_accumulator: np.ndarray  # (S, A) float64, U
    visit_counter: np.ndarray       # (S, A) int64, C in [0, q)
    unlocked: np.ndarray            # (S, A) bool
    timestep: int
    rng: np.random.Generator


def make_state(spec: MdpSpec, params: PdqlParams, seed: int) -> PdqlState:
    shape = (spec.num_states, spec.num_actions)
    return PdqlState(
        q_values=np.full(shape, 1.0 / (1.0 - params.gamma)),
        update_accumulator=np.zeros(shape),
        visit_counter=np.zeros(shape, dtype=np.int64),
        unlocked=np.ones(shape, dtype=bool),
        timestep=0,
        rng=np.random.default_rng(seed),
    )


def memory_footprint(state: PdqlState):
    """Count of stored per-pair scalars/flags, with a breakdown.

    The total must stay at 4*S*A + 0*S; it is checked against that affine
    form here and never grows with the timestep.
    """
    breakdown = {
        "q_values": state.q_values.size,
        "update_accumulator": state.update_accumulator.size,
        "visit_counter": state.visit_counter.size,
        "unlocked": state.unlocked.size,
    }
    entries = sum(breakdown.values())
    s, a = state.q_values.shape
    assert entries == 4 * s * a + 0 * s
    return entries, breakdown


def update_decision(q_value: float, batch_sum: float, batch_size: int,
                    epsilon: float):
    """Batched update arithmetic for one attempt.

    Returns the replacement value batch_mean + epsilon when the stored value
    overshoots the batch mean by at least 2*epsilon, else None (the caller
    locks the pair).
    """
    mean = batch_sum / batch_size
    if q_value - mean >= 2.0 * epsilon:
        return mean + epsilon
    return None


def _rollout_value(spec, cdf, state_v, s, rng, horizon, gamma):
    """Truncated greedy rollout return from s; consumes one sample per step."""
    total = 0.0
    disc = 1.0
    cur = s
    for _ in range(horizon):
        a = int(np.argmax(state_v[cur]))
        k = int(np.searchsorted(cdf[cur, a], rng.random(), side="right"))
        k = min(k, cdf.shape[2] - 1)
        total += disc * spec.rewards[cur, a]
        disc *= gamma
        cur = int(spec.succ_states[cur, a, k])
    return total, horizon


def _run_delayed(spec: MdpSpec, params: PdqlParams, oracle, seed,
                 *, unlock: str, batch: int, trace_stride: int,
                 snapshot: dict, keep_state: bool):
    n, a_count = spec.num_states, spec.num_actions
    gamma = params.gamma
    eps = params.epsilon
    q = batch
    budget = params.max_timesteps

    state = make_state(spec, params, seed)
    qv, unlocked, rng = state.q_values, state.unlocked, state.rng
    v = qv.max(axis=1)
    cdf = np.cumsum(spec.succ_probs, axis=2)
    top = cdf.shape[2] - 1

    if unlock == "local":
        balls = [metric_ball(spec.metric, s, params.unlock_radius) for s in range(n)]
        # distance-oracle audit: every ball member must sit strictly inside
        # the unlock radius
        for s in range(n):
            drow = np.asarray(spec.metric.distance_row(s))
            assert (drow[balls[s]] < params.unlock_radius).all()
    else:
        balls = None

    ceiling = math.ceil(1.0 / (eps * (1.0 - gamma)))
    success_counts = np.zeros((n, a_count), dtype=np.int64)
    n_unlocked = n * a_count
    updates = 0
    attempts = 0
    unlock_events = 0
    t = 0

    trace = RunTrace(config_snapshot=snapshot)
    trace.record(0, mean_error(v, oracle), 0.0, 0)
    next_mark = trace_stride

    def locked_fraction():
        return 1.0 - n_unlocked / (n * a_count)

    exhausted = False
    while n_unlocked > 0 and not exhausted:
        for s in range(n):
            if n_unlocked == 0:
                break
            row_unlocked = unlocked[s]
            if not row_unlocked.any():
                continue
            # highest-Q action among the state's unlocked pairs, lowest
            # index on ties
            masked = np.where(row_unlocked, qv[s], -np.inf)
            a = int(np.argmax(masked))

            remaining = budget - t
            if remaining <= 0:
                exhausted = True
                break
            if params.rollout_estimate:
                # literal truncated-rollout reading of the batch target: each
                # sample draws a successor then walks the greedy policy for
                # the truncation horizon, every step costing one timestep
                u_sum = 0.0
                got = 0
                while got < q and t < budget:
                    k = int(np.searchsorted(cdf[s, a], rng.random(), side="right"))
                    nxt = int(spec.succ_states[s, a, min(k, top)])
                    t += 1
                    horizon = min(params.unlock_radius, budget - t)
                    ret, steps = _rollout_value(spec, cdf, qv, nxt, rng, horizon, gamma)
                    t += steps
                    u_sum += spec.rewards[s, a] + gamma * ret
                    got += 1
                draw = got
            else:
                draw = min(q, remaining)
                ks = np.searchsorted(cdf[s, a], rng.random(draw), side="right")
                nxt = spec.succ_states[s, a, np.minimum(ks, top)]
                u_sum = draw * spec.rewards[s, a] + gamma * v[nxt].sum()
                t += draw

            if draw < q:
                # budget ended mid-batch: park the partial accumulator
                state.update_accumulator[s, a] = u_sum
                state.visit_counter[s, a] = draw
                exhausted = True
                break

            attempts += 1
            new_value = update_decision(qv[s, a], u_sum, q, eps)
            if new_value is not None:
                assert qv[s, a] - new_value >= eps - 1e-9
                qv[s, a] = new_value
                v[s] = qv[s].max()
                updates += 1
                success_counts[s, a] += 1
                assert success_counts[s, a] <= ceiling
                if unlock == "local":
                    block = unlocked[balls[s]]
                    n_unlocked += int(block.size - np.count_nonzero(block))
                    unlock_events += int(block.size - np.count_nonzero(block))
                    unlocked[balls[s]] = True
                else:
                    unlock_events += n * a_count - n_unlocked
                    n_unlocked = n * a_count
                    unlocked[:] = True
            else:
                unlocked[s, a] = False
                n_unlocked -= 1

            if t >= next_mark:
                trace.record(t, mean_error(v, oracle), locked_fraction(), updates)
                next_mark = trace_stride * (t // trace_stride + 1)

    state.timestep = t
    if n_unlocked == 0:
        trace.converged_at = t
    if not trace.samples or trace.samples[-1].timestep != t:
        trace.record(t, mean_error(v, oracle), locked_fraction(), updates)
    trace.stats = {
        "attempts": attempts,
        "updates": updates,
        "unlock_events": unlock_events,
        "ceiling_violations": 0,
        "radius_violations": 0,
        "max_successes_per_pair": int(success_counts.max()),
        "update_ceiling": ceiling,
    }
    if keep_state:
        return trace, state
    return trace


def pdql_run(spec: MdpSpec, params: PdqlParams, oracle, seed: int, *,
             trace_stride: int = 1000, keep_state: bool = False):
    """Run the locally-unlocking delayed learner against a generative model.

    Returns a RunTrace; converged_at is set when every pair ends locked.
    When the sample budget runs out first the trace is partial and
    converged_at stays None.
    """
    snapshot = {
        "learner": "pdql", "seed": seed, "epsilon": params.epsilon,
        "delta": params.delta, "gamma": params.gamma, "q": params.q,
        "unlock_radius": params.unlock_radius,
        "max_timesteps": params.max_timesteps,
        "rollout_estimate": params.rollout_estimate,
        "trace_stride": trace_stride, **params.metadata,
    }
    return _run_delayed(spec, params, oracle, seed, unlock="local",
                        batch=params.q, trace_stride=trace_stride,
                        snapshot=snapshot, keep_state=keep_state)


def dql_batch_size(params: PdqlParams, num_states: int, num_actions: int) -> int:
    """Union-bound batch size for the globally-unlocking variant, counting
    every possible attempted update across the run."""
    e, d, g = params.epsilon, params.delta, params.gamma
    sa = num_states * num_actions
    attempts = sa * (1 + sa * math.ceil(1.0 / (e * (1.0 - g))))
    return math.ceil(math.log(3.0 * attempts / d) / (2.0 * e * e * (1.0 - g) ** 2))


def dql_run(spec: MdpSpec, params: PdqlParams, oracle, seed: int, *,
            trace_stride: int = 1000, batch_mode: str = "shared",
            keep_state: bool = False):
    """Globally-unlocking delayed learner: a successful update re-opens
    every pair.

    batch_mode "shared" reuses params.q for a controlled comparison against
    the local variant; "own" derives the batch from the global union bound.
    """
    if batch_mode == "shared":
        batch = params.q
    elif batch_mode == "own":
        batch = dql_batch_size(params, spec.num_states, spec.num_actions)
    else:
        raise DomainError(f"unknown batch_mode {batch_mode!r}")
    snapshot = {
        "learner": "dql", "seed": seed, "epsilon": params.epsilon,
        "delta": params.delta, "gamma": params.gamma, "q": batch,
        "batch_mode": batch_mode, "max_timesteps": params.max_timesteps,
        "trace_stride": trace_stride, **params.metadata,
    }
    return _run_delayed(spec, params, oracle, seed, unlock="global",
                        batch=batch, trace_stride=trace_stride,
                        snapshot=snapshot, keep_state=keep_state)

"""Baseline learners sharing the generative access model and trace format.

All three count one generative sample as one timestep, so sample-efficiency
comparisons against the delayed learners are like for like.
"""

from __future__ import annotations

import numpy as np

from ..mdp import MdpSpec, mean_error
from .trace import RunTrace

_CHUNK = 8192


def _default_lr(visits):
    return 1.0 / (1.0 + visits) ** 0.8


def qlearning_run(spec: MdpSpec, lr_schedule, exploration: float, budget: int,
                  oracle, seed: int, *, trace_stride: int = 1000) -> RunTrace:
    """Tabular Q-learning over uniformly random state resets.

    Each timestep draws a uniform state, picks epsilon-greedy over its Q row,
    samples one transition, and applies the one-step bootstrapped update with
    a per-pair learning rate.  lr_schedule may be None (1/(1+n)^0.8), a
    constant, or a callable of the visit count.
    """
    if lr_schedule is None:
        sched = _default_lr
    elif callable(lr_schedule):
        sched = lr_schedule
    else:
        rate = float(lr_schedule)
        sched = lambda n: rate  # noqa: E731

    n, a_count = spec.num_states, spec.num_actions
    gamma = spec.discount
    rng = np.random.default_rng(seed)
    q = np.zeros((n, a_count))
    visits = np.zeros((n, a_count), dtype=np.int64)
    cdf = np.cumsum(spec.succ_probs, axis=2)
    top = cdf.shape[2] - 1

    trace = RunTrace(config_snapshot={
        "learner": "qlearning", "seed": seed, "exploration": exploration,
        "budget": budget, "trace_stride": trace_stride, "gamma": gamma,
    })
    trace.record(0, mean_error(q.max(axis=1), oracle), 0.0, 0)
    next_mark = trace_stride

    t = 0
    while t < budget:
        m = min(_CHUNK, budget - t)
        states = rng.integers(0, n, size=m)
        explore = rng.random(m) < exploration
        rand_actions = rng.integers(0, a_count, size=m)
        trans = rng.random(m)
        for i in range(m):
            s = states[i]
            a = rand_actions[i] if explore[i] else int(np.argmax(q[s]))
            k = min(int(np.searchsorted(cdf[s, a], trans[i], side="right")), top)
            nxt = spec.succ_states[s, a, k]
            target = spec.rewards[s, a] + gamma * q[nxt].max()
            alpha = sched(visits[s, a])
            visits[s, a] += 1
            q[s, a] += alpha * (target - q[s, a])
            t += 1
            if t >= next_mark:
                trace.record(t, mean_error(q.max(axis=1), oracle), 0.0, t)
                next_mark = trace_stride * (t // trace_stride + 1)

    if trace.samples[-1].timestep != t:
        trace.record(t, mean_error(q.max(axis=1), oracle), 0.0, t)
    trace.stats = {"updates": t}
    return trace


def _draw_successors(spec, cdf, rng, count):
    """(S, A, count) successor states, one inverse-CDF draw per pair sample."""
    u = rng.random((spec.num_states, spec.num_actions, count))
    idx = (u[..., None] >= cdf[:, :, None, :]).sum(axis=3)
    np.clip(idx, 0, cdf.shape[2] - 1, out=idx)
    return np.take_along_axis(
        np.broadcast_to(spec.succ_states[:, :, None, :],
                        (*idx.shape, spec.succ_states.shape[2])),
        idx[..., None], axis=3,
    )[..., 0]


def pql_run(spec: MdpSpec, phase_length: int, budget: int, oracle, seed: int,
            *, trace_stride: int = 0) -> RunTrace:
    """Phased synchronous backups: every pair sampled phase_length times per
    phase, then all Q-values replaced by the empirical one-step backup.

    Each phase consumes exactly S * A * phase_length timesteps; one trace
    point per phase.  On a deterministic kernel a phase reproduces one exact
    Q-value-iteration sweep.
    """
    n, a_count = spec.num_states, spec.num_actions
    gamma = spec.discount
    rng = np.random.default_rng(seed)
    q = np.zeros((n, a_count))
    cdf = np.cumsum(spec.succ_probs, axis=2)
    phase_cost = n * a_count * phase_length

    trace = RunTrace(config_snapshot={
        "learner": "pql", "seed": seed, "phase_length": phase_length,
        "budget": budget, "gamma": gamma,
    })
    trace.record(0, mean_error(q.max(axis=1), oracle), 0.0, 0)

    t = 0
    phases = 0
    while t + phase_cost <= budget:
        succ = _draw_successors(spec, cdf, rng, phase_length)
        v = q.max(axis=1)
        q = spec.rewards + gamma * v[succ].mean(axis=2)
        t += phase_cost
        phases += 1
        trace.record(t, mean_error(q.max(axis=1), oracle), 0.0, phases)

    trace.stats = {"phases": phases, "phase_cost": phase_cost}
    return trace


def vrql_run(spec: MdpSpec, epoch_samples: int, inner_iters: int, budget: int,
             oracle, seed: int, *, trace_stride: int = 1000) -> RunTrace:
    """Variance-reduced synchronous Q-learning.

    Each epoch freezes a reference table, estimates its one-step backup from
    a batch that doubles every epoch, then runs recentered inner updates
    whose noise shrinks as the iterate approaches the reference:

        Q <- (1-a_k) Q + a_k [ backup_est(ref) + gamma (V(s') - V_ref(s')) ]

    with the same sampled successor s' in both correction terms.
    """
    n, a_count = spec.num_states, spec.num_actions
    gamma = spec.discount
    rng = np.random.default_rng(seed)
    q = np.full((n, a_count), 1.0 / (1.0 - gamma))
    cdf = np.cumsum(spec.succ_probs, axis=2)
    pair_cost = n * a_count

    trace = RunTrace(config_snapshot={
        "learner": "vrql", "seed": seed, "epoch_samples": epoch_samples,
        "inner_iters": inner_iters, "budget": budget, "gamma": gamma,
    })
    trace.record(0, mean_error(q.max(axis=1), oracle), 0.0, 0)
    next_mark = trace_stride

    t = 0
    epoch = 0
    updates = 0
    epoch_increment_var = []
    while True:
        anchor_count = epoch_samples * 2**epoch
        if t + anchor_count * pair_cost + pair_cost > budget:
            break
        ref_v = q.max(axis=1)
        succ = _draw_successors(spec, cdf, rng, anchor_count)
        anchor = spec.rewards + gamma * ref_v[succ].mean(axis=2)
        t += anchor_count * pair_cost

        increments = []
        for k in range(inner_iters):
            if t + pair_cost > budget:
                break
            succ1 = _draw_successors(spec, cdf, rng, 1)[..., 0]
            v = q.max(axis=1)
            target = anchor + gamma * (v[succ1] - ref_v[succ1])
            alpha = 1.0 / (1.0 + k)
            delta = alpha * (target - q)
            q += delta
            increments.append(float(np.var(delta)))
            t += pair_cost
            updates += 1
            if t >= next_mark:
                trace.record(t, mean_error(q.max(axis=1), oracle), 0.0, updates)
                next_mark = trace_stride * (t // trace_stride + 1)
        if increments:
            epoch_increment_var.append(float(np.mean(increments)))
        epoch += 1

    if trace.samples[-1].timestep != t:
        trace.record(t, mean_error(q.max(axis=1), oracle), 0.0, updates)
    trace.stats = {"epochs": epoch, "epoch_increment_var": epoch_increment_var}
    return trace

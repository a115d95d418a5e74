"""Tabular MDP model with a state-space metric, validation, and exact oracles.

The MDP is the tuple (states, actions, transitions, rewards, discount) plus a
distance metric over states.  Transitions are stored in compressed
successor-list form: locality guarantees each (state, action) row has a small
support, so dense S x A x S storage is only materialized on demand for small
problems.  All value tables are plain numpy arrays: Q is (S, A), V is (S,).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonConvergence, StructuralError, ValidationFailure

ROW_SUM_TOL = 1e-9

# Incremented by value_iteration; the harness asserts one solve per environment.
_vi_solves = 0


def vi_solve_count() -> int:
    return _vi_solves


def reset_vi_solve_count() -> None:
    global _vi_solves
    _vi_solves = 0


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


class LatticeMetric:
    """Manhattan distance on an integer lattice, wrap-aware on a torus."""

    name = "lattice"

    def __init__(self, dims, wrap: bool = False):
        self.dims = tuple(int(d) for d in dims)
        self.wrap = bool(wrap)
        self.num_states = int(np.prod(self.dims))
        # coords[s] = multi-index of flat state s, C order
        self.coords = np.stack(
            np.unravel_index(np.arange(self.num_states), self.dims), axis=1
        )

    def distance(self, i, j):
        """Distance from state i to state(s) j; j may be an int or an array."""
        a = self.coords[i]
        b = self.coords[j]
        delta = np.abs(a - b)
        if self.wrap:
            delta = np.minimum(delta, np.asarray(self.dims) - delta)
        return delta.sum(axis=-1)

    def distance_row(self, i):
        return self.distance(i, np.arange(self.num_states))

    def matrix(self):
        d = np.abs(self.coords[:, None, :] - self.coords[None, :, :])
        if self.wrap:
            d = np.minimum(d, np.asarray(self.dims) - d)
        return d.sum(axis=2)

    def neighbors(self, s):
        """States at distance exactly 1 from s (s itself excluded)."""
        out = []
        c = self.coords[s]
        for axis, extent in enumerate(self.dims):
            for step in (-1, 1):
                nc = c.copy()
                nc[axis] += step
                if self.wrap:
                    nc[axis] %= extent
                elif not (0 <= nc[axis] < extent):
                    continue
                idx = int(np.ravel_multi_index(nc, self.dims))
                if idx != s and idx not in out:
                    out.append(idx)
        return np.array(sorted(out), dtype=np.int64)


class HopMetric:
    """Shortest-path hop count on an undirected unit-neighbor graph.

    Built from the support of a transition kernel (successors reachable with
    nonzero probability, symmetrized).  Disconnected pairs get the sentinel
    distance S, which preserves the triangle inequality because connectivity
    is transitive.
    """

    name = "hops"

    def __init__(self, adjacency):
        self.adjacency = [np.asarray(a, dtype=np.int64) for a in adjacency]
        self.num_states = len(adjacency)
        self._rows: dict[int, np.ndarray] = {}

    @classmethod
    def from_transition_support(cls, succ_states, succ_probs):
        n = succ_states.shape[0]
        neigh = [set() for _ in range(n)]
        for s in range(n):
            for a in range(succ_states.shape[1]):
                row_s = succ_states[s, a]
                row_p = succ_probs[s, a]
                for t, p in zip(row_s, row_p):
                    t = int(t)
                    if p > 0.0 and t != s:
                        neigh[s].add(t)
                        neigh[t].add(s)
        return cls([np.array(sorted(v), dtype=np.int64) for v in neigh])

    def distance_row(self, i):
        if i not in self._rows:
            n = self.num_states
            dist = np.full(n, n, dtype=np.int64)  # sentinel: unreachable
            dist[i] = 0
            queue = deque([i])
            while queue:
                u = queue.popleft()
                for v in self.adjacency[u]:
                    if dist[v] == n:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            self._rows[i] = dist
        return self._rows[i]

    def distance(self, i, j):
        return self.distance_row(i)[j]

    def matrix(self):
        return np.stack([self.distance_row(i) for i in range(self.num_states)])

    def neighbors(self, s):
        return self.adjacency[s]


def metric_ball(metric, center: int, radius: int) -> np.ndarray:
    """Sorted states with D(center, s) < radius, by breadth-first expansion.

    Locality makes the unit-neighbor graph's hop ball coincide with the
    metric ball, so BFS to depth radius-1 is exact for both metric kinds.
    """
    if radius <= 0:
        return np.array([], dtype=np.int64)
    seen = {center}
    frontier = [center]
    for _ in range(radius - 1):
        nxt = []
        for s in frontier:
            for t in metric.neighbors(s):
                t = int(t)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if not nxt:
            break
        frontier = nxt
    return np.array(sorted(seen), dtype=np.int64)


# ---------------------------------------------------------------------------
# The MDP specification
# ---------------------------------------------------------------------------


@dataclass
class MdpSpec:
    """Immutable tabular MDP: compressed transition rows plus a metric.

    succ_states/succ_probs are (S, A, K) with K the widest row support;
    padding entries carry probability 0.  Rewards are expected rewards per
    (state, action) in [0, 1].
    """

    num_states: int
    num_actions: int
    discount: float
    rewards: np.ndarray            # (S, A) float64
    succ_states: np.ndarray        # (S, A, K) int64
    succ_probs: np.ndarray         # (S, A, K) float64
    metric: object

    def __post_init__(self):
        s, a = self.num_states, self.num_actions
        if self.rewards.shape != (s, a):
            raise StructuralError(f"rewards shape {self.rewards.shape} != {(s, a)}")
        if self.succ_states.shape != self.succ_probs.shape or self.succ_states.ndim != 3:
            raise StructuralError("transition arrays must share an (S, A, K) shape")
        if self.succ_states.shape[:2] != (s, a):
            raise StructuralError(
                f"transition rows shaped {self.succ_states.shape[:2]}, expected {(s, a)}"
            )
        if not (0.0 < self.discount < 1.0):
            raise StructuralError(f"discount {self.discount} outside (0, 1)")
        if self.succ_states.min(initial=0) < 0 or self.succ_states.max(initial=0) >= s:
            raise StructuralError("successor index out of range")

    @classmethod
    def from_rows(cls, num_states, num_actions, discount, rewards, rows, metric):
        """Build from ragged rows: rows[s][a] = list of (prob, next_state)."""
        width = max(1, max(len(rows[s][a]) for s in range(num_states) for a in range(num_actions)))
        succ = np.zeros((num_states, num_actions, width), dtype=np.int64)
        probs = np.zeros((num_states, num_actions, width), dtype=np.float64)
        for s in range(num_states):
            for a in range(num_actions):
                for k, (p, t) in enumerate(rows[s][a]):
                    probs[s, a, k] = p
                    succ[s, a, k] = t
        return cls(num_states, num_actions, float(discount),
                   np.asarray(rewards, dtype=np.float64), succ, probs, metric)

    @classmethod
    def from_dense(cls, transitions, rewards, discount, metric):
        """Build from a dense (S, A, S) kernel, compressing zero entries."""
        t = np.asarray(transitions, dtype=np.float64)
        s, a, _ = t.shape
        rows = [[[(float(t[i, j, k]), int(k)) for k in np.nonzero(t[i, j])[0]]
                 for j in range(a)] for i in range(s)]
        return cls.from_rows(s, a, discount, rewards, rows, metric)

    def dense_transitions(self) -> np.ndarray:
        """Materialize the (S, A, S) kernel; intended for small S only."""
        out = np.zeros((self.num_states, self.num_actions, self.num_states))
        s_idx, a_idx, k_idx = np.nonzero(self.succ_probs)
        np.add.at(out, (s_idx, a_idx, self.succ_states[s_idx, a_idx, k_idx]),
                  self.succ_probs[s_idx, a_idx, k_idx])
        return out

    def row(self, s, a):
        """Nonpadding (prob, successor) pairs of one transition row."""
        mask = self.succ_probs[s, a] > 0.0
        return list(zip(self.succ_probs[s, a][mask], self.succ_states[s, a][mask]))

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        transitions = [
            [[[float(p), int(t)] for p, t in self.row(s, a)]
             for a in range(self.num_actions)]
            for s in range(self.num_states)
        ]
        doc = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "discount": self.discount,
            "rewards": [[float(r) for r in row] for row in self.rewards],
            "transitions": transitions,
            "metric": self.metric.name,
        }
        if isinstance(self.metric, LatticeMetric):
            doc["lattice_dims"] = list(self.metric.dims)
            doc["lattice_wrap"] = self.metric.wrap
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MdpSpec":
        for key in ("num_states", "num_actions", "discount", "rewards", "transitions", "metric"):
            if key not in doc:
                raise StructuralError(f"missing field {key!r}")
        n, a = int(doc["num_states"]), int(doc["num_actions"])
        rows = [[[(float(p), int(t)) for p, t in doc["transitions"][s][act]]
                 for act in range(a)] for s in range(n)]
        spec = cls.from_rows(n, a, doc["discount"], doc["rewards"], rows, metric=None)
        if doc["metric"] == "lattice":
            spec.metric = LatticeMetric(doc["lattice_dims"], doc.get("lattice_wrap", False))
            if spec.metric.num_states != n:
                raise StructuralError("lattice_dims product != num_states")
        elif doc["metric"] == "hops":
            spec.metric = HopMetric.from_transition_support(spec.succ_states, spec.succ_probs)
        else:
            raise StructuralError(f"unknown metric kind {doc['metric']!r}")
        return spec

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "MdpSpec":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(CheckResult(name, bool(passed), detail))

    def failed_names(self):
        return [c.name for c in self.checks if not c.passed]

    def require(self):
        """Raise ValidationFailure if any check failed; returns self otherwise."""
        if not self.ok:
            raise ValidationFailure(self)
        return self


EXHAUSTIVE_METRIC_LIMIT = 256


def validate_mdp(spec: MdpSpec, sample_budget: int = 20000, seed: int = 0) -> ValidationReport:
    """Check the structural invariants of an MDP specification.

    Distribution rows, reward range, metric axioms, and locality.  Metric
    axioms are checked exhaustively up to S=256 and on sampled triples above
    that; locality is always exhaustive because sub-MDP construction leans on
    it.  Returns a report; call report.require() to raise on failures.
    """
    if sample_budget <= 0:
        raise StructuralError("sample_budget must be positive")
    report = ValidationReport()
    s_count, a_count = spec.num_states, spec.num_actions

    row_sums = spec.succ_probs.sum(axis=2)
    bad_rows = np.argwhere(np.abs(row_sums - 1.0) > ROW_SUM_TOL)
    neg = spec.succ_probs.min() < 0.0
    report.add("distribution", bad_rows.size == 0 and not neg,
               f"{len(bad_rows)} rows off unit mass" if bad_rows.size else
               ("negative probability" if neg else ""))

    in_range = (spec.rewards >= 0.0).all() and (spec.rewards <= 1.0).all()
    report.add("reward_range", in_range,
               "" if in_range else f"rewards span [{spec.rewards.min()}, {spec.rewards.max()}]")

    _check_metric_axioms(spec, report, sample_budget, seed)
    _check_locality(spec, report)
    return report


def _check_metric_axioms(spec, report, sample_budget, seed):
    metric = spec.metric
    n = spec.num_states
    if n <= EXHAUSTIVE_METRIC_LIMIT:
        d = np.asarray(metric.matrix(), dtype=np.float64)
        nonneg = (d >= 0).all()
        identity = (np.diag(d) == 0).all() and (d[~np.eye(n, dtype=bool)] > 0).all()
        symmetric = np.allclose(d, d.T)
        triangle = all(
            (d[:, k, None] + d[None, k, :] >= d - 1e-12).all() for k in range(n)
        )
        mode = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        triples = rng.integers(0, n, size=(sample_budget, 3))
        rows = {int(i): metric.distance_row(int(i)) for i in np.unique(triples[:, :2])}
        d_ij = np.array([rows[int(i)][j] for i, j, _ in triples], dtype=np.float64)
        d_ji = np.array([rows[int(j)][i] if int(j) in rows else metric.distance(int(j), int(i))
                         for i, j, _ in triples], dtype=np.float64)
        d_ik = np.array([rows[int(i)][k] for i, _, k in triples], dtype=np.float64)
        d_jk = np.array([rows[int(j)][k] if int(j) in rows else metric.distance(int(j), int(k))
                         for _, j, k in triples], dtype=np.float64)
        nonneg = (d_ij >= 0).all()
        same = triples[:, 0] == triples[:, 1]
        identity = (d_ij[same] == 0).all() and (d_ij[~same] > 0).all()
        symmetric = np.allclose(d_ij, d_ji)
        triangle = (d_ik <= d_ij + d_jk + 1e-12).all()
        mode = f"sampled({sample_budget})"
    report.add("metric_nonnegative", nonneg, mode)
    report.add("metric_identity", identity, mode)
    report.add("metric_symmetry", symmetric, mode)
    report.add("metric_triangle", triangle, mode)


def _check_locality(spec, report):
    metric = spec.metric
    bad_jump = 0
    bad_ball = 0
    for s in range(spec.num_states):
        drow = np.asarray(metric.distance_row(s))
        for a in range(spec.num_actions):
            mask = spec.succ_probs[s, a] > 0.0
            succ = spec.succ_states[s, a][mask]
            if succ.size and drow[succ].max() > 1:
                bad_jump += 1
        ball = np.count_nonzero(drow == 1)
        if ball > spec.num_actions:
            bad_ball += 1
    report.add("locality", bad_jump == 0 and bad_ball == 0,
               f"{bad_jump} rows jump beyond unit distance, "
               f"{bad_ball} states with unit ball > A" if bad_jump or bad_ball else "")


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------


def bellman_q(spec: MdpSpec, v: np.ndarray) -> np.ndarray:
    """One-step lookahead Q-values from a state-value table."""
    return spec.rewards + spec.discount * (spec.succ_probs * v[spec.succ_states]).sum(axis=2)


def bellman_residual(spec: MdpSpec, v: np.ndarray) -> float:
    return float(np.abs(v - bellman_q(spec, v).max(axis=1)).max())


def value_iteration(spec: MdpSpec, tolerance: float = 1e-8):
    """Solve for optimal values to a certified Bellman residual.

    Returns (V, Q) with max_s |V(s) - max_a(R + gamma T V)(s)| <= tolerance
    and V = Q.max(axis=1).  Raises NonConvergence past the contraction-rate
    iteration cap, which signals numeric pathology rather than slow progress.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    global _vi_solves
    _vi_solves += 1
    gamma = spec.discount
    stop = tolerance * (1.0 - gamma) / (2.0 * gamma)
    cap = int(np.ceil(np.log(tolerance * (1.0 - gamma) / 2.0) / np.log(gamma))) + 100
    v = np.zeros(spec.num_states)
    for _ in range(cap):
        q = bellman_q(spec, v)
        v_next = q.max(axis=1)
        if np.abs(v_next - v).max() <= stop:
            q = bellman_q(spec, v_next)
            return q.max(axis=1), q
        v = v_next
    raise NonConvergence(f"no convergence within {cap} sweeps at tolerance {tolerance}")


def finite_horizon_values(spec: MdpSpec, horizon: int) -> np.ndarray:
    """Optimal values of the truncated problem with rewards at steps 0..horizon.

    Horizon 0 is a single undiscounted reward: V^0(s) = max_a R(s, a).
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    v = spec.rewards.max(axis=1)
    for _ in range(horizon):
        v = bellman_q(spec, v).max(axis=1)
    return v


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Per-state argmax action; ties go to the lowest action index."""
    if not np.isfinite(q).all():
        raise ValueError("Q-table must be finite")
    return q.argmax(axis=1)


def mean_error(v: np.ndarray, oracle: np.ndarray) -> float:
    """Signed average gap (1/S) sum_s (v(s) - oracle(s))."""
    if v.shape != oracle.shape:
        raise DimensionMismatch(f"{v.shape} vs {oracle.shape}")
    return float(np.mean(v - oracle))


def sample_transition(spec: MdpSpec, s: int, a: int, rng: np.random.Generator):
    """Draw (next_state, reward) generatively via inverse-CDF on the stored row.

    The reward is the expected reward R(s, a), returned deterministically.
    """
    cdf = np.cumsum(spec.succ_probs[s, a])
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    k = min(k, len(cdf) - 1)
    return int(spec.succ_states[s, a, k]), float(spec.rewards[s, a])

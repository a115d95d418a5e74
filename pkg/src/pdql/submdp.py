"""Local approximation machinery: truncated sub-problems around center states.

A sub-problem is the restriction of an MDP to a metric ball whose radius is
chosen so discounted rewards from outside the ball contribute less than a
target error; outward transitions become self-loops.  The error of the
restricted optimum grows with distance from the center as eps / gamma^D.
Overlapping sub-problems give repeated value estimates per state, fused by
averaging with a Hoeffding tail on the fused error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyInput
from .mdp import MdpSpec, metric_ball

SIZE_BOUND_CAP = 10**18


def _check_unit(name, value):
    if not (0.0 < value < 1.0):
        raise DomainError(f"{name} must be in (0, 1), got {value}")


def log_radius(epsilon: float, gamma: float) -> float:
    """Raw horizon log_gamma(eps * (1 - gamma)) beyond which the discounted
    tail gamma^(T+1) / (1 - gamma) drops below eps."""
    _check_unit("epsilon", epsilon)
    _check_unit("gamma", gamma)
    return math.log(epsilon * (1.0 - gamma)) / math.log(gamma)


def truncation_radius(epsilon: float, gamma: float) -> int:
    """Integer truncation horizon, at least 1."""
    return max(1, math.ceil(log_radius(epsilon, gamma)))


def error_envelope(epsilon: float, gamma: float, distance: float) -> float:
    """Error bound eps / gamma^distance for a state `distance` away from the
    sub-problem center."""
    if distance < 0:
        raise DomainError("distance must be nonnegative")
    _check_unit("epsilon", epsilon)
    _check_unit("gamma", gamma)
    return epsilon / gamma**distance


def coverage_radius(gamma: float) -> int:
    """Transitions within which a center still yields a 2-eps estimate:
    ceil(log_gamma 0.5)."""
    _check_unit("gamma", gamma)
    return math.ceil(math.log(0.5) / math.log(gamma))


def overlap_target(epsilon: float, delta: float, num_states: int) -> int:
    """Estimates per state needed to fuse to eps accuracy with confidence
    1 - delta: ceil((2/eps) * ln(2S/delta)), natural log."""
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    if num_states < 1:
        raise DomainError("num_states must be positive")
    return math.ceil((2.0 / epsilon) * math.log(2.0 * num_states / delta))


def submdp_size_bound(epsilon: float, gamma: float, num_actions: int) -> int:
    """Ball-volume bound radius^A on a sub-problem's state count.

    The radius is the raw (un-ceiled) truncation horizon; the power-of-A
    reading is the lattice-growth interpretation of the size bound.
    Saturates at SIZE_BOUND_CAP instead of overflowing.
    """
    if num_actions < 1:
        raise DomainError("num_actions must be positive")
    r = log_radius(epsilon, gamma)
    try:
        value = r**num_actions
    except OverflowError:
        return SIZE_BOUND_CAP
    if not math.isfinite(value) or value >= SIZE_BOUND_CAP:
        return SIZE_BOUND_CAP
    return max(1, math.ceil(value))


# ---------------------------------------------------------------------------
# Sub-MDP construction
# ---------------------------------------------------------------------------


class RestrictedMetric:
    """Parent metric viewed through a sub-problem's local indices."""

    name = "restricted"

    def __init__(self, parent_metric, member_states: np.ndarray):
        self.parent = parent_metric
        self.members = member_states
        self.num_states = len(member_states)
        self._local = {int(s): i for i, s in enumerate(member_states)}

    def distance(self, i, j):
        return self.parent.distance(int(self.members[i]), self.members[j])

    def distance_row(self, i):
        return np.asarray(self.parent.distance_row(int(self.members[i])))[self.members]

    def matrix(self):
        return np.stack([self.distance_row(i) for i in range(self.num_states)])

    def neighbors(self, i):
        out = [self._local[int(t)] for t in self.parent.neighbors(int(self.members[i]))
               if int(t) in self._local]
        return np.array(sorted(out), dtype=np.int64)


@dataclass
class SubMdp:
    parent: MdpSpec
    center: int
    radius: int
    member_states: np.ndarray      # sorted parent indices with D(center, s) < radius
    local_spec: MdpSpec
    index_map: np.ndarray          # local index -> parent index (== member_states)

    def local_index(self, parent_state: int) -> int:
        i = int(np.searchsorted(self.member_states, parent_state))
        if i >= len(self.member_states) or self.member_states[i] != parent_state:
            raise KeyError(f"state {parent_state} not in sub-MDP")
        return i


def build_submdp(parent: MdpSpec, center: int, epsilon: float) -> SubMdp:
    """Carve the ball D(center, s) < truncation_radius out of the parent.

    Membership uses a breadth-first expansion of the unit-distance graph,
    which locality makes identical to the metric ball.  Transition mass
    leaving the member set is redirected to a self-loop; rewards are kept.
    """
    if not (0 <= center < parent.num_states):
        raise DomainError(f"center {center} out of range")
    radius = truncation_radius(epsilon, parent.discount)
    members = metric_ball(parent.metric, center, radius)
    local = {int(s): i for i, s in enumerate(members)}

    rows = []
    for i, s in enumerate(members):
        state_rows = []
        for a in range(parent.num_actions):
            mass: dict[int, float] = {}
            for p, t in parent.row(int(s), a):
                j = local.get(int(t), i)  # outward mass self-loops
                mass[j] = mass.get(j, 0.0) + float(p)
            state_rows.append(sorted((p, j) for j, p in mass.items()))
        rows.append(state_rows)

    local_spec = MdpSpec.from_rows(
        len(members), parent.num_actions, parent.discount,
        parent.rewards[members], rows, RestrictedMetric(parent.metric, members),
    )
    return SubMdp(parent, int(center), radius, members, local_spec, members.copy())


# ---------------------------------------------------------------------------
# Coverage planning
# ---------------------------------------------------------------------------


@dataclass
class CoveragePlan:
    centers: list
    per_state_cover_count: np.ndarray
    coverage_radius: int
    target_overlap: int
    clamped_states: list

    def to_json_dict(self) -> dict:
        return {
            "centers": [int(c) for c in self.centers],
            "coverage_radius": self.coverage_radius,
            "target_overlap": self.target_overlap,
            "clamped_states": [int(s) for s in self.clamped_states],
        }


def plan_centers(spec: MdpSpec, epsilon: float, delta: float) -> CoveragePlan:
    """Greedy covering: add centers until every state has its required number
    of centers within the coverage radius.

    The requirement is target_overlap clamped to the state's achievable
    maximum (its inclusive ball size); clamped states are reported.  The
    greedy step picks the candidate covering the most under-covered states,
    ties to the lowest state index.
    """
    _check_unit("epsilon", epsilon)
    _check_unit("delta", delta)
    n = spec.num_states
    r = coverage_radius(spec.discount)
    target = overlap_target(epsilon, delta, n)

    # inclusive ball D <= r == strict ball D < r + 1
    balls = [metric_ball(spec.metric, s, r + 1) for s in range(n)]
    req = np.minimum(target, np.array([len(b) for b in balls]))
    clamped = [s for s in range(n) if len(balls[s]) < target]

    counts = np.zeros(n, dtype=np.int64)
    centers: list[int] = []
    candidates = set(range(n))
    # lazy greedy: cached gains only ever shrink as coverage accumulates
    import heapq

    heap = [(-len(balls[c]), c) for c in range(n)]
    heapq.heapify(heap)
    while (counts < req).any():
        while True:
            neg_gain, c = heapq.heappop(heap)
            if c not in candidates:
                continue
            gain = int(np.count_nonzero(counts[balls[c]] < req[balls[c]]))
            if -neg_gain == gain or not heap:
                break
            heapq.heappush(heap, (-gain, c))
        centers.append(c)
        candidates.discard(c)
        counts[balls[c]] += 1
    return CoveragePlan(centers, counts, r, target, clamped)


def fuse_estimates(estimates):
    """Average independent bounded-error value estimates.

    Returns (fused_mean, tail_bound_at) where tail_bound_at(eps) is the
    Hoeffding bound 2 exp(-2 N^2 eps^2 / sum_i (2 e_i)^2) on the probability
    the fused mean deviates from the true value by at least eps, with each
    estimate i ranging within +/- e_i of the truth.
    """
    if not estimates:
        raise EmptyInput("no estimates to fuse")
    values = np.array([v for v, _ in estimates], dtype=np.float64)
    errors = np.array([e for _, e in estimates], dtype=np.float64)
    if (errors <= 0).any():
        raise DomainError("error bounds must be positive")
    n = len(values)
    denom = float(np.sum((2.0 * errors) ** 2))

    def tail_bound_at(eps: float) -> float:
        if eps <= 0:
            raise DomainError("eps must be positive")
        return 2.0 * math.exp(-2.0 * n * n * eps * eps / denom)

    return float(values.mean()), tail_bound_at

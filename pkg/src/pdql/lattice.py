"""Lattice gridworld families: metric MDP generators for benchmarking.

Grids of configurable dimension, wraparound, and slip noise, with goal and
hazard cells whose rewards are affinely rescaled to [0, 1].  Every generated
spec satisfies the locality property by construction: actions move at most
one unit of Manhattan distance, with off-edge moves turning into self-loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .mdp import LatticeMetric, MdpSpec


@dataclass
class RewardSpec:
    """Reward layout: explicit cells, or randomly placed counts.

    Cells are flat state indices or coordinate tuples.  When explicit lists
    are None, n_random_goals / n_random_hazards cells are drawn from the
    lattice config's seed.
    """

    goal_cells: list | None = None
    n_random_goals: int = 1
    goal_reward: float = 1.0
    goal_region_frac: float | None = None  # first frac of cells become goals
    hazard_cells: list | None = None
    n_random_hazards: int = 0
    hazard_reward: float = -0.5


@dataclass
class LatticeConfig:
    dims: list
    wrap: bool = False
    slip_prob: float = 0.0
    reward_spec: RewardSpec = field(default_factory=RewardSpec)
    seed: int = 0
    absorbing: bool = False

    def check(self):
        dims = [int(d) for d in self.dims]
        if not dims or any(d < 1 for d in dims):
            raise ConfigError(f"bad lattice dims {self.dims}")
        if int(np.prod(dims)) < 2:
            raise ConfigError("lattice needs at least 2 states")
        if not (0.0 <= self.slip_prob < 1.0):
            raise ConfigError(f"slip_prob {self.slip_prob} outside [0, 1)")
        rs = self.reward_spec
        explicit = rs.goal_cells or rs.hazard_cells
        counted = rs.n_random_goals > 0 or rs.n_random_hazards > 0
        if not explicit and not counted and rs.goal_region_frac is None:
            raise ConfigError("reward spec places no nonzero reward cell")
        if rs.goal_region_frac is not None and not (0.0 < rs.goal_region_frac <= 1.0):
            raise ConfigError("goal_region_frac must be in (0, 1]")
        return self


def _flat_index(cell, dims):
    if isinstance(cell, (tuple, list)):
        return int(np.ravel_multi_index(tuple(int(c) for c in cell), dims))
    return int(cell)


def _cell_rewards(cfg: LatticeConfig, dims) -> np.ndarray:
    n = int(np.prod(dims))
    rng = np.random.default_rng(cfg.seed)
    raw = np.zeros(n)
    rs = cfg.reward_spec
    taken: set[int] = set()

    def place(cells, count, magnitude):
        if cells is not None:
            idx = [_flat_index(c, dims) for c in cells]
        else:
            free = np.setdiff1d(np.arange(n), np.fromiter(taken, dtype=np.int64, count=len(taken)))
            idx = rng.choice(free, size=min(count, len(free)), replace=False).tolist()
        for i in idx:
            raw[i] = magnitude
            taken.add(int(i))

    if rs.goal_region_frac is not None:
        place(list(range(max(1, int(rs.goal_region_frac * n)))), 0, rs.goal_reward)
    else:
        place(rs.goal_cells, rs.n_random_goals, rs.goal_reward)
    place(rs.hazard_cells, rs.n_random_hazards, rs.hazard_reward)
    return raw


def make_lattice(cfg: LatticeConfig, gamma: float) -> MdpSpec:
    """Generate the lattice MDP for a config: one action per direction.

    The intended move lands with probability 1 - slip_prob; otherwise the
    executed move is uniform over all directions.  Bounded edges self-loop.
    Cell rewards are rescaled so the generated spec's rewards span [0, 1].
    """
    cfg.check()
    dims = tuple(int(d) for d in cfg.dims)
    n = int(np.prod(dims))
    n_actions = 2 * len(dims)
    metric = LatticeMetric(dims, cfg.wrap)

    cell_r = _cell_rewards(cfg, dims)
    lo, hi = cell_r.min(), cell_r.max()
    cell_r = np.zeros(n) if hi == lo else (cell_r - lo) / (hi - lo)
    goal_mask = cell_r >= cell_r.max()

    # target[s, b] = deterministic destination of executing direction b at s
    target = np.empty((n, n_actions), dtype=np.int64)
    coords = metric.coords
    for b in range(n_actions):
        axis, step = divmod(b, 2)
        step = -1 if step else 1
        nc = coords.copy()
        nc[:, axis] += step
        if cfg.wrap:
            nc[:, axis] %= dims[axis]
            target[:, b] = np.ravel_multi_index(nc.T, dims)
        else:
            off = (nc[:, axis] < 0) | (nc[:, axis] >= dims[axis])
            nc[:, axis] = np.clip(nc[:, axis], 0, dims[axis] - 1)
            dest = np.ravel_multi_index(nc.T, dims)
            dest[off] = np.nonzero(off)[0]  # self-loop at the edge
            target[:, b] = dest

    slip = cfg.slip_prob
    rows = []
    for s in range(n):
        state_rows = []
        for a in range(n_actions):
            if cfg.absorbing and goal_mask[s] and cell_r[s] > 0.0:
                state_rows.append([(1.0, s)])
                continue
            mass: dict[int, float] = {}
            for b in range(n_actions):
                w = (1.0 - slip if b == a else 0.0) + slip / n_actions
                if w > 0.0:
                    t = int(target[s, b])
                    mass[t] = mass.get(t, 0.0) + w
            state_rows.append(sorted((p, t) for t, p in mass.items()))
        rows.append(state_rows)

    rewards = np.repeat(cell_r[:, None], n_actions, axis=1)
    return MdpSpec.from_rows(n, n_actions, gamma, rewards, rows, metric)


def scale_rewards(spec: MdpSpec) -> MdpSpec:
    """Affinely map rewards so min -> 0 and max -> 1; constant tables go to 0."""
    r = spec.rewards
    if not np.isfinite(r).all():
        raise ValueError("rewards must be finite")
    lo, hi = r.min(), r.max()
    scaled = np.zeros_like(r) if hi == lo else (r - lo) / (hi - lo)
    return replace(spec, rewards=scaled)


def most_square_dims(n: int) -> list:
    """Most-square two-factor split of n, larger extent first."""
    best = (n, 1)
    for a in range(2, int(np.sqrt(n)) + 1):
        if n % a == 0:
            best = (n // a, a)
    return list(best)


def size_sweep(base: LatticeConfig, sizes, gamma: float) -> list:
    """One lattice spec per requested state count, seeds derived from the base.

    Each size uses its most-square 2-D factorization; all other config fields
    are held fixed.
    """
    if list(sizes) != sorted(sizes):
        raise ConfigError("sizes must be ascending")
    if any(s < 2 for s in sizes):
        raise ConfigError("every size must be >= 2")
    specs = []
    for s in sizes:
        cfg = replace(base, dims=most_square_dims(int(s)),
                      seed=base.seed * 1_000_003 + int(s))
        specs.append(make_lattice(cfg, gamma))
    return specs

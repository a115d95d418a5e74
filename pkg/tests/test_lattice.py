import numpy as np
import pytest

from pdql.errors import ConfigError
from pdql.lattice import (
    LatticeConfig,
    RewardSpec,
    make_lattice,
    most_square_dims,
    scale_rewards,
    size_sweep,
)
from pdql.mdp import validate_mdp, value_iteration


class TestMakeLattice:
    def test_deterministic_gridworld(self):
        spec = make_lattice(LatticeConfig(dims=[4, 4], seed=0), 0.9)
        assert spec.num_states == 16
        assert spec.num_actions == 4
        assert validate_mdp(spec).ok
        # slip 0: every row is a point mass
        assert (spec.succ_probs.max(axis=2) == 1.0).all()

    def test_slip_row_masses(self):
        spec = make_lattice(LatticeConfig(dims=[10, 5], slip_prob=0.2, seed=1), 0.9)
        # interior cell: intended neighbor gets 0.8 + 0.2/4, others 0.05
        probs = sorted(p for p, _ in spec.row(12, 0))
        assert probs == pytest.approx([0.05, 0.05, 0.05, 0.85])
        assert spec.succ_probs.sum(axis=2) == pytest.approx(np.ones((50, 4)))

    def test_wrapped_ring(self):
        spec = make_lattice(LatticeConfig(dims=[50], wrap=True, seed=2), 0.9)
        for s in range(50):
            drow = spec.metric.distance_row(s)
            assert np.count_nonzero(drow == 1) == 2
        assert validate_mdp(spec).ok

    def test_edge_moves_self_loop(self):
        spec = make_lattice(LatticeConfig(dims=[3, 3], seed=0), 0.9)
        # corner (0,0): moving up (axis0 -1) and left (axis1 -1) stay put
        rows = {a: spec.row(0, a) for a in range(4)}
        assert rows[1] == [(1.0, 0)]
        assert rows[3] == [(1.0, 0)]

    def test_absorbing_goal_self_loops(self):
        cfg = LatticeConfig(dims=[4, 4], seed=3, absorbing=True,
                            reward_spec=RewardSpec(goal_cells=[5]))
        spec = make_lattice(cfg, 0.9)
        for a in range(4):
            assert spec.row(5, a) == [(1.0, 5)]
        assert spec.rewards[5, 0] == 1.0

    def test_goal_region_frac(self):
        cfg = LatticeConfig(dims=[20], seed=0, reward_spec=RewardSpec(goal_region_frac=0.4))
        spec = make_lattice(cfg, 0.5)
        assert (spec.rewards[:8] == 1.0).all()
        assert (spec.rewards[8:] == 0.0).all()

    def test_config_invariants(self):
        with pytest.raises(ConfigError):
            LatticeConfig(dims=[1], seed=0).check()
        with pytest.raises(ConfigError):
            LatticeConfig(dims=[4], slip_prob=1.0, seed=0).check()
        with pytest.raises(ConfigError):
            LatticeConfig(dims=[4], seed=0,
                          reward_spec=RewardSpec(n_random_goals=0)).check()


class TestScaleRewards:
    def test_affine_map(self):
        spec = make_lattice(LatticeConfig(dims=[3], seed=0), 0.9)
        spec.rewards = np.repeat([[-1.0], [0.0], [3.0]], 2, axis=1)
        scaled = scale_rewards(spec)
        assert scaled.rewards[:, 0] == pytest.approx([0.0, 0.25, 1.0])

    def test_identity_when_already_full_range(self):
        spec = make_lattice(LatticeConfig(dims=[3], seed=0), 0.9)
        spec.rewards = np.repeat([[0.0], [0.3], [1.0]], 2, axis=1)
        assert np.allclose(scale_rewards(spec).rewards, spec.rewards)

    def test_constant_collapses_to_zero(self):
        spec = make_lattice(LatticeConfig(dims=[3], seed=0), 0.9)
        spec.rewards = np.full((3, 2), 0.7)
        assert (scale_rewards(spec).rewards == 0.0).all()

    def test_idempotent(self):
        spec = make_lattice(LatticeConfig(dims=[5, 2], seed=4, slip_prob=0.1,
                                          reward_spec=RewardSpec(n_random_goals=2,
                                                                 n_random_hazards=1)), 0.9)
        once = scale_rewards(spec)
        twice = scale_rewards(once)
        assert np.allclose(once.rewards, twice.rewards)

    def test_generated_rewards_span_unit_interval(self):
        cfg = LatticeConfig(dims=[6, 6], seed=9,
                            reward_spec=RewardSpec(n_random_goals=2, n_random_hazards=2))
        spec = make_lattice(cfg, 0.9)
        assert spec.rewards.min() == 0.0
        assert spec.rewards.max() == 1.0


class TestSizeSweep:
    def test_most_square_factorizations(self):
        assert most_square_dims(50) == [10, 5]
        assert most_square_dims(49) == [7, 7]
        assert most_square_dims(2000) == [50, 40]

    def test_paper_sweep_sizes(self):
        base = LatticeConfig(dims=[2], seed=5, slip_prob=0.1)
        specs = size_sweep(base, [50, 200, 500, 1000, 1500, 2000], 0.9)
        assert [s.num_states for s in specs] == [50, 200, 500, 1000, 1500, 2000]

    def test_seeds_derived_per_size(self):
        base = LatticeConfig(dims=[2], seed=5)
        a = size_sweep(base, [50], 0.9)[0]
        b = size_sweep(base, [50], 0.9)[0]
        assert np.allclose(a.rewards, b.rewards)

    def test_rejects_unsorted_and_tiny(self):
        base = LatticeConfig(dims=[2], seed=0)
        with pytest.raises(ConfigError):
            size_sweep(base, [200, 50], 0.9)
        with pytest.raises(ConfigError):
            size_sweep(base, [1, 50], 0.9)


class TestGeneratedSpecProperties:
    @pytest.mark.parametrize("dims,slip,wrap,seed", [
        ([4, 4], 0.0, False, 0),
        ([10, 5], 0.2, False, 1),
        ([7, 3], 0.5, True, 2),
        ([30], 0.1, True, 3),
        ([3, 3, 3], 0.3, False, 4),
    ])
    def test_validation_matrix(self, dims, slip, wrap, seed):
        cfg = LatticeConfig(dims=dims, slip_prob=slip, wrap=wrap, seed=seed,
                            reward_spec=RewardSpec(n_random_goals=2))
        report = validate_mdp(make_lattice(cfg, 0.9))
        assert report.ok, report.failed_names()

    def test_hop_distance_equals_manhattan_under_slip(self):
        from pdql.mdp import HopMetric
        cfg = LatticeConfig(dims=[5, 4], slip_prob=0.2, seed=6)
        spec = make_lattice(cfg, 0.9)
        hops = HopMetric.from_transition_support(spec.succ_states, spec.succ_probs)
        assert np.array_equal(hops.matrix(), spec.metric.matrix())

    def test_goal_placement_affects_values(self):
        cfg = LatticeConfig(dims=[6, 6], seed=11, slip_prob=0.1)
        v, _ = value_iteration(make_lattice(cfg, 0.9), 1e-8)
        assert v.max() > v.min()

import math

import numpy as np
import pytest

from pdql.errors import DomainError, EmptyInput
from pdql.lattice import LatticeConfig, RewardSpec, make_lattice
from pdql.mdp import metric_ball, value_iteration
from pdql.submdp import (
    CoveragePlan,
    build_submdp,
    coverage_radius,
    error_envelope,
    fuse_estimates,
    overlap_target,
    plan_centers,
    submdp_size_bound,
    truncation_radius,
)


def random_lattice(rng, max_cells=200, gamma=None):
    dims_pool = ([6, 5], [8, 8], [10, 5], [12, 4], [25], [40], [7, 7])
    dims = dims_pool[int(rng.integers(len(dims_pool)))]
    while np.prod(dims) > max_cells:
        dims = dims_pool[int(rng.integers(len(dims_pool)))]
    cfg = LatticeConfig(
        dims=list(dims),
        slip_prob=float(rng.choice([0.0, 0.1, 0.3])),
        wrap=bool(rng.integers(2)),
        seed=int(rng.integers(1_000_000)),
        reward_spec=RewardSpec(n_random_goals=int(rng.integers(1, 4))),
    )
    return make_lattice(cfg, gamma if gamma is not None else float(rng.choice([0.5, 0.9])))


class TestTruncationRadius:
    def test_exact_power(self):
        assert truncation_radius(0.5, 0.5) == 2

    def test_experiment_scale(self):
        assert truncation_radius(0.01, 0.9) == 66

    def test_minimum_clamp(self):
        # eps(1-gamma) >= gamma makes the raw log < 1
        assert truncation_radius(0.95, 0.1) == 1

    def test_monotone(self):
        for gamma in (0.5, 0.9):
            radii = [truncation_radius(e, gamma) for e in (0.05, 0.1, 0.2, 0.4)]
            assert radii == sorted(radii, reverse=True)
        for eps in (0.05, 0.2):
            radii = [truncation_radius(eps, g) for g in (0.3, 0.6, 0.9)]
            assert radii == sorted(radii)

    def test_domain(self):
        with pytest.raises(DomainError):
            truncation_radius(0.0, 0.5)
        with pytest.raises(DomainError):
            truncation_radius(0.5, 1.0)


class TestEnvelopeAndCoverage:
    def test_envelope_at_center(self):
        assert error_envelope(0.07, 0.9, 0) == pytest.approx(0.07)

    def test_envelope_numeric(self):
        assert error_envelope(0.01, 0.9, 7) == pytest.approx(0.0209075, abs=1e-6)

    def test_envelope_monotone_in_distance(self):
        vals = [error_envelope(0.05, 0.9, d) for d in range(10)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_coverage_radius_values(self):
        assert coverage_radius(0.5) == 1
        assert coverage_radius(0.9) == 7
        assert coverage_radius(0.99) == 69

    def test_overlap_target_value(self):
        assert overlap_target(0.01, 0.001, 1000) == 2902


class TestSizeBound:
    def test_square_radius(self):
        assert submdp_size_bound(0.5, 0.5, 2) == 4

    def test_radius_one_any_actions(self):
        # eps(1-gamma) close to gamma: raw log barely above 1
        assert submdp_size_bound(0.95, 0.1, 7) == 1

    def test_experiment_scale_saturates_sweep(self):
        bound = submdp_size_bound(0.01, 0.9, 4)
        assert bound == pytest.approx(65.56**4, rel=1e-3)
        for sweep_size in (50, 200, 500, 1000, 1500, 2000):
            assert bound > sweep_size


class TestBuildSubMdp:
    def test_ring_ball(self):
        spec = make_lattice(LatticeConfig(dims=[20], wrap=True, seed=0), 0.5)
        sub = build_submdp(spec, center=10, epsilon=0.5)
        assert sub.radius == 2
        assert list(sub.member_states) == [9, 10, 11]
        # outward actions at the edge members self-loop
        edge = sub.local_index(9)
        rows = {a: sub.local_spec.row(edge, a) for a in range(2)}
        assert any(row == [(1.0, edge)] for row in rows.values())
        assert sub.local_spec.succ_probs.sum(axis=2) == pytest.approx(
            np.ones((3, 2)))

    def test_whole_parent_when_radius_covers(self):
        spec = make_lattice(LatticeConfig(dims=[4, 4], seed=1, slip_prob=0.2), 0.9)
        sub = build_submdp(spec, center=5, epsilon=0.05)  # radius 51 >> diameter
        assert len(sub.member_states) == 16
        v_parent, _ = value_iteration(spec, 1e-9)
        v_sub, _ = value_iteration(sub.local_spec, 1e-9)
        assert np.abs(v_sub[sub.member_states.argsort()] - v_parent).max() < 1e-7

    def test_corner_ball_rows_sum(self):
        spec = make_lattice(LatticeConfig(dims=[8, 8], seed=2, slip_prob=0.25), 0.6)
        sub = build_submdp(spec, center=0, epsilon=0.3)
        sums = sub.local_spec.succ_probs.sum(axis=2)
        assert sums == pytest.approx(np.ones_like(sums), abs=1e-9)
        drow = spec.metric.distance_row(0)
        assert sorted(sub.member_states) == [
            s for s in range(64) if drow[s] < sub.radius]

    def test_redirected_rewards_match_parent(self):
        spec = make_lattice(LatticeConfig(dims=[10], seed=3), 0.5)
        sub = build_submdp(spec, center=5, epsilon=0.5)
        assert np.allclose(sub.local_spec.rewards,
                           spec.rewards[sub.member_states])

    def test_center_out_of_range(self):
        spec = make_lattice(LatticeConfig(dims=[10], seed=3), 0.5)
        with pytest.raises(DomainError):
            build_submdp(spec, center=10, epsilon=0.5)


class TestLocalApproximationEnvelope:
    def test_envelope_holds_on_random_lattices(self):
        # restricted optimum vs parent optimum, both by exact value iteration
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(8):
            spec = random_lattice(rng, max_cells=120, gamma=float(rng.choice([0.5, 0.6])))
            eps = float(rng.choice([0.1, 0.25, 0.5]))
            v_parent, _ = value_iteration(spec, 1e-9)
            for center in rng.integers(0, spec.num_states, size=3):
                sub = build_submdp(spec, int(center), eps)
                v_sub, _ = value_iteration(sub.local_spec, 1e-9)
                drow = spec.metric.distance_row(int(center))
                for i, s in enumerate(sub.member_states):
                    bound = error_envelope(eps, spec.discount, drow[s]) + 2e-9
                    assert abs(v_sub[i] - v_parent[s]) <= bound
                    checked += 1
        assert checked > 200

    def test_center_error_within_construction_epsilon(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            spec = random_lattice(rng, max_cells=100, gamma=0.5)
            eps = 0.4
            v_parent, _ = value_iteration(spec, 1e-9)
            center = int(rng.integers(spec.num_states))
            sub = build_submdp(spec, center, eps)
            v_sub, _ = value_iteration(sub.local_spec, 1e-9)
            assert abs(v_sub[sub.local_index(center)] - v_parent[center]) <= eps + 2e-9


class TestPlanCenters:
    def test_small_instance_clamps_to_all_states(self):
        spec = make_lattice(LatticeConfig(dims=[3], seed=0), 0.5)
        plan = plan_centers(spec, epsilon=0.1, delta=0.1)
        assert sorted(plan.centers) == [0, 1, 2]
        assert len(plan.clamped_states) == 3

    def test_recount_matches_plan(self):
        spec = make_lattice(LatticeConfig(dims=[7, 5], seed=4, slip_prob=0.1), 0.5)
        plan = plan_centers(spec, epsilon=0.5, delta=0.5)
        r = plan.coverage_radius
        for s in range(spec.num_states):
            ball = metric_ball(spec.metric, s, r + 1)
            recount = sum(1 for c in plan.centers if c in set(ball))
            assert recount == plan.per_state_cover_count[s]

    def test_coverage_meets_clamped_requirement(self):
        spec = make_lattice(LatticeConfig(dims=[6, 6], seed=5), 0.5)
        plan = plan_centers(spec, epsilon=0.4, delta=0.4)
        target = plan.target_overlap
        for s in range(spec.num_states):
            ball = metric_ball(spec.metric, s, plan.coverage_radius + 1)
            assert plan.per_state_cover_count[s] >= min(target, len(ball))

    def test_json_roundtrip_fields(self):
        spec = make_lattice(LatticeConfig(dims=[4], seed=1), 0.5)
        doc = plan_centers(spec, 0.3, 0.3).to_json_dict()
        assert set(doc) == {"centers", "coverage_radius", "target_overlap",
                            "clamped_states"}


class TestFuseEstimates:
    def test_single_estimate(self):
        fused, tail = fuse_estimates([(3.2, 0.5)])
        assert fused == 3.2
        assert tail(0.5) <= 2.0

    def test_zero_spread(self):
        fused, tail = fuse_estimates([(7.0, 0.1)] * 20)
        assert fused == 7.0
        assert tail(0.01) < 1.0

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            fuse_estimates([])

    def test_monte_carlo_deviation_frequency_below_tail(self):
        # estimates uniform within +/- 2*eps0 of truth; empirical deviation
        # frequency of the fused mean must sit below the Hoeffding tail
        rng = np.random.default_rng(13)
        truth = 5.0
        eps0 = 0.2
        n = 100
        trials = 10_000
        draws = truth + rng.uniform(-2 * eps0, 2 * eps0, size=(trials, n))
        fused = draws.mean(axis=1)
        _, tail = fuse_estimates([(truth, 2 * eps0)] * n)
        for u in (0.02, 0.05, 0.1):
            freq = float(np.mean(np.abs(fused - truth) >= u))
            assert freq <= tail(u) + 1e-12

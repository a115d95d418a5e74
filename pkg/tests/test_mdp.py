import json

import numpy as np
import pytest

from pdql.errors import DimensionMismatch, NonConvergence, ValidationFailure
from pdql.lattice import LatticeConfig, RewardSpec, make_lattice
from pdql.mdp import (
    HopMetric,
    LatticeMetric,
    MdpSpec,
    bellman_q,
    bellman_residual,
    finite_horizon_values,
    greedy_policy,
    mean_error,
    metric_ball,
    sample_transition,
    validate_mdp,
    value_iteration,
)
from pdql.submdp import truncation_radius


def two_state_chain():
    # s0 -> s1, s1 -> s0, single action
    rows = [[[(1.0, 1)]], [[(1.0, 0)]]]
    return MdpSpec.from_rows(2, 1, 0.9, [[1.0], [0.0]], rows, LatticeMetric([2]))


def single_state(reward, gamma):
    return MdpSpec.from_rows(1, 1, gamma, [[reward]], [[[(1.0, 0)]]],
                             LatticeMetric([1]))


def random_dense_mdp(n, a, gamma, seed):
    rng = np.random.default_rng(seed)
    transitions = rng.dirichlet(np.ones(n), size=(n, a))
    rewards = rng.random((n, a))
    spec = MdpSpec.from_dense(transitions, rewards, gamma, None)
    spec.metric = HopMetric.from_transition_support(spec.succ_states, spec.succ_probs)
    return spec


class TestValidation:
    def test_smallest_valid_chain_passes(self):
        report = validate_mdp(two_state_chain())
        assert report.ok
        assert {c.name for c in report.checks} >= {
            "distribution", "reward_range", "locality", "metric_triangle"}

    def test_bad_row_sum_fails_distribution(self):
        spec = two_state_chain()
        spec.succ_probs[0, 0, 0] = 0.8
        report = validate_mdp(spec)
        assert not report.ok
        assert report.failed_names() == ["distribution"]
        with pytest.raises(ValidationFailure, match="distribution"):
            report.require()

    def test_two_cell_jump_fails_locality(self):
        spec = make_lattice(LatticeConfig(dims=[4, 4], seed=0), 0.9)
        # reroute one deterministic move two cells away
        spec.succ_states[5, 0] = 7  # (1,1) -> (1,3): Manhattan distance 2
        report = validate_mdp(spec)
        assert "locality" in report.failed_names()

    def test_reward_out_of_range(self):
        spec = two_state_chain()
        spec.rewards[0, 0] = 1.5
        assert "reward_range" in validate_mdp(spec).failed_names()

    def test_sampled_metric_path_on_larger_lattice(self):
        spec = make_lattice(LatticeConfig(dims=[20, 20], seed=3,
                                          slip_prob=0.1), 0.9)
        report = validate_mdp(spec, sample_budget=2000, seed=11)
        assert report.ok


class TestValueIteration:
    def test_self_loop_unit_reward(self):
        v, q = value_iteration(single_state(1.0, 0.9), 1e-8)
        assert v[0] == pytest.approx(10.0, abs=1e-7)
        assert q.shape == (1, 1)

    def test_self_loop_zero_reward(self):
        v, _ = value_iteration(single_state(0.0, 0.9), 1e-8)
        assert v[0] == 0.0

    def test_matches_exact_policy_evaluation(self):
        # independent oracle: solve the greedy policy's linear system exactly
        spec = random_dense_mdp(20, 3, 0.9, seed=7)
        v, q = value_iteration(spec, 1e-9)
        policy = greedy_policy(q)
        dense = spec.dense_transitions()
        p_pi = dense[np.arange(20), policy]
        r_pi = spec.rewards[np.arange(20), policy]
        v_exact = np.linalg.solve(np.eye(20) - spec.discount * p_pi, r_pi)
        assert np.abs(v - v_exact).max() < 1e-6

    def test_residual_contract(self):
        spec = random_dense_mdp(15, 2, 0.95, seed=3)
        for tol in (1e-4, 1e-8):
            v, q = value_iteration(spec, tol)
            assert bellman_residual(spec, v) <= tol
            assert np.allclose(v, q.max(axis=1))

    def test_value_range_invariant(self):
        spec = random_dense_mdp(10, 2, 0.8, seed=5)
        v, q = value_iteration(spec, 1e-8)
        bound = 1.0 / (1.0 - spec.discount)
        assert (q >= 0).all() and (q <= bound + 1e-9).all()

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            value_iteration(single_state(0.5, 0.9), 0.0)


class TestFiniteHorizon:
    def test_horizon_zero_is_max_immediate_reward(self):
        spec = random_dense_mdp(6, 3, 0.9, seed=2)
        spec.rewards[:] = 0.5
        assert np.allclose(finite_horizon_values(spec, 0), 0.5)

    def test_long_horizon_converges_to_infinite(self):
        spec = random_dense_mdp(12, 2, 0.9, seed=9)
        tol = 1e-6
        v_inf, _ = value_iteration(spec, tol)
        horizon = int(np.ceil(np.log(tol * 0.1) / np.log(0.9)))
        v_t = finite_horizon_values(spec, horizon)
        assert np.abs(v_inf - v_t).max() < 10 * tol

    def test_geometric_tail_on_all_ones_rewards(self):
        # all-ones rewards: V* - V^T equals gamma^(T+1)/(1-gamma) exactly
        spec = random_dense_mdp(8, 2, 0.5, seed=4)
        spec.rewards[:] = 1.0
        v_t = finite_horizon_values(spec, 2)
        v_inf, _ = value_iteration(spec, 1e-10)
        gap = (v_inf - v_t).max()
        assert gap == pytest.approx(0.5**3 / 0.5, abs=1e-8)
        assert gap <= 0.25

    def test_monotone_in_horizon(self):
        spec = random_dense_mdp(10, 2, 0.85, seed=6)
        v_inf, _ = value_iteration(spec, 1e-9)
        prev = finite_horizon_values(spec, 0)
        for horizon in range(1, 12):
            cur = finite_horizon_values(spec, horizon)
            assert (cur >= prev - 1e-12).all()
            assert (cur <= v_inf + 1e-9).all()
            prev = cur

    def test_truncation_radius_bounds_gap(self):
        # the advertised horizon makes the finite-horizon optimum eps-close
        rng = np.random.default_rng(0)
        for _ in range(6):
            gamma = rng.choice([0.5, 0.9])
            eps = rng.choice([0.05, 0.1, 0.25])
            spec = random_dense_mdp(12, 2, float(gamma), seed=int(rng.integers(1e6)))
            horizon = truncation_radius(float(eps), float(gamma))
            v_inf, _ = value_iteration(spec, 1e-10)
            v_t = finite_horizon_values(spec, horizon)
            assert (v_inf - v_t).max() <= eps + 2e-10

    def test_negative_horizon_rejected(self):
        with pytest.raises(ValueError):
            finite_horizon_values(single_state(0.5, 0.9), -1)


class TestGreedyAndErrors:
    def test_argmax_row(self):
        assert greedy_policy(np.array([[1.0, 2.0]]))[0] == 1

    def test_tie_breaks_low(self):
        assert greedy_policy(np.array([[3.0, 3.0]]))[0] == 0

    def test_all_equal_gives_zeros(self):
        assert (greedy_policy(np.full((5, 3), 2.0)) == 0).all()

    def test_shift_invariance(self):
        q = np.random.default_rng(1).random((7, 4))
        assert (greedy_policy(q) == greedy_policy(q + 3.7)).all()

    def test_mean_error_identity_and_shift(self):
        v = np.array([1.0, 2.0, 3.0])
        assert mean_error(v, v) == 0.0
        assert mean_error(v + 0.5, v) == pytest.approx(0.5)

    def test_mean_error_matches_hand_sum(self):
        rng = np.random.default_rng(3)
        v, oracle = rng.random(40), rng.random(40)
        hand = sum(v[i] - oracle[i] for i in range(40)) / 40
        assert mean_error(v, oracle) == pytest.approx(hand)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mean_error(np.zeros(3), np.zeros(4))


class TestSampling:
    def test_point_mass(self):
        spec = two_state_chain()
        rng = np.random.default_rng(0)
        assert all(sample_transition(spec, 0, 0, rng)[0] == 1 for _ in range(50))

    def test_expected_reward_returned(self):
        spec = two_state_chain()
        _, r = sample_transition(spec, 0, 0, np.random.default_rng(0))
        assert r == 1.0

    def test_uniform_frequencies(self):
        rows = [[[(0.25, 0), (0.25, 1), (0.25, 2), (0.25, 3)]]] + \
               [[[(1.0, k)]] for k in range(1, 4)]
        spec = MdpSpec.from_rows(4, 1, 0.9, [[0.0]] * 4, rows, LatticeMetric([4]))
        rng = np.random.default_rng(42)
        counts = np.zeros(4)
        n = 100_000
        for _ in range(n):
            counts[sample_transition(spec, 0, 0, rng)[0]] += 1
        assert np.abs(counts / n - 0.25).max() < 0.01

    def test_fixed_seed_reproduces(self):
        spec = make_lattice(LatticeConfig(dims=[5, 5], slip_prob=0.3, seed=1), 0.9)
        seqs = []
        for _ in range(2):
            rng = np.random.default_rng(17)
            seqs.append([sample_transition(spec, 12, 2, rng)[0] for _ in range(200)])
        assert seqs[0] == seqs[1]


class TestSerialization:
    def test_roundtrip_preserves_arrays(self):
        spec = make_lattice(LatticeConfig(dims=[4, 3], slip_prob=0.2, seed=5), 0.8)
        clone = MdpSpec.from_json_dict(json.loads(spec.to_json()))
        assert clone.num_states == spec.num_states
        assert np.allclose(clone.rewards, spec.rewards)
        assert np.allclose(clone.dense_transitions(), spec.dense_transitions())
        assert clone.metric.dims == spec.metric.dims

    def test_byte_stable_dump(self):
        spec = make_lattice(LatticeConfig(dims=[3, 3], slip_prob=0.1, seed=2), 0.9)
        text = spec.to_json()
        clone = MdpSpec.from_json_dict(json.loads(text))
        assert clone.to_json() == text
        assert text.index('"num_states"') < text.index('"transitions"')

    def test_save_load(self, tmp_path):
        spec = make_lattice(LatticeConfig(dims=[6], seed=0), 0.5)
        spec.save(tmp_path / "spec.json")
        clone = MdpSpec.load(tmp_path / "spec.json")
        v1, _ = value_iteration(spec, 1e-8)
        v2, _ = value_iteration(clone, 1e-8)
        assert np.allclose(v1, v2)


class TestMetricBall:
    def test_ball_matches_manhattan(self):
        metric = LatticeMetric([7, 7])
        ball = metric_ball(metric, 24, 3)  # center cell, strict radius 3
        expected = [s for s in range(49) if metric.distance(24, s) < 3]
        assert sorted(ball) == expected

    def test_wrap_ring_neighbors(self):
        metric = LatticeMetric([50], wrap=True)
        assert list(metric.neighbors(0)) == [1, 49]
        assert metric.distance(0, 49) == 1

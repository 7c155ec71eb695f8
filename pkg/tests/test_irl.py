"""Apprenticeship loop: reward algebra, the separating program at the IRL
surface, termination rules, and reproducibility."""

import numpy as np
import pytest

from uavirl.irl import (
    IrlResult,
    hyper_distance,
    normalize_weights,
    policy_value,
    reward,
    run_irl,
    solve_min_norm_svm,
)
from uavirl.policies import GreedyQPolicy
from uavirl.qp import QpStatus
from uavirl.trajectories import feature_expectation
from uavirl.world import Action


class TestRewardAlgebra:
    def test_basis_projection(self):
        w = np.array([1.0, 0, 0, 0, 0])
        assert reward(w, np.array([0.5, 0.9, 0.1, 0.3, 0.7])) == 0.5

    def test_zero_weights(self, rng):
        for _ in range(10):
            assert reward(np.zeros(5), rng.uniform(0, 1, 5)) == 0.0

    def test_matches_hand_dot_product(self, rng):
        for _ in range(50):
            w = rng.normal(size=5)
            phi = rng.uniform(0, 1, 5)
            assert reward(w, phi) == pytest.approx(float(sum(w * phi)), rel=1e-12)

    def test_policy_value_linearity(self, rng):
        for _ in range(50):
            w = rng.normal(size=5)
            mu1, mu2 = rng.uniform(0, 10, size=(2, 5))
            a, b = rng.normal(size=2)
            combined = policy_value(w, a * mu1 + b * mu2)
            assert combined == pytest.approx(
                a * policy_value(w, mu1) + b * policy_value(w, mu2), rel=1e-9, abs=1e-12
            )


class TestNormalize:
    def test_three_four_five(self):
        out = normalize_weights(np.array([3.0, 4.0, 0, 0, 0]))
        assert np.allclose(out, [0.6, 0.8, 0, 0, 0], rtol=1e-15)

    def test_idempotent_on_unit(self, rng):
        w = rng.normal(size=5)
        unit = normalize_weights(w)
        again = normalize_weights(unit)
        assert np.allclose(again, unit, atol=1e-15)

    def test_preserves_signs(self, rng):
        for _ in range(20):
            w = rng.normal(size=5)
            out = normalize_weights(w)
            assert np.all(np.sign(out) == np.sign(w))

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            normalize_weights(np.zeros(5))


class TestHyperDistance:
    def test_equal_mus_zero(self, rng):
        w = normalize_weights(rng.normal(size=5))
        mu = rng.uniform(0, 10, 5)
        assert hyper_distance(w, mu, mu) == 0.0

    def test_basis_projection(self):
        w = np.array([1.0, 0, 0, 0, 0])
        mu1 = np.array([0.7, 1, 2, 3, 4])
        mu2 = np.array([0.4, 9, 9, 9, 9])
        assert hyper_distance(w, mu1, mu2) == pytest.approx(0.3)

    def test_cauchy_schwarz_bound(self):
        rng = np.random.default_rng(606)
        for _ in range(10_000):
            w = normalize_weights(rng.normal(size=5))
            mu1 = rng.uniform(0, 14, 5)
            mu2 = rng.uniform(0, 14, 5)
            assert hyper_distance(w, mu1, mu2) <= np.linalg.norm(mu1 - mu2) + 1e-12


class TestSeparatingProgram:
    def test_spec_cases(self):
        sol = solve_min_norm_svm(np.array([1.0, 0, 0, 0, 0]), [np.array([-1.0, 0, 0, 0, 0])])
        assert sol.status is QpStatus.OPTIMAL
        assert np.allclose(sol.w, [1, 0, 0, 0, 0], atol=1e-10)

        sol = solve_min_norm_svm(np.array([1.0, 0, 0, 0, 0]), [np.array([0.0, 1, 0, 0, 0])])
        assert np.allclose(sol.w, [1, -1, 0, 0, 0], atol=1e-10)

        sol = solve_min_norm_svm(np.array([1.0, 0, 0, 0, 0]), [np.array([1.0, 0, 0, 0, 0])])
        assert sol.status is QpStatus.INFEASIBLE

    def test_unnormalized_margins(self, rng):
        for _ in range(30):
            mu_e = rng.uniform(0, 14, 5)
            mus = [rng.uniform(-14, 14, 5) for _ in range(int(rng.integers(1, 8)))]
            sol = solve_min_norm_svm(mu_e, mus)
            if sol.status is QpStatus.OPTIMAL:
                assert sol.w @ mu_e >= 1 - 1e-8
                for mu in mus:
                    assert sol.w @ mu <= -1 + 1e-8


class _StubLearner:
    """Minimal estimator: its policy replays a fixed action sequence."""

    def __init__(self, actions=(7, 7, 7, 7, 1, 1), seed=0):
        self.actions = tuple(actions)
        self.seed = seed

    def get_params(self, deep=True):
        return {"actions": self.actions, "seed": self.seed}

    def set_params(self, **params):
        for key, value in params.items():
            if not hasattr(self, key):
                raise ValueError(key)
            setattr(self, key, value)
        return self

    def fit(self, scenario, weights):
        self.fitted_ = True
        return self

    def policy(self):
        actions = self.actions

        class _P:
            def begin(self, run_index):
                pass

            def act(self, t, phi):
                return actions[min(t, len(actions) - 1)]

        return _P()


class TestRunIrl:
    def test_huge_threshold_one_iteration(self, scenario, expert_trajs):
        result = run_irl(
            scenario, expert_trajs, _StubLearner(actions=(1,) * 15),
            eps_irl=1e9, max_iters=10, master_seed=3,
        )
        assert result.converged
        assert result.reason == "hyper-distance"
        assert len(result.log) == 1

    def test_perfect_imitation_terminates_immediately(self, scenario, expert_trajs):
        expert_actions = tuple(rec.action for rec in expert_trajs[0].steps)
        result = run_irl(
            scenario, expert_trajs, _StubLearner(actions=expert_actions),
            eps_irl=0.1, max_iters=10, master_seed=3,
        )
        assert result.converged
        assert len(result.log) == 1
        assert result.log[0].hyper_distance == pytest.approx(0.0, abs=1e-12)
        assert result.log[0].l2_gap == pytest.approx(0.0, abs=1e-12)

    def test_unmatchable_stub_exhausts_iterations(self, scenario, expert_trajs):
        result = run_irl(
            scenario, expert_trajs, _StubLearner(actions=(1,) * 15),
            eps_irl=1e-6, max_iters=3, master_seed=3,
        )
        assert not result.converged
        assert result.reason == "max-iters"
        assert len(result.log) == 3
        best = min(e.hyper_distance for e in result.log)
        # best-so-far weights are returned
        matching = [e for e in result.log if e.hyper_distance == best]
        assert np.allclose(result.weights, matching[0].w)

    def test_log_reproducible_bit_exact(self, scenario, expert_trajs):
        from uavirl.dqn import DqnLearner

        kwargs = dict(eps_irl=1e-9, max_iters=2, master_seed=17)
        a = run_irl(scenario, expert_trajs, DqnLearner(num_eps=60), **kwargs)
        b = run_irl(scenario, expert_trajs, DqnLearner(num_eps=60), **kwargs)
        assert len(a.log) == len(b.log)
        for x, y in zip(a.log, b.log):
            assert np.array_equal(x.w, y.w)
            assert np.array_equal(x.mu, y.mu)
            assert x.hyper_distance == y.hyper_distance
            assert x.l2_gap == y.l2_gap

    def test_learner_mu_estimated_with_loop_gamma(self, scenario, expert_trajs):
        gamma = 0.9
        expert_actions = tuple(rec.action for rec in expert_trajs[0].steps)
        result = run_irl(
            scenario, expert_trajs, _StubLearner(actions=expert_actions),
            eps_irl=1e9, max_iters=1, master_seed=0, gamma=gamma,
        )
        assert np.allclose(result.mu_expert, feature_expectation(expert_trajs, gamma))
        assert np.allclose(result.log[0].mu, result.mu_expert)

    def test_validation(self, scenario, expert_trajs):
        with pytest.raises(ValueError):
            run_irl(scenario, expert_trajs, _StubLearner(), eps_irl=0.0)
        with pytest.raises(ValueError):
            run_irl(scenario, expert_trajs, _StubLearner(), max_iters=0)

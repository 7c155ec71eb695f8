"""Q-learning with per-action linear function approximation.

One linear model per joint action (bias plus the five state features),
updated online by stochastic gradient descent toward the one-step
Q target. The 36 models together are the learned policy.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericFailure
from .policies import GreedyQPolicy
from .world import (
    NUM_ACTIONS,
    NUM_FEATURES,
    Scenario,
    initial_features,
    reset_state,
    step,
)
from .world import Action

MODEL_WIDTH = NUM_FEATURES + 1  # bias + features


def zero_model() -> np.ndarray:
    return np.zeros((NUM_ACTIONS, MODEL_WIDTH))


def _augment(phi: np.ndarray) -> np.ndarray:
    x = np.empty(MODEL_WIDTH)
    x[0] = 1.0
    x[1:] = phi
    return x


def predict_q(model: np.ndarray, phi: np.ndarray, action: int) -> float:
    """Q(s, a) = theta_a . (1, phi)."""
    return float(model[action] @ _augment(phi))


def q_values(model: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return model @ _augment(phi)


def greedy_action(model: np.ndarray, phi: np.ndarray) -> int:
    """Argmax over the 36 actions; ties break to the lowest joint index."""
    return int(np.argmax(q_values(model, phi)))


def q_target(reward: float, gamma: float, max_next_q: float, done: bool) -> float:
    """One-step target; terminal states do not bootstrap."""
    return reward if done else reward + gamma * max_next_q


def sgd_update(
    model: np.ndarray,
    phi: np.ndarray,
    action: int,
    target: float,
    alpha_sgd: float,
) -> np.ndarray:
    """One SGD step on the squared Q error; only row theta_a changes."""
    x = _augment(phi)
    out = model.copy()
    out[action] = model[action] + alpha_sgd * (target - model[action] @ x) * x
    return out


def epsilon_schedule(episode: int, num_eps: int, eps_floor: float = 0.1) -> float:
    """Exploration probability: 1 for the first tenth of the episodes, then
    linear decay by 1/num_eps per episode down to the floor."""
    if episode < 0:
        raise ValueError("episode must be >= 0")
    warmup = num_eps / 10.0
    if episode <= warmup:
        return 1.0
    return max(eps_floor, 1.0 - (episode - warmup) / num_eps)


class LfaQLearner:
    """Estimator-style trainer for the 36 per-action linear Q models.

    Parameters mirror the experiment configuration: number of training
    episodes, SGD step size, discount, exploration floor, and the seed of
    the training stream (exploration only; the world is deterministic).
    """

    def __init__(
        self,
        num_eps: int = 10_000,
        alpha_sgd: float = 0.001,
        gamma: float = 0.99,
        eps_floor: float = 0.1,
        seed: int = 0,
    ):
        self.num_eps = num_eps
        self.alpha_sgd = alpha_sgd
        self.gamma = gamma
        self.eps_floor = eps_floor
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {
            "num_eps": self.num_eps,
            "alpha_sgd": self.alpha_sgd,
            "gamma": self.gamma,
            "eps_floor": self.eps_floor,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "LfaQLearner":
        for key, value in params.items():
            if not hasattr(self, key):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _validate(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        if w.shape != (NUM_FEATURES,) or not np.all(np.isfinite(w)):
            raise ValueError("reward weights must be 5 finite reals")
        if abs(np.linalg.norm(w) - 1.0) > 1e-6:
            raise ValueError("reward weights must be unit norm")
        if self.num_eps < 0 or self.alpha_sgd <= 0:
            raise ValueError("num_eps must be >= 0 and alpha_sgd > 0")
        if not 0 < self.gamma <= 1 or not 0 < self.eps_floor < 1:
            raise ValueError("gamma must be in (0,1] and eps_floor in (0,1)")
        return w

    def fit(self, scenario: Scenario, reward_weights: np.ndarray) -> "LfaQLearner":
        w = self._validate(reward_weights)
        rng = np.random.default_rng(self.seed)
        theta = zero_model()
        rewards: list[float] = []
        steps_per_ep: list[int] = []
        final_dist: list[int] = []

        for episode in range(self.num_eps):
            eps = epsilon_schedule(episode, self.num_eps, self.eps_floor)
            state = reset_state(scenario)
            phi = initial_features(scenario, state)
            acc = 0.0
            n_steps = 0
            while not state.done:
                if rng.random() < eps:
                    action = int(rng.integers(0, NUM_ACTIONS))
                else:
                    action = greedy_action(theta, phi)
                state, phi_next, metrics = step(scenario, state, Action.from_index(action))
                reward = float(w @ phi_next)
                target = q_target(
                    reward,
                    self.gamma,
                    float(np.max(q_values(theta, phi_next))),
                    state.done,
                )
                x = _augment(phi)
                theta[action] += self.alpha_sgd * (target - theta[action] @ x) * x
                phi = phi_next
                acc += reward
                n_steps += 1
            if not np.isfinite(acc):
                raise NumericFailure(
                    f"training diverged at episode {episode} (reward is not finite)"
                )
            rewards.append(acc)
            steps_per_ep.append(n_steps)
            final_dist.append(metrics.hex_dist_to_dest)

        if not np.all(np.isfinite(theta)):
            raise NumericFailure("model weights are not finite after training")
        self.theta_ = theta
        self.episode_rewards_ = np.asarray(rewards)
        self.episode_steps_ = np.asarray(steps_per_ep, dtype=int)
        self.episode_final_distance_ = np.asarray(final_dist, dtype=int)
        return self

    def predict(self, phi: np.ndarray) -> int:
        self._check_fitted()
        return greedy_action(self.theta_, phi)

    def q_values(self, phi: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return q_values(self.theta_, phi)

    def policy(self) -> GreedyQPolicy:
        self._check_fitted()
        theta = self.theta_
        return GreedyQPolicy(lambda phi: q_values(theta, phi))

    def _check_fitted(self) -> None:
        if not hasattr(self, "theta_"):
            raise RuntimeError("learner is not fitted")

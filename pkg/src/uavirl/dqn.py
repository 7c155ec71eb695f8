"""Deep Q-network learner.

A 5-30-30-36 multilayer perceptron (ReLU hidden layers, linear output)
maps state features to the 36 action values. Training follows the online
batch scheme: every environment step pushes a transition into a FIFO
replay buffer and, once past the warmup episodes, draws a random batch,
builds one-step Q targets, and applies a single Adam step on the MSE of
the selected-action outputs. No target network, no gradient clipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure
from .lfa import epsilon_schedule
from .policies import GreedyQPolicy
from .world import (
    Action,
    NUM_ACTIONS,
    NUM_FEATURES,
    Scenario,
    initial_features,
    reset_state,
    step,
)

HIDDEN = 30
LAYER_SHAPES = ((NUM_FEATURES, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, NUM_ACTIONS))


@dataclass(frozen=True)
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_params(rng: np.random.Generator) -> MlpParams:
    """Hidden layers start uniform in +-sqrt(6/(fan_in+fan_out)); the output
    layer starts at zero so the initial action values are exactly zero and
    early greedy behavior is not driven by initialization noise."""
    weights = []
    for fan_in, fan_out in LAYER_SHAPES:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    return MlpParams(
        w1=weights[0],
        b1=np.zeros(HIDDEN),
        w2=weights[1],
        b2=np.zeros(HIDDEN),
        w3=np.zeros((HIDDEN, NUM_ACTIONS)),
        b3=np.zeros(NUM_ACTIONS),
    )


def zero_like(params: MlpParams) -> MlpParams:
    return MlpParams(*(np.zeros_like(a) for a in params.arrays()))


def mlp_forward(params: MlpParams, phi: np.ndarray) -> np.ndarray:
    """Action values for a single feature vector."""
    return mlp_forward_batch(params, np.asarray(phi, dtype=float)[None, :])[0][0]


def mlp_forward_batch(
    params: MlpParams, x: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Batched forward pass; returns (q, cache) with cache kept for backprop."""
    z1 = x @ params.w1 + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.w2 + params.b2
    h2 = np.maximum(z2, 0.0)
    out = h2 @ params.w3 + params.b3
    return out, (x, z1, h1, z2, h2)


def mse_loss(pred_q: np.ndarray, target_q: np.ndarray) -> float:
    """Mean squared error over the selected-action predictions of a batch."""
    pred_q = np.asarray(pred_q, dtype=float)
    target_q = np.asarray(target_q, dtype=float)
    if pred_q.shape != target_q.shape or pred_q.size == 0:
        raise ValueError("prediction and target batches must match and be non-empty")
    diff = pred_q - target_q
    return float(np.mean(diff * diff))


def backward(
    params: MlpParams,
    batch_phi: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> MlpParams:
    """Gradients of the batch MSE; only the selected action's output carries
    loss per sample, the other 35 outputs receive zero gradient."""
    x = np.asarray(batch_phi, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("batch must be non-empty")
    out, (x, z1, h1, z2, h2) = mlp_forward_batch(params, x)
    rows = np.arange(n)
    d_out = np.zeros_like(out)
    d_out[rows, actions] = 2.0 / n * (out[rows, actions] - targets)

    d_w3 = h2.T @ d_out
    d_b3 = d_out.sum(axis=0)
    d_h2 = d_out @ params.w3.T
    d_z2 = d_h2 * (z2 > 0.0)
    d_w2 = h1.T @ d_z2
    d_b2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ params.w2.T
    d_z1 = d_h1 * (z1 > 0.0)
    d_w1 = x.T @ d_z1
    d_b1 = d_z1.sum(axis=0)
    return MlpParams(w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2, w3=d_w3, b3=d_b3)


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0

    @classmethod
    def fresh(cls, params: MlpParams) -> "AdamState":
        return cls(m=zero_like(params), v=zero_like(params))


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    lr: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[MlpParams, AdamState]:
    """Standard Adam update with bias correction."""
    t = state.t + 1
    new_params = []
    new_m = []
    new_v = []
    for p, g, m, v in zip(
        params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()
    ):
        m2 = beta1 * m + (1.0 - beta1) * g
        v2 = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m2 / (1.0 - beta1**t)
        v_hat = v2 / (1.0 - beta2**t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m2)
        new_v.append(v2)
    return MlpParams(*new_params), AdamState(m=MlpParams(*new_m), v=MlpParams(*new_v), t=t)


class ReplayBuffer:
    """FIFO transition store with bounded capacity (ring buffer: once full,
    each push overwrites the oldest entry)."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._phi = np.empty((capacity, NUM_FEATURES))
        self._action = np.empty(capacity, dtype=int)
        self._reward = np.empty(capacity)
        self._phi_next = np.empty((capacity, NUM_FEATURES))
        self._done = np.empty(capacity, dtype=bool)
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def push(
        self,
        phi: np.ndarray,
        action: int,
        reward: float,
        phi_next: np.ndarray,
        done: bool,
    ) -> None:
        i = self._head
        self._phi[i] = phi
        self._action[i] = action
        self._reward[i] = reward
        self._phi_next[i] = phi_next
        self._done[i] = done
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._head) % self.capacity

    def sample(
        self, rng: np.random.Generator, batch_size: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if batch_size > self._size:
            raise ValueError("not enough transitions to sample a batch")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return (
            self._phi[idx],
            self._action[idx],
            self._reward[idx],
            self._phi_next[idx],
            self._done[idx],
        )

    def entries(self) -> list[tuple[np.ndarray, int, float, np.ndarray, bool]]:
        """Stored transitions, oldest first."""
        order = self._order()
        return [
            (
                self._phi[i].copy(),
                int(self._action[i]),
                float(self._reward[i]),
                self._phi_next[i].copy(),
                bool(self._done[i]),
            )
            for i in order
        ]


def greedy_action_dqn(params: MlpParams, phi: np.ndarray) -> int:
    """Argmax over the 36 network outputs; lowest index wins ties."""
    return int(np.argmax(mlp_forward(params, phi)))


class DqnLearner:
    """Estimator-style DQN trainer."""

    def __init__(
        self,
        num_eps: int = 10_000,
        lr: float = 0.001,
        gamma: float = 0.99,
        eps_floor: float = 0.1,
        batch_size: int = 24,
        replay_capacity: int = 10_000,
        seed: int = 0,
    ):
        self.num_eps = num_eps
        self.lr = lr
        self.gamma = gamma
        self.eps_floor = eps_floor
        self.batch_size = batch_size
        self.replay_capacity = replay_capacity
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {
            "num_eps": self.num_eps,
            "lr": self.lr,
            "gamma": self.gamma,
            "eps_floor": self.eps_floor,
            "batch_size": self.batch_size,
            "replay_capacity": self.replay_capacity,
            "seed": self.seed,
        }

    def set_params(self, **params) -> "DqnLearner":
        for key, value in params.items():
            if not hasattr(self, key):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, scenario: Scenario, reward_weights: np.ndarray) -> "DqnLearner":
        w = np.asarray(reward_weights, dtype=float)
        if w.shape != (NUM_FEATURES,) or not np.all(np.isfinite(w)):
            raise ValueError("reward weights must be 5 finite reals")
        if abs(np.linalg.norm(w) - 1.0) > 1e-6:
            raise ValueError("reward weights must be unit norm")

        rng = np.random.default_rng(self.seed)
        params = init_params(rng)
        adam = AdamState.fresh(params)
        replay = ReplayBuffer(self.replay_capacity)
        warmup = self.num_eps / 10.0

        rewards: list[float] = []
        steps_per_ep: list[int] = []
        final_dist: list[int] = []
        training_steps = 0

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
                    action = greedy_action_dqn(params, phi)
                state, phi_next, metrics = step(scenario, state, Action.from_index(action))
                reward = float(w @ phi_next)
                replay.push(phi, action, reward, phi_next, state.done)

                if episode > warmup and len(replay) >= self.batch_size:
                    b_phi, b_act, b_rew, b_next, b_done = replay.sample(
                        rng, self.batch_size
                    )
                    q_next, _ = mlp_forward_batch(params, b_next)
                    targets = b_rew + self.gamma * np.max(q_next, axis=1) * (~b_done)
                    grads = backward(params, b_phi, b_act, targets)
                    params, adam = adam_step(params, grads, adam, lr=self.lr)
                    training_steps += 1

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

        if not params.all_finite():
            raise NumericFailure("network parameters are not finite after training")
        self.params_ = params
        self.episode_rewards_ = np.asarray(rewards)
        self.episode_steps_ = np.asarray(steps_per_ep, dtype=int)
        self.episode_final_distance_ = np.asarray(final_dist, dtype=int)
        self.training_steps_ = training_steps
        return self

    def predict(self, phi: np.ndarray) -> int:
        self._check_fitted()
        return greedy_action_dqn(self.params_, phi)

    def q_values(self, phi: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return mlp_forward(self.params_, phi)

    def policy(self) -> GreedyQPolicy:
        self._check_fitted()
        params = self.params_
        return GreedyQPolicy(lambda phi: mlp_forward(params, phi))

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise RuntimeError("learner is not fitted")

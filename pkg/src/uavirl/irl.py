"""Apprenticeship learning: recover reward weights from demonstrations by
feature-expectation matching.

Each iteration solves the min-norm separating-weights program between the
expert's feature expectation and every feature expectation produced by a
previously trained policy, normalizes the weights, trains a fresh policy
against the implied reward, rolls it out greedily, and appends its feature
expectation to the constraint set. The loop stops when the hyper distance
|w . (mu_i - mu_E)| falls below the threshold, when the program becomes
infeasible (the expert is no longer separable from the learners), or when
the iteration budget runs out.

Reward weights are plain 5-vectors; helpers below enforce the unit-norm
convention the learners expect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure
from .policies import rollout
from .qp import QpSolution, QpStatus, solve_min_norm_qp
from .seeding import derive_rng, derive_seed
from .trajectories import Trajectory, feature_expectation, policy_source
from .world import NUM_FEATURES, Scenario

DEFAULT_EPS_IRL = 0.1
DEFAULT_MAX_ITERS = 25
DEFAULT_GAMMA = 0.99
DEFAULT_EVAL_ROLLOUTS = 25


def reward(w: np.ndarray, phi: np.ndarray) -> float:
    """Linear reward: w . phi."""
    return float(np.dot(w, phi))


def policy_value(w: np.ndarray, mu: np.ndarray) -> float:
    """Value of a policy with feature expectation mu under weights w."""
    return float(np.dot(w, mu))


def normalize_weights(w: np.ndarray) -> np.ndarray:
    """w / ||w||_2; rejects the zero vector."""
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero weight vector")
    return w / norm


def hyper_distance(w: np.ndarray, mu_learner: np.ndarray, mu_expert: np.ndarray) -> float:
    """|w . mu_learner - w . mu_expert|, the loop's termination statistic."""
    return abs(policy_value(w, mu_learner) - policy_value(w, mu_expert))


def solve_min_norm_svm(
    mu_expert: np.ndarray, mu_learners: list[np.ndarray]
) -> QpSolution:
    """Min-norm weights separating the expert from all learner policies.

    Minimizes ||w||^2 subject to w.mu_E >= 1 and w.mu_i <= -1 for every
    learner feature expectation.
    """
    mu_expert = np.asarray(mu_expert, dtype=float)
    rows = [-mu_expert] + [np.asarray(mu, dtype=float) for mu in mu_learners]
    G = np.vstack(rows)
    h = -np.ones(len(rows))
    return solve_min_norm_qp(G, h)


@dataclass(frozen=True)
class IrlIterationLog:
    iteration: int
    w: np.ndarray
    mu: np.ndarray
    hyper_distance: float
    l2_gap: float


@dataclass(frozen=True)
class IrlResult:
    weights: np.ndarray
    learner: object  # the fitted policy learner of the returned weights
    log: tuple[IrlIterationLog, ...]
    converged: bool
    reason: str  # "hyper-distance" | "qp-infeasible" | "max-iters"
    mu_expert: np.ndarray


def _clone_learner(learner, seed: int):
    fresh = type(learner)(**learner.get_params())
    fresh.set_params(seed=seed)
    return fresh


def run_irl(
    scenario: Scenario,
    expert_trajs: list[Trajectory],
    learner,
    eps_irl: float = DEFAULT_EPS_IRL,
    max_iters: int = DEFAULT_MAX_ITERS,
    gamma: float = DEFAULT_GAMMA,
    master_seed: int = 0,
    eval_rollouts: int = DEFAULT_EVAL_ROLLOUTS,
    progress=None,
) -> IrlResult:
    """Drive the apprenticeship loop with the given policy learner.

    The learner is an estimator (fit(scenario, weights) / policy()); a
    fresh clone with a derived seed is trained each iteration. ``progress``
    is an optional callback receiving each IrlIterationLog as it is made.
    """
    if eps_irl <= 0:
        raise ValueError("eps_irl must be > 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if eval_rollouts < 1:
        raise ValueError("eval_rollouts must be >= 1")

    mu_expert = feature_expectation(expert_trajs, gamma)
    horizon = 1.0 / (1.0 - gamma) if gamma < 1.0 else float(scenario.dist_limit)
    rng = derive_rng(master_seed, "irl-init-mu")
    mus: list[np.ndarray] = [rng.uniform(0.0, horizon, size=NUM_FEATURES)]

    logs: list[IrlIterationLog] = []
    best: tuple[float, np.ndarray, object] | None = None

    for iteration in range(max_iters):
        solution = solve_min_norm_svm(mu_expert, mus)
        if solution.status is QpStatus.INFEASIBLE:
            if best is None:
                raise NumericFailure(
                    "separating weights are infeasible before any policy was trained"
                )
            _, w_best, learner_best = best
            return IrlResult(
                weights=w_best,
                learner=learner_best,
                log=tuple(logs),
                converged=True,
                reason="qp-infeasible",
                mu_expert=mu_expert,
            )
        w = normalize_weights(solution.w)

        trained = _clone_learner(
            learner, derive_seed(master_seed, "policy-train", iteration)
        )
        trained.fit(scenario, w)
        policy = trained.policy()
        trajs = [
            rollout(
                scenario,
                policy,
                run_index=r,
                source=policy_source(type(trained).__name__),
            )[0]
            for r in range(eval_rollouts)
        ]
        mu_i = feature_expectation(trajs, gamma)
        mus.append(mu_i)

        distance = hyper_distance(w, mu_i, mu_expert)
        l2_gap = float(np.linalg.norm(mu_i - mu_expert))
        entry = IrlIterationLog(
            iteration=iteration,
            w=w,
            mu=mu_i,
            hyper_distance=distance,
            l2_gap=l2_gap,
        )
        logs.append(entry)
        if progress is not None:
            progress(entry)

        if best is None or distance < best[0]:
            best = (distance, w, trained)

        if distance < eps_irl:
            return IrlResult(
                weights=w,
                learner=trained,
                log=tuple(logs),
                converged=True,
                reason="hyper-distance",
                mu_expert=mu_expert,
            )

    _, w_best, learner_best = best  # max_iters exhausted: best-so-far artifacts
    return IrlResult(
        weights=w_best,
        learner=learner_best,
        log=tuple(logs),
        converged=False,
        reason="max-iters",
        mu_expert=mu_expert,
    )

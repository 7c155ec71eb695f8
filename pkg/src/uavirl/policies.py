"""Policy handles and the rollout loop shared by learners, baselines, the
evaluation harness, and the demonstration service."""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .trajectories import StepRecord, Trajectory
from .world import (
    Action,
    CellCoord,
    Scenario,
    StepMetrics,
    initial_features,
    reset_state,
    scenario_id,
    step,
)


class Policy(Protocol):
    """A decision rule over state features.

    ``begin`` is called once per episode (policies that draw random numbers
    reseed themselves from the run index so independent rollouts never share
    a stream); ``act`` maps the current step index and state features to a
    joint action index in 0..35.
    """

    def begin(self, run_index: int) -> None: ...

    def act(self, t: int, phi: np.ndarray) -> int: ...


class GreedyQPolicy:
    """Greedy argmax over any callable phi -> 36 action values."""

    def __init__(self, q_fn):
        self._q_fn = q_fn

    def begin(self, run_index: int) -> None:
        pass

    def act(self, t: int, phi: np.ndarray) -> int:
        return int(np.argmax(self._q_fn(phi)))


def rollout(
    scenario: Scenario,
    policy: Policy,
    run_index: int = 0,
    start_cell: CellCoord | None = None,
    source: str = "policy:unnamed",
) -> tuple[Trajectory, list[StepMetrics]]:
    """Run one episode to termination and record it.

    The policy observes the features of the state it is in: the reset
    features at t=0, afterwards the post-step features of the previous step.
    """
    state = reset_state(scenario, start_cell)
    phi = initial_features(scenario, state)
    policy.begin(run_index)
    records: list[StepRecord] = []
    metrics_list: list[StepMetrics] = []
    t = 0
    while not state.done:
        action_index = policy.act(t, phi)
        state, phi, metrics = step(scenario, state, Action.from_index(action_index))
        records.append(
            StepRecord(
                t=t,
                cell=state.cell,
                action=action_index,
                phi=tuple(float(x) for x in phi),
                throughput_bps=metrics.throughput_bps,
                interference_w=metrics.interference_w,
                done=state.done,
            )
        )
        metrics_list.append(metrics)
        t += 1
    traj = Trajectory(scenario_id=scenario_id(scenario), source=source, steps=tuple(records))
    return traj, metrics_list

"""Trajectory recording, persistence, and discounted feature expectations.

A trajectory is the ordered list of per-step records produced by one
episode (expert demonstration or policy rollout). Files are line-delimited
JSON: one header line, then one record per step, UTF-8 with LF line
endings, so that identical episodes always serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaVersionError, TrajectoryFormatError
from .world import (
    Action,
    CellCoord,
    NUM_ACTIONS,
    NUM_FEATURES,
    Scenario,
    neighbor,
    reset_state,
    step,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SOURCE_HUMAN = "human-expert"
SOURCE_SCRIPTED = "scripted-expert"


def policy_source(name: str) -> str:
    return f"policy:{name}"


@dataclass(frozen=True)
class StepRecord:
    t: int
    cell: CellCoord
    action: int
    phi: tuple[float, float, float, float, float]
    throughput_bps: float
    interference_w: float
    done: bool


@dataclass(frozen=True)
class Trajectory:
    scenario_id: str
    source: str
    steps: tuple[StepRecord, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise TrajectoryFormatError("trajectory must have at least one step")
        for i, rec in enumerate(self.steps):
            if rec.t != i:
                raise TrajectoryFormatError(
                    f"step indices must be consecutive from 0, got t={rec.t} at {i}"
                )
            if not 0 <= rec.action < NUM_ACTIONS:
                raise TrajectoryFormatError(f"action out of range: {rec.action}")
            if len(rec.phi) != NUM_FEATURES:
                raise TrajectoryFormatError("phi must have 5 entries")
        done_flags = [rec.done for rec in self.steps]
        if done_flags != [False] * (len(self.steps) - 1) + [True]:
            raise TrajectoryFormatError(
                "exactly the last record must carry done=true"
            )


def discounted_feature_sum(traj: Trajectory, gamma: float) -> np.ndarray:
    """Sum of gamma^t * phi_t over the trajectory's steps."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    total = np.zeros(NUM_FEATURES)
    g = 1.0
    for rec in traj.steps:
        total += g * np.asarray(rec.phi)
        g *= gamma
    return total


def feature_expectation(trajs: list[Trajectory], gamma: float) -> np.ndarray:
    """Discounted feature sums averaged over trajectories of one scenario."""
    if not trajs:
        raise ValueError("need at least one trajectory")
    ids = {t.scenario_id for t in trajs}
    if len(ids) != 1:
        raise ValueError(f"trajectories span multiple scenarios: {sorted(ids)}")
    acc = np.zeros(NUM_FEATURES)
    for traj in trajs:
        acc += discounted_feature_sum(traj, gamma)
    return acc / len(trajs)


def validate_chain(scenario: Scenario, traj: Trajectory, start_cell: CellCoord | None = None) -> None:
    """Check that step cells form a neighbor-or-clamp chain from the start."""
    cur = scenario.source_cell if start_cell is None else start_cell
    for rec in traj.steps:
        action = Action.from_index(rec.action)
        expected = neighbor(scenario, cur, action.move_dir)
        if rec.cell != expected:
            raise TrajectoryFormatError(
                f"step {rec.t}: cell {rec.cell} does not follow from {cur} "
                f"moving {action.move_dir.name}"
            )
        cur = rec.cell


def verify_features(scenario: Scenario, traj: Trajectory, start_cell: CellCoord | None = None) -> list[str]:
    """Replay the action sequence and report any drift between recorded and
    recomputed step data. Returns a list of human-readable messages."""
    drift: list[str] = []
    state = reset_state(scenario, start_cell)
    for rec in traj.steps:
        state, phi, metrics = step(scenario, state, Action.from_index(rec.action))
        if state.cell != rec.cell:
            drift.append(f"step {rec.t}: cell mismatch {rec.cell} vs {state.cell}")
        if not np.allclose(phi, rec.phi, rtol=0, atol=0):
            drift.append(f"step {rec.t}: features drifted")
        if metrics.throughput_bps != rec.throughput_bps:
            drift.append(f"step {rec.t}: throughput drifted")
        if metrics.interference_w != rec.interference_w:
            drift.append(f"step {rec.t}: interference drifted")
        if state.done != rec.done:
            drift.append(f"step {rec.t}: done flag mismatch")
    return drift


# ---------------------------------------------------------------------------
# File format


def trajectory_to_lines(traj: Trajectory) -> str:
    header = {
        "schema_version": SCHEMA_VERSION,
        "scenario_id": traj.scenario_id,
        "source": traj.source,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for rec in traj.steps:
        lines.append(
            json.dumps(
                {
                    "t": rec.t,
                    "cell_q": rec.cell.q,
                    "cell_r": rec.cell.r,
                    "action": rec.action,
                    "phi": list(rec.phi),
                    "throughput_bps": rec.throughput_bps,
                    "interference_w": rec.interference_w,
                    "done": rec.done,
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def trajectory_from_lines(text: str) -> Trajectory:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if len(lines) < 2:
        raise TrajectoryFormatError("trajectory file needs a header and steps")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise TrajectoryFormatError(f"corrupt header: {e}") from e
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported trajectory schema_version: {version}")
    steps = []
    for line in lines[1:]:
        try:
            rec = json.loads(line)
            steps.append(
                StepRecord(
                    t=int(rec["t"]),
                    cell=CellCoord(int(rec["cell_q"]), int(rec["cell_r"])),
                    action=int(rec["action"]),
                    phi=tuple(float(x) for x in rec["phi"]),
                    throughput_bps=float(rec["throughput_bps"]),
                    interference_w=float(rec["interference_w"]),
                    done=bool(rec["done"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise TrajectoryFormatError(f"corrupt step record: {e}") from e
    return Trajectory(
        scenario_id=str(header.get("scenario_id", "")),
        source=str(header.get("source", "")),
        steps=tuple(steps),
    )


class TrajectoryStore:
    """Directory of trajectory files.

    Ids are ``<sequence>-<contenthash>`` so listings are insertion-ordered
    and fully deterministic for a deterministic save sequence. Writers
    append whole files atomically (temp file + rename); readers may run
    concurrently.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def save(self, traj: Trajectory) -> str:
        payload = trajectory_to_lines(traj)
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]
        seq = len(self.ids()) + 1
        traj_id = f"{seq:06d}-{digest}"
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(payload)
            os.replace(tmp, self.root / f"{traj_id}.jsonl")
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return traj_id

    def load(self, traj_id: str, verify_scenario: Scenario | None = None) -> Trajectory:
        path = self.root / f"{traj_id}.jsonl"
        if not path.exists():
            raise TrajectoryFormatError(f"no trajectory with id {traj_id}")
        traj = trajectory_from_lines(path.read_text(encoding="utf-8"))
        if verify_scenario is not None:
            for message in verify_features(verify_scenario, traj):
                log.warning("trajectory %s: %s", traj_id, message)
        return traj

    def load_all(self, verify_scenario: Scenario | None = None) -> list[Trajectory]:
        return [self.load(i, verify_scenario) for i in self.ids()]


def trajectory_set_hash(trajs: list[Trajectory]) -> str:
    """Content hash over an ordered set of trajectories (16 hex chars)."""
    digest = hashlib.sha256()
    for traj in trajs:
        digest.update(trajectory_to_lines(traj).encode("utf-8"))
    return digest.hexdigest()[:16]

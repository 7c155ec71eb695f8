"""HTTP service for human expert demonstrations and policy playback.

Sessions wrap the simulator step-by-step so a browser client can enact
joint move/power decisions with live link metrics, then persist the
finished episode in the standard trajectory format for BC/IRL consumption.
Rollout playback serves trained policies as frame lists with the same
shape as live step responses.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import harness, world
from .errors import ConfigError
from .policies import rollout
from .trajectories import (
    SOURCE_HUMAN,
    StepRecord,
    Trajectory,
    TrajectoryStore,
)
from .world import (
    Action,
    Direction,
    Scenario,
    StepMetrics,
    UavState,
    initial_features,
    reset_state,
    scenario_id,
    step,
)

SCHEMA_VERSION = 1


class StepRequest(BaseModel):
    move_dir: str = Field(description="One of N, NE, SE, S, SW, NW")
    power_idx: int = Field(ge=0, le=5)


class CreateSessionRequest(BaseModel):
    scenario: str = Field(description="Scenario ref (file stem under scenarios/)")


@dataclass
class Session:
    id: str
    scenario_ref: str
    scenario: Scenario
    state: UavState
    records: list[StepRecord] = field(default_factory=list)
    finalized_id: str | None = None
    created_at: str = ""
    last_active_at: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _scenario_view(ref: str, scenario: Scenario) -> dict:
    tab = world._tables(scenario)
    cells = []
    for i, cell in enumerate(tab.cells):
        x, y = scenario.bs_positions[i]
        cells.append(
            {
                "index": i,
                "q": cell.q,
                "r": cell.r,
                "center_x": x,
                "center_y": y,
                "ue_count": scenario.ue_count_per_cell[i],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "ref": ref,
        "scenario_id": scenario_id(scenario),
        "grid_cols": scenario.grid_cols,
        "grid_rows": scenario.grid_rows,
        "cell_radius_m": scenario.cell_radius_m,
        "cells": cells,
        "source_index": tab.index_of[scenario.source_cell],
        "dest_index": tab.index_of[scenario.dest_cell],
        "power_levels_w": list(scenario.power_levels_w),
        "dist_limit": scenario.dist_limit,
        "throughput_threshold_bps": scenario.throughput_threshold_bps,
        "channel_mode": scenario.channel.channel_mode.value,
    }


def _state_view(scenario: Scenario, state: UavState) -> dict:
    tab = world._tables(scenario)
    return {
        "cell_index": tab.index_of[state.cell],
        "cell_q": state.cell.q,
        "cell_r": state.cell.r,
        "hops_used": state.hops_used,
        "hops_remaining": scenario.dist_limit - state.hops_used,
        "done": state.done,
        "hex_dist_to_dest": world.hex_distance(state.cell, scenario.dest_cell),
    }


def _step_view(
    scenario: Scenario,
    state: UavState,
    phi: np.ndarray,
    metrics: StepMetrics,
    t: int,
) -> dict:
    tab = world._tables(scenario)
    adjacent = {
        str(j): scenario.ue_count_per_cell[j]
        for j in tab.adjacent[tab.index_of[state.cell]]
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "t": t,
        "state": _state_view(scenario, state),
        "phi": [float(x) for x in phi],
        "throughput_bps": metrics.throughput_bps,
        "interference_w": metrics.interference_w,
        "snr": metrics.snr,
        "serving_bs": metrics.serving_bs,
        "clamped": metrics.clamped,
        "adjacent_ue_counts": adjacent,
    }


class ServiceState:
    def __init__(self, store_dir: Path):
        self.store_dir = Path(store_dir)
        self.scenario_dir = self.store_dir / "scenarios"
        self.policy_dir = self.store_dir / "policies"
        self.trajectory_store = TrajectoryStore(self.store_dir / "trajectories")
        self.sessions: dict[str, Session] = {}
        self.sessions_lock = threading.Lock()

    def scenario_refs(self) -> list[str]:
        if not self.scenario_dir.is_dir():
            return []
        return sorted(p.stem for p in self.scenario_dir.glob("*.json"))

    def load_scenario(self, ref: str) -> Scenario:
        path = self.scenario_dir / f"{ref}.json"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown scenario: {ref}")
        try:
            return harness.load_scenario(path)
        except ConfigError as e:
            raise HTTPException(status_code=500, detail=str(e)) from e

    def policy_refs(self) -> list[dict]:
        if not self.policy_dir.is_dir():
            return []
        out = []
        for path in sorted(self.policy_dir.glob("*.json")):
            try:
                doc = harness.load_model(path)
            except ConfigError:
                continue
            out.append(
                {"ref": path.stem, "kind": doc["kind"], "scenario_id": doc["scenario_id"]}
            )
        return out

    def load_policy_doc(self, ref: str) -> dict:
        path = self.policy_dir / f"{ref}.json"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown policy: {ref}")
        try:
            return harness.load_model(path)
        except ConfigError as e:
            raise HTTPException(status_code=500, detail=str(e)) from e

    def get_session(self, session_id: str) -> Session:
        with self.sessions_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        return session


def create_app(store_dir: str | Path) -> FastAPI:
    state = ServiceState(Path(store_dir))
    app = FastAPI(title="uavirl demonstration service")
    app.state.service = state

    @app.get("/scenarios")
    def list_scenarios() -> dict:
        return {"schema_version": SCHEMA_VERSION, "scenarios": state.scenario_refs()}

    @app.get("/scenarios/{ref}")
    def get_scenario(ref: str) -> dict:
        return _scenario_view(ref, state.load_scenario(ref))

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        scenario = state.load_scenario(request.scenario)
        session = Session(
            id=uuid.uuid4().hex,
            scenario_ref=request.scenario,
            scenario=scenario,
            state=reset_state(scenario),
            created_at=_now(),
            last_active_at=_now(),
        )
        with state.sessions_lock:
            state.sessions[session.id] = session
        phi = initial_features(scenario, session.state)
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.id,
            "scenario": _scenario_view(request.scenario, scenario),
            "state": _state_view(scenario, session.state),
            "phi": [float(x) for x in phi],
            "created_at": session.created_at,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = state.get_session(session_id)
        with session.lock:
            view = {
                "schema_version": SCHEMA_VERSION,
                "session_id": session.id,
                "scenario_ref": session.scenario_ref,
                "scenario_id": scenario_id(session.scenario),
                "state": _state_view(session.scenario, session.state),
                "steps": [
                    {
                        "t": rec.t,
                        "cell_q": rec.cell.q,
                        "cell_r": rec.cell.r,
                        "action": rec.action,
                        "phi": list(rec.phi),
                        "throughput_bps": rec.throughput_bps,
                        "interference_w": rec.interference_w,
                        "done": rec.done,
                    }
                    for rec in session.records
                ],
                "finalized_id": session.finalized_id,
                "created_at": session.created_at,
                "last_active_at": session.last_active_at,
            }
        return view

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, request: StepRequest) -> dict:
        session = state.get_session(session_id)
        try:
            direction = Direction[request.move_dir]
        except KeyError:
            raise HTTPException(
                status_code=422, detail=f"invalid move_dir: {request.move_dir}"
            )
        with session.lock:
            if session.state.done or session.finalized_id is not None:
                raise HTTPException(status_code=409, detail="session already finished")
            action = Action(direction, request.power_idx)
            new_state, phi, metrics = step(session.scenario, session.state, action)
            t = len(session.records)
            session.records.append(
                StepRecord(
                    t=t,
                    cell=new_state.cell,
                    action=action.index,
                    phi=tuple(float(x) for x in phi),
                    throughput_bps=metrics.throughput_bps,
                    interference_w=metrics.interference_w,
                    done=new_state.done,
                )
            )
            session.state = new_state
            session.last_active_at = _now()
            return _step_view(session.scenario, new_state, phi, metrics, t)

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str) -> dict:
        session = state.get_session(session_id)
        with session.lock:
            if session.finalized_id is not None:
                raise HTTPException(status_code=409, detail="session already finalized")
            if not session.state.done:
                raise HTTPException(status_code=409, detail="episode is not finished")
            traj = Trajectory(
                scenario_id=scenario_id(session.scenario),
                source=SOURCE_HUMAN,
                steps=tuple(session.records),
            )
            traj_id = state.trajectory_store.save(traj)
            session.finalized_id = traj_id
            session.last_active_at = _now()
            return {
                "schema_version": SCHEMA_VERSION,
                "trajectory_id": traj_id,
                "steps": len(session.records),
            }

    @app.get("/policies")
    def list_policies() -> dict:
        return {"schema_version": SCHEMA_VERSION, "policies": state.policy_refs()}

    @app.get("/policies/{ref}/rollout")
    def rollout_policy(ref: str, scenario: str | None = None) -> dict:
        doc = state.load_policy_doc(ref)
        refs = state.scenario_refs()
        scenario_ref = scenario
        if scenario_ref is None:
            matches = [
                r
                for r in refs
                if scenario_id(state.load_scenario(r)) == doc["scenario_id"]
            ]
            if not matches:
                raise HTTPException(
                    status_code=409,
                    detail="no stored scenario matches this policy's scenario_id",
                )
            scenario_ref = matches[0]
        sc = state.load_scenario(scenario_ref)
        try:
            policy = harness.policy_from_model(doc, sc)
        except ConfigError as e:
            raise HTTPException(status_code=409, detail=str(e)) from e

        frames = []
        st = reset_state(sc)
        phi = initial_features(sc, st)
        policy.begin(0)
        t = 0
        while not st.done:
            action_index = policy.act(t, phi)
            st, phi, metrics = step(sc, st, Action.from_index(action_index))
            frame = _step_view(sc, st, phi, metrics, t)
            frame["action"] = action_index
            frames.append(frame)
            t += 1
        return {
            "schema_version": SCHEMA_VERSION,
            "policy_ref": ref,
            "kind": doc["kind"],
            "scenario_ref": scenario_ref,
            "frames": frames,
        }

    return app

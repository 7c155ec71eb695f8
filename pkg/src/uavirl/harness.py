"""Experiment orchestration: training runs, policy evaluation with
multi-run averaging, unseen-start comparisons, and CSV export.

Every artifact is a deterministic function of (config, master seed): all
random streams are derived per component, and floats serialize through
repr / fixed significant digits, so identical runs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, dqn, lfa, world
from .channel import ChannelMode
from .errors import ConfigError
from .irl import IrlResult, run_irl
from .policies import GreedyQPolicy, Policy, rollout
from .seeding import derive_rng, derive_seed
from .trajectories import (
    SOURCE_SCRIPTED,
    Trajectory,
    TrajectoryStore,
    feature_expectation,
    trajectory_set_hash,
)
from .world import CellCoord, Scenario, scenario_from_json, scenario_id, scenario_to_json

LEARNER_KINDS = ("irl-lfa", "irl-dqn", "bc", "shortest", "random")

DESK_NUM_EPS = 2000
FULL_NUM_EPS = 10_000

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    scenario_path: Path
    learner_kind: str
    out_dir: Path
    master_seed: int = 0
    channel_mode: ChannelMode | None = None
    num_eps: int | None = None
    eps_irl: float = 0.1
    max_iters: int = 25
    eval_runs: int = 25
    n_expert_trajs: int = 10
    expert_store: Path | None = None
    full: bool = False

    def resolved_num_eps(self) -> int:
        if self.num_eps is not None:
            return self.num_eps
        return FULL_NUM_EPS if self.full else DESK_NUM_EPS


@dataclass(frozen=True)
class MetricsRow:
    index: int
    throughput_mean: float
    throughput_std: float
    interference_mean: float
    interference_std: float
    distance: float
    reward: float


def load_scenario(path: Path, channel_mode: ChannelMode | None = None) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}") from e
    scenario = scenario_from_json(text)
    if channel_mode is not None:
        scenario = world.with_channel_mode(scenario, channel_mode)
    return scenario


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _weights_hash(w: np.ndarray) -> str:
    payload = json.dumps([float(x) for x in w]).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Model artifact files


def save_weights(
    path: Path,
    w: np.ndarray,
    scenario: Scenario,
    learner_kind: str,
    eps_irl: float,
    expert_hash: str,
) -> None:
    _write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "w": [float(x) for x in w],
            "scenario_id": scenario_id(scenario),
            "learner_kind": learner_kind,
            "eps_irl": eps_irl,
            "expert_set_hash": expert_hash,
        },
    )


def load_weights(path: Path) -> tuple[np.ndarray, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(doc["w"], dtype=float), doc


def save_model(path: Path, kind: str, payload: dict, scenario: Scenario) -> None:
    _write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "scenario_id": scenario_id(scenario),
            **payload,
        },
    )


def load_model(path: Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read model file {path}: {e}") from e
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema_version in {path}")
    if doc.get("kind") not in ("lfa", "dqn", "bc", "shortest", "random"):
        raise ConfigError(f"unknown model kind in {path}: {doc.get('kind')}")
    return doc


def policy_from_model(doc: dict, scenario: Scenario) -> Policy:
    """Reconstruct a rollout policy from a model document."""
    if doc["scenario_id"] != scenario_id(scenario):
        raise ConfigError(
            "model was trained on a different scenario "
            f"({doc['scenario_id']} vs {scenario_id(scenario)})"
        )
    kind = doc["kind"]
    if kind == "lfa":
        theta = np.asarray(doc["theta"], dtype=float)
        if theta.shape != (world.NUM_ACTIONS, lfa.MODEL_WIDTH):
            raise ConfigError("lfa model has the wrong shape")
        return GreedyQPolicy(lambda phi: lfa.q_values(theta, phi))
    if kind == "dqn":
        params = _dqn_params_from_doc(doc)
        return GreedyQPolicy(lambda phi: dqn.mlp_forward(params, phi))
    if kind == "bc":
        tree = baselines.tree_from_json(json.dumps(doc["tree"]))
        return baselines.TreePolicy(tree)
    if kind == "shortest":
        return baselines.ShortestPathPolicy(scenario, int(doc["seed"]))
    if kind == "random":
        return baselines.RandomPolicy(int(doc["seed"]))
    raise ConfigError(f"unknown model kind: {kind}")


def _dqn_payload(params: dqn.MlpParams) -> dict:
    return {
        "layers": [
            {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}
            for a in params.arrays()
        ]
    }


def _dqn_params_from_doc(doc: dict) -> dqn.MlpParams:
    arrays = []
    for layer in doc["layers"]:
        arrays.append(
            np.asarray(layer["data"], dtype=float).reshape(layer["shape"])
        )
    return dqn.MlpParams(*arrays)


# ---------------------------------------------------------------------------
# Expert demonstrations


def ensure_expert_trajs(
    scenario: Scenario, config: RunConfig
) -> tuple[list[Trajectory], Path]:
    """Load demonstrations from the configured store, or generate scripted
    ones into <out>/expert/."""
    if config.expert_store is not None:
        store = TrajectoryStore(config.expert_store)
        trajs = store.load_all()
        if not trajs:
            raise ConfigError(f"expert store {config.expert_store} is empty")
        sid = scenario_id(scenario)
        for traj in trajs:
            if traj.scenario_id != sid:
                raise ConfigError("expert trajectories belong to a different scenario")
        return trajs, Path(config.expert_store)
    store_dir = Path(config.out_dir) / "expert"
    store = TrajectoryStore(store_dir)
    trajs = baselines.scripted_expert(scenario, n_trajs=config.n_expert_trajs)
    for traj in trajs:
        store.save(traj)
    return trajs, store_dir


# ---------------------------------------------------------------------------
# Training


def run_training(config: RunConfig) -> dict[str, Path]:
    """Train the configured learner and write its artifacts; returns the
    paths keyed by artifact name."""
    if config.learner_kind not in LEARNER_KINDS:
        raise ConfigError(f"unknown learner kind: {config.learner_kind}")
    scenario = load_scenario(config.scenario_path, config.channel_mode)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}

    if config.learner_kind in ("shortest", "random"):
        kind = config.learner_kind
        seed = derive_seed(config.master_seed, f"baseline-{kind}")
        model_path = out / "model.json"
        save_model(model_path, kind, {"seed": seed}, scenario)
        artifacts["model"] = model_path
        return artifacts

    expert_trajs, expert_dir = ensure_expert_trajs(scenario, config)
    artifacts["expert"] = expert_dir
    expert_hash = trajectory_set_hash(expert_trajs)

    if config.learner_kind == "bc":
        X, y = baselines.bc_dataset(scenario, expert_trajs)
        rng = derive_rng(config.master_seed, "bc-split")
        order = rng.permutation(len(X))
        n_train = int(round(0.8 * len(X)))
        train_idx, test_idx = order[:n_train], order[n_train:]
        clf = baselines.GiniTreeClassifier().fit(X[train_idx], y[train_idx])
        train_acc = clf.score(X[train_idx], y[train_idx])
        test_acc = clf.score(X[test_idx], y[test_idx]) if len(test_idx) else float("nan")
        model_path = out / "model.json"
        save_model(
            model_path,
            "bc",
            {
                "tree": json.loads(baselines.tree_to_json(clf.tree_)),
                "expert_set_hash": expert_hash,
                "split_seed_component": "bc-split",
            },
            scenario,
        )
        report_path = out / "bc_report.json"
        _write_json(
            report_path,
            {
                "schema_version": SCHEMA_VERSION,
                "train_accuracy": train_acc,
                "heldout_accuracy": test_acc,
                "n_train": int(n_train),
                "n_heldout": int(len(test_idx)),
                "tree_depth": clf.tree_.depth,
                "tree_leaves": clf.tree_.n_leaves,
            },
        )
        artifacts["model"] = model_path
        artifacts["report"] = report_path
        return artifacts

    # irl-lfa / irl-dqn
    num_eps = config.resolved_num_eps()
    if config.learner_kind == "irl-lfa":
        learner = lfa.LfaQLearner(num_eps=num_eps)
    else:
        learner = dqn.DqnLearner(num_eps=num_eps)

    print(f"{'iter':>4}  {'hyper-distance':>14}  {'l2-gap':>10}")

    def progress(entry):
        print(f"{entry.iteration:>4}  {entry.hyper_distance:>14.6f}  {entry.l2_gap:>10.6f}")

    result = run_irl(
        scenario,
        expert_trajs,
        learner,
        eps_irl=config.eps_irl,
        max_iters=config.max_iters,
        master_seed=config.master_seed,
        eval_rollouts=config.eval_runs,
        progress=progress,
    )

    weights_path = out / "weights.json"
    save_weights(
        weights_path, result.weights, scenario, config.learner_kind,
        config.eps_irl, expert_hash,
    )
    artifacts["weights"] = weights_path

    model_path = out / "model.json"
    w_hash = _weights_hash(result.weights)
    trained = result.learner
    if config.learner_kind == "irl-lfa":
        payload = {
            "theta": [[float(x) for x in row] for row in trained.theta_],
            "weights_hash": w_hash,
            "config": trained.get_params(),
        }
        save_model(model_path, "lfa", payload, scenario)
    else:
        payload = _dqn_payload(trained.params_)
        payload["weights_hash"] = w_hash
        payload["config"] = trained.get_params()
        save_model(model_path, "dqn", payload, scenario)
    artifacts["model"] = model_path

    log_path = out / "irl_log.json"
    _write_json(
        log_path,
        {
            "schema_version": SCHEMA_VERSION,
            "converged": result.converged,
            "reason": result.reason,
            "mu_expert": [float(x) for x in result.mu_expert],
            "iterations": [
                {
                    "iteration": e.iteration,
                    "w": [float(x) for x in e.w],
                    "mu": [float(x) for x in e.mu],
                    "hyper_distance": e.hyper_distance,
                    "l2_gap": e.l2_gap,
                }
                for e in result.log
            ],
        },
    )
    artifacts["irl_log"] = log_path

    curve_path = out / "training_curve.csv"
    export_training_curve(trained, curve_path)
    artifacts["training_curve"] = curve_path
    return artifacts


def export_training_curve(trained, path: Path) -> None:
    lines = ["episode,reward,steps,final_distance"]
    for i, (r, s, d) in enumerate(
        zip(
            trained.episode_rewards_,
            trained.episode_steps_,
            trained.episode_final_distance_,
        )
    ):
        lines.append(f"{i},{_fmt(r)},{int(s)},{int(d)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(
    policy: Policy,
    scenario: Scenario,
    eval_runs: int = 25,
    start_cell: CellCoord | None = None,
    reward_weights: np.ndarray | None = None,
    source: str = "policy:eval",
) -> tuple[list[MetricsRow], dict]:
    """Greedy rollouts averaged per step across runs.

    Per-step aggregation truncates at the shortest run; per-run summaries
    cover every run in full. The reward column accumulates w . phi along
    the rollout when weights are supplied, else stays zero.
    """
    if eval_runs < 1:
        raise ConfigError("eval_runs must be >= 1")
    runs = []
    for r in range(eval_runs):
        traj, metrics = rollout(scenario, policy, run_index=r, start_cell=start_cell, source=source)
        runs.append((traj, metrics))

    min_len = min(len(t.steps) for t, _ in runs)
    rows: list[MetricsRow] = []
    cum_reward = 0.0
    for i in range(min_len):
        thr = np.asarray([m[i].throughput_bps for _, m in runs])
        intf = np.asarray([m[i].interference_w for _, m in runs])
        dist = np.asarray([m[i].hex_dist_to_dest for _, m in runs], dtype=float)
        if reward_weights is not None:
            step_rewards = np.asarray(
                [float(np.dot(reward_weights, t.steps[i].phi)) for t, _ in runs]
            )
            cum_reward += float(step_rewards.mean())
        rows.append(
            MetricsRow(
                index=i,
                throughput_mean=float(thr.mean()),
                throughput_std=float(thr.std()),
                interference_mean=float(intf.mean()),
                interference_std=float(intf.std()),
                distance=float(dist.mean()),
                reward=cum_reward,
            )
        )

    final_dist = [t.steps[-1].phi[0] * world._tables(scenario).d_max for t, _ in runs]
    reached = [t.steps[-1].phi[2] == 1.0 for t, _ in runs]
    summary = {
        "eval_runs": eval_runs,
        "steps_to_done": [len(t.steps) for t, _ in runs],
        "final_distance": [float(round(d)) for d in final_dist],
        "mean_final_distance": float(np.mean(final_dist)),
        "reached_fraction": float(np.mean(reached)),
        "total_interference_w": [
            float(sum(m.interference_w for m in ms)) for _, ms in runs
        ],
        "total_throughput_bits": [
            float(sum(m.throughput_bps for m in ms)) for _, ms in runs
        ],
    }
    return rows, summary


def evaluate_artifact(
    model_path: Path,
    scenario: Scenario,
    eval_runs: int = 25,
    start_cell_index: int | None = None,
    weights_path: Path | None = None,
) -> tuple[list[MetricsRow], dict]:
    doc = load_model(model_path)
    policy = policy_from_model(doc, scenario)
    weights = None
    if weights_path is not None:
        weights, _ = load_weights(weights_path)
    start = None
    if start_cell_index is not None:
        start = world.cell_at(scenario, start_cell_index)
    return evaluate(
        policy,
        scenario,
        eval_runs=eval_runs,
        start_cell=start,
        reward_weights=weights,
        source=f"policy:{doc['kind']}",
    )


def unseen_start_eval(
    artifacts: dict[str, Path],
    scenario: Scenario,
    start_cell_index: int = 5,
) -> dict:
    """Run each method's greedy rollout from a start cell the expert never
    demonstrated, and report which of them still reach the destination."""
    start = world.cell_at(scenario, start_cell_index)
    tab = world._tables(scenario)
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "start_cell_index": start_cell_index,
        "methods": {},
    }
    for name, path in sorted(artifacts.items()):
        doc = load_model(path)
        policy = policy_from_model(doc, scenario)
        traj, metrics = rollout(
            scenario, policy, start_cell=start, source=f"policy:{doc['kind']}"
        )
        reached = traj.steps[-1].phi[2] == 1.0
        report["methods"][name] = {
            "kind": doc["kind"],
            "reached": bool(reached),
            "steps": len(traj.steps),
            "final_distance": int(round(traj.steps[-1].phi[0] * tab.d_max)),
            "path_cells": [tab.index_of[r.cell] for r in traj.steps],
            "total_interference_w": float(sum(m.interference_w for m in metrics)),
        }
    return report


CSV_HEADER = "index,throughput_mean,throughput_std,interference_mean,interference_std,distance,reward"


def export_metrics(rows: list[MetricsRow], path: Path) -> Path:
    if not rows:
        raise ConfigError("cannot export an empty metrics series")
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    str(row.index),
                    _fmt(row.throughput_mean),
                    _fmt(row.throughput_std),
                    _fmt(row.interference_mean),
                    _fmt(row.interference_std),
                    _fmt(row.distance),
                    _fmt(row.reward),
                ]
            )
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def parse_metrics_csv(path: Path) -> list[MetricsRow]:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ConfigError(f"unexpected metrics header in {path}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            MetricsRow(
                index=int(parts[0]),
                throughput_mean=float(parts[1]),
                throughput_std=float(parts[2]),
                interference_mean=float(parts[3]),
                interference_std=float(parts[4]),
                distance=float(parts[5]),
                reward=float(parts[6]),
            )
        )
    return rows


def generate_scenario_file(
    path: Path,
    seed: int,
    channel_mode: ChannelMode | None = None,
    config: world.ScenarioConfig | None = None,
) -> Scenario:
    cfg = config or world.ScenarioConfig()
    scenario = world.build_scenario(cfg, seed)
    if channel_mode is not None:
        scenario = world.with_channel_mode(scenario, channel_mode)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scenario_to_json(scenario), encoding="utf-8")
    return scenario

"""Behavioral cloning via a Gini-impurity decision tree, the scripted
expert oracle, and the shortest-path and random baselines."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from . import world
from .errors import ConfigError, ExpertInfeasible
from .policies import rollout
from .seeding import derive_rng
from .trajectories import SOURCE_SCRIPTED, Trajectory
from .world import (
    Action,
    CellCoord,
    Direction,
    NUM_ACTIONS,
    NUM_FEATURES,
    Scenario,
    hex_distance,
    initial_features,
    neighbor,
    reset_state,
)

# ---------------------------------------------------------------------------
# CART decision tree (greedy Gini splits, no depth cap)


@dataclass(frozen=True)
class TreeNode:
    kind: str  # "split" | "leaf"
    feature: int = -1
    threshold: float = 0.0
    class_: int = -1
    left: int = -1
    right: int = -1


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]
    root: int = 0

    @property
    def depth(self) -> int:
        def walk(i: int) -> int:
            node = self.nodes[i]
            if node.kind == "leaf":
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.kind == "leaf")


def _gini(y: np.ndarray) -> float:
    counts = np.bincount(y)
    p = counts[counts > 0] / len(y)
    return 1.0 - float(np.sum(p * p))


def _majority(y: np.ndarray) -> int:
    return int(np.argmax(np.bincount(y)))  # lowest class index wins ties


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    """(feature, threshold, weighted child gini) of the best split, or None."""
    n = len(y)
    best: tuple[float, int, float] | None = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            thr = (xs[i] + xs[i + 1]) / 2.0
            left, right = ys[: i + 1], ys[i + 1 :]
            weighted = (len(left) * _gini(left) + len(right) * _gini(right)) / n
            key = (weighted, f, thr)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    weighted, f, thr = best
    return f, thr, weighted


def fit_tree(dataset: list[tuple[np.ndarray, int]]) -> DecisionTree:
    """Greedy CART on (features, action-class) pairs.

    Recurses until a node is pure or no split strictly reduces the weighted
    Gini impurity; leaves predict the majority class (lowest index on ties).
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    X = np.asarray([phi for phi, _ in dataset], dtype=float)
    y = np.asarray([a for _, a in dataset], dtype=int)
    nodes: list[TreeNode] = []

    def build(idx: np.ndarray) -> int:
        sub_y = y[idx]
        parent = _gini(sub_y)
        if parent == 0.0:
            nodes.append(TreeNode(kind="leaf", class_=int(sub_y[0])))
            return len(nodes) - 1
        split = _best_split(X[idx], sub_y)
        if split is None or split[2] >= parent - 1e-12:
            nodes.append(TreeNode(kind="leaf", class_=_majority(sub_y)))
            return len(nodes) - 1
        f, thr, _ = split
        mask = X[idx, f] <= thr
        left = build(idx[mask])
        right = build(idx[~mask])
        nodes.append(TreeNode(kind="split", feature=f, threshold=thr, left=left, right=right))
        return len(nodes) - 1

    root = build(np.arange(len(y)))
    return DecisionTree(nodes=tuple(nodes), root=root)


def predict(tree: DecisionTree, phi: np.ndarray) -> int:
    node = tree.nodes[tree.root]
    while node.kind == "split":
        node = tree.nodes[node.left if phi[node.feature] <= node.threshold else node.right]
    return node.class_


def evaluate_bc(tree: DecisionTree, held_out: list[tuple[np.ndarray, int]]) -> float:
    """Fraction of exact joint-action matches on a held-out dataset."""
    if not held_out:
        raise ValueError("held-out dataset must be non-empty")
    hits = sum(1 for phi, a in held_out if predict(tree, phi) == a)
    return hits / len(held_out)


class GiniTreeClassifier:
    """Estimator-style wrapper: fit(X, y) / predict(X) / score(X, y)."""

    def __init__(self):
        self.tree_: DecisionTree | None = None

    def get_params(self, deep: bool = True) -> dict:
        return {}

    def set_params(self, **params) -> "GiniTreeClassifier":
        for key in params:
            raise ValueError(f"unknown parameter {key!r}")
        return self

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GiniTreeClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.ndim != 2 or X.shape[1] != NUM_FEATURES:
            raise ValueError(f"X must be (n, {NUM_FEATURES})")
        if len(X) != len(y):
            raise ValueError("X and y lengths differ")
        if y.min(initial=0) < 0 or y.max(initial=0) >= NUM_ACTIONS:
            raise ValueError("labels must be joint action indices in 0..35")
        self.tree_ = fit_tree(list(zip(X, y)))
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.tree_ is None:
            raise RuntimeError("classifier is not fitted")
        return np.asarray([predict(self.tree_, phi) for phi in np.asarray(X)], dtype=int)

    def score(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


def tree_to_json(tree: DecisionTree) -> str:
    doc = {
        "root": tree.root,
        "nodes": [
            {
                "kind": n.kind,
                "feature": n.feature,
                "threshold": n.threshold,
                "class": n.class_,
                "left": n.left,
                "right": n.right,
            }
            for n in tree.nodes
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def tree_from_json(text: str) -> DecisionTree:
    doc = json.loads(text)
    nodes = tuple(
        TreeNode(
            kind=n["kind"],
            feature=int(n["feature"]),
            threshold=float(n["threshold"]),
            class_=int(n["class"]),
            left=int(n["left"]),
            right=int(n["right"]),
        )
        for n in doc["nodes"]
    )
    return DecisionTree(nodes=nodes, root=int(doc["root"]))


def bc_dataset(
    scenario: Scenario,
    trajs: list[Trajectory],
    start_cell: CellCoord | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(features, action) pairs in decision order: each action is labelled
    with the features the agent observed when choosing it (the reset
    features for the first step of an episode)."""
    rows: list[np.ndarray] = []
    labels: list[int] = []
    for traj in trajs:
        phi = initial_features(scenario, reset_state(scenario, start_cell))
        for rec in traj.steps:
            rows.append(phi)
            labels.append(rec.action)
            phi = np.asarray(rec.phi)
    return np.asarray(rows), np.asarray(labels, dtype=int)


class TreePolicy:
    """Rollout handle for a fitted behavioral-cloning tree."""

    def __init__(self, tree: DecisionTree):
        self.tree = tree

    def begin(self, run_index: int) -> None:
        pass

    def act(self, t: int, phi: np.ndarray) -> int:
        return predict(self.tree, phi)


# ---------------------------------------------------------------------------
# Scripted expert oracle


@dataclass(frozen=True)
class ExpertOracleConfig:
    """Cost weights of the expert's route search.

    The interference term is the per-step aggregate interference normalized
    by the largest value achievable anywhere on the grid at max power (so
    hop and interference costs stay on comparable scales in every channel
    mode); the hop term charges a constant per movement.
    """

    interference_weight: float = 1.0
    hop_weight: float = 0.1
    throughput_threshold_bps: float | None = None

    def __post_init__(self) -> None:
        if self.interference_weight < 0 or self.hop_weight < 0:
            raise ConfigError("oracle weights must be >= 0")
        if self.interference_weight == 0 and self.hop_weight == 0:
            raise ConfigError("oracle weights must not both be zero")


def expert_power_index(scenario: Scenario, threshold_bps: float) -> int:
    """The lowest transmit-power level whose uplink throughput meets the
    threshold; raises if no level does."""
    tab = world._tables(scenario)
    for idx, thr in enumerate(tab.thr_by_power):
        if thr >= threshold_bps:
            return idx
    raise ExpertInfeasible(
        f"no power level reaches {threshold_bps:.6g} bit/s "
        f"(max achievable {tab.thr_by_power[-1]:.6g})"
    )


def expert_path(
    scenario: Scenario, config: ExpertOracleConfig | None = None
) -> tuple[list[CellCoord], int, float]:
    """Minimum-cost route from source to destination.

    Returns (cells including source, chosen power index, total cost). The
    cost of entering a cell is interference_weight * normalized aggregate
    interference at the chosen power, plus hop_weight.
    """
    config = config or ExpertOracleConfig()
    threshold = (
        scenario.throughput_threshold_bps
        if config.throughput_threshold_bps is None
        else config.throughput_threshold_bps
    )
    p_idx = expert_power_index(scenario, threshold)
    tab = world._tables(scenario)
    power = scenario.power_levels_w[p_idx]

    def enter_cost(cell_index: int) -> float:
        intf = tab.intf_by_cell_power[cell_index][p_idx]
        normalized = intf / tab.i_max if tab.i_max > 0 else 0.0
        return config.interference_weight * normalized + config.hop_weight

    source = tab.index_of[scenario.source_cell]
    dest = tab.index_of[scenario.dest_cell]
    dist = {source: 0.0}
    prev: dict[int, int] = {}
    heap: list[tuple[float, int]] = [(0.0, source)]
    visited: set[int] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in visited:
            continue
        visited.add(u)
        if u == dest:
            break
        for v in tab.adjacent[u]:
            nd = d + enter_cost(v)
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if dest not in visited:
        raise ExpertInfeasible("destination unreachable")  # cannot happen on a grid

    path = [dest]
    while path[-1] != source:
        path.append(prev[path[-1]])
    path.reverse()
    if len(path) - 1 > scenario.dist_limit:
        raise ExpertInfeasible(
            f"optimal route needs {len(path) - 1} hops, budget is {scenario.dist_limit}"
        )
    cells = [tab.cells[i] for i in path]
    return cells, p_idx, dist[dest]


def _direction_between(scenario: Scenario, a: CellCoord, b: CellCoord) -> Direction:
    for d in Direction:
        if neighbor(scenario, a, d) == b:
            return d
    raise ValueError(f"cells {a} and {b} are not adjacent")


def scripted_expert(
    scenario: Scenario,
    oracle_config: ExpertOracleConfig | None = None,
    n_trajs: int = 10,
) -> list[Trajectory]:
    """Optimal demonstrations: n identical trajectories along the
    minimum-cost route at the lowest threshold-satisfying power."""
    cells, p_idx, _ = expert_path(scenario, oracle_config)
    dirs = [
        _direction_between(scenario, a, b) for a, b in zip(cells, cells[1:])
    ]

    class _ReplayPolicy:
        def begin(self, run_index: int) -> None:
            pass

        def act(self, t: int, phi: np.ndarray) -> int:
            return Action(dirs[t], p_idx).index

    trajs = []
    for _ in range(n_trajs):
        traj, _metrics = rollout(scenario, _ReplayPolicy(), source=SOURCE_SCRIPTED)
        trajs.append(traj)
    return trajs


# ---------------------------------------------------------------------------
# Heuristic baselines


def _monotone_paths(scenario: Scenario, start: CellCoord) -> list[list[Direction]]:
    """Every shortest path as a direction sequence (each hop strictly
    reduces the hex distance to the destination)."""
    dest = scenario.dest_cell
    out: list[list[Direction]] = []

    def walk(cell: CellCoord, prefix: list[Direction]) -> None:
        if cell == dest:
            out.append(list(prefix))
            return
        d_here = hex_distance(cell, dest)
        for d in Direction:
            nb = neighbor(scenario, cell, d)
            if nb != cell and hex_distance(nb, dest) == d_here - 1:
                prefix.append(d)
                walk(nb, prefix)
                prefix.pop()

    walk(start, [])
    return out


def _turn_count(dirs: list[Direction]) -> int:
    return sum(1 for a, b in zip(dirs, dirs[1:]) if a != b)


def minimum_yaw_path(scenario: Scenario, start: CellCoord | None = None) -> list[Direction]:
    """The minimum-hop path with the fewest direction changes; remaining
    ties break on the lexicographically smallest direction sequence."""
    start = scenario.source_cell if start is None else start
    paths = _monotone_paths(scenario, start)
    return min(paths, key=lambda p: (_turn_count(p), [int(d) for d in p]))


class ShortestPathPolicy:
    """Deterministic minimum-hop minimum-turn route; transmit power drawn
    uniformly at random each step from a per-run stream."""

    def __init__(self, scenario: Scenario, seed: int):
        self.dirs = minimum_yaw_path(scenario)
        self.seed = seed
        self._rng = derive_rng(seed, "shortest-path-power", 0)

    def begin(self, run_index: int) -> None:
        self._rng = derive_rng(self.seed, "shortest-path-power", run_index)

    def act(self, t: int, phi: np.ndarray) -> int:
        direction = self.dirs[min(t, len(self.dirs) - 1)]
        power_idx = int(self._rng.integers(0, world.NUM_POWER_LEVELS))
        return Action(direction, power_idx).index


class RandomPolicy:
    """Uniform over all 36 joint actions, seeded per run."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = derive_rng(seed, "random-policy", 0)

    def begin(self, run_index: int) -> None:
        self._rng = derive_rng(self.seed, "random-policy", run_index)

    def act(self, t: int, phi: np.ndarray) -> int:
        return int(self._rng.integers(0, NUM_ACTIONS))


def shortest_path_policy(scenario: Scenario, seed: int) -> ShortestPathPolicy:
    return ShortestPathPolicy(scenario, seed)


def random_policy(seed: int) -> RandomPolicy:
    return RandomPolicy(seed)

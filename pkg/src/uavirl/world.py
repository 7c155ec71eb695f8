"""Hexagonal-grid world: scenario construction, joint move/power actions,
per-step link metrics, and normalized state features.

Cells are flat-top hexagons on axial coordinates. The grid is laid out in
columns and rows ("odd columns shifted up half a cell"); base-station index
is the row-major cell index with BS 0 at the lower-left corner. The UAV
occupies the centre of its current cell at a fixed height and is always
served by that cell's BS.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import channel as ch
from .channel import ChannelMode, ChannelParams
from .errors import ConfigError

NUM_FEATURES = 5
NUM_DIRECTIONS = 6
NUM_POWER_LEVELS = 6
NUM_ACTIONS = NUM_DIRECTIONS * NUM_POWER_LEVELS


class Direction(IntEnum):
    N = 0
    NE = 1
    SE = 2
    S = 3
    SW = 4
    NW = 5


# Axial offsets (dq, dr) for flat-top hexagons with r increasing northward.
_AXIAL_STEP = {
    Direction.N: (0, 1),
    Direction.NE: (1, 0),
    Direction.SE: (1, -1),
    Direction.S: (0, -1),
    Direction.SW: (-1, 0),
    Direction.NW: (-1, 1),
}


class CellCoord(NamedTuple):
    q: int
    r: int


class Action(NamedTuple):
    """Joint movement/transmit-power action; 36 combinations."""

    move_dir: Direction
    power_idx: int

    @property
    def index(self) -> int:
        return NUM_POWER_LEVELS * int(self.move_dir) + self.power_idx

    @classmethod
    def from_index(cls, index: int) -> "Action":
        if not 0 <= index < NUM_ACTIONS:
            raise ValueError(f"action index out of range: {index}")
        return cls(Direction(index // NUM_POWER_LEVELS), index % NUM_POWER_LEVELS)


def hex_distance(a: CellCoord, b: CellCoord) -> int:
    """Axial hex distance (symmetric, satisfies the triangle inequality)."""
    dq = a.q - b.q
    dr = a.r - b.r
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def axial_from_offset(col: int, row: int) -> CellCoord:
    return CellCoord(col, row - col // 2)


def offset_from_axial(cell: CellCoord) -> tuple[int, int]:
    return cell.q, cell.r + cell.q // 2


def cell_center(cell: CellCoord, cell_radius_m: float) -> tuple[float, float]:
    """Physical centre of a flat-top hexagon with the given circumradius."""
    x = 1.5 * cell_radius_m * cell.q
    y = math.sqrt(3.0) * cell_radius_m * (cell.r + cell.q / 2.0)
    return x, y


# Default 5x5 density map (75 UEs): a dense block in the upper-left region
# so that the northern corner-to-corner corridor is interference-heavy
# while an equal-length southern corridor stays clean. Row-major from the
# lower-left cell.
DEFAULT_UE_DENSITY = (
    0, 0, 0, 0, 0,
    0, 1, 0, 0, 0,
    8, 8, 0, 1, 0,
    10, 10, 8, 0, 0,
    10, 10, 8, 1, 0,
)

DEFAULT_POWER_LEVELS_W = (0.05, 0.08, 0.11, 0.14, 0.17, 0.20)


@dataclass(frozen=True)
class ScenarioConfig:
    """User-facing knobs; realized into an immutable Scenario by build_scenario."""

    grid_cols: int = 5
    grid_rows: int = 5
    cell_radius_m: float = 250.0
    uav_height_m: float = 50.0
    power_levels_w: tuple[float, ...] = DEFAULT_POWER_LEVELS_W
    dist_limit: int = 15
    source_index: int = 0
    dest_index: int = 24
    ue_total: int = 75
    ue_density: tuple[int, ...] | None = DEFAULT_UE_DENSITY
    throughput_threshold_bps: float = 1.8e7
    channel: ChannelParams = field(default_factory=ChannelParams)


@dataclass(frozen=True)
class Scenario:
    """Immutable world description; shareable across threads."""

    grid_cols: int
    grid_rows: int
    cell_radius_m: float
    bs_positions: tuple[tuple[float, float], ...]
    ue_placements: tuple[tuple[tuple[float, float], ...], ...]
    ue_count_per_cell: tuple[int, ...]
    source_cell: CellCoord
    dest_cell: CellCoord
    uav_height_m: float
    power_levels_w: tuple[float, ...]
    dist_limit: int
    channel: ChannelParams
    seed: int
    throughput_threshold_bps: float

    @property
    def num_cells(self) -> int:
        return self.grid_cols * self.grid_rows


@dataclass(frozen=True)
class UavState:
    cell: CellCoord
    hops_used: int
    done: bool


@dataclass(frozen=True)
class StepMetrics:
    throughput_bps: float
    interference_w: float
    serving_bs: int
    snr: float
    hex_dist_to_dest: int
    clamped: bool


class UeLink(NamedTuple):
    cell_index: int
    ue_index: int
    sinr: float
    throughput_bps: float


def grid_cells(grid_cols: int, grid_rows: int) -> tuple[CellCoord, ...]:
    """All cells in row-major (BS index) order, lower-left first."""
    return tuple(
        axial_from_offset(col, row)
        for row in range(grid_rows)
        for col in range(grid_cols)
    )


def build_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Realize a config into a scenario with seeded UE placement.

    Identical (config, seed) pairs produce bit-identical scenarios.
    """
    if config.grid_cols < 1 or config.grid_rows < 1:
        raise ConfigError("grid_cols and grid_rows must be >= 1")
    n_cells = config.grid_cols * config.grid_rows
    if not 0 <= config.source_index < n_cells:
        raise ConfigError(f"source_index out of range: {config.source_index}")
    if not 0 <= config.dest_index < n_cells:
        raise ConfigError(f"dest_index out of range: {config.dest_index}")
    if config.source_index == config.dest_index:
        raise ConfigError("source and destination cells must differ")
    if len(config.power_levels_w) != NUM_POWER_LEVELS:
        raise ConfigError(f"power_levels_w must have exactly {NUM_POWER_LEVELS} entries")
    if any(p <= 0 for p in config.power_levels_w):
        raise ConfigError("power levels must be positive")
    if any(
        a >= b
        for a, b in zip(config.power_levels_w, config.power_levels_w[1:])
    ):
        raise ConfigError("power_levels_w must be strictly ascending")
    if config.dist_limit < 1:
        raise ConfigError("dist_limit must be >= 1")
    if config.cell_radius_m <= 0:
        raise ConfigError("cell_radius_m must be > 0")
    if config.uav_height_m <= 0:
        raise ConfigError("uav_height_m must be > 0")
    if config.throughput_threshold_bps < 0:
        raise ConfigError("throughput_threshold_bps must be >= 0")

    if config.ue_density is not None and len(config.ue_density) == n_cells:
        density = tuple(int(c) for c in config.ue_density)
    elif config.ue_density is not None and config.ue_density is not DEFAULT_UE_DENSITY:
        raise ConfigError(
            f"ue_density must have {n_cells} entries, got {len(config.ue_density)}"
        )
    else:
        # Non-default grid without an explicit map: spread ue_total evenly.
        base, extra = divmod(config.ue_total, n_cells)
        density = tuple(base + (1 if i < extra else 0) for i in range(n_cells))
    if any(c < 0 for c in density):
        raise ConfigError("ue_density entries must be >= 0")

    cells = grid_cells(config.grid_cols, config.grid_rows)
    bs_positions = tuple(cell_center(c, config.cell_radius_m) for c in cells)

    rng = np.random.default_rng(seed)
    placements: list[tuple[tuple[float, float], ...]] = []
    for idx, cell in enumerate(cells):
        cx, cy = bs_positions[idx]
        pts: list[tuple[float, float]] = []
        while len(pts) < density[idx]:
            x = rng.uniform(-config.cell_radius_m, config.cell_radius_m)
            y = rng.uniform(
                -config.cell_radius_m * math.sqrt(3) / 2,
                config.cell_radius_m * math.sqrt(3) / 2,
            )
            if _inside_hexagon(x, y, config.cell_radius_m):
                pts.append((cx + x, cy + y))
        placements.append(tuple(pts))

    return Scenario(
        grid_cols=config.grid_cols,
        grid_rows=config.grid_rows,
        cell_radius_m=float(config.cell_radius_m),
        bs_positions=bs_positions,
        ue_placements=tuple(placements),
        ue_count_per_cell=density,
        source_cell=cells[config.source_index],
        dest_cell=cells[config.dest_index],
        uav_height_m=float(config.uav_height_m),
        power_levels_w=tuple(float(p) for p in config.power_levels_w),
        dist_limit=int(config.dist_limit),
        channel=config.channel,
        seed=int(seed),
        throughput_threshold_bps=float(config.throughput_threshold_bps),
    )


def _inside_hexagon(x: float, y: float, radius: float) -> bool:
    return (
        abs(y) <= math.sqrt(3) / 2 * radius + 1e-12
        and abs(y) <= math.sqrt(3) * (radius - abs(x)) + 1e-12
    )


def with_channel_mode(scenario: Scenario, mode: ChannelMode) -> Scenario:
    """Same scenario with a different LoS/NLoS mixing mode."""
    return replace(scenario, channel=replace(scenario.channel, channel_mode=mode))


class _Tables:
    """Per-scenario lookup tables; everything here is a deterministic
    function of the scenario and is only a cache, never an input."""

    def __init__(self, sc: Scenario):
        self.cells = grid_cells(sc.grid_cols, sc.grid_rows)
        self.index_of = {c: i for i, c in enumerate(self.cells)}
        self.on_grid = set(self.cells)
        self.neighbor: dict[tuple[CellCoord, Direction], CellCoord] = {}
        self.adjacent: list[list[int]] = [[] for _ in self.cells]
        for i, c in enumerate(self.cells):
            for d in Direction:
                dq, dr = _AXIAL_STEP[d]
                t = CellCoord(c.q + dq, c.r + dr)
                if t in self.on_grid:
                    self.neighbor[(c, d)] = t
                    self.adjacent[i].append(self.index_of[t])
                else:
                    self.neighbor[(c, d)] = c
        self.dist_to_dest = [hex_distance(c, sc.dest_cell) for c in self.cells]
        self.d_max = max(
            hex_distance(a, b) for a in self.cells for b in self.cells
        )
        self.adj_ue_count = [
            sum(sc.ue_count_per_cell[j] for j in self.adjacent[i])
            for i in range(len(self.cells))
        ]

        overhead = ch.LinkGeometry(0.0, sc.uav_height_m)
        self.gain_serving = ch.channel_gain(
            ch.pathloss_total(overhead, sc.channel), sc.channel.uav_antenna_gain
        )
        self.gain_serving_los = ch.channel_gain(
            ch.pathloss_los(overhead, sc.channel), sc.channel.uav_antenna_gain
        )
        intersite = math.sqrt(3.0) * sc.cell_radius_m
        nb_geom = ch.LinkGeometry(intersite, sc.uav_height_m)
        self.gain_neighbor = ch.channel_gain(
            ch.pathloss_total(nb_geom, sc.channel), sc.channel.uav_antenna_gain
        )

        self.thr_by_power = [
            ch.throughput(p, self.gain_serving, sc.channel)
            for p in sc.power_levels_w
        ]
        self.snr_by_power = [
            ch.snr_uplink(p, self.gain_serving, sc.channel)
            for p in sc.power_levels_w
        ]
        self.intf_by_cell_power = [
            [aggregate_interference(sc, c, p) for p in sc.power_levels_w]
            for c in self.cells
        ]

        p_max = sc.power_levels_w[-1]
        self.t_max = ch.throughput(p_max, self.gain_serving_los, sc.channel)
        # Interference normalizer: the largest aggregate interference
        # achievable anywhere on the grid (max power, densest neighborhood,
        # gain at the adjacent-BS slant range). Keeps the feature on a real
        # [0, 1] dynamic range in every channel mode.
        max_adj = max(self.adj_ue_count) if self.adj_ue_count else 0
        self.i_max = p_max * max_adj * self.gain_neighbor


@functools.lru_cache(maxsize=128)
def _tables(scenario: Scenario) -> _Tables:
    return _Tables(scenario)


def cell_index(scenario: Scenario, cell: CellCoord) -> int:
    return _tables(scenario).index_of[cell]


def cell_at(scenario: Scenario, index: int) -> CellCoord:
    return _tables(scenario).cells[index]


def neighbor(scenario: Scenario, cell: CellCoord, direction: Direction) -> CellCoord:
    """Adjacent cell in the given direction; off-grid moves clamp to the
    same cell (the move still consumes a hop)."""
    return _tables(scenario).neighbor[(cell, direction)]


def adjacent_cells(scenario: Scenario, cell: CellCoord) -> list[int]:
    """Indices of the distinct on-grid cells adjacent to `cell`."""
    return list(_tables(scenario).adjacent[cell_index(scenario, cell)])


def aggregate_interference(scenario: Scenario, cell: CellCoord, tx_power_w: float) -> float:
    """Total interference power (W) injected into adjacent cells.

    Each adjacent cell contributes its UE count times the UAV's received
    power at that cell's BS; the UAV's own cell contributes nothing.

    Computed from the channel primitives directly (not from the cached
    step tables, which are themselves built from this function).
    """
    cells = grid_cells(scenario.grid_cols, scenario.grid_rows)
    index_of = {c: i for i, c in enumerate(cells)}
    ux, uy = cell_center(cell, scenario.cell_radius_m)
    total = 0.0
    for d in Direction:
        dq, dr = _AXIAL_STEP[d]
        t = CellCoord(cell.q + dq, cell.r + dr)
        if t not in index_of:
            continue
        j = index_of[t]
        bx, by = scenario.bs_positions[j]
        geom = ch.LinkGeometry(math.hypot(ux - bx, uy - by), scenario.uav_height_m)
        gain = ch.channel_gain(
            ch.pathloss_total(geom, scenario.channel),
            scenario.channel.uav_antenna_gain,
        )
        total += scenario.ue_count_per_cell[j] * ch.interference_contribution(
            tx_power_w, gain
        )
    return total


def reset_state(scenario: Scenario, start_cell: CellCoord | None = None) -> UavState:
    cell = scenario.source_cell if start_cell is None else start_cell
    if cell not in _tables(scenario).on_grid:
        raise ConfigError(f"start cell {cell} is not on the grid")
    return UavState(cell=cell, hops_used=0, done=False)


def initial_features(scenario: Scenario, state: UavState) -> np.ndarray:
    """Features of a freshly reset state: no transmission has happened yet,
    so throughput, interference and the success flag are all zero."""
    tab = _tables(scenario)
    phi = np.zeros(NUM_FEATURES)
    phi[0] = hex_distance(state.cell, scenario.dest_cell) / tab.d_max
    phi[1] = state.hops_used / scenario.dist_limit
    return phi


def step(
    scenario: Scenario, state: UavState, action: Action
) -> tuple[UavState, np.ndarray, StepMetrics]:
    """Apply one joint action: move (clamped at the grid edge), associate
    with the new cell's BS, and transmit at the selected power level."""
    if state.done:
        raise RuntimeError("cannot step a finished episode")
    if not 0 <= action.power_idx < NUM_POWER_LEVELS:
        raise ValueError(f"power_idx out of range: {action.power_idx}")

    tab = _tables(scenario)
    new_cell = tab.neighbor[(state.cell, Direction(action.move_dir))]
    clamped = new_cell == state.cell
    hops = state.hops_used + 1
    idx = tab.index_of[new_cell]

    metrics = StepMetrics(
        throughput_bps=tab.thr_by_power[action.power_idx],
        interference_w=tab.intf_by_cell_power[idx][action.power_idx],
        serving_bs=idx,
        snr=tab.snr_by_power[action.power_idx],
        hex_dist_to_dest=tab.dist_to_dest[idx],
        clamped=clamped,
    )
    done = new_cell == scenario.dest_cell or hops == scenario.dist_limit
    new_state = UavState(cell=new_cell, hops_used=hops, done=done)
    phi = compute_features(scenario, new_state, metrics)
    return new_state, phi, metrics


def compute_features(
    scenario: Scenario, new_state: UavState, metrics: StepMetrics
) -> np.ndarray:
    """Normalized post-step features, each in [0, 1]."""
    tab = _tables(scenario)
    phi = np.empty(NUM_FEATURES)
    phi[0] = metrics.hex_dist_to_dest / tab.d_max
    phi[1] = new_state.hops_used / scenario.dist_limit
    phi[2] = 1.0 if new_state.cell == scenario.dest_cell else 0.0
    phi[3] = min(metrics.throughput_bps / tab.t_max, 1.0)
    phi[4] = min(metrics.interference_w / tab.i_max, 1.0) if tab.i_max > 0 else 0.0
    return phi


def validate_features(phi: np.ndarray) -> np.ndarray:
    """Check a feature vector against its invariants; returns the array."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (NUM_FEATURES,):
        raise ValueError(f"expected {NUM_FEATURES} features, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("features must be finite")
    if phi.min() < 0.0 or phi.max() > 1.0:
        raise ValueError("features must lie in [0, 1]")
    if phi[2] not in (0.0, 1.0):
        raise ValueError("success flag must be exactly 0 or 1")
    return phi


def ue_link_report(
    scenario: Scenario, cell: CellCoord, tx_power_w: float
) -> list[UeLink]:
    """Diagnostic SINR/throughput of every UE in the cells adjacent to the
    UAV, under the UAV's current interference."""
    tab = _tables(scenario)
    i = tab.index_of[cell]
    ux, uy = scenario.bs_positions[i]
    out: list[UeLink] = []
    for j in tab.adjacent[i]:
        bx, by = scenario.bs_positions[j]
        geom = ch.LinkGeometry(math.hypot(ux - bx, uy - by), scenario.uav_height_m)
        gain_nb = ch.channel_gain(
            ch.pathloss_total(geom, scenario.channel),
            scenario.channel.uav_antenna_gain,
        )
        interference = ch.interference_contribution(tx_power_w, gain_nb)
        for k, (px, py) in enumerate(scenario.ue_placements[j]):
            ue_gain = ch.ue_ground_gain(math.hypot(px - bx, py - by), scenario.channel)
            sinr, thr = ch.ue_sinr_throughput(
                scenario.channel.ue_tx_power_w, ue_gain, interference, scenario.channel
            )
            out.append(UeLink(cell_index=j, ue_index=k, sinr=sinr, throughput_bps=thr))
    return out


def normalization_constants(scenario: Scenario) -> dict[str, float]:
    """The fixed per-scenario feature normalizers (diagnostic)."""
    tab = _tables(scenario)
    return {
        "d_max": float(tab.d_max),
        "t_max_bps": tab.t_max,
        "i_max_w": tab.i_max,
    }


# ---------------------------------------------------------------------------
# Scenario serialization: canonical field order, floats as decimal strings
# with 17 significant digits so files round-trip bit-exactly.

_SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def scenario_to_json(scenario: Scenario) -> str:
    doc = {
        "schema_version": _SCHEMA_VERSION,
        "grid_cols": scenario.grid_cols,
        "grid_rows": scenario.grid_rows,
        "cell_radius_m": _fmt(scenario.cell_radius_m),
        "bs_positions": [[_fmt(x), _fmt(y)] for x, y in scenario.bs_positions],
        "ue_placements": [
            [[_fmt(x), _fmt(y)] for x, y in cell] for cell in scenario.ue_placements
        ],
        "ue_count_per_cell": list(scenario.ue_count_per_cell),
        "source_cell": [scenario.source_cell.q, scenario.source_cell.r],
        "dest_cell": [scenario.dest_cell.q, scenario.dest_cell.r],
        "uav_height_m": _fmt(scenario.uav_height_m),
        "power_levels_w": [_fmt(p) for p in scenario.power_levels_w],
        "dist_limit": scenario.dist_limit,
        "channel": {
            "carrier_freq_hz": _fmt(scenario.channel.carrier_freq_hz),
            "eta_los_db": _fmt(scenario.channel.eta_los_db),
            "eta_nlos_db": _fmt(scenario.channel.eta_nlos_db),
            "c1": _fmt(scenario.channel.c1),
            "c2": _fmt(scenario.channel.c2),
            "noise_power_w": _fmt(scenario.channel.noise_power_w),
            "rb_bandwidth_hz": _fmt(scenario.channel.rb_bandwidth_hz),
            "num_rbs": scenario.channel.num_rbs,
            "uav_antenna_gain": _fmt(scenario.channel.uav_antenna_gain),
            "ue_tx_power_w": _fmt(scenario.channel.ue_tx_power_w),
            "channel_mode": scenario.channel.channel_mode.value,
        },
        "seed": scenario.seed,
        "throughput_threshold_bps": _fmt(scenario.throughput_threshold_bps),
    }
    return json.dumps(doc, indent=1) + "\n"


def scenario_from_json(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"scenario file is not valid JSON: {e}") from e
    version = doc.get("schema_version")
    if version != _SCHEMA_VERSION:
        raise ConfigError(f"unsupported scenario schema_version: {version}")
    try:
        chan = doc["channel"]
        params = ChannelParams(
            carrier_freq_hz=float(chan["carrier_freq_hz"]),
            eta_los_db=float(chan["eta_los_db"]),
            eta_nlos_db=float(chan["eta_nlos_db"]),
            c1=float(chan["c1"]),
            c2=float(chan["c2"]),
            noise_power_w=float(chan["noise_power_w"]),
            rb_bandwidth_hz=float(chan["rb_bandwidth_hz"]),
            num_rbs=int(chan["num_rbs"]),
            uav_antenna_gain=float(chan["uav_antenna_gain"]),
            ue_tx_power_w=float(chan["ue_tx_power_w"]),
            channel_mode=ChannelMode(chan["channel_mode"]),
        )
        scenario = Scenario(
            grid_cols=int(doc["grid_cols"]),
            grid_rows=int(doc["grid_rows"]),
            cell_radius_m=float(doc["cell_radius_m"]),
            bs_positions=tuple(
                (float(x), float(y)) for x, y in doc["bs_positions"]
            ),
            ue_placements=tuple(
                tuple((float(x), float(y)) for x, y in cell)
                for cell in doc["ue_placements"]
            ),
            ue_count_per_cell=tuple(int(c) for c in doc["ue_count_per_cell"]),
            source_cell=CellCoord(*doc["source_cell"]),
            dest_cell=CellCoord(*doc["dest_cell"]),
            uav_height_m=float(doc["uav_height_m"]),
            power_levels_w=tuple(float(p) for p in doc["power_levels_w"]),
            dist_limit=int(doc["dist_limit"]),
            channel=params,
            seed=int(doc["seed"]),
            throughput_threshold_bps=float(doc["throughput_threshold_bps"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed scenario document: {e}") from e
    if len(scenario.ue_placements) != scenario.num_cells:
        raise ConfigError("ue_placements length does not match the grid")
    if tuple(len(p) for p in scenario.ue_placements) != scenario.ue_count_per_cell:
        raise ConfigError("ue_count_per_cell disagrees with ue_placements")
    return scenario


def scenario_id(scenario: Scenario) -> str:
    """Content hash identifying a scenario (16 hex chars)."""
    digest = hashlib.sha256(scenario_to_json(scenario).encode("utf-8"))
    return digest.hexdigest()[:16]

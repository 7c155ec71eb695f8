"""Command-line experiment harness.

Subcommands: ``scenario gen``, ``expert gen``, ``train``, ``eval``,
``unseen-eval``, ``serve``. Exit codes: 0 success, 2 configuration error,
3 numeric failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import baselines, harness, world
from .channel import ChannelMode
from .errors import ConfigError, NumericFailure
from .trajectories import TrajectoryStore
from .world import ScenarioConfig

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_channel_option = click.option(
    "--channel",
    type=click.Choice(["probabilistic", "los"]),
    default=None,
    help="Override the scenario's channel mode.",
)


def _mode(channel: str | None) -> ChannelMode | None:
    if channel is None:
        return None
    return ChannelMode.LOS_ONLY if channel == "los" else ChannelMode.PROBABILISTIC


def _handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except NumericFailure as e:
            click.echo(f"numeric failure: {e}", err=True)
            sys.exit(EXIT_NUMERIC)

    return wrapper


@click.group()
def main() -> None:
    """Simulator and learning harness for interference-aware UAV path
    planning with transmit-power allocation."""


@main.group()
def scenario() -> None:
    """Scenario files."""


@scenario.command("gen")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_channel_option
@click.option("--dist-limit", type=int, default=None, help="Hop budget override.")
@_handles_errors
def scenario_gen(seed: int, out: Path, channel: str | None, dist_limit: int | None) -> None:
    """Generate the default 25-cell scenario with seeded UE placement."""
    cfg = ScenarioConfig()
    if dist_limit is not None:
        from dataclasses import replace

        cfg = replace(cfg, dist_limit=dist_limit)
    sc = harness.generate_scenario_file(out, seed, _mode(channel), cfg)
    click.echo(f"wrote scenario {world.scenario_id(sc)} to {out}")


@main.group()
def expert() -> None:
    """Expert demonstrations."""


@expert.command("gen")
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--n", "n_trajs", type=int, default=10, show_default=True)
@_channel_option
@_handles_errors
def expert_gen(scenario_path: Path, out: Path, n_trajs: int, channel: str | None) -> None:
    """Generate scripted-expert demonstrations into a trajectory store."""
    sc = harness.load_scenario(scenario_path, _mode(channel))
    store = TrajectoryStore(out)
    for traj in baselines.scripted_expert(sc, n_trajs=n_trajs):
        traj_id = store.save(traj)
        click.echo(f"saved {traj_id} ({len(traj.steps)} steps)")


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), required=True)
@click.option(
    "--kind",
    type=click.Choice(list(harness.LEARNER_KINDS)),
    required=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_channel_option
@click.option("--num-eps", type=int, default=None, help="Training episodes override.")
@click.option("--eps-irl", type=float, default=0.1, show_default=True)
@click.option("--max-iters", type=int, default=25, show_default=True)
@click.option("--eval-runs", type=int, default=25, show_default=True)
@click.option("--expert-store", type=click.Path(path_type=Path), default=None,
              help="Trajectory store with demonstrations (default: scripted expert).")
@click.option("--n-expert", type=int, default=10, show_default=True)
@click.option("--full", is_flag=True, help="Use the full-scale episode budget (1e4).")
@_handles_errors
def train(
    scenario_path: Path,
    kind: str,
    seed: int,
    out: Path,
    channel: str | None,
    num_eps: int | None,
    eps_irl: float,
    max_iters: int,
    eval_runs: int,
    expert_store: Path | None,
    n_expert: int,
    full: bool,
) -> None:
    """Train a policy (or fit a baseline) and write its artifacts."""
    config = harness.RunConfig(
        scenario_path=scenario_path,
        learner_kind=kind,
        out_dir=out,
        master_seed=seed,
        channel_mode=_mode(channel),
        num_eps=num_eps,
        eps_irl=eps_irl,
        max_iters=max_iters,
        eval_runs=eval_runs,
        n_expert_trajs=n_expert,
        expert_store=expert_store,
        full=full,
    )
    artifacts = harness.run_training(config)
    for name, path in sorted(artifacts.items()):
        click.echo(f"{name}: {path}")


@main.command("eval")
@click.option("--artifact", type=click.Path(path_type=Path), required=True,
              help="model.json produced by train.")
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), required=True)
@click.option("--runs", type=int, default=25, show_default=True)
@click.option("--start", "start_cell", type=int, default=None,
              help="Start cell index override (unseen-start experiments).")
@click.option("--weights", "weights_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_channel_option
@_handles_errors
def eval_cmd(
    artifact: Path,
    scenario_path: Path,
    runs: int,
    start_cell: int | None,
    weights_path: Path | None,
    out: Path,
    channel: str | None,
) -> None:
    """Greedy rollouts of a trained artifact; writes metrics.csv and summary.json."""
    sc = harness.load_scenario(scenario_path, _mode(channel))
    rows, summary = harness.evaluate_artifact(
        artifact, sc, eval_runs=runs, start_cell_index=start_cell, weights_path=weights_path
    )
    out.mkdir(parents=True, exist_ok=True)
    harness.export_metrics(rows, out / "metrics.csv")
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    click.echo(f"mean final distance: {summary['mean_final_distance']:.3f}")
    click.echo(f"reached fraction:    {summary['reached_fraction']:.3f}")
    click.echo(f"metrics: {out / 'metrics.csv'}")


@main.command("unseen-eval")
@click.option("--scenario", "scenario_path", type=click.Path(path_type=Path), required=True)
@click.option("--bc", "bc_path", type=click.Path(path_type=Path), required=True)
@click.option("--dqn", "dqn_path", type=click.Path(path_type=Path), required=True)
@click.option("--lfa", "lfa_path", type=click.Path(path_type=Path), default=None)
@click.option("--start", "start_cell", type=int, default=5, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_channel_option
@_handles_errors
def unseen_eval(
    scenario_path: Path,
    bc_path: Path,
    dqn_path: Path,
    lfa_path: Path | None,
    start_cell: int,
    out: Path,
    channel: str | None,
) -> None:
    """Compare trained methods from a start cell the expert never visited."""
    sc = harness.load_scenario(scenario_path, _mode(channel))
    artifacts = {"bc": bc_path, "dqn": dqn_path}
    if lfa_path is not None:
        artifacts["lfa"] = lfa_path
    report = harness.unseen_start_eval(artifacts, sc, start_cell_index=start_cell)
    out.mkdir(parents=True, exist_ok=True)
    (out / "unseen_report.json").write_text(
        json.dumps(report, indent=1) + "\n", encoding="utf-8"
    )
    for name, entry in report["methods"].items():
        flag = "reached" if entry["reached"] else "did NOT reach"
        click.echo(f"{name}: {flag} the destination in {entry['steps']} steps")
    click.echo(f"report: {out / 'unseen_report.json'}")


@main.command()
@click.option("--store", type=click.Path(path_type=Path), required=True,
              help="Directory with scenarios/, policies/, trajectories/.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@_handles_errors
def serve(store: Path, host: str, port: int) -> None:
    """Serve the demonstration/playback HTTP API."""
    import uvicorn

    from .service import create_app

    app = create_app(store)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

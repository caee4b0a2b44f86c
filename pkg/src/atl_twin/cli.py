"""Command line entry points: validate, plan, run, serve."""

from __future__ import annotations

import csv
import json
import logging
import os
import sys

import click

from .config import ConfigError, load_config
from .planner import plan_mold_trajectory
from .runtime import run_job


def _setup_logging() -> None:
    level = os.environ.get("ATL_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


@click.group()
def main() -> None:
    """Digital twin of the tape laying cell."""
    _setup_logging()


def _load(config_path: str):
    try:
        return load_config(config_path)
    except ConfigError as e:
        raise click.ClickException(str(e))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path: str) -> None:
    """Validate a run configuration."""
    cfg = _load(config_path)
    click.echo(
        f"ok: {len(cfg.job.tracks)} tracks, "
        f"total tape requirement {cfg.job.total_requirement:.3f} m"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--track", "track_index", default=0, show_default=True)
def plan(config_path: str, out_path: str, track_index: int) -> None:
    """Plan the mold trajectory for one track and write it as CSV."""
    cfg = _load(config_path)
    if not 0 <= track_index < len(cfg.job.tracks):
        raise click.ClickException(f"track index {track_index} out of range")
    try:
        traj = plan_mold_trajectory(
            cfg.job.tracks[track_index],
            cfg.nip,
            cfg.window.feed_speed,
            cfg.control_period,
            cfg.kinematic_params,
            seed=cfg.home_joints,
        )
    except Exception as e:
        raise click.ClickException(f"planning failed: {e}")
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["t", "x", "y", "z", "qw", "qx", "qy", "qz", "q1", "q2", "q3", "q4", "q5", "q6", "s"]
        )
        for s in traj:
            w.writerow(
                [repr(float(v)) for v in (s.t, *s.mold_pose.position, *s.mold_pose.orientation)]
                + [repr(float(q)) for q in s.joints]
                + [repr(float(s.s))]
            )
    click.echo(f"wrote {len(traj)} samples to {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--trace", "trace_path", default=None, type=click.Path())
@click.option("--headless", is_flag=True, default=False, help="run as fast as possible")
@click.option("--max-time", default=600.0, show_default=True, help="simulated time cap, s")
def run(config_path: str, trace_path, headless: bool, max_time: float) -> None:
    """Run the configured job to completion with a scripted start."""
    cfg = _load(config_path)
    if headless:
        cfg.real_time_factor = 0.0
    if trace_path is None:
        trace_path = cfg.model.trace_path
    summary = run_job(cfg, trace_path=trace_path, max_time=max_time)
    click.echo(json.dumps(summary, indent=2, default=str))
    if summary["exit_reason"] != "job_complete":
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--port", default=None, type=int, help="override api.port from the config")
@click.option("--host", default=None, help="override api.host from the config")
def serve(config_path: str, port, host) -> None:
    """Run the job wall-clock paced and serve the operator HTTP/WS API."""
    import uvicorn

    from .api import JobServer, create_app

    cfg = _load(config_path)
    if cfg.real_time_factor <= 0:
        cfg.real_time_factor = 1.0  # serve mode is paced so operators can steer
    job = JobServer(cfg)
    job.start()
    app = create_app(job)
    try:
        uvicorn.run(
            app,
            host=host or cfg.model.api.host,
            port=port if port is not None else cfg.model.api.port,
            log_level="warning",
        )
    finally:
        job.stop()


if __name__ == "__main__":
    main()

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np

from src.common.config import RunConfig, SimConfig, load_config
from src.common.enums import Backend
from src.common.errors import ConfigError, DatasetError, RioError
from src.evaluation.metrics import compare_backends, reports_table, write_table
from src.geom.transforms import Pose, Rotation
from src.matching.frontend import match_scans
from src.radar_dsp.cube_io import read_cube
from src.radar_dsp.pipeline import cube_to_pointcloud
from src.radar_dsp.schemas import CfarConfig
from src.sim.montecarlo import run_montecarlo
from .dataset import read_jsonl, write_dataset, write_jsonl
from .pipeline import evaluate_runs, run_many, run_pipeline
from .schemas import PairMatchRecord, RadarRecord

logger = logging.getLogger(__name__)


def handle_errors(fn):
    """Map library errors to a one-line message and the error's exit code."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RioError as e:
            click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(e.exit_code)
    return wrapper


def _pose(text: str) -> Pose:
    """px,py,pz,qw,qx,qy,qz"""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"bad pose '{text}'") from e
    if len(values) != 7:
        raise ConfigError(f"pose needs 7 comma-separated numbers, got {len(values)}")
    return Pose(Rotation(np.array(values[3:])), np.array(values[:3]))


def _first_scan(path: str):
    records = read_jsonl(path, RadarRecord)
    if not records:
        raise DatasetError(f"no radar scan in {path}")
    return records[0].to_scan()


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="DEBUG logging")
def rio(verbose: bool):
    """Radar-inertial odometry: simulation, DSP, estimation and evaluation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@rio.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--runs", type=int, default=None, help="Monte-Carlo runs (default: n_runs from config)")
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@handle_errors
def simulate(config_path: Optional[str], out_dir: str, runs: Optional[int], seed: Optional[int], jobs: int):
    """Generate simulated datasets."""
    cfg = load_config(config_path, SimConfig)
    sims = run_montecarlo(cfg, runs, seed, jobs)
    out = Path(out_dir)
    for sim in sims:
        target = out if len(sims) == 1 else out / f"run_{sim.run_index:03d}"
        write_dataset(sim, target)
    click.echo(f"wrote {len(sims)} dataset(s) to {out}")


@rio.command()
@click.option("-i", "--input", "cube_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--train-cells", type=int, default=16, show_default=True)
@click.option("--guard-cells", type=int, default=2, show_default=True)
@click.option("--pfa", type=float, default=1e-3, show_default=True)
@handle_errors
def dsp(cube_path: str, out_path: str, train_cells: int, guard_cells: int, pfa: float):
    """Turn a binary radar cube into a point-cloud record."""
    try:
        cfar = CfarConfig(train_cells=train_cells, guard_cells=guard_cells, pfa=pfa)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    scan = cube_to_pointcloud(read_cube(cube_path), cfar)
    write_jsonl(out_path, [RadarRecord.from_scan(scan)])
    click.echo(f"{len(scan)} detections -> {out_path}")


@rio.command()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-d", "--dataset", "datasets", required=True, multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--backend", type=click.Choice([b.value for b in Backend]), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@handle_errors
def estimate(config_path: Optional[str], datasets: Tuple[str, ...], out_dir: str, backend: Optional[str], jobs: int):
    """Run a backend over one or more datasets."""
    overrides = {"backend": backend} if backend else None
    cfg = load_config(config_path, RunConfig, overrides)
    if len(datasets) == 1:
        result = run_pipeline(cfg, datasets[0], out_dir)
        failures = [] if result.failure is None else [out_dir]
    else:
        failures = [d for d, ok in run_many(cfg, datasets, out_dir, jobs) if not ok]
    if failures:
        click.echo(f"error: estimator failed in {', '.join(failures)}", err=True)
        sys.exit(2)
    click.echo(f"{cfg.backend.value} run(s) written to {out_dir}")


@rio.command()
@click.option("-r", "--run", "runs", required=True, multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--settle", type=float, default=0.0, help="seconds skipped before NEES statistics")
@handle_errors
def evaluate(runs: Tuple[str, ...], out_path: str, settle: float):
    """Metrics table (CSV) and summary (JSON) for run directories."""
    reports, nees = evaluate_runs(runs, settle_time=settle)
    table = reports_table(reports)
    write_table(table, out_path, {
        "runs": [r.model_dump(mode="json") for r in reports],
        "nees": {b: None if s is None else s.model_dump(mode="json") for b, s in nees.items()},
    })
    click.echo(table.to_string(index=False))


@rio.command()
@click.option("--ekf", "ekf_runs", required=True, multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("--fg", "fg_runs", required=True, multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--settle", type=float, default=0.0, help="seconds skipped before NEES statistics")
@handle_errors
def compare(ekf_runs: Tuple[str, ...], fg_runs: Tuple[str, ...], out_path: str, settle: float):
    """Paired EKF vs FG accuracy table over the same datasets, with each backend's Monte-Carlo NEES."""
    ekf_reports, ekf_nees = evaluate_runs(ekf_runs, settle_time=settle)
    fg_reports, fg_nees = evaluate_runs(fg_runs, settle_time=settle)
    table, summary = compare_backends({r.run: r for r in ekf_reports}, {r.run: r for r in fg_reports})
    summary = summary.model_copy(update={
        "ekf_nees": ekf_nees.get(Backend.EKF.value),
        "fg_nees": fg_nees.get(Backend.FG.value),
    })
    write_table(table, out_path, summary.model_dump(mode="json"))
    click.echo(table.to_string())


@rio.command()
@click.option("-a", "scan_a", required=True, type=click.Path(exists=True, dir_okay=False), help="previous scan")
@click.option("-b", "scan_b", required=True, type=click.Path(exists=True, dir_okay=False), help="current scan")
@click.option("--pose-a", required=True, help="IMU pose of scan A: px,py,pz,qw,qx,qy,qz")
@click.option("--pose-b", required=True, help="IMU pose of scan B: px,py,pz,qw,qx,qy,qz")
@click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def match(scan_a: str, scan_b: str, pose_a: str, pose_b: str, config_path: Optional[str]):
    """Match two scans given their IMU poses; prints the match set as JSON."""
    cfg = load_config(config_path, RunConfig)
    prev, curr = _first_scan(scan_a), _first_scan(scan_b)
    matches = match_scans(
        curr, prev.positions, _pose(pose_a), _pose(pose_b), cfg.extrinsics.pose(), cfg.matching
    )
    click.echo(json.dumps(PairMatchRecord(pairs=matches.pairs, unmatched=matches.unmatched).model_dump()))

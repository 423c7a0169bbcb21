"""Command line for the furniture-free mapping pipeline.

Subcommands:
    run       full pipeline on recorded frames or a synthetic scene
    simulate  render a scene into frames, a trajectory and a ground-truth cloud
    evaluate  per-label area metrics of a predicted cloud against ground truth
    gridcmp   cell agreement between two grids

Usage:
    python -m scripts.ffmap simulate --output data/sim
    python -m scripts.ffmap run --frames data/sim/frames --trajectory data/sim/trajectory.txt \
        --truth data/sim/truth.ply --output data/runs/sim --jobs 4
    python -m scripts.ffmap evaluate --predicted data/runs/sim/labeled_cloud.ply --truth data/sim/truth.ply
    python -m scripts.ffmap gridcmp a.pgm b.pgm
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, get_args, get_origin

# Ensure the repository root is on sys.path when executed directly.
REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.append(str(REPO_ROOT))

from app.config import PipelineConfig, load_config, settings  # noqa: E402
from app.core.errors import FfmapError  # noqa: E402
from app.core.evaluation import metrics, metrics_table  # noqa: E402
from app.core.labeling import LabeledCloud  # noqa: E402
from app.core.map_builder import compare_grids  # noqa: E402
from app.core.geometry import Trajectory  # noqa: E402
from app.services.pipeline import RecordedSource, SyntheticSource, run_pipeline  # noqa: E402
from app.simulation.raycast import trajectory_through  # noqa: E402
from app.simulation.scene import SensorSpec, load_scene, serialize_scene, standard_scene  # noqa: E402
from app.utils.grid_io import read_grid  # noqa: E402
from app.utils.ply_io import read_labeled_cloud, write_frame, write_labeled_cloud  # noqa: E402
from app.utils.trajectory_io import write_trajectory  # noqa: E402

logger = logging.getLogger("ffmap")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--flag`` per PipelineConfig field; unset flags keep the config file value."""
    group = parser.add_argument_group("pipeline parameters")
    for name, info in PipelineConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        annotation = info.annotation
        if get_origin(annotation) is Literal:
            group.add_argument(flag, dest=name, choices=get_args(annotation), default=None)
        elif get_origin(annotation) is tuple:
            group.add_argument(flag, dest=name, type=float, nargs=2, metavar=("LOW", "HIGH"), default=None)
        else:
            group.add_argument(flag, dest=name, type=annotation, default=None, help=f"default {info.default}")


def _config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {}
    for name in PipelineConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = tuple(value) if isinstance(value, list) else value
    return overrides


def _scene_source(args: argparse.Namespace):
    if args.scene is not None:
        return load_scene(args.scene)
    return standard_scene(), SensorSpec()


def cmd_run(args: argparse.Namespace) -> int:
    config_file = args.config or (Path(settings.DEFAULT_CONFIG_FILE) if settings.DEFAULT_CONFIG_FILE else None)
    config = load_config(config_file, _config_overrides(args))
    if args.frames is not None:
        if args.trajectory is None:
            raise FfmapError("--frames needs --trajectory")
        source = RecordedSource(frames_dir=args.frames, trajectory_path=args.trajectory, truth_path=args.truth)
    else:
        scene, sensor = _scene_source(args)
        source = SyntheticSource(scene=scene, sensor=sensor, seed=config.seed)
    result = run_pipeline(config, source, args.output)

    print(f"frames: {result.frames_processed}/{result.frames_total} processed")
    for name, path in result.artifacts.items():
        print(f"{name}: {path}")
    if result.metrics is not None:
        print(metrics_table(result.metrics), end="")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scene, sensor = _scene_source(args)
    if args.noise is not None:
        sensor = sensor.model_copy(update={"noise_sigma": args.noise})
    output: Path = args.output
    frames_dir = output / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    simulated = trajectory_through(scene, sensor, n_frames=args.frame_count, seed=args.seed)
    for pose, frame in simulated:
        write_frame(frames_dir / f"{pose.timestamp:.6f}.ply", frame.scan)
    poses = [pose for pose, _ in simulated]
    write_trajectory(output / "trajectory.txt", poses)

    trajectory = Trajectory(poses)
    truth = LabeledCloud.concatenate(
        [frame.truth_cloud().transformed(trajectory.pose_at(pose.timestamp)) for pose, frame in simulated]
    )
    write_labeled_cloud(output / "truth.ply", truth)
    (output / "scene.conf").write_text(serialize_scene(scene, sensor), encoding="utf-8")
    print(f"{len(simulated)} frames, {len(truth)} points written to {output}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    predicted = read_labeled_cloud(args.predicted)
    truth = read_labeled_cloud(args.truth)
    table = metrics_table(metrics(predicted, truth, match_tol=args.match_tol, cell=args.area_cell))
    if args.output is not None:
        args.output.write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_gridcmp(args: argparse.Namespace) -> int:
    try:
        result = compare_grids(read_grid(args.first), read_grid(args.second))
    except ValueError as e:
        raise FfmapError(str(e)) from e
    print(f"agreement: {result.agreement:.2f}% of {result.cells} cells")
    for (a, b), count in sorted(result.confusion.items()):
        print(f"{a}\t{b}\t{count}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffmap", description="Furniture-free mapping from vertical Lidar scans.")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level (default from FFMAP_LOG_LEVEL).")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the full pipeline.")
    run.add_argument("--frames", type=Path, help="Directory of <seconds>.ply frames.")
    run.add_argument("--trajectory", type=Path, help="Trajectory file for --frames.")
    run.add_argument("--truth", type=Path, help="Ground-truth labeled PLY for --frames.")
    run.add_argument("--scene", type=Path, help="Scene file for a synthetic run (default: built-in scene).")
    run.add_argument("--output", type=Path, default=settings.OUTPUT_DIR, help="Artifact directory.")
    run.add_argument("--config", type=Path, help="key = value config file; flags override it.")
    _add_config_flags(run)
    run.set_defaults(handler=cmd_run)

    simulate = sub.add_parser("simulate", help="Render a scene into frames and ground truth.")
    simulate.add_argument("--scene", type=Path, help="Scene file (default: built-in scene).")
    simulate.add_argument("--output", type=Path, required=True, help="Output directory.")
    simulate.add_argument("--frame-count", type=int, help="Number of frames (default from the scene).")
    simulate.add_argument("--noise", type=float, help="Range noise sigma in meters.")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.set_defaults(handler=cmd_simulate)

    evaluate = sub.add_parser("evaluate", help="Area metrics of predicted against true labels.")
    evaluate.add_argument("--predicted", type=Path, required=True)
    evaluate.add_argument("--truth", type=Path, required=True)
    evaluate.add_argument("--match-tol", type=float, default=0.01)
    evaluate.add_argument("--area-cell", type=float, default=0.05)
    evaluate.add_argument("--output", type=Path, help="Also write the table to this file.")
    evaluate.set_defaults(handler=cmd_evaluate)

    gridcmp = sub.add_parser("gridcmp", help="Compare two grids cell by cell.")
    gridcmp.add_argument("first", type=Path)
    gridcmp.add_argument("second", type=Path)
    gridcmp.set_defaults(handler=cmd_gridcmp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.LOG_FORMAT)
    try:
        return args.handler(args)
    except FfmapError as e:
        print(f"ffmap: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

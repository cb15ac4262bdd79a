import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.live import Live
from rich.panel import Panel
from rich.spinner import Spinner
from rich.table import Table

from src.config import LOG_LEVEL
from src.errors import InvalidConfig, PipelineError
from src.pipeline.cache_runner import run_cache_build, run_cache_stats, run_cache_update
from src.pipeline.coarse_pipeline import CoarseVideoPipeline
from src.pipeline.config import PipelineConfig
from src.pipeline.dataprep_runner import run_align_depth, run_filter, run_gen_scene
from src.pipeline.metrics_runner import run_metrics
from src.pipeline.schedule_runner import run_schedule


logger = logging.getLogger("cli")


def summary_panel(summary: Dict[str, Any], console: Console, title: str = "Summary"):
    console.print(Panel(json.dumps(summary, indent=2, default=str), title=title, border_style="magenta"))


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="Run seed (overrides config)")
    common.add_argument("--threads", type=int, help="Worker threads (overrides config)")
    common.add_argument("--out", help="Output directory (overrides config)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coarse-video", description="Geometric engine for video trajectory editing")
    subparsers = parser.add_subparsers(dest="command")
    common = _common_flags()

    coarse_parser = subparsers.add_parser("coarse", parents=[common], help="Synthesize coarse frames along a new trajectory")
    coarse_parser.add_argument("--input", help="Source layout directory (overrides config)")
    coarse_parser.add_argument("--targets", help="Target trajectory poses JSON (overrides config)")
    coarse_parser.add_argument("--no-viz", action="store_true", help="Skip HTML visualizations")
    coarse_parser.add_argument("--per-frame", action="store_true",
                               help="Warp each frame on its own without a world cache (baseline)")

    build_parser_ = subparsers.add_parser("cache-build", parents=[common], help="Build a world cache from source frames")
    build_parser_.add_argument("--input", help="Source layout directory (overrides config)")

    update_parser = subparsers.add_parser("cache-update", parents=[common], help="Merge generated anchor frames into a cache")
    update_parser.add_argument("--cache", required=True, help="Input cache PLY")
    update_parser.add_argument("--anchors", required=True, help="Anchor layout directory (estimated frame)")
    update_parser.add_argument("--round", type=int, default=1, help="Generation round tag")
    update_parser.add_argument("--correspondences", help='JSON {"src": [...], "dst": [...]}')
    update_parser.add_argument("--bridge-estimated", help="Bridge frames in the estimated frame")
    update_parser.add_argument("--bridge-reference", help="The same bridge frames in the cache frame")
    update_parser.add_argument("--anchor-count", type=int, help="Evenly sample this many anchors")

    stats_parser = subparsers.add_parser("cache-stats", parents=[common], help="Summarize a cache PLY")
    stats_parser.add_argument("cache", help="Cache PLY")

    schedule_parser = subparsers.add_parser("schedule", parents=[common], help="Simulate history-guided generation")
    schedule_parser.add_argument("--frames", type=int, help="Total frames (default: from segment count)")
    schedule_parser.add_argument("--denoiser", help="Stub denoiser name")
    schedule_parser.add_argument("--no-history", action="store_true", help="Denoise every segment without history")
    schedule_parser.add_argument("--training-pairs", type=int, default=0, help="Also sample this many (t1, t2) pairs")

    metrics_parser = subparsers.add_parser("metrics", parents=[common], help="Per-frame PSNR table")
    metrics_parser.add_argument("reference", help="Reference frame directory")
    metrics_parser.add_argument("candidate", help="Candidate frame directory")
    metrics_parser.add_argument("--masks", help="Mask directory restricting the comparison")

    scene_parser = subparsers.add_parser("gen-scene", parents=[common], help="Write a synthetic scene fixture")
    scene_parser.add_argument("--preset", help="plane | box-orbit | sphere-room | rotating-room")
    scene_parser.add_argument("--spec", help="Scene spec JSON")
    scene_parser.add_argument("--frames", type=int, default=5, help="Frame count")

    align_parser = subparsers.add_parser("align-depth", parents=[common], help="Align predicted depth to sparse anchors")
    align_parser.add_argument("--depth", required=True, help="Predicted depth PFM")
    align_parser.add_argument("--poses", required=True, help="Poses JSON")
    align_parser.add_argument("--index", type=int, default=0, help="Frame index of the depth map")
    align_parser.add_argument("--region-mask", required=True, help="Foreground mask PNG")
    align_parser.add_argument("--anchors", help="Anchors JSON lines")
    align_parser.add_argument("--tracks", help="Feature tracks JSON to triangulate")

    filter_parser = subparsers.add_parser("filter", parents=[common], help="Apply the sample filtering rules")
    filter_parser.add_argument("manifest", help="Filter manifest JSON")
    filter_parser.add_argument("--iou-threshold", type=float, help="Minimum consecutive mask IoU")

    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise InvalidConfig(f"--threads must be >= 1, got {args.threads}")
        config.threads = args.threads
    if args.out is not None:
        config.output_dir = Path(args.out)
    if getattr(args, "input", None):
        config.input_dir = Path(args.input)
    if getattr(args, "targets", None):
        config.target_poses = Path(args.targets)
    return config


def run_command(args: argparse.Namespace, console: Console) -> Dict[str, Any]:
    config = load_config(args)
    out = Path(config.output_dir)

    if args.command == "coarse":
        if args.per_frame:
            config.per_frame = True
        with Live(Spinner("dots", text="Synthesizing coarse frames..."), refresh_per_second=10, console=console):
            summary = CoarseVideoPipeline(config, visualize=not args.no_viz).run()
        console.print("[bold green]Coarse video complete![/bold green]")
        return summary

    if args.command == "cache-build":
        with Live(Spinner("dots", text="Building world cache..."), refresh_per_second=10, console=console):
            return run_cache_build(config, out / "cache.ply")

    if args.command == "cache-update":
        with Live(Spinner("dots", text="Updating world cache..."), refresh_per_second=10, console=console):
            return run_cache_update(config, args.cache, args.anchors, out / "cache.ply", args.round,
                                    correspondences=args.correspondences,
                                    bridge_estimated=args.bridge_estimated,
                                    bridge_reference=args.bridge_reference,
                                    anchor_count=args.anchor_count)

    if args.command == "cache-stats":
        return run_cache_stats(args.cache, out if args.out else None, seed=config.seed)

    if args.command == "schedule":
        if args.frames is not None:
            config.total_frames = args.frames
        if args.denoiser:
            config.denoiser = args.denoiser
        if args.no_history:
            config.history_guidance = False
        with Live(Spinner("dots", text="Running schedule..."), refresh_per_second=10, console=console):
            return run_schedule(config, training_pairs=args.training_pairs)

    if args.command == "metrics":
        table = run_metrics(args.reference, args.candidate, out / "metrics.csv", mask_dir=args.masks)
        view = Table(title="PSNR (dB)")
        view.add_column("frame")
        view.add_column("psnr", justify="right")
        for row in table.itertuples(index=False):
            view.add_row(str(row.frame), f"{row.psnr:.3f}")
        console.print(view)
        return {"frames": len(table) - 1, "csv": str(out / "metrics.csv")}

    if args.command == "gen-scene":
        return run_gen_scene(out, args.frames, preset=args.preset, spec_path=args.spec)

    if args.command == "align-depth":
        return run_align_depth(args.depth, args.poses, args.index, args.region_mask, out,
                               anchors_path=args.anchors, tracks_path=args.tracks)

    if args.command == "filter":
        threshold = args.iou_threshold if args.iou_threshold is not None else config.iou_threshold
        return run_filter(args.manifest, out / "filter_report.json", threshold)

    raise InvalidConfig(f"Unknown command '{args.command}'")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 0

    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    console = Console()
    try:
        summary = run_command(args, console)
    except PipelineError as e:
        console.print(Panel(str(e), title=type(e).__name__, border_style="red"))
        return e.exit_code
    summary_panel(summary, console, title=args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())

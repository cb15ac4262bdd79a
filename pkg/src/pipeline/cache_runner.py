import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional, Union

from src.errors import InvalidConfig
from src.pipeline.config import PipelineConfig
from src.pipeline.frame_io import load_correspondences, load_frame_dir
from src.visualization.cache_visualizer import CacheVisualizer
from src.world_cache.cache import (
    bridge_correspondences, build_cache, cache_stats, sample_anchor_indices, update_cache,
)
from src.world_cache.ply_io import load_cache_ply, save_cache_ply


logger = logging.getLogger("cache_runner")


def run_cache_build(config: PipelineConfig, output_path: Union[str, Path]) -> Dict[str, Any]:
    frames, poses = load_frame_dir(config.require_input_dir())
    cache = build_cache(frames, poses, config.cache)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    save_cache_ply(cache, output_path)
    return cache_stats(cache).to_dict()


def run_cache_update(config: PipelineConfig,
                     cache_path: Union[str, Path],
                     anchor_dir: Union[str, Path],
                     output_path: Union[str, Path],
                     round_index: int,
                     correspondences: Optional[Union[str, Path]] = None,
                     bridge_estimated: Optional[Union[str, Path]] = None,
                     bridge_reference: Optional[Union[str, Path]] = None,
                     anchor_count: Optional[int] = None) -> Dict[str, Any]:
    """Merge generated anchor frames into a cache.

    Correspondences come from a JSON file or are paired up from bridge
    frames reconstructed both in the estimated and in the cache frame.
    """
    if round_index < 1:
        raise InvalidConfig(f"Update rounds start at 1, got {round_index}")
    cache = load_cache_ply(cache_path)
    anchors, anchor_poses = load_frame_dir(anchor_dir)
    indices = list(range(len(anchors)))
    if anchor_count is not None:
        indices = sample_anchor_indices(len(anchors), anchor_count)
    anchors = [anchors[i] for i in indices]
    anchor_poses = [anchor_poses[i] for i in indices]

    if correspondences is not None:
        src, dst = load_correspondences(correspondences)
    elif bridge_estimated is not None and bridge_reference is not None:
        est_frames, est_poses = load_frame_dir(bridge_estimated)
        ref_frames, ref_poses = load_frame_dir(bridge_reference)
        src, dst = bridge_correspondences(est_frames, est_poses, ref_frames, ref_poses)
    else:
        raise InvalidConfig("cache-update needs --correspondences or both --bridge-estimated and --bridge-reference")

    updated = update_cache(cache, anchors, anchor_poses, src, dst, round_index,
                           visibility_dilation=config.cache.visibility_dilation,
                           anchor_frame_indices=indices)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    save_cache_ply(updated, output_path)
    summary = cache_stats(updated).to_dict()
    summary["added"] = len(updated) - len(cache)
    return summary


def run_cache_stats(cache_path: Union[str, Path], output_dir: Optional[Union[str, Path]] = None,
                    seed: int = 0) -> Dict[str, Any]:
    cache = load_cache_ply(cache_path)
    stats = cache_stats(cache)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "cache_stats.json", "w", encoding="utf-8") as f:
            json.dump(stats.to_dict(), f, indent=2)
        visualizer = CacheVisualizer(seed=seed)
        visualizer.create_point_cloud_view(cache, str(out / "cache.html"))
        visualizer.create_summary_report(stats, str(out / "summary_report.html"))
    return stats.to_dict()

import json
import logging
from pathlib import Path
from typing import Dict, Any, List, Optional, Union

from src.dataprep.depth_alignment import align_depth, load_anchors, save_anchors
from src.dataprep.sample_filter import consecutive_mask_ious, filter_samples
from src.dataprep.synthetic_scene import SCENE_PRESETS, generate_scene, load_scene_spec
from src.dataprep.triangulation import FeatureTrack, triangulate_tracks
from src.errors import InvalidSpec, ManifestError
from src.geometry.camera import load_poses
from src.json_io import read_json
from src.pipeline.frame_io import list_images, read_mask, read_pfm, save_frame_dir, write_pfm
from src.world_cache.ply_io import save_cache_ply


logger = logging.getLogger("dataprep_runner")


def run_gen_scene(output_dir: Union[str, Path], frame_count: int, preset: Optional[str] = None,
                  spec_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    if spec_path is not None:
        spec = load_scene_spec(spec_path)
    else:
        name = preset or "sphere-room"
        if name not in SCENE_PRESETS:
            raise InvalidSpec(f"Unknown scene preset '{name}', choose from {sorted(SCENE_PRESETS)}")
        spec = SCENE_PRESETS[name]()
    frames, poses, ground_truth = generate_scene(spec, frame_count)
    out = Path(output_dir)
    save_frame_dir(out, frames, poses)
    save_cache_ply(ground_truth, out / "ground_truth.ply")
    return {"frames": len(frames), "width": spec.width, "height": spec.height,
            "ground_truth_points": len(ground_truth), "output_dir": str(out)}


def load_tracks(path: Union[str, Path], view_count: Optional[int] = None) -> List[FeatureTrack]:
    """JSON list of {"observations": [[view, u, v], ...], "region": ...}; views index the pose list"""
    data = read_json(path, "Track file")
    try:
        tracks = [FeatureTrack([(int(v), float(u), float(w)) for v, u, w in item["observations"]],
                               item.get("region", "background")) for item in data]
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ManifestError(f"Malformed track ({e})", str(path))
    if view_count is not None:
        for index, track in enumerate(tracks):
            bad = [view for view, _, _ in track.observations if not 0 <= view < view_count]
            if bad:
                raise ManifestError(f"Track {index} observes view {bad[0]} but only {view_count} poses exist",
                                    str(path))
    return tracks


def run_align_depth(depth_path: Union[str, Path], poses_path: Union[str, Path], frame_index: int,
                    region_mask_path: Union[str, Path], output_dir: Union[str, Path],
                    anchors_path: Optional[Union[str, Path]] = None,
                    tracks_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Fit per-region scale/offset of a predicted depth map against sparse anchors.

    Anchors are read from JSON lines or triangulated from feature tracks.
    """
    poses = load_poses(poses_path)
    if not 0 <= frame_index < len(poses):
        raise ManifestError(f"Frame index {frame_index} outside {len(poses)} poses", str(poses_path))
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rejected = 0
    if tracks_path is not None:
        anchors, rejected = triangulate_tracks(load_tracks(tracks_path, len(poses)), poses,
                                                reference_view=frame_index)
        save_anchors(anchors, out / "anchors.jsonl")
    elif anchors_path is not None:
        anchors = load_anchors(anchors_path)
    else:
        raise ManifestError("align-depth needs anchors or tracks")

    depth = read_pfm(depth_path)
    alignment, corrected = align_depth(depth, anchors, poses[frame_index], read_mask(region_mask_path))
    write_pfm(out / "depth_aligned.pfm", corrected)
    summary = alignment.to_dict()
    summary["rejected_tracks"] = rejected
    with open(out / "alignment.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    return summary


def _resolve_mask_dir(item: Any, base_dir: Path) -> Any:
    if isinstance(item, dict) and "mask_dir" in item and "ious" not in item:
        mask_dir = Path(item["mask_dir"])
        mask_dir = mask_dir if mask_dir.is_absolute() else base_dir / mask_dir
        masks = [read_mask(path) for path in list_images(mask_dir)]
        item = dict(item, ious=consecutive_mask_ious(masks))
    return item


def run_filter(manifest_path: Union[str, Path], output_path: Union[str, Path],
               iou_threshold: float) -> Dict[str, Any]:
    """Samples carry `ious` directly or a `mask_dir` of coarse masks to measure"""
    manifest_path = Path(manifest_path)
    data = read_json(manifest_path, "Filter manifest")
    if isinstance(data, dict):
        data = data.get("samples", [])
    if not isinstance(data, list):
        raise ManifestError("Filter manifest must hold a list of samples", str(manifest_path))
    records = [_resolve_mask_dir(item, manifest_path.parent) for item in data]
    report = filter_samples(records, iou_threshold)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
    return report.to_dict()

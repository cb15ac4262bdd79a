import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Dict, Any, Optional, Sequence, Tuple

import cv2
import numpy as np

from src.config import DEFAULT_SAMPLE_COUNT, DEFAULT_VISIBILITY_DILATION, DEFAULT_ANCHOR_COUNT
from src.errors import EmptyInput, InvalidConfig, ShapeMismatch
from src.geometry.camera import CameraPose, camera_to_world
from src.geometry.umeyama import SimilarityTransform, umeyama_fit, alignment_rms
from src.warp.frames import FrameBundle, WarpResult, require_same_shape
from src.warp.splatting import zbuffer_splat


logger = logging.getLogger("world_cache")


class WorldCache:
    """Append-only coloured point cloud of static scene content in world coordinates.

    Every point is tagged with the frame it came from and its generation
    round (0 for the source video, >= 1 for progressive updates).
    """

    def __init__(self,
                 positions: Optional[np.ndarray] = None,
                 colors: Optional[np.ndarray] = None,
                 frame_indices: Optional[np.ndarray] = None,
                 rounds: Optional[np.ndarray] = None):
        self._chunks: List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self._merged = None
        if positions is not None and len(positions):
            count = len(positions)
            self._add_chunk(
                positions, colors,
                np.zeros(count, dtype=np.int32) if frame_indices is None else frame_indices,
                np.zeros(count, dtype=np.int32) if rounds is None else rounds,
            )

    def _add_chunk(self, positions, colors, frame_indices, rounds):
        positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        colors = np.array(colors, dtype=np.uint8).reshape(-1, 3)
        frame_indices = np.array(frame_indices, dtype=np.int32).reshape(-1)
        rounds = np.array(rounds, dtype=np.int32).reshape(-1)
        if not (len(positions) == len(colors) == len(frame_indices) == len(rounds)):
            raise ShapeMismatch("Cache columns must have equal length")
        if not np.all(np.isfinite(positions)):
            raise ShapeMismatch("Cache points must be finite")
        for column in (positions, colors, frame_indices, rounds):
            column.setflags(write=False)
        self._chunks.append((positions, colors, frame_indices, rounds))
        self._merged = None

    def append(self, positions: np.ndarray, colors: np.ndarray, frame_index: int, round_index: int) -> int:
        count = len(positions)
        if count:
            self._add_chunk(positions, colors,
                            np.full(count, frame_index, dtype=np.int32),
                            np.full(count, round_index, dtype=np.int32))
        return count

    def _columns(self):
        if self._merged is None:
            if self._chunks:
                self._merged = tuple(np.concatenate(column) for column in zip(*self._chunks))
            else:
                self._merged = (np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8),
                                np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32))
        return self._merged

    @property
    def positions(self) -> np.ndarray:
        return self._columns()[0]

    @property
    def colors(self) -> np.ndarray:
        return self._columns()[1]

    @property
    def frame_indices(self) -> np.ndarray:
        return self._columns()[2]

    @property
    def rounds(self) -> np.ndarray:
        return self._columns()[3]

    def __len__(self) -> int:
        return sum(len(chunk[0]) for chunk in self._chunks)

    def copy(self) -> "WorldCache":
        # Chunks are read-only, so sharing them is safe.
        clone = WorldCache()
        clone._chunks = list(self._chunks)
        return clone


@dataclass
class CacheBuildConfig:
    sample_count: int = DEFAULT_SAMPLE_COUNT
    visibility_dilation: int = DEFAULT_VISIBILITY_DILATION

    def __post_init__(self):
        if self.sample_count < 1:
            raise InvalidConfig(f"sample_count must be >= 1, got {self.sample_count}")
        if self.visibility_dilation < 0:
            raise InvalidConfig(f"visibility_dilation must be >= 0, got {self.visibility_dilation}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CacheBuildConfig":
        return cls(
            sample_count=int(data.get("sample_count", DEFAULT_SAMPLE_COUNT)),
            visibility_dilation=int(data.get("visibility_dilation", DEFAULT_VISIBILITY_DILATION)),
        )


@dataclass
class CacheStats:
    point_count: int
    bbox_min: Optional[List[float]]
    bbox_max: Optional[List[float]]
    per_round_counts: Dict[int, int] = field(default_factory=dict)
    per_frame_counts: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point_count": self.point_count,
            "bbox_min": self.bbox_min,
            "bbox_max": self.bbox_max,
            "per_round_counts": {str(k): v for k, v in self.per_round_counts.items()},
            "per_frame_counts": {str(k): v for k, v in self.per_frame_counts.items()},
        }


def uniform_sample_indices(frame_count: int, sample_count: int) -> List[int]:
    """round(k * (N - 1) / (L - 1)) for k = 0..L-1, endpoints included"""
    if frame_count < 1:
        raise EmptyInput("Cannot sample frames from an empty video")
    if sample_count < 1 or sample_count > frame_count:
        raise InvalidConfig(f"Cannot sample {sample_count} frames out of {frame_count}")
    if sample_count == 1:
        return [0]
    step = (frame_count - 1) / (sample_count - 1)
    return [int(np.floor(k * step + 0.5)) for k in range(sample_count)]


def sample_anchor_indices(segment_length: int, anchor_count: int = DEFAULT_ANCHOR_COUNT) -> List[int]:
    """Evenly spaced anchor frames inside a generated segment"""
    return uniform_sample_indices(segment_length, min(anchor_count, segment_length))


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Square (Chebyshev) dilation by `radius` pixels"""
    if radius <= 0:
        return mask.copy()
    kernel = np.ones((2 * radius + 1, 2 * radius + 1), dtype=np.uint8)
    return cv2.dilate(mask.astype(np.uint8), kernel, iterations=1).astype(bool)


def render_cache(cache: WorldCache, pose: CameraPose) -> WarpResult:
    return zbuffer_splat(cache.positions, cache.colors, pose)


def _append_visibility_gaps(cache: WorldCache, world_points: np.ndarray, colors: np.ndarray,
                            candidates: np.ndarray, pose: CameraPose, dilation: int,
                            frame_index: int, round_index: int) -> int:
    """Append candidate pixels that the current cache leaves uncovered in this view"""
    require_same_shape(candidates.shape, pose.intrinsics.shape, "frame and pose intrinsics")
    coverage = render_cache(cache, pose).mask
    gaps = candidates & ~dilate_mask(coverage, dilation)
    return cache.append(world_points[gaps], colors[gaps], frame_index, round_index)


def build_cache(frames: Sequence[FrameBundle], poses: Sequence[CameraPose],
                config: CacheBuildConfig) -> WorldCache:
    if len(frames) == 0:
        raise EmptyInput("build_cache needs at least one frame")
    if len(frames) != len(poses):
        raise InvalidConfig(f"Got {len(frames)} frames but {len(poses)} poses")
    if config.sample_count > len(frames):
        raise InvalidConfig(f"sample_count {config.sample_count} exceeds frame count {len(frames)}")

    cache = WorldCache()
    for index in uniform_sample_indices(len(frames), config.sample_count):
        frame, pose = frames[index], poses[index]
        world = camera_to_world(frame.points, pose)
        added = _append_visibility_gaps(cache, world, frame.rgb, frame.static_mask, pose,
                                        config.visibility_dilation, index, 0)
        logger.debug("Frame %d appended %d points (cache size %d)", index, added, len(cache))
    logger.info("Built world cache with %d points from %d sampled frames", len(cache), config.sample_count)
    return cache


def naive_fusion(frames: Sequence[FrameBundle], poses: Sequence[CameraPose]) -> WorldCache:
    """Every static point of every frame, with no visibility gating"""
    cache = WorldCache()
    for index, (frame, pose) in enumerate(zip(frames, poses)):
        static = frame.static_mask
        cache.append(camera_to_world(frame.points[static], pose), frame.rgb[static], index, 0)
    return cache


def align_anchor_frames(anchors: Sequence[FrameBundle], anchor_poses_estimated: Sequence[CameraPose],
                        transform: SimilarityTransform) -> Tuple[List[np.ndarray], List[CameraPose]]:
    """Per-pixel world points and poses of the anchors, expressed in the cache frame"""
    aligned_points, aligned_poses = [], []
    for anchor, pose in zip(anchors, anchor_poses_estimated):
        estimated_world = camera_to_world(anchor.points, pose)
        aligned_points.append(transform.apply(estimated_world))
        aligned_poses.append(transform.transform_pose(pose))
    return aligned_points, aligned_poses


def update_cache(cache: WorldCache,
                 anchors: Sequence[FrameBundle],
                 anchor_poses_estimated: Sequence[CameraPose],
                 correspondence_src: np.ndarray,
                 correspondence_dst: np.ndarray,
                 round_index: int,
                 visibility_dilation: int = DEFAULT_VISIBILITY_DILATION,
                 anchor_frame_indices: Optional[Sequence[int]] = None) -> WorldCache:
    """Align anchor frames to the cache and merge their uncovered static pixels.

    Returns a new cache; the input cache is left untouched.
    """
    if len(anchors) != len(anchor_poses_estimated):
        raise InvalidConfig(f"Got {len(anchors)} anchors but {len(anchor_poses_estimated)} poses")
    transform = umeyama_fit(correspondence_src, correspondence_dst)
    logger.info("Anchor alignment: scale %.6f, residual RMS %.3e", transform.scale,
                alignment_rms(transform, correspondence_src, correspondence_dst))

    if anchor_frame_indices is None:
        anchor_frame_indices = list(range(len(anchors)))
    updated = cache.copy()
    aligned_points, aligned_poses = align_anchor_frames(anchors, anchor_poses_estimated, transform)
    for anchor, points, pose, frame_index in zip(anchors, aligned_points, aligned_poses, anchor_frame_indices):
        added = _append_visibility_gaps(updated, points, anchor.rgb, anchor.static_mask, pose,
                                        visibility_dilation, frame_index, round_index)
        logger.debug("Anchor %d appended %d points in round %d", frame_index, added, round_index)
    logger.info("Round %d grew the cache from %d to %d points", round_index, len(cache), len(updated))
    return updated


def bridge_correspondences(estimated_frames: Sequence[FrameBundle],
                           estimated_poses: Sequence[CameraPose],
                           reference_frames: Sequence[FrameBundle],
                           reference_poses: Sequence[CameraPose]) -> Tuple[np.ndarray, np.ndarray]:
    """Pair estimated and cache-frame world points of source frames seen by both reconstructions"""
    src, dst = [], []
    for est, est_pose, ref, ref_pose in zip(estimated_frames, estimated_poses, reference_frames, reference_poses):
        require_same_shape(est.shape, ref.shape, "bridge frames")
        shared = est.static_mask & ref.static_mask
        src.append(camera_to_world(est.points[shared], est_pose))
        dst.append(camera_to_world(ref.points[shared], ref_pose))
    if not src:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.concatenate(src), np.concatenate(dst)


def cache_stats(cache: WorldCache) -> CacheStats:
    positions = cache.positions
    finite = positions[np.all(np.isfinite(positions), axis=1)]
    if len(finite):
        bbox_min, bbox_max = finite.min(axis=0).tolist(), finite.max(axis=0).tolist()
    else:
        bbox_min = bbox_max = None
    return CacheStats(
        point_count=len(cache),
        bbox_min=bbox_min,
        bbox_max=bbox_max,
        per_round_counts=dict(sorted(Counter(cache.rounds.tolist()).items())),
        per_frame_counts=dict(sorted(Counter(cache.frame_indices.tolist()).items())),
    )

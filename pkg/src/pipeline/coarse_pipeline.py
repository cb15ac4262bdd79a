import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Dict, Any, Optional

from tqdm import tqdm

from src.errors import ManifestError
from src.geometry.camera import CameraPose, load_poses
from src.pipeline.config import PipelineConfig
from src.pipeline.frame_io import load_frame_dir, frame_name, write_mask, write_rgb
from src.visualization.cache_visualizer import CacheVisualizer
from src.warp.frames import CoarseFrame, FrameBundle
from src.warp.hybrid import fuse_coarse, warp_dynamic, warp_frame
from src.world_cache.cache import (
    WorldCache, build_cache, cache_stats, render_cache, uniform_sample_indices,
)
from src.world_cache.ply_io import save_cache_ply


logger = logging.getLogger("coarse_pipeline")


class CoarseVideoPipeline:
    """Source video + target trajectory -> coarse target frames with validity masks.

    With `config.per_frame` every frame is warped on its own and no world
    cache is built (the per-frame warping baseline).
    """

    def __init__(self, config: PipelineConfig, output_dir: Optional[str] = None, visualize: bool = True):
        self.config = config
        self.output_dir = Path(output_dir) if output_dir else Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.visualize = visualize
        self.visualizer = CacheVisualizer(seed=config.seed)

        # Results storage
        self.frames: List[FrameBundle] = []
        self.poses: List[CameraPose] = []
        self.targets: List[CameraPose] = []
        self.cache: Optional[WorldCache] = None
        self.coarse: List[CoarseFrame] = []

    @property
    def mode(self) -> str:
        return "per-frame" if self.config.per_frame else "hybrid"

    def run(self) -> Dict[str, Any]:
        """Main coarse-video pipeline"""
        logger.info("Step 1: Loading source frames...")
        self.frames, self.poses = load_frame_dir(self.config.require_input_dir())
        self.targets = self._load_targets()

        if self.config.per_frame:
            logger.info("Step 2: Skipping world cache (per-frame warping)")
            self.cache = WorldCache()
        else:
            logger.info("Step 2: Building world cache...")
            self.cache = build_cache(self.frames, self.poses, self.config.cache)

        logger.info("Step 3: Rendering coarse frames...")
        self.coarse = self._render_coarse_frames()

        logger.info("Step 4: Writing outputs...")
        self._write_outputs()

        if self.visualize:
            logger.info("Step 5: Creating visualizations...")
            self._create_visualizations()

        logger.info("Coarse video complete!")
        return self._get_summary()

    def _load_targets(self) -> List[CameraPose]:
        path = self.config.require_target_poses()
        targets = load_poses(path)
        if len(targets) != len(self.frames):
            raise ManifestError(f"{len(targets)} target poses for {len(self.frames)} source frames", str(path))
        return targets

    def _render_one(self, index: int) -> CoarseFrame:
        target = self.targets[index]
        if self.config.per_frame:
            return warp_frame(self.frames[index], self.poses[index], target)
        dynamic = warp_dynamic(self.frames[index], self.poses[index], target)
        static = render_cache(self.cache, target)
        return fuse_coarse(dynamic, static)

    def _render_coarse_frames(self) -> List[CoarseFrame]:
        """Per-frame render + warp + fuse; the cache is read-only here"""
        indices = range(len(self.targets))
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            # map keeps input order, so outputs do not depend on scheduling
            results = list(tqdm(pool.map(self._render_one, indices), total=len(self.targets),
                                desc="Rendering coarse frames"))
        return results

    def _write_outputs(self):
        frame_dir = self.output_dir / "frames"
        mask_dir = self.output_dir / "masks"
        frame_dir.mkdir(exist_ok=True)
        mask_dir.mkdir(exist_ok=True)
        for index, frame in enumerate(self.coarse):
            write_rgb(frame_dir / frame_name(index), frame.rgb)
            write_mask(mask_dir / frame_name(index), frame.mask)

        if not self.config.per_frame:
            save_cache_ply(self.cache, self.output_dir / "cache.ply")
        with open(self.output_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(self._manifest(), f, indent=2)

    def _manifest(self) -> Dict[str, Any]:
        return {
            "frame_count": len(self.coarse),
            "mode": self.mode,
            "sample_indices": [] if self.config.per_frame
            else uniform_sample_indices(len(self.frames), self.config.cache.sample_count),
            "visibility_dilation": self.config.cache.visibility_dilation,
            "cache_points": len(self.cache),
            "seed": self.config.seed,
            "frames": [
                {"frame": frame_name(i), "mask": frame_name(i), "coverage": frame.coverage}
                for i, frame in enumerate(self.coarse)
            ],
        }

    def _create_visualizations(self):
        if not self.config.per_frame:
            self.visualizer.create_point_cloud_view(self.cache, str(self.output_dir / "cache.html"))
        self.visualizer.create_summary_report(
            cache_stats(self.cache),
            str(self.output_dir / "summary_report.html"),
            coverage=[frame.coverage for frame in self.coarse],
        )

    def _get_summary(self) -> Dict[str, Any]:
        coverage = [frame.coverage for frame in self.coarse]
        return {
            "frames": len(self.coarse),
            "mode": self.mode,
            "cache_points": len(self.cache),
            "mean_coverage": sum(coverage) / len(coverage) if coverage else 0.0,
            "min_coverage": min(coverage) if coverage else 0.0,
            "output_dir": str(self.output_dir),
        }

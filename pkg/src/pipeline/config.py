import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, Optional, Union

from src.config import DEFAULT_SEED, DEFAULT_THREADS, OUTPUT_DIR
from src.dataprep.sample_filter import DEFAULT_IOU_THRESHOLD
from src.errors import InvalidConfig, ManifestError
from src.scheduler.schedule import T_MAX, NoiseSchedule, SegmentPlan
from src.world_cache.cache import CacheBuildConfig


logger = logging.getLogger("pipeline_config")


@dataclass
class PipelineConfig:
    """Everything a command needs; paths are resolved against the config file's directory"""
    input_dir: Optional[Path] = None
    target_poses: Optional[Path] = None
    output_dir: Path = field(default_factory=lambda: Path(OUTPUT_DIR))
    cache: CacheBuildConfig = field(default_factory=CacheBuildConfig)
    plan: SegmentPlan = field(default_factory=SegmentPlan)
    steps: int = 10
    t_max: float = T_MAX
    total_frames: Optional[int] = None
    latent_dim: int = 4
    denoiser: str = "linear"
    denoiser_params: Dict[str, Any] = field(default_factory=dict)
    history_guidance: bool = True
    per_frame: bool = False
    seed: int = DEFAULT_SEED
    threads: int = DEFAULT_THREADS
    iou_threshold: float = DEFAULT_IOU_THRESHOLD

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidConfig(f"steps must be >= 1, got {self.steps}")
        if not 0 < self.t_max <= T_MAX:
            raise InvalidConfig(f"t_max must lie in (0, {T_MAX:g}], got {self.t_max}")
        if self.latent_dim < 1:
            raise InvalidConfig(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.threads < 1:
            raise InvalidConfig(f"threads must be >= 1, got {self.threads}")
        if self.total_frames is not None and self.total_frames < 1:
            raise InvalidConfig(f"total_frames must be >= 1, got {self.total_frames}")

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.steps, self.t_max)

    @property
    def frame_total(self) -> int:
        return self.total_frames if self.total_frames is not None else self.plan.total_frames

    def require_input_dir(self) -> Path:
        if self.input_dir is None:
            raise InvalidConfig("Config does not name an input_dir")
        if not self.input_dir.is_dir():
            raise ManifestError("Input directory not found", str(self.input_dir))
        return self.input_dir

    def require_target_poses(self) -> Path:
        if self.target_poses is None:
            raise InvalidConfig("Config does not name a target_poses file")
        if not self.target_poses.exists():
            raise ManifestError("Target trajectory not found", str(self.target_poses))
        return self.target_poses

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> "PipelineConfig":
        base_dir = base_dir or Path(".")

        def resolve(key):
            value = data.get(key)
            if value is None:
                return None
            path = Path(value)
            return path if path.is_absolute() else base_dir / path

        try:
            return cls(
                input_dir=resolve("input_dir"),
                target_poses=resolve("target_poses"),
                output_dir=resolve("output_dir") or Path(OUTPUT_DIR),
                cache=CacheBuildConfig.from_dict(data),
                plan=SegmentPlan.from_dict(data),
                steps=int(data.get("steps", 10)),
                t_max=float(data.get("t_max", T_MAX)),
                total_frames=None if data.get("total_frames") is None else int(data["total_frames"]),
                latent_dim=int(data.get("latent_dim", 4)),
                denoiser=str(data.get("denoiser", "linear")),
                denoiser_params=dict(data.get("denoiser_params", {})),
                history_guidance=bool(data.get("history_guidance", True)),
                per_frame=bool(data.get("per_frame", False)),
                seed=int(data.get("seed", DEFAULT_SEED)),
                threads=int(data.get("threads", DEFAULT_THREADS)),
                iou_threshold=float(data.get("iou_threshold", DEFAULT_IOU_THRESHOLD)),
            )
        except (TypeError, ValueError) as e:
            raise InvalidConfig(f"Malformed config: {e}")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise InvalidConfig(f"Config file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidConfig(f"Config {path} is not valid JSON ({e})")
        if not isinstance(data, dict):
            raise InvalidConfig(f"Config {path} must hold a JSON object")
        logger.debug("Loaded config from %s", path)
        return cls.from_dict(data, base_dir=path.parent)

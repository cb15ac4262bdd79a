from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import ResolutionMismatch, ShapeMismatch


@dataclass
class FrameBundle:
    """One source frame: colours, camera-frame points and masks"""
    rgb: np.ndarray
    points: np.ndarray
    dynamic_mask: np.ndarray
    point_valid: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.uint8)
        self.points = np.asarray(self.points, dtype=np.float64)
        self.dynamic_mask = np.asarray(self.dynamic_mask, dtype=bool)
        if self.point_valid is None:
            self.point_valid = np.all(np.isfinite(self.points), axis=-1) & (self.points[..., 2] > 0)
        self.point_valid = np.asarray(self.point_valid, dtype=bool)

        height, width = self.dynamic_mask.shape
        if self.rgb.shape != (height, width, 3) or self.points.shape != (height, width, 3) \
                or self.point_valid.shape != (height, width):
            raise ShapeMismatch(
                f"Frame arrays disagree: rgb {self.rgb.shape}, points {self.points.shape}, "
                f"dynamic {self.dynamic_mask.shape}, valid {self.point_valid.shape}"
            )
        # Points are only trusted where finite.
        self.point_valid &= np.all(np.isfinite(self.points), axis=-1)

    @property
    def shape(self):
        return self.dynamic_mask.shape

    @property
    def static_mask(self) -> np.ndarray:
        return self.point_valid & ~self.dynamic_mask

    @property
    def warpable_dynamic_mask(self) -> np.ndarray:
        return self.point_valid & self.dynamic_mask


@dataclass
class WarpResult:
    """Target-view splat: colours, z-depth (+inf where empty) and coverage"""
    rgb: np.ndarray
    depth: np.ndarray
    mask: np.ndarray

    @classmethod
    def empty(cls, height: int, width: int) -> "WarpResult":
        return cls(
            rgb=np.zeros((height, width, 3), dtype=np.uint8),
            depth=np.full((height, width), np.inf),
            mask=np.zeros((height, width), dtype=bool),
        )

    @property
    def shape(self):
        return self.mask.shape


@dataclass
class CoarseFrame:
    rgb: np.ndarray
    mask: np.ndarray
    depth: np.ndarray

    @property
    def coverage(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0


def require_same_shape(a_shape, b_shape, what: str = "inputs"):
    if tuple(a_shape) != tuple(b_shape):
        raise ResolutionMismatch(f"Resolution mismatch between {what}: {tuple(a_shape)} vs {tuple(b_shape)}")

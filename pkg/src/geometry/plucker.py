from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.geometry.camera import CameraPose, pixel_center_rays, invert_rigid


@dataclass
class PluckerMap:
    """Per-pixel ray coordinates, channels ordered (moment, direction)"""
    data: np.ndarray

    @property
    def moment(self) -> np.ndarray:
        return self.data[..., :3]

    @property
    def direction(self) -> np.ndarray:
        return self.data[..., 3:]

    @property
    def shape(self):
        return self.data.shape

    def constraint_errors(self):
        """Largest |m . d| and largest ||d| - 1| over all pixels"""
        orthogonality = np.abs(np.sum(self.moment * self.direction, axis=-1))
        unit = np.abs(np.linalg.norm(self.direction, axis=-1) - 1.0)
        return float(orthogonality.max(initial=0.0)), float(unit.max(initial=0.0))


def plucker_embedding(pose: CameraPose) -> PluckerMap:
    rays = pixel_center_rays(pose.intrinsics)
    directions = rays @ pose.rotation  # R^T applied to every ray
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    origin = np.broadcast_to(pose.center, directions.shape)
    moments = np.cross(origin, directions)
    # Gram-Schmidt against rounding so m . d = 0 holds to machine precision
    moments -= np.sum(moments * directions, axis=-1, keepdims=True) * directions
    return PluckerMap(np.concatenate([moments, directions], axis=-1))


def plucker_trajectory(poses: Sequence[CameraPose], relative_to_first: bool = False) -> np.ndarray:
    """Stack T x H x W x 6 embeddings, optionally with the first camera as the world frame"""
    if not poses:
        return np.zeros((0, 0, 0, 6))
    reference = poses[0].extrinsic if relative_to_first else np.eye(4)
    to_reference = invert_rigid(reference)
    maps = []
    for pose in poses:
        rebased = CameraPose(pose.intrinsics, pose.extrinsic @ to_reference)
        maps.append(plucker_embedding(rebased).data)
    return np.stack(maps)

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Dict, Any, Sequence, Union

import numpy as np

from src.errors import InvalidPose, ManifestError
from src.json_io import read_json


Z_NEAR = 1e-4
ORTHONORMAL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidPose(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise InvalidPose(f"Image size must be at least 1x1, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidPose(f"Principal point ({self.cx}, {self.cy}) lies outside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]], dtype=np.float64)

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]], dtype=np.float64)

    @property
    def shape(self):
        return (self.height, self.width)

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_degrees: float) -> "CameraIntrinsics":
        """Pinhole intrinsics with square pixels and a centred principal point"""
        focal = 0.5 * width / math.tan(math.radians(fov_x_degrees) / 2.0)
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Intrinsics plus a 4x4 world-to-camera rigid transform"""
    intrinsics: CameraIntrinsics
    extrinsic: np.ndarray

    def __post_init__(self):
        extrinsic = np.array(self.extrinsic, dtype=np.float64)
        if extrinsic.shape != (4, 4):
            raise InvalidPose(f"Extrinsic must be 4x4, got {extrinsic.shape}")
        if not np.all(np.isfinite(extrinsic)):
            raise InvalidPose("Extrinsic contains non-finite values")
        if not np.array_equal(extrinsic[3], np.array([0.0, 0.0, 0.0, 1.0])):
            raise InvalidPose("Extrinsic bottom row must be exactly (0, 0, 0, 1)")
        rotation = extrinsic[:3, :3]
        if not np.allclose(rotation @ rotation.T, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOLERANCE):
            raise InvalidPose("Extrinsic rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InvalidPose("Extrinsic rotation must have determinant +1")
        extrinsic.setflags(write=False)
        object.__setattr__(self, "extrinsic", extrinsic)

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsic[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsic[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates"""
        return -self.rotation.T @ self.translation

    @property
    def camera_to_world_matrix(self) -> np.ndarray:
        return invert_rigid(self.extrinsic)

    @classmethod
    def identity(cls, intrinsics: CameraIntrinsics) -> "CameraPose":
        return cls(intrinsics, np.eye(4))

    @classmethod
    def from_rotation_translation(cls, intrinsics: CameraIntrinsics,
                                  rotation: np.ndarray, translation: Sequence[float]) -> "CameraPose":
        extrinsic = np.eye(4)
        extrinsic[:3, :3] = rotation
        extrinsic[:3, 3] = translation
        return cls(intrinsics, extrinsic)

    @classmethod
    def look_at(cls, intrinsics: CameraIntrinsics, eye: Sequence[float], target: Sequence[float],
                up: Sequence[float] = (0.0, -1.0, 0.0)) -> "CameraPose":
        """OpenCV convention: +z forward, +x right, +y down"""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        norm = np.linalg.norm(right)
        if norm < 1e-12:
            raise InvalidPose("look_at up vector is parallel to the viewing direction")
        right /= norm
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        return cls.from_rotation_translation(intrinsics, rotation, -rotation @ eye)

    def to_dict(self) -> Dict[str, Any]:
        k = self.intrinsics
        return {
            "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height,
            "extrinsic": [float(x) for x in self.extrinsic.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CameraPose":
        try:
            intrinsics = CameraIntrinsics(
                fx=float(data["fx"]), fy=float(data["fy"]),
                cx=float(data["cx"]), cy=float(data["cy"]),
                width=int(data["width"]), height=int(data["height"]),
            )
            values = [float(x) for x in data["extrinsic"]]
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidPose(f"Malformed pose record: {e}")
        if len(values) != 16:
            raise InvalidPose(f"Extrinsic must have 16 numbers, got {len(values)}")
        return cls(intrinsics, np.array(values).reshape(4, 4))


@dataclass
class Projection:
    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    in_frustum: np.ndarray


def rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def invert_rigid(matrix: np.ndarray) -> np.ndarray:
    rotation = matrix[:3, :3]
    inverse = np.eye(4)
    inverse[:3, :3] = rotation.T
    inverse[:3, 3] = -rotation.T @ matrix[:3, 3]
    return inverse


def transform_points(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a 4x4 affine transform to (..., 3) points"""
    points = np.asarray(points, dtype=np.float64)
    return points @ matrix[:3, :3].T + matrix[:3, 3]


def world_to_camera(points: np.ndarray, pose: CameraPose) -> np.ndarray:
    return transform_points(pose.extrinsic, points)


def camera_to_world(points: np.ndarray, pose: CameraPose) -> np.ndarray:
    return transform_points(pose.camera_to_world_matrix, points)


def project(points: np.ndarray, pose: CameraPose) -> Projection:
    """Perspective projection of world points into the pose's image plane"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    k = pose.intrinsics
    camera = world_to_camera(points, pose)
    x, y, z = camera[:, 0], camera[:, 1], camera[:, 2]
    finite = np.all(np.isfinite(camera), axis=1)
    ahead = finite & (z > Z_NEAR)
    safe_z = np.where(ahead, z, 1.0)
    with np.errstate(invalid="ignore", over="ignore"):
        u = np.where(ahead, k.fx * x / safe_z + k.cx, np.nan)
        v = np.where(ahead, k.fy * y / safe_z + k.cy, np.nan)
        in_frustum = ahead & (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    return Projection(u=u, v=v, depth=z, in_frustum=in_frustum)


def unproject(u: np.ndarray, v: np.ndarray, depth: np.ndarray, pose: CameraPose) -> np.ndarray:
    """Lift image coordinates with z-depth back to world points"""
    k = pose.intrinsics
    u, v, depth = (np.asarray(a, dtype=np.float64) for a in (u, v, depth))
    camera = np.stack([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth], axis=-1)
    return camera_to_world(camera, pose)


def pixel_center_rays(intrinsics: CameraIntrinsics) -> np.ndarray:
    """H x W x 3 camera-frame ray directions through pixel centres, scaled to z = 1"""
    us = np.arange(intrinsics.width, dtype=np.float64) + 0.5
    vs = np.arange(intrinsics.height, dtype=np.float64) + 0.5
    grid_u, grid_v = np.meshgrid(us, vs)
    return np.stack([(grid_u - intrinsics.cx) / intrinsics.fx,
                     (grid_v - intrinsics.cy) / intrinsics.fy,
                     np.ones_like(grid_u)], axis=-1)


def compose_relative(source: CameraPose, target: CameraPose) -> np.ndarray:
    """Map source-camera-frame points into the target camera frame"""
    return target.extrinsic @ invert_rigid(source.extrinsic)


def load_poses(path: Union[str, Path]) -> List[CameraPose]:
    records = read_json(path, "Pose file")
    if isinstance(records, dict):
        records = records.get("poses", [records])
    if not isinstance(records, list) or not all(isinstance(record, dict) for record in records):
        raise ManifestError("Pose file must hold a list of pose records", str(path))
    return [CameraPose.from_dict(record) for record in records]


def save_poses(poses: Sequence[CameraPose], path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        json.dump([pose.to_dict() for pose in poses], f, indent=2)

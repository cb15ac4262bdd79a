import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Dict, Any, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidSpec, InvalidPose, ManifestError
from src.geometry.camera import (
    CameraIntrinsics, CameraPose, Z_NEAR, pixel_center_rays, rotation_y,
)
from src.json_io import read_json
from src.warp.frames import FrameBundle
from src.world_cache.cache import WorldCache, naive_fusion


logger = logging.getLogger("synthetic_scene")

Color = Tuple[int, int, int]

# Parameter slack at plane borders so adjoining faces close without cracks.
EDGE_SLACK = 1e-9


def _vector(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64).reshape(-1)
    if array.shape != (3,) or not np.all(np.isfinite(array)):
        raise InvalidSpec(f"{name} must be three finite numbers, got {values}")
    return array


def _colors(values) -> Tuple[Color, Color]:
    colors = [tuple(int(c) for c in color) for color in values]
    if not 1 <= len(colors) <= 2 or any(len(c) != 3 or min(c) < 0 or max(c) > 255 for c in colors):
        raise InvalidSpec(f"Expected one or two RGB colours in 0..255, got {values}")
    return (colors[0], colors[-1])


@dataclass
class TexturedPlane:
    """Parallelogram origin + s * u_axis + t * v_axis, s, t in [0, 1], with a checker texture"""
    origin: Sequence[float]
    u_axis: Sequence[float]
    v_axis: Sequence[float]
    colors: Sequence[Color] = ((200, 200, 200),)
    checks: Tuple[int, int] = (1, 1)

    def __post_init__(self):
        self.origin = _vector(self.origin, "plane origin")
        self.u_axis = _vector(self.u_axis, "plane u_axis")
        self.v_axis = _vector(self.v_axis, "plane v_axis")
        self.colors = _colors(self.colors)
        self.checks = (int(self.checks[0]), int(self.checks[1]))
        if min(self.checks) < 1:
            raise InvalidSpec(f"Checker counts must be >= 1, got {self.checks}")
        if np.linalg.norm(np.cross(self.u_axis, self.v_axis)) < 1e-12:
            raise InvalidSpec("Plane has zero area")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TexturedPlane":
        return cls(data["origin"], data["u_axis"], data["v_axis"],
                   data.get("colors", [(200, 200, 200)]), tuple(data.get("checks", (1, 1))))


@dataclass
class Box:
    center: Sequence[float]
    size: Sequence[float]
    colors: Sequence[Color] = ((200, 200, 200),)
    checks: Tuple[int, int] = (1, 1)

    def __post_init__(self):
        self.center = _vector(self.center, "box center")
        self.size = _vector(self.size, "box size")
        if np.any(self.size <= 0):
            raise InvalidSpec(f"Box sides must be positive, got {self.size.tolist()}")

    def planes(self) -> List[TexturedPlane]:
        hx, hy, hz = self.size / 2.0
        low = self.center - self.size / 2.0
        ex, ey, ez = (2 * hx, 0, 0), (0, 2 * hy, 0), (0, 0, 2 * hz)
        faces = [
            (low, ey, ez), (low + (2 * hx, 0, 0), ey, ez),
            (low, ex, ez), (low + (0, 2 * hy, 0), ex, ez),
            (low, ex, ey), (low + (0, 0, 2 * hz), ex, ey),
        ]
        return [TexturedPlane(origin, u, v, self.colors, self.checks) for origin, u, v in faces]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Box":
        return cls(data["center"], data["size"], data.get("colors", [(200, 200, 200)]),
                   tuple(data.get("checks", (1, 1))))


@dataclass
class Sphere:
    """Dynamic object: centre moves by `velocity` every frame"""
    center: Sequence[float]
    radius: float
    velocity: Sequence[float] = (0.0, 0.0, 0.0)
    color: Color = (220, 60, 40)

    def __post_init__(self):
        self.center = _vector(self.center, "sphere center")
        self.velocity = _vector(self.velocity, "sphere velocity")
        self.color = _colors([self.color])[0]
        if not self.radius > 0:
            raise InvalidSpec(f"Sphere radius must be positive, got {self.radius}")

    def center_at(self, frame_index: int) -> np.ndarray:
        return self.center + frame_index * self.velocity

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Sphere":
        return cls(data["center"], float(data["radius"]), data.get("velocity", (0, 0, 0)),
                   tuple(data.get("color", (220, 60, 40))))


@dataclass
class CameraTrajectory:
    """static | linear | orbit | yaw | explicit"""
    kind: str = "static"
    eye: Sequence[float] = (0.0, 0.0, 0.0)
    target: Sequence[float] = (0.0, 0.0, 1.0)
    step: Sequence[float] = (0.0, 0.0, 0.0)
    center: Sequence[float] = (0.0, 0.0, 0.0)
    radius: float = 5.0
    height: float = 0.0
    angles: Tuple[float, float] = (0.0, 0.0)
    extrinsics: List[Sequence[float]] = field(default_factory=list)

    KINDS = ("static", "linear", "orbit", "yaw", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidSpec(f"Unknown camera trajectory '{self.kind}', choose from {self.KINDS}")

    def _angle(self, index: int, frame_count: int) -> float:
        fraction = index / (frame_count - 1) if frame_count > 1 else 0.0
        start, end = self.angles
        return math.radians(start + fraction * (end - start))

    def poses(self, intrinsics: CameraIntrinsics, frame_count: int) -> List[CameraPose]:
        eye, target, step = (np.asarray(a, dtype=np.float64) for a in (self.eye, self.target, self.step))
        poses = []
        for i in range(frame_count):
            if self.kind == "static":
                pose = CameraPose.look_at(intrinsics, eye, target)
            elif self.kind == "linear":
                pose = CameraPose.look_at(intrinsics, eye + i * step, target + i * step)
            elif self.kind == "orbit":
                theta = self._angle(i, frame_count)
                center = np.asarray(self.center, dtype=np.float64)
                orbit_eye = center + np.array([self.radius * math.sin(theta), -self.height,
                                               -self.radius * math.cos(theta)])
                pose = CameraPose.look_at(intrinsics, orbit_eye, center)
            elif self.kind == "yaw":
                rotation = rotation_y(self._angle(i, frame_count)).T
                pose = CameraPose.from_rotation_translation(intrinsics, rotation, -rotation @ eye)
            else:
                if len(self.extrinsics) != frame_count:
                    raise InvalidSpec(f"Explicit trajectory has {len(self.extrinsics)} poses, "
                                      f"{frame_count} frames requested")
                try:
                    pose = CameraPose(intrinsics, np.asarray(self.extrinsics[i], dtype=np.float64).reshape(4, 4))
                except (InvalidPose, ValueError) as e:
                    raise InvalidSpec(f"Explicit pose {i} is invalid: {e}")
            poses.append(pose)
        return poses

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CameraTrajectory":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if "angles" in known:
            known["angles"] = tuple(known["angles"])
        return cls(**known)


@dataclass
class SceneSpec:
    width: int = 64
    height: int = 64
    fov_x: float = 60.0
    focal: Optional[float] = None
    planes: List[TexturedPlane] = field(default_factory=list)
    boxes: List[Box] = field(default_factory=list)
    spheres: List[Sphere] = field(default_factory=list)
    camera: CameraTrajectory = field(default_factory=CameraTrajectory)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidSpec(f"Image size must be at least 1x1, got {self.width}x{self.height}")
        if not self.planes and not self.boxes and not self.spheres:
            raise InvalidSpec("Scene has no geometry")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        if self.focal is not None:
            return CameraIntrinsics(fx=self.focal, fy=self.focal, cx=self.width / 2.0, cy=self.height / 2.0,
                                    width=self.width, height=self.height)
        return CameraIntrinsics.from_fov(self.width, self.height, self.fov_x)

    def static_planes(self) -> List[TexturedPlane]:
        planes = list(self.planes)
        for box in self.boxes:
            planes.extend(box.planes())
        return planes

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneSpec":
        try:
            return cls(
                width=int(data.get("width", 64)),
                height=int(data.get("height", 64)),
                fov_x=float(data.get("fov_x", 60.0)),
                focal=None if data.get("focal") is None else float(data["focal"]),
                planes=[TexturedPlane.from_dict(p) for p in data.get("planes", [])],
                boxes=[Box.from_dict(b) for b in data.get("boxes", [])],
                spheres=[Sphere.from_dict(s) for s in data.get("spheres", [])],
                camera=CameraTrajectory.from_dict(data.get("camera", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSpec(f"Malformed scene spec: {e}")


def load_scene_spec(path: Union[str, Path]) -> SceneSpec:
    data = read_json(path, "Scene spec")
    if not isinstance(data, dict):
        raise ManifestError("Scene spec must hold a JSON object", str(path))
    return SceneSpec.from_dict(data)


def _intersect_plane(plane: TexturedPlane, origin: np.ndarray, dirs: np.ndarray):
    """Ray parameters (inf on miss) and texel colours for one plane"""
    normal = np.cross(plane.u_axis, plane.v_axis)
    a, b = plane.u_axis, plane.v_axis
    aa, bb, ab = a @ a, b @ b, a @ b
    det = aa * bb - ab * ab
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lam = float(normal @ (plane.origin - origin)) / (dirs @ normal)
        rel = origin + lam[:, None] * dirs - plane.origin
        ra, rb = rel @ a, rel @ b
        s = (ra * bb - rb * ab) / det
        t = (rb * aa - ra * ab) / det
        hit = np.isfinite(lam) & (lam > Z_NEAR) \
            & (s >= -EDGE_SLACK) & (s <= 1 + EDGE_SLACK) & (t >= -EDGE_SLACK) & (t <= 1 + EDGE_SLACK)
    lam = np.where(hit, lam, np.inf)

    nu, nv = plane.checks
    cell_u = np.clip(np.floor(np.nan_to_num(s) * nu), 0, nu - 1).astype(np.int64)
    cell_v = np.clip(np.floor(np.nan_to_num(t) * nv), 0, nv - 1).astype(np.int64)
    palette = np.array(plane.colors, dtype=np.uint8)
    return lam, palette[(cell_u + cell_v) % 2]


def _intersect_sphere(center: np.ndarray, radius: float, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    offset = origin - center
    a = np.einsum("ij,ij->i", dirs, dirs)
    half_b = dirs @ offset
    c = offset @ offset - radius * radius
    disc = half_b * half_b - a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    near = (-half_b - root) / a
    far = (-half_b + root) / a
    lam = np.where(near > Z_NEAR, near, far)
    return np.where((disc >= 0) & (lam > Z_NEAR), lam, np.inf)


def render_view(spec: SceneSpec, pose: CameraPose, frame_index: int,
                planes: Optional[List[TexturedPlane]] = None) -> FrameBundle:
    """Ray-cast one frame through pixel centres"""
    planes = spec.static_planes() if planes is None else planes
    intrinsics = pose.intrinsics
    rays = pixel_center_rays(intrinsics).reshape(-1, 3)
    dirs = rays @ pose.rotation
    origin = pose.center

    count = len(rays)
    best = np.full(count, np.inf)
    rgb = np.zeros((count, 3), dtype=np.uint8)
    dynamic = np.zeros(count, dtype=bool)
    for plane in planes:
        lam, texels = _intersect_plane(plane, origin, dirs)
        nearer = lam < best
        best[nearer] = lam[nearer]
        rgb[nearer] = texels[nearer]
        dynamic[nearer] = False
    for sphere in spec.spheres:
        lam = _intersect_sphere(sphere.center_at(frame_index), sphere.radius, origin, dirs)
        nearer = lam < best
        best[nearer] = lam[nearer]
        rgb[nearer] = sphere.color
        dynamic[nearer] = True

    valid = np.isfinite(best)
    # Camera-frame point along a z = 1 ray at parameter lam has depth lam.
    points = np.full((count, 3), np.nan)
    points[valid] = best[valid, None] * rays[valid]
    height, width = intrinsics.shape
    return FrameBundle(
        rgb=rgb.reshape(height, width, 3),
        points=points.reshape(height, width, 3),
        dynamic_mask=dynamic.reshape(height, width),
        point_valid=valid.reshape(height, width),
    )


def generate_scene(spec: SceneSpec, frame_count: int) -> Tuple[List[FrameBundle], List[CameraPose], WorldCache]:
    """Ray-cast every frame of the scene and fuse all static samples into a ground-truth cache"""
    if frame_count < 1:
        raise InvalidSpec(f"frame_count must be >= 1, got {frame_count}")
    poses = spec.camera.poses(spec.intrinsics, frame_count)
    planes = spec.static_planes()
    frames = [render_view(spec, pose, i, planes) for i, pose in enumerate(poses)]
    ground_truth = naive_fusion(frames, poses)
    logger.info("Generated %d frames at %dx%d, ground-truth cache has %d points",
                frame_count, spec.width, spec.height, len(ground_truth))
    return frames, poses, ground_truth


def plane_scene(width: int = 32, height: int = 32, depth: float = 4.0, pan: float = 0.0,
                cell: float = 0.5) -> SceneSpec:
    """Fronto-parallel checker plane filling the view; the camera pans sideways by `pan` per frame"""
    extent = 50.0 * depth
    plane = TexturedPlane(
        origin=(-extent, -extent, depth), u_axis=(2 * extent, 0, 0), v_axis=(0, 2 * extent, 0),
        colors=((230, 230, 230), (40, 40, 40)), checks=(int(2 * extent / cell),) * 2,
    )
    camera = CameraTrajectory(kind="linear", eye=(0, 0, 0), target=(0, 0, 1), step=(pan, 0, 0))
    return SceneSpec(width=width, height=height, focal=float(width), planes=[plane], camera=camera)


def box_orbit_scene(width: int = 48, height: int = 48, sweep: float = 90.0) -> SceneSpec:
    box = Box(center=(0, 0, 0), size=(2, 2, 2), colors=((250, 200, 40), (30, 90, 200)), checks=(4, 4))
    camera = CameraTrajectory(kind="orbit", center=(0, 0, 0), radius=6.0, height=2.0, angles=(0.0, sweep))
    return SceneSpec(width=width, height=height, fov_x=50.0, boxes=[box], camera=camera)


def sphere_room_scene(width: int = 64, height: int = 64, velocity: float = 0.25) -> SceneSpec:
    room = Box(center=(0, 0, 0), size=(8, 6, 8), colors=((180, 180, 170), (90, 110, 90)), checks=(8, 6))
    sphere = Sphere(center=(-1.5, 0.5, 1.0), radius=0.6, velocity=(velocity, 0, 0))
    camera = CameraTrajectory(kind="static", eye=(0, 0, -3), target=(0, 0, 4))
    return SceneSpec(width=width, height=height, fov_x=70.0, boxes=[room], spheres=[sphere], camera=camera)


def rotating_room_scene(width: int = 128, height: int = 128, sweep: float = 40.0) -> SceneSpec:
    """Camera yawing about the centre of a closed room; only the front wall carries two colours"""
    grey = ((150, 150, 150),)
    half = np.array([4.0, 3.0, 4.0])
    room = Box(center=(0, 0, 0), size=2 * half, colors=grey)
    walls = [p for p in room.planes() if not np.isclose(p.origin[2], half[2])]
    front_left = TexturedPlane(origin=(-half[0], -half[1], half[2]), u_axis=(half[0], 0, 0),
                               v_axis=(0, 2 * half[1], 0), colors=((200, 40, 40),))
    front_right = TexturedPlane(origin=(0, -half[1], half[2]), u_axis=(half[0], 0, 0),
                                v_axis=(0, 2 * half[1], 0), colors=((40, 40, 200),))
    camera = CameraTrajectory(kind="yaw", eye=(0, 0, 0), angles=(-sweep / 2.0, sweep / 2.0))
    return SceneSpec(width=width, height=height, fov_x=60.0,
                     planes=walls + [front_left, front_right], camera=camera)


SCENE_PRESETS = {
    "plane": plane_scene,
    "box-orbit": box_orbit_scene,
    "sphere-room": sphere_room_scene,
    "rotating-room": rotating_room_scene,
}

import numpy as np
import pytest

from src.geometry.camera import CameraIntrinsics, CameraPose, rotation_x, rotation_y, rotation_z
from src.warp.frames import FrameBundle


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation from a QR decomposition with a sign fix"""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng: np.random.Generator, intrinsics: CameraIntrinsics, spread: float = 1.0) -> CameraPose:
    return CameraPose.from_rotation_translation(intrinsics, random_rotation(rng), rng.normal(0.0, spread, 3))


def small_motion_pose(rng: np.random.Generator, intrinsics: CameraIntrinsics, angle: float = 0.1,
                      shift: float = 0.2) -> CameraPose:
    rotation = rotation_x(rng.uniform(-angle, angle)) @ rotation_y(rng.uniform(-angle, angle)) \
        @ rotation_z(rng.uniform(-angle, angle))
    return CameraPose.from_rotation_translation(intrinsics, rotation, rng.uniform(-shift, shift, 3))


def random_frame(rng: np.random.Generator, intrinsics: CameraIntrinsics, dynamic_fraction: float = 0.3,
                 depth_range=(1.0, 5.0), quantize: bool = False) -> FrameBundle:
    """Frame with points along pixel-centre rays at random depths"""
    height, width = intrinsics.shape
    us, vs = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    depth = rng.uniform(*depth_range, size=(height, width))
    if quantize:
        depth = np.round(depth, 1)
    points = np.stack([(us - intrinsics.cx) / intrinsics.fx * depth,
                       (vs - intrinsics.cy) / intrinsics.fy * depth, depth], axis=-1)
    rgb = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    dynamic = rng.random((height, width)) < dynamic_fraction
    return FrameBundle(rgb=rgb, points=points, dynamic_mask=dynamic)


def brute_force_splat(points: np.ndarray, colors: np.ndarray, pose: CameraPose):
    """Per-pixel candidate lists sorted by (depth, input order); scalar projection"""
    k = pose.intrinsics
    candidates = {}
    for index, point in enumerate(np.asarray(points, dtype=np.float64)):
        x, y, z = pose.rotation @ point + pose.translation
        if not np.isfinite(z) or z <= 1e-4:
            continue
        u = k.fx * x / z + k.cx
        v = k.fy * y / z + k.cy
        if not (0 <= u < k.width and 0 <= v < k.height):
            continue
        candidates.setdefault((int(np.floor(v)), int(np.floor(u))), []).append((z, index))
    rgb = np.zeros((k.height, k.width, 3), dtype=np.uint8)
    depth = np.full((k.height, k.width), np.inf)
    mask = np.zeros((k.height, k.width), dtype=bool)
    for (row, col), entries in candidates.items():
        z, index = sorted(entries)[0]
        rgb[row, col] = colors[index]
        depth[row, col] = z
        mask[row, col] = True
    return rgb, depth, mask


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=32.0, width=64, height=64)


@pytest.fixture
def small_intrinsics():
    return CameraIntrinsics(fx=20.0, fy=20.0, cx=8.0, cy=8.0, width=16, height=16)

import numpy as np

from src.geometry.camera import CameraIntrinsics, CameraPose, pixel_center_rays
from src.geometry.plucker import plucker_embedding, plucker_trajectory

from conftest import random_pose


def test_identity_pose_has_zero_moment(intrinsics):
    embedding = plucker_embedding(CameraPose.identity(intrinsics))
    assert embedding.shape == (64, 64, 6)
    assert np.allclose(embedding.moment, 0.0)
    rays = pixel_center_rays(intrinsics)
    assert np.allclose(embedding.direction, rays / np.linalg.norm(rays, axis=-1, keepdims=True))


def test_constraints_hold_for_random_poses(rng, intrinsics):
    for _ in range(20):
        orthogonality, unit = plucker_embedding(random_pose(rng, intrinsics, spread=10.0)).constraint_errors()
        assert orthogonality < 1e-9
        assert unit < 1e-12


def test_moment_encodes_camera_centre(rng, intrinsics):
    pose = random_pose(rng, intrinsics)
    embedding = plucker_embedding(pose)
    # every ray passes through the centre, so m = c x d
    expected = np.cross(np.broadcast_to(pose.center, embedding.direction.shape), embedding.direction)
    assert np.allclose(embedding.moment, expected, atol=1e-9)


def test_trajectory_relative_to_first(rng, intrinsics):
    poses = [random_pose(rng, intrinsics) for _ in range(4)]
    absolute = plucker_trajectory(poses)
    relative = plucker_trajectory(poses, relative_to_first=True)
    assert absolute.shape == relative.shape == (4, 64, 64, 6)
    assert np.allclose(absolute[2], plucker_embedding(poses[2]).data)
    assert np.allclose(relative[0], plucker_embedding(CameraPose.identity(intrinsics)).data, atol=1e-12)


def test_trajectory_is_invariant_to_world_frame_when_relative(rng, intrinsics):
    poses = [random_pose(rng, intrinsics) for _ in range(3)]
    shift = random_pose(rng, intrinsics).extrinsic
    moved = [CameraPose(p.intrinsics, p.extrinsic @ shift) for p in poses]
    assert np.allclose(plucker_trajectory(poses, relative_to_first=True),
                       plucker_trajectory(moved, relative_to_first=True), atol=1e-9)


def test_empty_trajectory():
    assert plucker_trajectory([]).shape[0] == 0


def test_tiny_image_rays_hit_hand_computed_points():
    k = CameraIntrinsics(fx=1.0, fy=1.0, cx=1.0, cy=1.0, width=2, height=2)
    centre = np.array([1.0, 2.0, 3.0])
    pose = CameraPose.from_rotation_translation(k, np.eye(3), -centre)
    embedding = plucker_embedding(pose)
    offsets = {(0, 0): (-0.5, -0.5), (0, 1): (0.5, -0.5), (1, 0): (-0.5, 0.5), (1, 1): (0.5, 0.5)}
    for (row, col), (dx, dy) in offsets.items():
        point = centre + np.array([dx, dy, 1.0])
        direction = embedding.direction[row, col]
        assert np.allclose(np.cross(point, direction), embedding.moment[row, col], atol=1e-9)
        assert np.allclose(direction * np.linalg.norm([dx, dy, 1.0]), point - centre, atol=1e-9)

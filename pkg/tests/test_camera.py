import json
import math

import numpy as np
import pytest

from src.errors import InvalidPose, ManifestError
from src.geometry.camera import (
    CameraIntrinsics, CameraPose, Z_NEAR, camera_to_world, compose_relative, load_poses, pixel_center_rays,
    project, rotation_y, save_poses, transform_points, unproject, world_to_camera,
)

from conftest import random_pose


class TestIntrinsics:
    def test_matrix_and_inverse(self, intrinsics):
        assert np.allclose(intrinsics.matrix @ intrinsics.inverse_matrix, np.eye(3), atol=1e-15)

    @pytest.mark.parametrize("kwargs", [
        {"fx": 0.0}, {"fy": -1.0}, {"width": 0}, {"cx": 64.0}, {"cy": -0.5},
    ])
    def test_invalid(self, kwargs):
        params = dict(fx=60.0, fy=60.0, cx=32.0, cy=32.0, width=64, height=64)
        params.update(kwargs)
        with pytest.raises(InvalidPose):
            CameraIntrinsics(**params)

    def test_from_fov(self):
        k = CameraIntrinsics.from_fov(128, 96, 90.0)
        assert k.fx == pytest.approx(64.0)
        assert (k.cx, k.cy) == (64.0, 48.0)


class TestPoseValidation:
    def test_non_orthonormal_rotation(self, intrinsics):
        extrinsic = np.eye(4)
        extrinsic[0, 0] = 1.0 + 1e-6
        with pytest.raises(InvalidPose):
            CameraPose(intrinsics, extrinsic)

    def test_reflection(self, intrinsics):
        extrinsic = np.diag([1.0, 1.0, -1.0, 1.0])
        with pytest.raises(InvalidPose):
            CameraPose(intrinsics, extrinsic)

    def test_bottom_row(self, intrinsics):
        extrinsic = np.eye(4)
        extrinsic[3, 0] = 1e-12
        with pytest.raises(InvalidPose):
            CameraPose(intrinsics, extrinsic)

    def test_extrinsic_is_read_only(self, intrinsics):
        pose = CameraPose.identity(intrinsics)
        with pytest.raises(ValueError):
            pose.extrinsic[0, 3] = 1.0

    def test_center(self, intrinsics):
        pose = CameraPose.from_rotation_translation(intrinsics, rotation_y(0.3), [1.0, 2.0, 3.0])
        assert np.allclose(world_to_camera(pose.center, pose), 0.0, atol=1e-12)


class TestProjection:
    def test_optical_axis_lands_on_principal_point(self, intrinsics):
        proj = project(np.array([[0.0, 0.0, 2.0]]), CameraPose.identity(intrinsics))
        assert proj.u[0] == intrinsics.cx and proj.v[0] == intrinsics.cy
        assert proj.depth[0] == 2.0 and proj.in_frustum[0]

    def test_behind_camera(self, intrinsics):
        proj = project(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, Z_NEAR], [np.nan, 0.0, 1.0]]),
                       CameraPose.identity(intrinsics))
        assert np.all(np.isnan(proj.u)) and np.all(np.isnan(proj.v))
        assert not proj.in_frustum.any()

    def test_against_matrix_reference(self, rng, intrinsics):
        points = rng.uniform(-5.0, 5.0, size=(10_000, 3))
        for _ in range(100):
            pose = random_pose(rng, intrinsics, spread=3.0)
            proj = project(points, pose)
            P = intrinsics.matrix @ pose.extrinsic[:3]
            homogeneous = np.einsum("ij,nj->ni", P, np.hstack([points, np.ones((len(points), 1))]))
            ahead = homogeneous[:, 2] > Z_NEAR
            assert np.array_equal(ahead, ~np.isnan(proj.u))
            ref_u = homogeneous[:, 0] / np.where(ahead, homogeneous[:, 2], 1.0)
            ref_v = homogeneous[:, 1] / np.where(ahead, homogeneous[:, 2], 1.0)
            visible = proj.in_frustum
            assert np.allclose(proj.u[visible], ref_u[visible], rtol=0, atol=1e-9)
            assert np.allclose(proj.v[visible], ref_v[visible], rtol=0, atol=1e-9)
            # Points just past the near plane project far outside the image.
            assert np.allclose(proj.u[ahead], ref_u[ahead], rtol=1e-9, atol=1e-9)
            assert np.allclose(proj.depth, homogeneous[:, 2], rtol=0, atol=1e-9)

    def test_scalar_reference_subset(self, rng, intrinsics):
        pose = random_pose(rng, intrinsics)
        points = rng.uniform(-3.0, 3.0, size=(50, 3))
        proj = project(points, pose)
        for i, point in enumerate(points):
            x, y, z = (sum(pose.extrinsic[r][c] * point[c] for c in range(3)) + pose.extrinsic[r][3]
                       for r in range(3))
            if z <= Z_NEAR:
                assert math.isnan(proj.u[i])
                continue
            assert proj.u[i] == pytest.approx(intrinsics.fx * x / z + intrinsics.cx, rel=1e-12, abs=1e-9)
            assert proj.v[i] == pytest.approx(intrinsics.fy * y / z + intrinsics.cy, rel=1e-12, abs=1e-9)

    def test_unproject_inverts_project(self, rng, intrinsics):
        pose = random_pose(rng, intrinsics)
        points = camera_to_world(np.column_stack([rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200),
                                                  rng.uniform(1, 4, 200)]), pose)
        proj = project(points, pose)
        assert np.allclose(unproject(proj.u, proj.v, proj.depth, pose), points, atol=1e-9)

    def test_pixel_center_rays_reproject_to_centres(self, intrinsics):
        rays = pixel_center_rays(intrinsics)
        proj = project(rays.reshape(-1, 3) * 3.0, CameraPose.identity(intrinsics))
        us, vs = np.meshgrid(np.arange(64) + 0.5, np.arange(64) + 0.5)
        assert np.allclose(proj.u, us.reshape(-1), atol=1e-12)
        assert np.allclose(proj.v, vs.reshape(-1), atol=1e-12)


def test_compose_relative_maps_source_points_into_target(rng, intrinsics):
    source, target = random_pose(rng, intrinsics), random_pose(rng, intrinsics)
    world = rng.normal(size=(100, 3))
    relative = compose_relative(source, target)
    assert np.allclose(transform_points(relative, world_to_camera(world, source)),
                       world_to_camera(world, target), atol=1e-12)


def test_look_at_points_forward(intrinsics):
    pose = CameraPose.look_at(intrinsics, eye=[0.0, 0.0, -5.0], target=[0.0, 0.0, 0.0])
    assert np.allclose(world_to_camera(np.zeros(3), pose), [0.0, 0.0, 5.0])
    with pytest.raises(InvalidPose):
        CameraPose.look_at(intrinsics, eye=[0.0, 0.0, 0.0], target=[0.0, 1.0, 0.0])


def test_pose_file_round_trip(tmp_path, rng, intrinsics):
    poses = [random_pose(rng, intrinsics) for _ in range(3)]
    save_poses(poses, tmp_path / "poses.json")
    loaded = load_poses(tmp_path / "poses.json")
    for original, restored in zip(poses, loaded):
        assert np.array_equal(original.extrinsic, restored.extrinsic)
        assert original.intrinsics == restored.intrinsics

    with open(tmp_path / "wrapped.json", "w") as f:
        json.dump({"poses": [poses[0].to_dict()]}, f)
    assert len(load_poses(tmp_path / "wrapped.json")) == 1


def test_missing_pose_file(tmp_path):
    with pytest.raises(ManifestError) as info:
        load_poses(tmp_path / "absent.json")
    assert "absent.json" in str(info.value)


def test_malformed_pose_record(intrinsics):
    record = CameraPose.identity(intrinsics).to_dict()
    record["extrinsic"] = record["extrinsic"][:12]
    with pytest.raises(InvalidPose):
        CameraPose.from_dict(record)


def test_compose_relative_examples(rng, intrinsics):
    pose = random_pose(rng, intrinsics)
    assert np.allclose(compose_relative(pose, pose), np.eye(4), atol=1e-12)
    shifted = CameraPose.from_rotation_translation(intrinsics, np.eye(3), [0.5, -1.0, 2.0])
    expected = np.eye(4)
    expected[:3, 3] = [0.5, -1.0, 2.0]
    assert np.allclose(compose_relative(CameraPose.identity(intrinsics), shifted), expected)
    other = random_pose(rng, intrinsics)
    assert np.allclose(compose_relative(pose, other) @ pose.extrinsic, other.extrinsic, atol=1e-9)

import math

import numpy as np
import pytest
from plyfile import PlyData, PlyElement

from src.dataprep.synthetic_scene import box_orbit_scene, generate_scene, plane_scene, rotating_room_scene
from src.errors import EmptyInput, InvalidConfig, ManifestError
from src.geometry.camera import rotation_y
from src.geometry.umeyama import SimilarityTransform, umeyama_fit
from src.warp.frames import FrameBundle
from src.world_cache.cache import (
    CacheBuildConfig, WorldCache, bridge_correspondences, build_cache, cache_stats, dilate_mask, naive_fusion,
    render_cache, sample_anchor_indices, uniform_sample_indices, update_cache,
)
from src.world_cache.ply_io import load_cache_ply, save_cache_ply


@pytest.fixture(scope="module")
def pan_scene():
    """Fronto-parallel plane, camera sliding 4 pixels per frame"""
    frames, poses, _ = generate_scene(plane_scene(pan=0.5), 10)
    return frames, poses


class TestUniformSampling:
    @pytest.mark.parametrize("frames, samples, expected", [
        (5, 1, [0]),
        (5, 3, [0, 2, 4]),
        (10, 4, [0, 3, 6, 9]),
        (6, 4, [0, 2, 3, 5]),
        (8, 3, [0, 4, 7]),
        (10, 5, [0, 2, 5, 7, 9]),
    ])
    def test_indices(self, frames, samples, expected):
        assert uniform_sample_indices(frames, samples) == expected

    def test_invalid(self):
        with pytest.raises(EmptyInput):
            uniform_sample_indices(0, 1)
        with pytest.raises(InvalidConfig):
            uniform_sample_indices(3, 4)
        with pytest.raises(InvalidConfig):
            uniform_sample_indices(3, 0)

    def test_anchor_indices(self):
        assert sample_anchor_indices(41, 2) == [0, 40]
        assert sample_anchor_indices(1, 2) == [0]


def test_dilate_mask_is_square():
    mask = np.zeros((7, 7), dtype=bool)
    mask[3, 3] = True
    assert dilate_mask(mask, 1).sum() == 9
    assert dilate_mask(mask, 2)[1:6, 1:6].all()
    assert np.array_equal(dilate_mask(mask, 0), mask)


class TestBuildCache:
    def test_single_sample_reproduces_frame(self, pan_scene):
        frames, poses = pan_scene
        cache = build_cache(frames, poses, CacheBuildConfig(sample_count=1, visibility_dilation=0))
        assert len(cache) == frames[0].static_mask.sum() == 32 * 32
        render = render_cache(cache, poses[0])
        assert render.mask.all()
        assert np.array_equal(render.rgb, frames[0].rgb)
        assert np.allclose(render.depth, 4.0)

    @pytest.mark.parametrize("samples, expected", [(1, 1024), (2, 2048), (5, 2176), (10, 2176)])
    def test_compactness(self, pan_scene, samples, expected):
        frames, poses = pan_scene
        cache = build_cache(frames, poses, CacheBuildConfig(sample_count=samples, visibility_dilation=0))
        assert len(cache) == expected
        indices = uniform_sample_indices(len(frames), samples)
        assert len(cache) <= sum(int(frames[i].static_mask.sum()) for i in indices)
        assert set(np.unique(cache.frame_indices).tolist()) <= set(indices)
        assert not cache.rounds.any()

    @pytest.mark.parametrize("samples", [1, 2, 5, 10])
    @pytest.mark.parametrize("dilation", [0, 2])
    def test_static_camera_adds_nothing_after_first_sample(self, samples, dilation):
        frames, poses, _ = generate_scene(plane_scene(), 10)
        cache = build_cache(frames, poses, CacheBuildConfig(sample_count=samples, visibility_dilation=dilation))
        assert len(cache) == 32 * 32
        assert set(np.unique(cache.frame_indices).tolist()) == {0}

    def test_coverage_grows_with_samples(self):
        frames, poses, _ = generate_scene(plane_scene(pan=0.5), 7)
        target = poses[6]
        coverage = []
        for samples in (1, 2, 3, 5):
            cache = build_cache(frames[:5], poses[:5], CacheBuildConfig(sample_count=samples, visibility_dilation=0))
            coverage.append(int(render_cache(cache, target).mask.sum()))
        assert coverage == sorted(coverage)
        assert coverage[-1] > coverage[0]

    @pytest.mark.parametrize("scene", [box_orbit_scene(32, 32), rotating_room_scene(32, 32)])
    def test_sampled_frames_are_covered(self, scene):
        frames, poses, _ = generate_scene(scene, 5)
        cache = build_cache(frames, poses, CacheBuildConfig(sample_count=5, visibility_dilation=0))
        for frame, pose in zip(frames, poses):
            render = render_cache(cache, pose)
            assert np.all(render.mask[frame.static_mask])

    def test_agrees_with_naive_fusion(self):
        frames, poses, naive = generate_scene(rotating_room_scene(), 5)
        cache = build_cache(frames, poses, CacheBuildConfig(sample_count=5, visibility_dilation=1))
        assert len(cache) <= 0.4 * len(naive)
        for pose in poses:
            ours, reference = render_cache(cache, pose), render_cache(naive, pose)
            joint = ours.mask & reference.mask
            agree = np.all(ours.rgb[joint] == reference.rgb[joint], axis=1)
            assert agree.mean() >= 0.99

    def test_invalid_inputs(self, pan_scene):
        frames, poses = pan_scene
        with pytest.raises(EmptyInput):
            build_cache([], [], CacheBuildConfig(sample_count=1))
        with pytest.raises(InvalidConfig):
            build_cache(frames[:3], poses[:2], CacheBuildConfig(sample_count=1))
        with pytest.raises(InvalidConfig):
            build_cache(frames[:3], poses[:3], CacheBuildConfig(sample_count=4))
        with pytest.raises(InvalidConfig):
            CacheBuildConfig(sample_count=0)
        with pytest.raises(InvalidConfig):
            CacheBuildConfig(visibility_dilation=-1)

    def test_dynamic_pixels_are_excluded(self, pan_scene):
        frames, poses = pan_scene
        frame = frames[0]
        dynamic = np.zeros(frame.shape, dtype=bool)
        dynamic[:, :8] = True
        masked = FrameBundle(frame.rgb, frame.points, dynamic, frame.point_valid)
        cache = build_cache([masked], poses[:1], CacheBuildConfig(sample_count=1, visibility_dilation=0))
        assert len(cache) == 32 * 24
        assert not render_cache(cache, poses[0]).mask[:, :8].any()


class TestRenderCache:
    def test_empty_cache(self, pan_scene):
        _, poses = pan_scene
        render = render_cache(WorldCache(), poses[0])
        assert not render.mask.any()
        assert np.all(np.isinf(render.depth))

    def test_single_point(self, pan_scene):
        _, poses = pan_scene
        cache = WorldCache(np.array([[0.0, 0.0, 4.0]]), np.array([[1, 2, 3]]))
        render = render_cache(cache, poses[0])
        assert render.mask.sum() == 1
        assert tuple(render.rgb[16, 16]) == (1, 2, 3)


class TestUpdateCache:
    @pytest.fixture(scope="class")
    def setup(self):
        frames, poses, _ = generate_scene(plane_scene(pan=0.5), 7)
        cache = build_cache(frames[:5], poses[:5], CacheBuildConfig(sample_count=5, visibility_dilation=0))
        reference = cache.positions[::50]
        return frames, poses, cache, reference

    def test_known_frames_add_nothing(self, setup):
        frames, poses, cache, reference = setup
        updated = update_cache(cache, frames[:5], poses[:5], reference, reference, 1, visibility_dilation=0)
        assert len(updated) == len(cache)

    def test_revealed_content_is_added(self, setup):
        frames, poses, cache, reference = setup
        updated = update_cache(cache, frames[5:], poses[5:], reference, reference, 1,
                               visibility_dilation=0, anchor_frame_indices=[5, 6])
        assert len(updated) - len(cache) == 2 * 4 * 32
        assert len(cache) == 48 * 32
        new = updated.rounds == 1
        assert new.sum() == 256
        assert set(updated.frame_indices[new].tolist()) == {5, 6}
        assert render_cache(updated, poses[6]).mask.all()

    def test_scaled_rotated_reconstruction_is_aligned(self, setup):
        frames, poses, cache, reference = setup
        exact = update_cache(cache, frames[5:], poses[5:], reference, reference, 1, visibility_dilation=0)

        truth = SimilarityTransform(1.5, rotation_y(math.radians(30.0)), [0.3, -0.2, 1.0])
        to_estimate = truth.inverse()
        est_poses = [to_estimate.transform_pose(pose) for pose in poses[5:]]
        est_frames = [FrameBundle(f.rgb, f.points / 1.5, f.dynamic_mask, f.point_valid) for f in frames[5:]]
        updated = update_cache(cache, est_frames, est_poses, to_estimate.apply(reference), reference, 1,
                               visibility_dilation=0)

        assert len(updated) == len(exact)
        assert np.allclose(updated.positions, exact.positions, rtol=0, atol=1e-9)
        assert np.array_equal(updated.colors, exact.colors)

    def test_second_update_is_idempotent(self, setup):
        frames, poses, cache, reference = setup
        once = update_cache(cache, frames[5:], poses[5:], reference, reference, 1, visibility_dilation=0)
        twice = update_cache(once, frames[5:], poses[5:], reference, reference, 2, visibility_dilation=0)
        assert len(twice) == len(once)
        assert not (twice.rounds == 2).any()

    def test_input_cache_is_untouched(self, setup):
        frames, poses, cache, reference = setup
        before = cache.positions.copy()
        update_cache(cache, frames[5:], poses[5:], reference, reference, 1, visibility_dilation=0)
        assert len(cache) == 48 * 32
        assert np.array_equal(cache.positions, before)

    def test_mismatched_anchor_poses(self, setup):
        frames, poses, cache, reference = setup
        with pytest.raises(InvalidConfig):
            update_cache(cache, frames[5:], poses[5:6], reference, reference, 1)


def test_bridge_correspondences_recover_similarity(pan_scene):
    frames, poses = pan_scene
    truth = SimilarityTransform(0.5, rotation_y(0.4), [1.0, 0.0, -2.0])
    estimated_poses = [truth.transform_pose(pose) for pose in poses[:2]]
    estimated_frames = [FrameBundle(f.rgb, f.points * 0.5, f.dynamic_mask, f.point_valid) for f in frames[:2]]
    src, dst = bridge_correspondences(estimated_frames, estimated_poses, frames[:2], poses[:2])
    assert len(src) == len(dst) == 2 * 32 * 32
    fit = umeyama_fit(src, dst)
    assert fit.scale == pytest.approx(2.0, rel=1e-9)
    assert np.allclose(fit.apply(src), dst, atol=1e-9)


class TestCacheStats:
    def test_counts(self):
        cache = WorldCache()
        cache.append(np.zeros((3, 3)), np.zeros((3, 3)), frame_index=0, round_index=0)
        cache.append(np.ones((2, 3)) * [1.0, -2.0, 3.0], np.zeros((2, 3)), frame_index=7, round_index=1)
        stats = cache_stats(cache)
        assert stats.point_count == 5
        assert stats.per_round_counts == {0: 3, 1: 2}
        assert stats.per_frame_counts == {0: 3, 7: 2}
        assert stats.bbox_min == [0.0, -2.0, 0.0]
        assert stats.bbox_max == [1.0, 0.0, 3.0]
        assert stats.to_dict()["per_round_counts"] == {"0": 3, "1": 2}

    def test_empty(self):
        stats = cache_stats(WorldCache())
        assert stats.point_count == 0
        assert stats.bbox_min is None and stats.per_round_counts == {}


class TestPly:
    def test_round_trip(self, tmp_path, rng):
        cache = WorldCache(rng.normal(size=(100, 3)), rng.integers(0, 256, size=(100, 3)),
                           rng.integers(0, 10, size=100), rng.integers(0, 3, size=100))
        save_cache_ply(cache, tmp_path / "cache.ply")
        loaded = load_cache_ply(tmp_path / "cache.ply")
        assert len(loaded) == 100
        assert np.allclose(loaded.positions, cache.positions, rtol=1e-6, atol=1e-6)
        assert np.array_equal(loaded.colors, cache.colors)
        assert np.array_equal(loaded.frame_indices, cache.frame_indices)
        assert np.array_equal(loaded.rounds, cache.rounds)

    def test_empty_cache(self, tmp_path):
        save_cache_ply(WorldCache(), tmp_path / "empty.ply")
        assert len(load_cache_ply(tmp_path / "empty.ply")) == 0

    def test_missing_property(self, tmp_path):
        vertices = np.zeros(3, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4")])
        PlyData([PlyElement.describe(vertices, "vertex")]).write(str(tmp_path / "bare.ply"))
        with pytest.raises(ManifestError) as info:
            load_cache_ply(tmp_path / "bare.ply")
        assert "red" in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            load_cache_ply(tmp_path / "absent.ply")

    def test_corrupt_file(self, tmp_path):
        (tmp_path / "junk.ply").write_bytes(b"not a ply file\n")
        with pytest.raises(ManifestError) as info:
            load_cache_ply(tmp_path / "junk.ply")
        assert "junk.ply" in str(info.value)


def test_naive_fusion_keeps_every_static_pixel(pan_scene):
    frames, poses = pan_scene
    assert len(naive_fusion(frames[:3], poses[:3])) == 3 * 32 * 32


def test_repeated_frame_adds_nothing(pan_scene):
    frames, poses = pan_scene
    cache = build_cache([frames[0], frames[0]], [poses[0], poses[0]],
                        CacheBuildConfig(sample_count=2, visibility_dilation=0))
    assert len(cache) == 32 * 32
    assert cache_stats(cache).per_frame_counts == {0: 32 * 32}


def test_unit_cube_stats():
    corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
    stats = cache_stats(WorldCache(corners, np.zeros((8, 3))))
    assert stats.point_count == 8
    assert stats.bbox_min == [0.0, 0.0, 0.0] and stats.bbox_max == [1.0, 1.0, 1.0]


def test_round_counts_sum_to_total(pan_scene):
    frames, poses = pan_scene
    cache = build_cache(frames, poses, CacheBuildConfig(sample_count=5, visibility_dilation=1))
    stats = cache_stats(cache)
    assert sum(stats.per_round_counts.values()) == sum(stats.per_frame_counts.values()) == len(cache)

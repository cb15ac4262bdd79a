import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.dataprep.depth_alignment import SparseAnchor
from src.errors import DegenerateCorrespondences
from src.geometry.camera import CameraPose, compose_relative


logger = logging.getLogger("triangulation")

MAX_EPIPOLAR_DISTANCE = 2.0


@dataclass
class FeatureTrack:
    """Matched keypoint observations (view index, u, v) of one scene point"""
    observations: List[Tuple[int, float, float]]
    region: str = "background"


def _skew(vector: np.ndarray) -> np.ndarray:
    x, y, z = vector
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def fundamental_matrix(pose_a: CameraPose, pose_b: CameraPose) -> np.ndarray:
    """F with x_b^T F x_a = 0 for homogeneous pixel coordinates"""
    relative = compose_relative(pose_a, pose_b)
    essential = _skew(relative[:3, 3]) @ relative[:3, :3]
    return pose_b.intrinsics.inverse_matrix.T @ essential @ pose_a.intrinsics.inverse_matrix


def symmetric_epipolar_distance(F: np.ndarray, point_a: Sequence[float], point_b: Sequence[float]) -> float:
    """Mean of the two point-to-epipolar-line distances, in pixels"""
    xa = np.array([point_a[0], point_a[1], 1.0])
    xb = np.array([point_b[0], point_b[1], 1.0])
    line_b = F @ xa
    line_a = F.T @ xb
    residual = abs(float(xb @ line_b))
    norm_b = np.hypot(line_b[0], line_b[1])
    norm_a = np.hypot(line_a[0], line_a[1])
    if norm_a == 0 or norm_b == 0:
        return 0.0
    return 0.5 * (residual / norm_b + residual / norm_a)


def triangulate_midpoint(observations: Sequence[Tuple[CameraPose, float, float]]) -> np.ndarray:
    """Point minimising the summed squared distance to every observation ray"""
    if len(observations) < 2:
        raise DegenerateCorrespondences(f"Triangulation needs at least 2 rays, got {len(observations)}")
    system = np.zeros((3, 3))
    rhs = np.zeros(3)
    for pose, u, v in observations:
        direction = pose.rotation.T @ (pose.intrinsics.inverse_matrix @ np.array([u, v, 1.0]))
        direction /= np.linalg.norm(direction)
        projector = np.eye(3) - np.outer(direction, direction)
        system += projector
        rhs += projector @ pose.center
    if np.linalg.cond(system) > 1e12:
        raise DegenerateCorrespondences("Observation rays are parallel")
    return np.linalg.solve(system, rhs)


def track_is_consistent(track: FeatureTrack, poses: Sequence[CameraPose],
                        max_distance: float = MAX_EPIPOLAR_DISTANCE) -> bool:
    obs = track.observations
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            (va, ua, wa), (vb, ub, wb) = obs[i], obs[j]
            F = fundamental_matrix(poses[va], poses[vb])
            if symmetric_epipolar_distance(F, (ua, wa), (ub, wb)) > max_distance:
                return False
    return True


def triangulate_tracks(tracks: Sequence[FeatureTrack], poses: Sequence[CameraPose],
                       reference_view: int = 0, max_distance: float = MAX_EPIPOLAR_DISTANCE):
    """Sparse anchors for `reference_view` from epipolar-consistent tracks.

    Returns (anchors, rejected_count). Tracks not observed in the reference
    view or with fewer than two observations are skipped.
    """
    anchors, rejected = [], 0
    for track in tracks:
        in_reference = [(u, v) for view, u, v in track.observations if view == reference_view]
        if len(track.observations) < 2 or not in_reference:
            continue
        if not track_is_consistent(track, poses, max_distance):
            rejected += 1
            continue
        try:
            point = triangulate_midpoint([(poses[view], u, v) for view, u, v in track.observations])
        except DegenerateCorrespondences:
            rejected += 1
            continue
        u, v = in_reference[0]
        anchors.append(SparseAnchor(u=u, v=v, point=tuple(point.tolist()), region=track.region))
    logger.info("Triangulated %d anchors, rejected %d tracks", len(anchors), rejected)
    return anchors, rejected

from dataclasses import dataclass, field

import numpy as np

from src.errors import DegenerateCorrespondences, InvalidPose
from src.geometry.camera import CameraPose, ORTHONORMAL_TOLERANCE


RANK_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """dst = scale * rotation @ src + translation"""
    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=np.float64)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not self.scale > 0:
            raise InvalidPose(f"Similarity scale must be positive, got {self.scale}")
        if not np.allclose(rotation @ rotation.T, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOLERANCE) \
                or abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InvalidPose("Similarity rotation must be a proper rotation")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.scale * self.rotation
        out[:3, 3] = self.translation
        return out

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * (points @ self.rotation.T) + self.translation

    def inverse(self) -> "SimilarityTransform":
        rotation = self.rotation.T
        return SimilarityTransform(1.0 / self.scale, rotation, -(rotation @ self.translation) / self.scale)

    def transform_pose(self, pose: CameraPose) -> CameraPose:
        """Re-express a world-to-camera pose in the transformed world frame.

        Camera-frame coordinates of a point scale by `scale` under the new
        pose, so pixel locations are unchanged.
        """
        rotation = pose.rotation @ self.rotation.T
        center = self.apply(pose.center)
        return CameraPose.from_rotation_translation(pose.intrinsics, rotation, -rotation @ center)


def umeyama_fit(src: np.ndarray, dst: np.ndarray) -> SimilarityTransform:
    """Least-squares similarity (with scale) mapping src onto dst"""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise DegenerateCorrespondences(f"Correspondence sets differ in length: {len(src)} vs {len(dst)}")
    if len(src) < 3:
        raise DegenerateCorrespondences(f"Need at least 3 correspondences, got {len(src)}")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateCorrespondences("Correspondences contain non-finite values")

    count = len(src)
    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    src_demean = src - src_mean
    dst_demean = dst - dst_mean

    covariance = dst_demean.T @ src_demean / count
    U, S, Vt = np.linalg.svd(covariance)
    scale_ref = max(S[0], 1.0e-300)
    rank = int(np.sum(S > RANK_TOLERANCE * scale_ref)) if S[0] > 0 else 0
    src_variance = np.sum(src_demean ** 2) / count
    if rank < 2 or src_variance <= 0:
        raise DegenerateCorrespondences(f"Correspondence covariance has rank {rank}, need at least 2")

    d = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        d[2] = -1.0
    rotation = U @ np.diag(d) @ Vt
    scale = float(np.dot(S, d) / src_variance)
    translation = dst_mean - scale * rotation @ src_mean
    return SimilarityTransform(scale, rotation, translation)


def alignment_rms(transform: SimilarityTransform, src: np.ndarray, dst: np.ndarray) -> float:
    residual = transform.apply(src) - np.asarray(dst, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1)))) if len(residual) else 0.0

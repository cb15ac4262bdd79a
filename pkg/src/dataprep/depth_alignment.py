import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from src.errors import InsufficientAnchors, NoValidAnchors, DataError, ManifestError
from src.geometry.camera import CameraPose, world_to_camera, Z_NEAR
from src.warp.frames import require_same_shape


logger = logging.getLogger("depth_alignment")

REGIONS = ("foreground", "background")


@dataclass
class SparseAnchor:
    u: float
    v: float
    point: Tuple[float, float, float]
    region: str = "background"

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ManifestError(f"Unknown anchor region '{self.region}'")
        if not np.all(np.isfinite(self.point)):
            raise ManifestError("Anchor point must be finite")

    @classmethod
    def from_dict(cls, data: Dict) -> "SparseAnchor":
        return cls(u=float(data["u"]), v=float(data["v"]),
                   point=(float(data["x"]), float(data["y"]), float(data["z"])),
                   region=data.get("region", "background"))

    def to_dict(self) -> Dict:
        x, y, z = self.point
        return {"u": self.u, "v": self.v, "x": x, "y": y, "z": z, "region": self.region}


@dataclass
class DepthAlignment:
    """Per-region scale a and offset b; regions that could not be fitted land in `failures`"""
    fits: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    anchor_counts: Dict[str, int] = field(default_factory=dict)
    failures: Dict[str, DataError] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "fits": {region: {"a": a, "b": b} for region, (a, b) in self.fits.items()},
            "anchor_counts": self.anchor_counts,
            "failures": {region: str(error) for region, error in self.failures.items()},
        }


def fit_scale_offset(predicted: np.ndarray, target: np.ndarray) -> Tuple[float, float]:
    """Unweighted least squares for target ~ a * predicted + b"""
    design = np.stack([predicted, np.ones_like(predicted)], axis=1)
    (a, b), *_ = np.linalg.lstsq(design, target, rcond=None)
    return float(a), float(b)


def align_depth(predicted_depth: np.ndarray, anchors: Sequence[SparseAnchor], pose: CameraPose,
                region_mask: np.ndarray) -> Tuple[DepthAlignment, np.ndarray]:
    """Fit a * d_pred + b to anchor depths separately for foreground and background.

    A region with fewer than two usable anchors is recorded as a failure and
    keeps its predicted depth; the other region is still fitted.
    """
    predicted_depth = np.asarray(predicted_depth, dtype=np.float64)
    region_mask = np.asarray(region_mask, dtype=bool)
    require_same_shape(predicted_depth.shape, pose.intrinsics.shape, "depth and pose intrinsics")
    require_same_shape(predicted_depth.shape, region_mask.shape, "depth and region mask")
    height, width = predicted_depth.shape

    samples: Dict[str, List[Tuple[float, float]]] = {region: [] for region in REGIONS}
    in_front = 0
    for anchor in anchors:
        z = float(world_to_camera(np.array(anchor.point), pose)[2])
        if not z > Z_NEAR:
            continue
        in_front += 1
        col, row = int(np.floor(anchor.u)), int(np.floor(anchor.v))
        if not (0 <= col < width and 0 <= row < height):
            continue
        d = predicted_depth[row, col]
        if np.isfinite(d) and d > 0:
            samples[anchor.region].append((d, z))
    if in_front == 0:
        raise NoValidAnchors("No anchor lies in front of the camera")

    alignment = DepthAlignment()
    corrected = predicted_depth.copy()
    for region in REGIONS:
        pairs = samples[region]
        alignment.anchor_counts[region] = len(pairs)
        if len(pairs) < 2:
            alignment.failures[region] = InsufficientAnchors(region, len(pairs))
            continue
        pred, target = (np.array(column) for column in zip(*pairs))
        a, b = fit_scale_offset(pred, target)
        if not a > 0:
            alignment.failures[region] = DataError(f"Region '{region}' fitted a non-positive scale {a:.6g}")
            continue
        alignment.fits[region] = (a, b)
        pixels = region_mask if region == "foreground" else ~region_mask
        corrected[pixels] = a * predicted_depth[pixels] + b
        logger.debug("Region %s: a=%.6f b=%.6f from %d anchors", region, a, b, len(pairs))

    if not alignment.fits:
        first_failure = next(iter(alignment.failures.values()))
        raise first_failure
    return alignment, corrected


def load_anchors(path: Union[str, Path]) -> List[SparseAnchor]:
    """JSON lines, one {"u","v","x","y","z","region"} record per line"""
    path = Path(path)
    if not path.exists():
        raise ManifestError("Anchor file not found", str(path))
    anchors = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                anchors.append(SparseAnchor.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as e:
                raise ManifestError(f"Bad anchor on line {line_number} ({e})", str(path))
    return anchors


def save_anchors(anchors: Sequence[SparseAnchor], path: Union[str, Path]):
    with open(path, "w", encoding="utf-8") as f:
        for anchor in anchors:
            f.write(json.dumps(anchor.to_dict()) + "\n")

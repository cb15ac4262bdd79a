import math
import logging
from typing import Optional

import numpy as np

from src.warp.frames import require_same_shape


logger = logging.getLogger("metrics")

PEAK_VALUE = 255.0


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two boolean masks; 1.0 when both are empty"""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    require_same_shape(a.shape, b.shape, "masks")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def mask_coverage(mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=bool)
    return float(np.count_nonzero(mask) / mask.size) if mask.size else 0.0


def psnr(reference: np.ndarray, candidate: np.ndarray) -> float:
    """PSNR in dB over all channels of two 8-bit images"""
    return masked_psnr(reference, candidate, None)


def masked_psnr(reference: np.ndarray, candidate: np.ndarray, mask: Optional[np.ndarray]) -> float:
    """PSNR restricted to the pixels where mask is true (all pixels when mask is None)"""
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    require_same_shape(reference.shape, candidate.shape, "images")
    diff = reference - candidate
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        require_same_shape(reference.shape[:2], mask.shape, "images and mask")
        diff = diff[mask]
    if diff.size == 0:
        logger.warning("PSNR requested over an empty mask")
        return float("nan")
    mse = float(np.mean(diff ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK_VALUE ** 2 / mse)

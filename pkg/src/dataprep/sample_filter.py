import logging
from dataclasses import dataclass, field, asdict
from typing import List, Dict, Any, Optional, Sequence

import numpy as np

from src.errors import InvalidConfig, ManifestError
from src.warp.metrics import mask_iou


logger = logging.getLogger("sample_filter")

DEFAULT_IOU_THRESHOLD = 0.6
NO_DETECTION = "no-detection"
LOW_MASK_IOU = "low-mask-iou"


@dataclass
class SampleRecord:
    name: str
    detection_present: bool
    ious: List[float] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], index: int = 0) -> "SampleRecord":
        if not isinstance(data, dict):
            raise ManifestError(f"Filter sample {index} must be an object, got {type(data).__name__}")
        try:
            return cls(
                name=str(data.get("name", f"sample_{index:05d}")),
                detection_present=bool(data["detection_present"]),
                ious=[float(x) for x in data.get("ious", [])],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestError(f"Malformed filter sample {index} ({e})")


@dataclass
class SampleVerdict:
    name: str
    keep: bool
    reason: Optional[str]
    worst_iou: float


@dataclass
class FilterReport:
    verdicts: List[SampleVerdict] = field(default_factory=list)
    iou_threshold: float = DEFAULT_IOU_THRESHOLD

    @property
    def kept(self) -> List[str]:
        return [v.name for v in self.verdicts if v.keep]

    @property
    def rejected(self) -> List[str]:
        return [v.name for v in self.verdicts if not v.keep]

    def reason_counts(self) -> Dict[str, int]:
        counts = {NO_DETECTION: 0, LOW_MASK_IOU: 0}
        for verdict in self.verdicts:
            if verdict.reason:
                counts[verdict.reason] += 1
        return counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iou_threshold": self.iou_threshold,
            "kept": len(self.kept),
            "rejected": len(self.rejected),
            "reasons": self.reason_counts(),
            "samples": [asdict(v) for v in self.verdicts],
        }


def _as_record(sample, index: int) -> SampleRecord:
    if isinstance(sample, SampleRecord):
        return sample
    if isinstance(sample, dict):
        return SampleRecord.from_dict(sample, index)
    try:
        detection_present, ious = sample
        return SampleRecord(f"sample_{index:05d}", bool(detection_present), [float(x) for x in ious])
    except (TypeError, ValueError) as e:
        raise ManifestError(f"Filter sample {index} must be a (detection_present, ious) pair ({e})")


def filter_samples(samples: Sequence[Any], iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> FilterReport:
    """Reject samples without a detection, then samples whose worst consecutive mask IoU is below threshold.

    Samples may be SampleRecords, dicts or (detection_present, ious) tuples.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise InvalidConfig(f"IoU threshold must lie in [0, 1], got {iou_threshold}")
    report = FilterReport(iou_threshold=iou_threshold)
    for index, sample in enumerate(samples):
        record = _as_record(sample, index)
        worst = float(min(record.ious)) if record.ious else 1.0
        if not record.detection_present:
            reason = NO_DETECTION
        elif worst < iou_threshold:
            reason = LOW_MASK_IOU
        else:
            reason = None
        report.verdicts.append(SampleVerdict(record.name, reason is None, reason, worst))
    logger.info("Kept %d of %d samples", len(report.kept), len(report.verdicts))
    return report


def consecutive_mask_ious(masks: Sequence[np.ndarray]) -> List[float]:
    """IoU between each pair of consecutive coarse masks"""
    return [mask_iou(a, b) for a, b in zip(masks, masks[1:])]


import logging
from dataclasses import dataclass
from typing import List, Dict, Any, Tuple

import numpy as np

from src.errors import InvalidConfig, InvalidLevel, InvalidSchedule, ShapeMismatch


logger = logging.getLogger("schedule")

T_MAX = 1000.0
BASE_SEGMENT_FRAMES = 41


def sigma(level: float) -> float:
    """Linear flow-matching noise coefficient"""
    return float(level) / T_MAX


@dataclass(frozen=True)
class NoiseSchedule:
    """Strictly decreasing noise levels; `steps` transitions between them"""
    levels: Tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(t) for t in self.levels)
        if len(levels) < 2:
            raise InvalidSchedule("A schedule needs at least one step (two levels)")
        if any(b >= a for a, b in zip(levels, levels[1:])):
            raise InvalidSchedule("Noise levels must be strictly decreasing")
        if levels[0] > T_MAX or levels[-1] < 0:
            raise InvalidSchedule(f"Noise levels must lie in [0, {T_MAX:g}]")
        object.__setattr__(self, "levels", levels)

    @property
    def steps(self) -> int:
        return len(self.levels) - 1

    def noise_rank(self, index: int) -> int:
        """Position of levels[index] counted from the clean end (0 = final level)"""
        return self.steps - index

    @classmethod
    def linear(cls, steps: int, t_max: float = T_MAX) -> "NoiseSchedule":
        if steps < 1:
            raise InvalidSchedule(f"steps must be >= 1, got {steps}")
        return cls(tuple(np.linspace(t_max, 0.0, steps + 1).tolist()))


@dataclass(frozen=True)
class SegmentPlan:
    segment_count: int = 1
    frames_per_segment: int = 20
    history_frames: int = 21
    delta_t: int = 1
    guidance_scale: float = 2.0

    def __post_init__(self):
        if self.segment_count < 1:
            raise InvalidConfig(f"segment count K must be >= 1, got {self.segment_count}")
        if self.frames_per_segment < 1:
            raise InvalidConfig(f"T must be >= 1, got {self.frames_per_segment}")
        if self.history_frames < 0:
            raise InvalidConfig(f"T_star must be >= 0, got {self.history_frames}")
        if self.delta_t < 0:
            raise InvalidConfig(f"delta_t must be >= 0, got {self.delta_t}")
        if not np.isfinite(self.guidance_scale):
            raise InvalidConfig("guidance scale w must be finite")

    @property
    def total_frames(self) -> int:
        """Frame count covered by K full segments (base segment included)"""
        return BASE_SEGMENT_FRAMES + (self.segment_count - 1) * self.frames_per_segment

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SegmentPlan":
        try:
            return cls(
                segment_count=int(data.get("K", data.get("segments", 1))),
                frames_per_segment=int(data.get("T", 20)),
                history_frames=int(data.get("T_star", 21)),
                delta_t=int(data.get("delta_t", 1)),
                guidance_scale=float(data.get("w", 2.0)),
            )
        except (TypeError, ValueError) as e:
            raise InvalidConfig(f"Malformed segment plan: {e}")


@dataclass
class SegmentSpan:
    history: range
    current: range

    @property
    def is_base(self) -> bool:
        return len(self.history) == 0 and self.current.start == 0


@dataclass
class LatentBlock:
    """F frames of D latent channels sharing one noise level"""
    values: np.ndarray
    noise_level: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeMismatch(f"Latent block must be F x D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatch("Latent block contains non-finite values")
        self.noise_level = float(self.noise_level)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, channels: int) -> "LatentBlock":
        return cls(np.zeros((0, channels)), 0.0)


def plan_segments(total_frames: int, plan: SegmentPlan) -> List[SegmentSpan]:
    """Base segment without history, then T-frame segments conditioned on T* history frames"""
    if total_frames < 1:
        raise InvalidConfig(f"total_frames must be >= 1, got {total_frames}")
    base_end = min(BASE_SEGMENT_FRAMES, total_frames)
    spans = [SegmentSpan(history=range(0, 0), current=range(0, base_end))]
    generated = base_end
    while generated < total_frames:
        end = min(generated + plan.frames_per_segment, total_frames)
        history_start = max(0, generated - plan.history_frames)
        spans.append(SegmentSpan(history=range(history_start, generated), current=range(generated, end)))
        generated = end
    return spans


def recorrupt(clean: LatentBlock, target_level: float, noise_seed: int) -> LatentBlock:
    """x_t = (1 - sigma) * x_0 + sigma * eps with eps drawn from the seed"""
    if not 0.0 <= target_level <= T_MAX:
        raise InvalidLevel(f"Target level {target_level} outside [0, {T_MAX:g}]")
    if clean.noise_level != 0.0:
        raise InvalidLevel(f"Re-corruption expects a clean block, got level {clean.noise_level}")
    if target_level == 0.0:
        return LatentBlock(clean.values.copy(), 0.0)
    noise = np.random.default_rng(noise_seed).standard_normal(clean.values.shape)
    if target_level == T_MAX:
        return LatentBlock(noise, T_MAX)
    s = sigma(target_level)
    return LatentBlock((1.0 - s) * clean.values + s * noise, target_level)


def training_noise_pair(rng_seed: int) -> Tuple[float, float]:
    """Sorted pair of uniform levels: (history level t1, current level t2) with t1 <= t2"""
    draws = np.random.default_rng(rng_seed).uniform(0.0, T_MAX, size=2)
    return float(draws.min()), float(draws.max())


def training_noise_pairs(rng_seed: int, count: int) -> np.ndarray:
    """count x 2 array of (t1, t2) rows, each sorted"""
    draws = np.random.default_rng(rng_seed).uniform(0.0, T_MAX, size=(count, 2))
    return np.sort(draws, axis=1)

import logging
from dataclasses import dataclass, asdict
from typing import Any, List, Optional

import numpy as np

from src.errors import InvalidLevel, ShapeMismatch
from src.scheduler.denoisers import DenoiserStub
from src.scheduler.schedule import (
    LatentBlock, NoiseSchedule, SegmentPlan, plan_segments, recorrupt, sigma,
)
from src.seeding import stream_seed


logger = logging.getLogger("autoregressive")


@dataclass
class TraceRecord:
    segment: int
    step: int
    current_level: float
    history_level: float
    same_level: float
    w: float
    evaluations: int

    def to_dict(self):
        return asdict(self)


def _same_block(a: LatentBlock, b: LatentBlock) -> bool:
    return a is b or (a.noise_level == b.noise_level and np.array_equal(a.values, b.values))


def guided_flow(denoiser: DenoiserStub, current: LatentBlock, history_ahead: LatentBlock,
                history_same: LatentBlock, w: float, conditioning: Any = None) -> np.ndarray:
    """w * v(current | history ahead) + (1 - w) * v(current | history at the same level)"""
    flow, _ = _guided_flow_counted(denoiser, current, history_ahead, history_same, w, conditioning)
    return flow


def _guided_flow_counted(denoiser, current, history_ahead, history_same, w, conditioning):
    if history_ahead.values.shape != history_same.values.shape:
        raise ShapeMismatch(
            f"History branches differ in shape: {history_ahead.values.shape} vs {history_same.values.shape}"
        )
    if history_ahead.frames and history_ahead.channels != current.channels:
        raise ShapeMismatch(f"History has {history_ahead.channels} channels, current has {current.channels}")

    v_ahead = denoiser(history_ahead, current, conditioning)
    # Identical branches make the combination independent of w.
    if w == 1.0 or _same_block(history_ahead, history_same):
        return v_ahead, 1
    v_same = denoiser(history_same, current, conditioning)
    return w * v_ahead + (1.0 - w) * v_same, 2


def _history_index(schedule: NoiseSchedule, index: int, delta_t: int) -> int:
    """Schedule index of the history level: delta_t ranks cleaner than the current one, clamped at the final level"""
    rank = max(0, schedule.noise_rank(index) - delta_t)
    return schedule.steps - rank


def denoise_segment(denoiser: DenoiserStub,
                    current_init: LatentBlock,
                    history_clean: LatentBlock,
                    schedule: NoiseSchedule,
                    plan: SegmentPlan,
                    conditioning: Any = None,
                    segment_index: int = 0,
                    seed: int = 0,
                    trace: Optional[List[TraceRecord]] = None) -> LatentBlock:
    """Denoise one segment while its history stays delta_t steps ahead (cleaner)"""
    if current_init.noise_level != schedule.levels[0]:
        raise InvalidLevel(
            f"Current block starts at level {current_init.noise_level}, schedule starts at {schedule.levels[0]}"
        )
    if history_clean.noise_level != 0.0:
        raise InvalidLevel(f"History must be clean (level 0), got {history_clean.noise_level}")
    if history_clean.frames and history_clean.channels != current_init.channels:
        raise ShapeMismatch(f"History has {history_clean.channels} channels, current has {current_init.channels}")

    w = plan.guidance_scale
    current = LatentBlock(current_init.values.copy(), current_init.noise_level)
    for step in range(schedule.steps):
        level, next_level = schedule.levels[step], schedule.levels[step + 1]
        ahead_index = _history_index(schedule, step, plan.delta_t)
        if schedule.noise_rank(ahead_index) != max(0, schedule.noise_rank(step) - plan.delta_t):
            raise RuntimeError(f"History lead violated at segment {segment_index}, step {step}")
        ahead_level = schedule.levels[ahead_index]

        if history_clean.frames == 0:
            flow = denoiser(history_clean, current, conditioning)
            evaluations = 1
        else:
            ahead = recorrupt(history_clean, ahead_level,
                              stream_seed(seed, "history", segment_index, _level_key(ahead_level)))
            same = recorrupt(history_clean, level,
                             stream_seed(seed, "history", segment_index, _level_key(level)))
            flow, evaluations = _guided_flow_counted(denoiser, current, ahead, same, w, conditioning)

        if trace is not None:
            trace.append(TraceRecord(segment_index, step, level, ahead_level, level, w, evaluations))
        current = LatentBlock(current.values + (sigma(next_level) - sigma(level)) * flow, next_level)
    return current


def _level_key(level: float) -> int:
    return int(round(level * 1000))


def generate_long_video(denoiser: DenoiserStub,
                        total_frames: int,
                        plan: SegmentPlan,
                        schedule: NoiseSchedule,
                        latent_dim: int,
                        seed: int = 0,
                        conditioning: Any = None,
                        history_guidance: bool = True,
                        trace: Optional[List[TraceRecord]] = None) -> np.ndarray:
    """Generate total_frames x latent_dim latents segment by segment.

    With history_guidance disabled every segment is denoised on its own.
    """
    spans = plan_segments(total_frames, plan)
    video = np.zeros((total_frames, latent_dim))
    for index, span in enumerate(spans):
        rng = np.random.default_rng(stream_seed(seed, "init", index))
        init = LatentBlock(rng.standard_normal((len(span.current), latent_dim)), schedule.levels[0])
        if history_guidance and len(span.history):
            history = LatentBlock(video[span.history.start:span.history.stop], 0.0)
        else:
            history = LatentBlock.empty(latent_dim)
        clean = denoise_segment(denoiser, init, history, schedule, plan, conditioning,
                                segment_index=index, seed=seed, trace=trace)
        video[span.current.start:span.current.stop] = clean.values
        logger.debug("Segment %d: history %s, current %s", index, span.history, span.current)
    logger.info("Generated %d frames in %d segments", total_frames, len(spans))
    return video

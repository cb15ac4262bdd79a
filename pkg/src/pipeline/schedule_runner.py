import json
import logging
from pathlib import Path
from typing import Dict, Any, List, Optional

import numpy as np
import pandas as pd

from src.pipeline.config import PipelineConfig
from src.scheduler.autoregressive import TraceRecord, generate_long_video
from src.scheduler.denoisers import create_denoiser
from src.scheduler.schedule import plan_segments, training_noise_pairs
from src.seeding import stream_seed


logger = logging.getLogger("schedule_runner")

TRACE_COLUMNS = ["segment", "step", "current_level", "history_level", "same_level", "w", "evaluations"]


def trace_frame(trace: List[TraceRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.to_dict() for record in trace], columns=TRACE_COLUMNS)


def run_schedule(config: PipelineConfig, output_dir: Optional[str] = None,
                 training_pairs: int = 0) -> Dict[str, Any]:
    """Simulate history-guided generation with a stub denoiser and write the trace and latents"""
    out = Path(output_dir) if output_dir else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    schedule = config.schedule
    denoiser = create_denoiser(config.denoiser, config.denoiser_params)
    total = config.frame_total
    spans = plan_segments(total, config.plan)

    trace: List[TraceRecord] = []
    latents = generate_long_video(denoiser, total, config.plan, schedule, config.latent_dim,
                                  seed=config.seed, history_guidance=config.history_guidance, trace=trace)

    frame = trace_frame(trace)
    frame.to_csv(out / "trace.csv", index=False)
    np.save(out / "latents.npy", latents)

    segments = [
        {"history": [span.history.start, span.history.stop], "current": [span.current.start, span.current.stop]}
        for span in spans
    ]
    with open(out / "segments.json", "w", encoding="utf-8") as f:
        json.dump(segments, f, indent=2)

    if training_pairs > 0:
        pairs = training_noise_pairs(stream_seed(config.seed, "training"), training_pairs)
        pd.DataFrame(pairs, columns=["t1", "t2"]).to_csv(out / "training_pairs.csv", index=False)

    logger.info("Schedule run: %d segments, %d denoiser evaluations", len(spans), denoiser.calls)
    return {
        "total_frames": total,
        "segments": len(spans),
        "autoregressive_segments": len(spans) - 1,
        "steps": schedule.steps,
        "denoiser": config.denoiser,
        "evaluations": denoiser.calls,
        "output_dir": str(out),
    }

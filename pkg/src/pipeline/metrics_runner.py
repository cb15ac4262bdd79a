import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from src.errors import ManifestError
from src.pipeline.frame_io import list_images, load_optional_mask_dir, read_rgb
from src.warp.metrics import masked_psnr


logger = logging.getLogger("metrics_runner")


def psnr_table(reference_dir: Union[str, Path], candidate_dir: Union[str, Path],
               mask_dir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """Per-frame PSNR rows followed by a `mean` row (a plain mean, so one +inf frame makes it +inf)"""
    references = list_images(reference_dir)
    candidates = list_images(candidate_dir)
    if len(references) != len(candidates):
        raise ManifestError(f"{len(references)} reference frames but {len(candidates)} candidates",
                            str(candidate_dir))
    for ref, cand in zip(references, candidates):
        if ref.name != cand.name:
            raise ManifestError(f"Frame names differ: {ref.name} vs {cand.name}", str(cand))
    masks = load_optional_mask_dir(mask_dir, len(references))

    rows = []
    for index, (ref, cand) in enumerate(zip(references, candidates)):
        mask = masks[index] if masks is not None else None
        rows.append({"frame": ref.stem, "psnr": masked_psnr(read_rgb(ref), read_rgb(cand), mask)})
    table = pd.DataFrame(rows, columns=["frame", "psnr"])
    mean = float(np.mean(table["psnr"])) if len(table) else float("nan")
    table = pd.concat([table, pd.DataFrame([{"frame": "mean", "psnr": mean}])], ignore_index=True)
    logger.info("PSNR over %d frames, mean %.3f dB", len(rows), mean)
    return table


def run_metrics(reference_dir, candidate_dir, output_path: Union[str, Path],
                mask_dir=None) -> pd.DataFrame:
    table = psnr_table(reference_dir, candidate_dir, mask_dir)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output_path, index=False)
    return table

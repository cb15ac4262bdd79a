from pathlib import Path
from typing import Union

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from src.errors import ManifestError
from src.world_cache.cache import WorldCache


VERTEX_DTYPE = [
    ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
    ("red", "u1"), ("green", "u1"), ("blue", "u1"),
    ("frame_idx", "<i4"), ("round", "<i4"),
]


def save_cache_ply(cache: WorldCache, path: Union[str, Path]):
    """Binary little-endian PLY with position, colour and provenance per vertex"""
    vertices = np.empty(len(cache), dtype=VERTEX_DTYPE)
    positions = cache.positions
    colors = cache.colors
    vertices["x"], vertices["y"], vertices["z"] = positions[:, 0], positions[:, 1], positions[:, 2]
    vertices["red"], vertices["green"], vertices["blue"] = colors[:, 0], colors[:, 1], colors[:, 2]
    vertices["frame_idx"] = cache.frame_indices
    vertices["round"] = cache.rounds
    element = PlyElement.describe(vertices, "vertex")
    PlyData([element], text=False, byte_order="<").write(str(path))


def load_cache_ply(path: Union[str, Path]) -> WorldCache:
    path = Path(path)
    if not path.exists():
        raise ManifestError("Cache file not found", str(path))
    try:
        ply = PlyData.read(str(path))
    except (PlyParseError, ValueError) as e:
        raise ManifestError(f"Unreadable PLY ({e})", str(path))
    try:
        v = ply["vertex"]
    except KeyError:
        raise ManifestError("PLY has no 'vertex' element", str(path))
    names = {p.name for p in v.properties}
    missing = {name for name, _ in VERTEX_DTYPE} - names
    if missing:
        raise ManifestError(f"PLY is missing properties {sorted(missing)}", str(path))
    positions = np.stack([v["x"], v["y"], v["z"]], axis=1).astype(np.float64)
    colors = np.stack([v["red"], v["green"], v["blue"]], axis=1).astype(np.uint8)
    return WorldCache(positions, colors, np.asarray(v["frame_idx"]), np.asarray(v["round"]))

import numpy as np

from src.geometry.camera import CameraPose, project
from src.warp.frames import WarpResult


def zbuffer_splat(points: np.ndarray, colors: np.ndarray, pose: CameraPose) -> WarpResult:
    """Nearest-pixel point splatting with a per-pixel z-buffer.

    Each in-frustum point lands on pixel (floor(u), floor(v)); the smallest
    depth wins and equal depths keep the earliest point in input order.
    """
    k = pose.intrinsics
    result = WarpResult.empty(k.height, k.width)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return result
    colors = np.asarray(colors).reshape(-1, 3)

    projection = project(points, pose)
    keep = np.flatnonzero(projection.in_frustum)
    if len(keep) == 0:
        return result

    cols = np.floor(projection.u[keep]).astype(np.int64)
    rows = np.floor(projection.v[keep]).astype(np.int64)
    depth = projection.depth[keep]
    pixel = rows * k.width + cols

    # lexsort is stable: ties in depth keep input order
    order = np.lexsort((depth, pixel))
    sorted_pixels = pixel[order]
    _, first = np.unique(sorted_pixels, return_index=True)
    winners = order[first]

    flat_rgb = result.rgb.reshape(-1, 3)
    flat_depth = result.depth.reshape(-1)
    flat_mask = result.mask.reshape(-1)
    targets = pixel[winners]
    flat_rgb[targets] = colors[keep[winners]]
    flat_depth[targets] = depth[winners]
    flat_mask[targets] = True
    return result

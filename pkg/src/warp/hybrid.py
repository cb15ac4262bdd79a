import logging

import numpy as np

from src.geometry.camera import CameraPose, compose_relative, transform_points
from src.warp.frames import FrameBundle, WarpResult, CoarseFrame, require_same_shape
from src.warp.splatting import zbuffer_splat


logger = logging.getLogger("hybrid_warp")


def _warp_selected(frame: FrameBundle, selected: np.ndarray, source_pose: CameraPose,
                   target_pose: CameraPose) -> WarpResult:
    require_same_shape(frame.shape, target_pose.intrinsics.shape, "frame and target intrinsics")
    relative = compose_relative(source_pose, target_pose)
    target_points = transform_points(relative, frame.points[selected])
    # Points are already in the target camera frame.
    camera = CameraPose.identity(target_pose.intrinsics)
    result = zbuffer_splat(target_points, frame.rgb[selected], camera)
    logger.debug("Warped %d points onto %d pixels", len(target_points), int(result.mask.sum()))
    return result


def warp_dynamic(frame: FrameBundle, source_pose: CameraPose, target_pose: CameraPose) -> WarpResult:
    """Warp the dynamic region of one source frame into its target view"""
    return _warp_selected(frame, frame.warpable_dynamic_mask, source_pose, target_pose)


def warp_frame(frame: FrameBundle, source_pose: CameraPose, target_pose: CameraPose) -> CoarseFrame:
    """Per-frame baseline: every point-valid pixel of the source frame is warped, no world cache"""
    warped = _warp_selected(frame, frame.point_valid, source_pose, target_pose)
    return CoarseFrame(rgb=warped.rgb, mask=warped.mask, depth=warped.depth)


def fuse_coarse(dynamic: WarpResult, static_render: WarpResult) -> CoarseFrame:
    """Depth-tested fusion of the dynamic warp with the static cache render.

    The dynamic sample wins where it is strictly nearer and also on exact
    depth ties; pixels covered by neither input stay black.
    """
    require_same_shape(dynamic.shape, static_render.shape, "dynamic warp and static render")
    take_dynamic = dynamic.mask & (~static_render.mask | (dynamic.depth <= static_render.depth))
    take_static = static_render.mask & ~take_dynamic

    rgb = np.zeros(dynamic.rgb.shape, dtype=np.uint8)
    rgb[take_dynamic] = dynamic.rgb[take_dynamic]
    rgb[take_static] = static_render.rgb[take_static]
    depth = np.full(dynamic.depth.shape, np.inf)
    depth[take_dynamic] = dynamic.depth[take_dynamic]
    depth[take_static] = static_render.depth[take_static]
    return CoarseFrame(rgb=rgb, mask=dynamic.mask | static_render.mask, depth=depth)

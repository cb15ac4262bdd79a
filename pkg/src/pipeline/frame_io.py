import logging
import re
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from src.errors import ManifestError
from src.geometry.camera import CameraPose, load_poses, pixel_center_rays, save_poses
from src.json_io import read_json
from src.warp.frames import FrameBundle


logger = logging.getLogger("frame_io")

FRAME_DIR = "frames"
DEPTH_DIR = "depth"
MASK_DIR = "masks"
POSES_FILE = "poses.json"
DEPTH_SIDECAR = "depth.json"


def frame_name(index: int, suffix: str = ".png") -> str:
    return f"{index:05d}{suffix}"


def _indexed_files(directory: Path, suffixes: Sequence[str]) -> List[Path]:
    return sorted(p for p in directory.iterdir()
                  if p.suffix.lower() in suffixes and re.fullmatch(r"\d+", p.stem))


def read_pfm(path: Union[str, Path]) -> np.ndarray:
    """Single-channel PFM ('Pf'); rows are stored bottom-to-top"""
    path = Path(path)
    if not path.is_file():
        raise ManifestError("Depth file not found", str(path))
    with open(path, "rb") as f:
        try:
            header = f.readline().decode("ascii").strip()
            dims = f.readline().decode("ascii").split()
            scale = float(f.readline().decode("ascii").strip())
        except ValueError:
            raise ManifestError("Malformed PFM header", str(path))
        if header != "Pf":
            raise ManifestError(f"Unsupported PFM header '{header}'", str(path))
        try:
            width, height = int(dims[0]), int(dims[1])
        except (IndexError, ValueError):
            raise ManifestError("Malformed PFM dimensions", str(path))
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(), dtype=dtype)
    if data.size != width * height:
        raise ManifestError(f"PFM holds {data.size} values, expected {width * height}", str(path))
    return np.flipud(data.reshape(height, width)).astype(np.float64)


def write_pfm(path: Union[str, Path], image: np.ndarray):
    image = np.asarray(image, dtype="<f4")
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(image).tobytes())


def read_rgb(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ManifestError("Frame not found", str(path))
    image = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if image is None:
        raise ManifestError("Unreadable image", str(path))
    return cv2.cvtColor(image, cv2.COLOR_BGR2RGB)


def write_rgb(path: Union[str, Path], rgb: np.ndarray):
    cv2.imwrite(str(path), cv2.cvtColor(np.asarray(rgb, dtype=np.uint8), cv2.COLOR_RGB2BGR))


def read_mask(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ManifestError("Mask not found", str(path))
    image = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if image is None:
        raise ManifestError("Unreadable mask", str(path))
    return image > 0


def write_mask(path: Union[str, Path], mask: np.ndarray):
    cv2.imwrite(str(path), np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_depth(depth_dir: Path, index: int) -> np.ndarray:
    """PFM metres, or 16-bit PNG scaled by the `scale` in depth/depth.json; 0 or non-finite means unknown"""
    pfm = depth_dir / frame_name(index, ".pfm")
    if pfm.exists():
        depth = read_pfm(pfm)
    else:
        png = depth_dir / frame_name(index, ".png")
        if not png.exists():
            raise ManifestError("Depth file not found", str(pfm))
        sidecar = depth_dir / DEPTH_SIDECAR
        if not sidecar.exists():
            raise ManifestError("16-bit depth needs a scale sidecar", str(sidecar))
        try:
            scale = float(read_json(sidecar, "Depth sidecar").get("scale", 1.0))
        except (AttributeError, TypeError, ValueError):
            raise ManifestError("Depth sidecar needs a numeric `scale`", str(sidecar))
        raw = cv2.imread(str(png), cv2.IMREAD_UNCHANGED)
        if raw is None or raw.dtype != np.uint16:
            raise ManifestError("Depth PNG must be single-channel 16-bit", str(png))
        depth = raw.astype(np.float64) * scale
    depth = np.where(np.isfinite(depth) & (depth > 0), depth, np.nan)
    return depth


def points_from_depth(depth: np.ndarray, pose: CameraPose) -> np.ndarray:
    """Camera-frame points along pixel-centre rays at the given z-depth"""
    return pixel_center_rays(pose.intrinsics) * depth[..., None]


def load_frame_dir(directory: Union[str, Path]) -> Tuple[List[FrameBundle], List[CameraPose]]:
    """Read frames/, depth/, masks/ and poses.json into frame bundles"""
    directory = Path(directory)
    frame_dir = directory / FRAME_DIR
    if not frame_dir.is_dir():
        raise ManifestError("Frame directory not found", str(frame_dir))
    frame_files = _indexed_files(frame_dir, (".png",))
    if not frame_files:
        raise ManifestError("No frames found", str(frame_dir))
    poses = load_poses(directory / POSES_FILE)
    if len(poses) != len(frame_files):
        raise ManifestError(f"{len(poses)} poses for {len(frame_files)} frames", str(directory / POSES_FILE))

    mask_dir = directory / MASK_DIR
    if not mask_dir.is_dir():
        logger.warning("No %s directory in %s, treating every pixel as static", MASK_DIR, directory)
    depth_dir = directory / DEPTH_DIR
    if not depth_dir.is_dir():
        raise ManifestError("Depth directory not found", str(depth_dir))

    frames = []
    for index, (path, pose) in enumerate(zip(frame_files, poses)):
        if int(path.stem) != index:
            raise ManifestError(f"Frame numbering has a gap before index {index}", str(path))
        rgb = read_rgb(path)
        if rgb.shape[:2] != pose.intrinsics.shape:
            raise ManifestError(f"Frame is {rgb.shape[1]}x{rgb.shape[0]}, pose expects "
                                f"{pose.intrinsics.width}x{pose.intrinsics.height}", str(path))
        depth = read_depth(depth_dir, index)
        if depth.shape != rgb.shape[:2]:
            raise ManifestError("Depth resolution differs from frame", str(depth_dir / frame_name(index, ".pfm")))
        if mask_dir.is_dir():
            dynamic = read_mask(mask_dir / frame_name(index))
        else:
            dynamic = np.zeros(rgb.shape[:2], dtype=bool)
        frames.append(FrameBundle(rgb=rgb, points=points_from_depth(depth, pose), dynamic_mask=dynamic))
    logger.info("Loaded %d frames from %s", len(frames), directory)
    return frames, poses


def save_frame_dir(directory: Union[str, Path], frames: Sequence[FrameBundle], poses: Sequence[CameraPose]):
    """Write frames in the layout load_frame_dir reads; unknown depth is stored as 0"""
    directory = Path(directory)
    for sub in (FRAME_DIR, DEPTH_DIR, MASK_DIR):
        (directory / sub).mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(frames):
        write_rgb(directory / FRAME_DIR / frame_name(index), frame.rgb)
        depth = np.where(frame.point_valid, frame.points[..., 2], 0.0)
        write_pfm(directory / DEPTH_DIR / frame_name(index, ".pfm"), depth)
        write_mask(directory / MASK_DIR / frame_name(index), frame.dynamic_mask)
    save_poses(poses, directory / POSES_FILE)


def list_images(directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ManifestError("Image directory not found", str(directory))
    return _indexed_files(directory, (".png",))


def load_correspondences(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """{"src": [[x, y, z], ...], "dst": [[x, y, z], ...]}"""
    data = read_json(path, "Correspondence file")
    try:
        src = np.asarray(data["src"], dtype=np.float64).reshape(-1, 3)
        dst = np.asarray(data["dst"], dtype=np.float64).reshape(-1, 3)
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed correspondences ({e})", str(path))
    return src, dst


def load_optional_mask_dir(directory: Optional[Union[str, Path]], count: int) -> Optional[List[np.ndarray]]:
    if directory is None:
        return None
    files = list_images(directory)
    if len(files) != count:
        raise ManifestError(f"{len(files)} masks for {count} frames", str(directory))
    return [read_mask(path) for path in files]

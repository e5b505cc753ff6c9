"""
PNG/PPM reading and writing through Pillow.

Arrays in memory are bottom-up (row 0 is y = -0.5); files are stored top-down,
so every read and write flips rows. Colour is 8-bit sRGB-agnostic [0, 1];
normal maps store (n + 1) / 2 per channel; the silhouette mask is the alpha
channel.
"""
import os

import numpy as np

from PIL import Image
from typing import Optional, Tuple, Union

from encoder import InputBundle

PathLike = Union[str, os.PathLike]

BUNDLE_FILES = {"image": "image.png", "normal_front": "normal_f.png", "normal_back": "normal_b.png"}


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_rgb(path: PathLike, image: np.ndarray, mask: Optional[np.ndarray] = None) -> None:
    """RGBA when a mask is given and the format carries alpha, RGB otherwise."""
    rgb = _to_bytes(np.asarray(image, dtype=np.float64))[::-1]
    if mask is not None and str(path).lower().endswith(".png"):
        alpha = (np.asarray(mask)[::-1].astype(np.uint8) * 255)[..., None]
        Image.fromarray(np.concatenate([rgb, alpha], axis=-1), mode="RGBA").save(path)
    else:
        Image.fromarray(np.ascontiguousarray(rgb), mode="RGB").save(path)


def read_rgb(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """(image [H,W,3] in [0,1], mask [H,W]); the mask is all True without alpha."""
    with Image.open(path) as im:
        has_alpha = im.mode in ("RGBA", "LA") or "transparency" in im.info
        data = np.asarray(im.convert("RGBA"))[::-1]
    image = data[..., :3].astype(np.float64) / 255.0
    mask = data[..., 3] > 127 if has_alpha else np.ones(data.shape[:2], dtype=bool)
    return image, mask


def write_normal_map(path: PathLike, normals: np.ndarray, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    encoded = np.where(mask[..., None], (np.asarray(normals) + 1.0) * 0.5, 0.0)
    write_rgb(path, encoded, mask)


def read_normal_map(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Decoded unit normals inside the mask, exact zeros outside."""
    encoded, mask = read_rgb(path)
    n = encoded * 2.0 - 1.0
    length = np.linalg.norm(n, axis=-1, keepdims=True)
    n = n / np.where(length > 0, length, 1.0)
    return np.where(mask[..., None], n, 0.0), mask


def save_bundle(sample_dir: PathLike, bundle: InputBundle) -> None:
    os.makedirs(sample_dir, exist_ok=True)
    write_rgb(os.path.join(sample_dir, BUNDLE_FILES["image"]), bundle.image, bundle.mask)
    write_normal_map(os.path.join(sample_dir, BUNDLE_FILES["normal_front"]), bundle.normal_front, bundle.mask)
    write_normal_map(os.path.join(sample_dir, BUNDLE_FILES["normal_back"]), bundle.normal_back, bundle.mask)


def load_bundle(sample_dir: PathLike) -> InputBundle:
    image, mask = read_rgb(os.path.join(sample_dir, BUNDLE_FILES["image"]))
    front, mask_f = read_normal_map(os.path.join(sample_dir, BUNDLE_FILES["normal_front"]))
    back, mask_b = read_normal_map(os.path.join(sample_dir, BUNDLE_FILES["normal_back"]))
    mask = mask & mask_f & mask_b
    keep = mask[..., None]
    return InputBundle(np.where(keep, image, 0.0), np.where(keep, front, 0.0), np.where(keep, back, 0.0), mask)


def channel_grid(plane: np.ndarray, channels: int, columns: int = 4, gap: int = 1) -> np.ndarray:
    """
    Tiles the first `channels` channels of a [H,W,C] plane into one grey image.
    Each channel is min-max normalised on its own; a flat channel maps to 0.
    Channel 0 lands top-left once the image is written.
    """
    H, W, C = plane.shape
    channels = max(1, min(channels, C))
    rows = -(-channels // columns)
    cols = min(columns, channels)
    canvas = np.ones((rows * (H + gap) - gap, cols * (W + gap) - gap))
    for c in range(channels):
        tile = plane[:, :, c]
        span = tile.max() - tile.min()
        tile = (tile - tile.min()) / span if span > 0 else np.zeros_like(tile)
        r, q = divmod(c, cols)
        r = rows - 1 - r
        canvas[r * (H + gap):r * (H + gap) + H, q * (W + gap):q * (W + gap) + W] = tile
    return canvas


def write_gray(path: PathLike, image: np.ndarray) -> None:
    Image.fromarray(_to_bytes(np.asarray(image))[::-1], mode="L").save(path)

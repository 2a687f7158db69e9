"""PNG and PGM file helpers."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .validation import ShapeError


def read_png(path) -> np.ndarray:
    """Load an image file as a (3, H, W) float64 array in [0, 1]."""
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return rgb.transpose(2, 0, 1)


def write_png(path, image: np.ndarray) -> None:
    """Write a (3, H, W) or (H, W) float array in [0, 1] as 8-bit PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[0] != 3:
            raise ShapeError(f"expected (3, H, W), got {arr.shape}")
        arr = arr.transpose(1, 2, 0)
        mode = "RGB"
    elif arr.ndim == 2:
        mode = "L"
    else:
        raise ShapeError(f"cannot write image of shape {arr.shape}")
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode=mode).save(path, format="PNG")


def write_pgm(path, mask: np.ndarray, high: int = 255) -> None:
    """Write a binary mask as a raw (P5) PGM: set pixels become ``high``."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"PGM mask must be 2-d, got shape {mask.shape}")
    h, w = mask.shape
    payload = (mask.astype(bool).astype(np.uint8) * high).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(payload)


def read_pgm(path) -> np.ndarray:
    """Read a raw (P5) 8-bit PGM back into a (H, W) uint8 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ShapeError(f"not a raw PGM file: {path}")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval > 255:
        raise ShapeError("only 8-bit PGM supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w).copy()

"""PNG/JPEG helpers (Pillow-backed, lossless PNG out)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def save_png_rgb(path: Path | str, rgb: np.ndarray) -> None:
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) uint8, got {rgb.shape} {rgb.dtype}")
    Image.fromarray(rgb, mode="RGB").save(str(path), format="PNG")


def save_png_gray(path: Path | str, gray: np.ndarray) -> None:
    if gray.dtype != np.uint8 or gray.ndim != 2:
        raise ValueError(f"expected (h, w) uint8, got {gray.shape} {gray.dtype}")
    Image.fromarray(gray, mode="L").save(str(path), format="PNG")


def load_rgb(path: Path | str) -> np.ndarray:
    with Image.open(str(path)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_gray(path: Path | str) -> np.ndarray:
    with Image.open(str(path)) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def image_size(path: Path | str) -> tuple[int, int]:
    with Image.open(str(path)) as img:
        return img.size  # (width, height)

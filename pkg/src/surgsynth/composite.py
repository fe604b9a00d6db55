"""Chroma-key compositing of rendered green-screen clips onto backgrounds.

Keying is hard (binary): a pixel is background iff G - max(R, B) >= 255 - τ.
With τ = 0 only the exact key color (0, 255, 0) qualifies, which by the
renderer's contract is exactly the set of id==0 pixels — masks therefore
survive compositing untouched.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .imgio import load_rgb, save_png_rgb
from .render import FRAME_PATTERN, METADATA_NAME, ClipArtifacts


@dataclass
class KeySpec:
    key_color: tuple[int, int, int] = (0, 255, 0)
    tolerance: int = 0

    def __post_init__(self):
        if not 0 <= self.tolerance <= 255:
            raise ValidationError("tolerance", f"{self.tolerance} outside [0, 255]")

    def to_json(self) -> dict:
        return {"key_color": list(self.key_color), "tolerance": self.tolerance}


def keyed_pixels(frame: np.ndarray, key: KeySpec) -> np.ndarray:
    """Boolean map of pixels considered background under the dominance rule."""
    channels = frame.astype(np.int16)
    dominance = channels[:, :, 1] - np.maximum(channels[:, :, 0], channels[:, :, 2])
    return dominance >= 255 - key.tolerance


def chroma_key(frame: np.ndarray, background: np.ndarray, key: KeySpec) -> np.ndarray:
    """Replace keyed pixels with the background; others pass through."""
    if frame.shape != background.shape:
        raise ValidationError(
            "dimensions",
            f"frame {frame.shape[1]}x{frame.shape[0]} vs "
            f"background {background.shape[1]}x{background.shape[0]}",
        )
    keyed = keyed_pixels(frame, key)
    return np.where(keyed[:, :, None], background, frame)


def composite_clip(
    clip: ClipArtifacts,
    background_paths: list[Path],
    key: KeySpec,
    out_dir: Path | str,
    wrap: bool = False,
    resize: bool = False,
) -> ClipArtifacts:
    """Composite every frame over the background sequence.

    Frame i uses background i (or i mod len with `wrap`). Masks are copied
    through byte-identical; metadata records the background source and key.
    """
    if not background_paths:
        raise ValidationError("background", "empty background sequence")
    n_frames = len(clip.frame_paths)
    if len(background_paths) < n_frames and not wrap:
        raise ValidationError(
            "background",
            f"{len(background_paths)} background frames for {n_frames} clip frames "
            "(pass wrap=True for modular reuse)",
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    frame_paths = []
    for i, frame_path in enumerate(clip.frame_paths):
        frame = load_rgb(frame_path)
        background = load_rgb(background_paths[i % len(background_paths)])
        if background.shape != frame.shape:
            if not resize:
                raise ValidationError(
                    "dimensions",
                    f"frame {frame.shape[1]}x{frame.shape[0]} vs "
                    f"background {background.shape[1]}x{background.shape[0]} "
                    "(pass resize=True to rescale backgrounds)",
                )
            background = _resize(background, frame.shape[1], frame.shape[0])
        out_path = out_dir / (FRAME_PATTERN % i)
        save_png_rgb(out_path, chroma_key(frame, background, key))
        frame_paths.append(out_path)

    mask_paths = []
    for mask_path in clip.mask_paths:
        target = out_dir / mask_path.name
        shutil.copyfile(mask_path, target)
        mask_paths.append(target)

    metadata = dict(clip.metadata)
    metadata["background"] = {
        "mode": "composite",
        "sources": [str(p) for p in background_paths],
        "wrap": wrap,
        "key": key.to_json(),
    }
    (out_dir / METADATA_NAME).write_text(json.dumps(metadata, sort_keys=True, indent=1))
    return ClipArtifacts(out_dir, frame_paths, mask_paths, metadata)


def _resize(rgb: np.ndarray, width: int, height: int) -> np.ndarray:
    from PIL import Image

    img = Image.fromarray(rgb, mode="RGB").resize((width, height), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def list_background_frames(directory: Path | str) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError("background", f"{directory} is not a directory")
    frames = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
    )
    if not frames:
        raise ValidationError("background", f"{directory} holds no image frames")
    return frames

"""Dataset manifests, leakage-safe splits, and real/synthetic mixing.

Manifests are JSON-lines: one sample record per line, each carrying
schema_version, image, mask, origin ("real" | "synthetic"), video_id and
frame_index. Paths are stored relative to a dataset root chosen by the
caller. Splits are assigned at whole-video granularity (stricter than the
no-consecutive-frames rule and therefore implying it); the mixing ratio
alpha = n_synt / (n_real + n_synt) is honored with the floor rule so the
requested fraction is never exceeded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InsufficientPoolError, SplitError, ValidationError
from .imgio import image_size, load_gray
from .rng import stream

SCHEMA_VERSION = 1
ORIGINS = ("real", "synthetic")


@dataclass(frozen=True)
class Sample:
    image: str
    mask: str
    origin: str
    video_id: str
    frame_index: int

    def __post_init__(self):
        if not self.image or not self.mask:
            raise ValidationError("sample", "image and mask paths must be non-empty")
        if self.origin not in ORIGINS:
            raise ValidationError("origin", f"must be one of {ORIGINS}, got {self.origin!r}")
        if self.frame_index < 0:
            raise ValidationError("frame_index", f"must be >= 0, got {self.frame_index}")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "image": self.image,
            "mask": self.mask,
            "origin": self.origin,
            "video_id": self.video_id,
            "frame_index": self.frame_index,
        }


@dataclass
class Manifest:
    samples: list[Sample] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        keys = set()
        for sample in self.samples:
            key = (sample.video_id, sample.frame_index)
            if key in keys:
                raise ValidationError("samples", f"duplicate (video_id, frame_index) {key}")
            keys.add(key)

    def __len__(self) -> int:
        return len(self.samples)

    def video_ids(self) -> set[str]:
        return {sample.video_id for sample in self.samples}

    def save(self, path: Path | str) -> None:
        lines = [json.dumps(s.to_json(), sort_keys=True) for s in self.samples]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    @staticmethod
    def load(path: Path | str) -> "Manifest":
        samples = []
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            version = record.pop("schema_version", SCHEMA_VERSION)
            if version != SCHEMA_VERSION:
                raise ValidationError(
                    "schema_version", f"line {line_no}: unsupported version {version}"
                )
            samples.append(Sample(**record))
        return Manifest(samples)


def manifest_from_clips(
    clip_dirs: list[Path | str], origin: str, root: Path | str
) -> Manifest:
    """Scan rendered clip directories into a manifest (paths relative to root)."""
    root = Path(root)
    samples = []
    for clip_dir in sorted(Path(d) for d in clip_dirs):
        frames = sorted(clip_dir.glob("frame_*.png"))
        if not frames:
            raise ValidationError("clips", f"{clip_dir} holds no frame_*.png files")
        for frame in frames:
            index = int(frame.stem.split("_")[1])
            mask = clip_dir / f"mask_{frame.stem.split('_')[1]}.png"
            if not mask.is_file():
                raise ValidationError("clips", f"missing mask for {frame}")
            samples.append(
                Sample(
                    image=str(frame.relative_to(root)),
                    mask=str(mask.relative_to(root)),
                    origin=origin,
                    video_id=clip_dir.name,
                    frame_index=index,
                )
            )
    return Manifest(samples)


def split(
    manifest: Manifest,
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[Manifest, Manifest, Manifest]:
    """Leakage-safe train/val/test split at whole-video granularity.

    Videos are shuffled by seed; the first three seed one video into each
    split (train, val, test in that order) so none is empty, and the rest go
    greedily to the split with the largest remaining frame deficit
    (ties favor train, then val).
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError("ratios", f"must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ValidationError("ratios", f"must be non-negative, got {ratios}")
    if not manifest.samples:
        raise ValidationError("manifest", "empty manifest")

    by_video: dict[str, list[Sample]] = {}
    for sample in manifest.samples:
        by_video.setdefault(sample.video_id, []).append(sample)
    videos = sorted(by_video)
    if len(videos) < 3:
        raise SplitError(
            f"need at least 3 distinct video_ids to split without leakage, got {len(videos)}"
        )

    rng = stream(seed, "split")
    rng.shuffle(videos)

    total = len(manifest.samples)
    targets = [r * total for r in ratios]
    assigned = [0, 0, 0]
    buckets: list[list[Sample]] = [[], [], []]

    for rank, video in enumerate(videos):
        frames = by_video[video]
        if rank < 3:
            dest = rank
        else:
            deficits = [targets[i] - assigned[i] for i in range(3)]
            dest = max(range(3), key=lambda i: (deficits[i], -i))
        buckets[dest].extend(frames)
        assigned[dest] += len(frames)

    return tuple(Manifest(bucket) for bucket in buckets)


def synthetic_count(alpha: float, n_real: int) -> int:
    """floor(alpha / (1 - alpha) * n_real), computed with exact rationals.

    Alpha is interpreted through its shortest decimal representation
    (Fraction(str(alpha))), so e.g. 0.6 means exactly 3/5 and yields 1200
    for n_real=800 rather than the float artifact 1199.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValidationError("alpha", f"must be in [0, 1), got {alpha}")
    frac = Fraction(str(alpha))
    return math.floor(frac / (1 - frac) * n_real)


def mix(real_train: Manifest, synth_pool: Manifest, alpha: float, seed: int) -> Manifest:
    """Real training set plus a synthetic fraction alpha = n_synt / n_tot.

    Synthetic samples are drawn from the pool without replacement; the
    combined manifest is shuffled. Deterministic in seed.
    """
    n_real = len(real_train)
    n_synt = synthetic_count(alpha, n_real)
    if n_synt > len(synth_pool):
        raise InsufficientPoolError(required=n_synt, available=len(synth_pool))

    rng = stream(seed, "mix")
    pool = list(synth_pool.samples)
    rng.shuffle(pool)
    combined = list(real_train.samples) + pool[:n_synt]
    rng.shuffle(combined)
    return Manifest(combined)


@dataclass
class Violation:
    sample: Sample
    kind: str
    detail: str

    def to_json(self) -> dict:
        return {
            "image": self.sample.image,
            "video_id": self.sample.video_id,
            "frame_index": self.sample.frame_index,
            "kind": self.kind,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    checked: int
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "checked": self.checked,
            "ok": self.ok,
            "violations": [v.to_json() for v in self.violations],
        }


def validate_manifest(manifest: Manifest, root: Path | str) -> ValidationReport:
    """Check file existence, image/mask dimension equality, and mask binarity."""
    root = Path(root)
    violations = []
    for sample in manifest.samples:
        image_path = root / sample.image
        mask_path = root / sample.mask
        missing = [str(p) for p in (image_path, mask_path) if not p.is_file()]
        if missing:
            violations.append(Violation(sample, "missing_file", ", ".join(missing)))
            continue
        img_size = image_size(image_path)
        mask_size = image_size(mask_path)
        if img_size != mask_size:
            violations.append(
                Violation(
                    sample,
                    "dimension_mismatch",
                    f"image {img_size[0]}x{img_size[1]} vs mask {mask_size[0]}x{mask_size[1]}",
                )
            )
            continue
        mask = load_gray(mask_path)
        values = np.unique(mask)
        bad = [int(v) for v in values if v not in (0, 255)]
        if bad:
            violations.append(
                Violation(sample, "non_binary_mask", f"values outside {{0, 255}}: {bad}")
            )
    return ValidationReport(checked=len(manifest.samples), violations=violations)

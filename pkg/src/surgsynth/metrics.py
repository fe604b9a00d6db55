"""Binary-mask segmentation metrics and sweep aggregation.

IoU = |A∩B| / |A∪B| and Dice = 2|A∩B| / (|A| + |B|) over pixel sets; both
are defined as 1.0 when both masks are empty (perfect agreement on absence).
Sweep aggregation reports the mean and a two-sided 95% Student-t confidence
interval per alpha group (t quantiles from an embedded table up to df=30,
normal 1.960 beyond).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

# two-sided 95% Student-t quantiles, t(0.975, df), df = 1..30
T_975 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571,
    6: 2.447, 7: 2.365, 8: 2.306, 9: 2.262, 10: 2.228,
    11: 2.201, 12: 2.179, 13: 2.160, 14: 2.145, 15: 2.131,
    16: 2.120, 17: 2.110, 18: 2.101, 19: 2.093, 20: 2.086,
    21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064, 25: 2.060,
    26: 2.056, 27: 2.052, 28: 2.048, 29: 2.045, 30: 2.042,
}
Z_975 = 1.960


@dataclass(frozen=True)
class MetricResult:
    value: float
    intersection: int
    union: int
    size_a: int
    size_b: int


def _as_bool(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) != 0


def _counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int, int]:
    if a.shape != b.shape:
        raise ValidationError("dimensions", f"mask shapes differ: {a.shape} vs {b.shape}")
    a_bool = _as_bool(a)
    b_bool = _as_bool(b)
    intersection = int(np.count_nonzero(a_bool & b_bool))
    size_a = int(np.count_nonzero(a_bool))
    size_b = int(np.count_nonzero(b_bool))
    union = size_a + size_b - intersection
    return intersection, union, size_a, size_b


def iou(a: np.ndarray, b: np.ndarray) -> MetricResult:
    intersection, union, size_a, size_b = _counts(a, b)
    value = 1.0 if union == 0 else intersection / union
    return MetricResult(value, intersection, union, size_a, size_b)


def dice(a: np.ndarray, b: np.ndarray) -> MetricResult:
    intersection, union, size_a, size_b = _counts(a, b)
    total = size_a + size_b
    value = 1.0 if total == 0 else 2.0 * intersection / total
    return MetricResult(value, intersection, union, size_a, size_b)


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    backbone: str
    seed: int
    iou: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValidationError("alpha", f"must be in [0, 1), got {self.alpha}")
        if not 0.0 <= self.iou <= 1.0:
            raise ValidationError("iou", f"must be in [0, 1], got {self.iou}")


@dataclass(frozen=True)
class AlphaSummary:
    alpha: float
    mean: float
    ci_low: float | None
    ci_high: float | None
    n: int


def aggregate(records: list[SweepRecord]) -> list[AlphaSummary]:
    """Per-alpha mean and 95% t-interval, sorted by alpha.

    Groups with a single record report mean with null CI bounds.
    """
    if not records:
        raise ValidationError("records", "no sweep records to aggregate")
    groups: dict[float, list[float]] = {}
    for record in records:
        groups.setdefault(record.alpha, []).append(record.iou)

    summaries = []
    for alpha in sorted(groups):
        values = groups[alpha]
        n = len(values)
        mean = sum(values) / n
        if n < 2:
            summaries.append(AlphaSummary(alpha, mean, None, None, n))
            continue
        variance = sum((v - mean) ** 2 for v in values) / (n - 1)
        quantile = T_975.get(n - 1, Z_975)
        half = quantile * math.sqrt(variance) / math.sqrt(n)
        summaries.append(AlphaSummary(alpha, mean, mean - half, mean + half, n))
    return summaries


def read_sweep_csv(path: Path | str) -> list[SweepRecord]:
    """Read sweep records from CSV with header alpha,backbone,seed,iou."""
    records = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        expected = {"alpha", "backbone", "seed", "iou"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ValidationError("sweep_csv", f"header must contain {sorted(expected)}")
        for row in reader:
            records.append(
                SweepRecord(
                    alpha=float(row["alpha"]),
                    backbone=row["backbone"],
                    seed=int(row["seed"]),
                    iou=float(row["iou"]),
                )
            )
    return records


def write_sweep_csv(path: Path | str, records: list[SweepRecord]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["alpha", "backbone", "seed", "iou"])
        for r in records:
            writer.writerow([repr(r.alpha), r.backbone, r.seed, repr(r.iou)])


def write_aggregate_csv(path: Path | str, summaries: list[AlphaSummary]) -> None:
    """Emit CSV with header alpha,mean,ci_low,ci_high,n."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["alpha", "mean", "ci_low", "ci_high", "n"])
        for s in summaries:
            writer.writerow(
                [
                    repr(s.alpha),
                    repr(s.mean),
                    "" if s.ci_low is None else repr(s.ci_low),
                    "" if s.ci_high is None else repr(s.ci_high),
                    s.n,
                ]
            )

"""Preservation and edit-success metrics for edited scenes."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .scene import SceneMixture, classify, footprint

# Fixed column order of the CSV report.
CSV_COLUMNS = (
    "item",
    "method",
    "lambda",
    "t_u",
    "k",
    "tau",
    "orig_class",
    "orig_row",
    "orig_col",
    "target_class",
    "target_row",
    "target_col",
    "l1_full",
    "l1_background",
    "edit_success",
    "original_retained",
    "mask_iou",
    "guidance_skipped",
    "status",
)


@dataclass(frozen=True)
class EditTruth:
    """Ground-truth attributes of an edit: source and target (class, position)."""

    orig_class: int
    orig_pos: tuple[int, int]
    target_class: int
    target_pos: tuple[int, int]

    def union_footprint(self, mix: SceneMixture) -> np.ndarray:
        return footprint(self.orig_pos, mix.canvas) | footprint(self.target_pos, mix.canvas)


@dataclass(frozen=True)
class MetricsRecord:
    l1_full: float
    l1_background: float
    edit_success: bool
    original_retained: bool
    mask_iou: float


def l1(a: np.ndarray, b: np.ndarray, region: np.ndarray | None = None) -> float:
    """Mean absolute difference, optionally restricted to an ``(H, W)`` region."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if region is None:
        return float(diff.mean())
    region = np.asarray(region, dtype=bool)
    if region.shape != a.shape[:2]:
        raise ValueError(f"region shape {region.shape} does not match image {a.shape[:2]}")
    if not region.any():
        raise ValueError("empty region")
    return float(diff[region].mean())


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def evaluate(x0: np.ndarray, result, truth: EditTruth, mix: SceneMixture) -> MetricsRecord:
    """Score an ``EditResult`` against the input image and ground truth."""
    union = truth.union_footprint(mix)
    label = classify(result.edited, mix)
    target = (truth.target_class, tuple(truth.target_pos))
    original = (truth.orig_class, tuple(truth.orig_pos))
    return MetricsRecord(
        l1_full=l1(result.edited, x0),
        l1_background=l1(result.edited, x0, ~union),
        edit_success=label == target,
        original_retained=label == original,
        mask_iou=iou(result.mask.binary, union),
    )


def metrics_row(item: int | str, method: str, params, truth: EditTruth, rec: MetricsRecord | None,
                guidance_skipped: bool = False, status: str = "ok") -> dict:
    row = {
        "item": item,
        "method": method,
        "lambda": params.lam,
        "t_u": params.t_u,
        "k": params.k,
        "tau": params.tau,
        "orig_class": truth.orig_class,
        "orig_row": truth.orig_pos[0],
        "orig_col": truth.orig_pos[1],
        "target_class": truth.target_class,
        "target_row": truth.target_pos[0],
        "target_col": truth.target_pos[1],
        "guidance_skipped": guidance_skipped,
        "status": status,
    }
    if rec is not None:
        row.update(asdict(rec))
    return row


class CsvAppender:
    """Appends metric rows to a CSV report, writing the header once."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, rows) -> None:
        new = not self.path.exists() or self.path.stat().st_size == 0
        with self.path.open("a", newline="") as f:
            w = csv.DictWriter(f, fieldnames=CSV_COLUMNS, restval="")
            if new:
                w.writeheader()
            for row in rows if isinstance(rows, list) else [rows]:
                w.writerow(row)

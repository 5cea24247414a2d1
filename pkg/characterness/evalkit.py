"""
Evaluation of characterness maps (as saliency maps) and of detection boxes.

Saliency: 256-threshold precision/recall curve, F-measure at the adaptive
threshold (twice the mean map value), VOC overlap at the same threshold.
Detection: one-to-one greedy box matching at an IoU threshold, precision,
recall and their harmonic mean.

Maps are evaluated in 8-bit form (0..255); float maps in [0, 1] are
quantized with ``rint(255 * m)`` first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyGroundTruthError, ImageShapeError

__all__ = [
    "DEFAULT_BETA2",
    "Box",
    "PRCurve",
    "PRF",
    "SaliencyScores",
    "SaliencySummary",
    "quantize_map",
    "box_iou",
    "pr_curve",
    "fmeasure",
    "harmonic_fmeasure",
    "adaptive_threshold",
    "adaptive_fmeasure",
    "voc_overlap",
    "score_saliency",
    "box_prf",
    "aggregate",
    "aggregate_boxes",
]

DEFAULT_BETA2 = 0.3
N_THRESHOLDS = 256


class Box(NamedTuple):
    """Axis-aligned box, integer pixels, ``(x, y)`` top-left corner."""

    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return max(self.w, 0) * max(self.h, 0)

    def clamp(self, width: int, height: int) -> "Box":
        x0 = min(max(self.x, 0), width)
        y0 = min(max(self.y, 0), height)
        x1 = min(max(self.x + self.w, 0), width)
        y1 = min(max(self.y + self.h, 0), height)
        return Box(x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))


class PRF(NamedTuple):
    precision: float
    recall: float
    fmeasure: float


@dataclass(frozen=True)
class PRCurve:
    """Precision and recall for every threshold T in 0..255 (index = T)."""

    precision: np.ndarray
    recall: np.ndarray

    @property
    def thresholds(self) -> np.ndarray:
        return np.arange(N_THRESHOLDS)

    def rows(self) -> Iterable[tuple[int, float, float]]:
        for t in range(N_THRESHOLDS):
            yield t, float(self.precision[t]), float(self.recall[t])


# ═══════════════════════════════════════════════════════════════════════════════
# 🎯 显著性评估 (saliency maps)
# ═══════════════════════════════════════════════════════════════════════════════

def quantize_map(saliency: np.ndarray) -> np.ndarray:
    """Bring a map to uint8. Integer maps are clipped, float maps read as [0, 1]."""
    if np.issubdtype(saliency.dtype, np.integer):
        return np.clip(saliency, 0, 255).astype(np.uint8)
    if np.issubdtype(saliency.dtype, np.bool_):
        return saliency.astype(np.uint8) * 255
    scaled = np.rint(np.clip(saliency.astype(np.float64), 0.0, 1.0) * 255.0)
    return scaled.astype(np.uint8)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ImageShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def pr_curve(saliency: np.ndarray, gt: np.ndarray) -> PRCurve:
    """
    Precision/recall of ``{map >= T}`` against ``gt`` for T = 0..255.

    An empty mask has precision 1. An empty ground truth raises
    EmptyGroundTruthError since recall is undefined.
    """
    values = quantize_map(saliency)
    gt = gt.astype(bool)
    _check_pair(values, gt)
    n_gt = int(gt.sum())
    if n_gt == 0:
        raise EmptyGroundTruthError("ground truth mask is empty, recall is undefined")

    hist_all = np.bincount(values.ravel(), minlength=N_THRESHOLDS)
    hist_gt = np.bincount(values[gt], minlength=N_THRESHOLDS)
    # cumulative from the top: count of pixels with value >= T
    selected = np.cumsum(hist_all[::-1])[::-1]
    hits = np.cumsum(hist_gt[::-1])[::-1]

    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(selected > 0, hits / np.maximum(selected, 1), 1.0)
    recall = hits / n_gt
    return PRCurve(precision=precision.astype(np.float64), recall=recall.astype(np.float64))


def fmeasure(precision: float, recall: float, beta2: float = DEFAULT_BETA2) -> float:
    """Weighted F-measure ``(1 + beta2) P R / (beta2 P + R)``; 0 when undefined."""
    denominator = beta2 * precision + recall
    if denominator <= 0.0:
        return 0.0
    return (1.0 + beta2) * precision * recall / denominator


def harmonic_fmeasure(precision: float, recall: float) -> float:
    """2PR / (P + R); 0 when both are 0."""
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def adaptive_threshold(saliency: np.ndarray) -> float:
    """Twice the mean value of the 8-bit map, capped at 255."""
    values = quantize_map(saliency)
    return min(2.0 * float(values.mean()), 255.0)


def adaptive_fmeasure(saliency: np.ndarray, gt: np.ndarray, beta2: float = DEFAULT_BETA2) -> PRF:
    values = quantize_map(saliency)
    gt = gt.astype(bool)
    _check_pair(values, gt)
    n_gt = int(gt.sum())
    if n_gt == 0:
        raise EmptyGroundTruthError("ground truth mask is empty, recall is undefined")

    mask = values >= adaptive_threshold(values)
    n_mask = int(mask.sum())
    hits = int((mask & gt).sum())
    precision = hits / n_mask if n_mask else 1.0
    recall = hits / n_gt
    return PRF(precision, recall, fmeasure(precision, recall, beta2))


def voc_overlap(s: np.ndarray, s2: np.ndarray) -> float:
    """Intersection over union of two masks. Both empty raises EmptyGroundTruthError."""
    a = s.astype(bool)
    b = s2.astype(bool)
    _check_pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        raise EmptyGroundTruthError("voc_overlap of two empty masks is undefined")
    return int((a & b).sum()) / union


@dataclass(frozen=True)
class SaliencyScores:
    name: str
    curve: PRCurve
    precision: float
    recall: float
    fmeasure: float
    voc: float


def score_saliency(
    name: str, saliency: np.ndarray, gt: np.ndarray, beta2: float = DEFAULT_BETA2
) -> SaliencyScores:
    """
    单张图像的显著性指标

    参数说明:
        name: image identifier carried into the report
        saliency: characterness map, float in [0, 1] or 8-bit
        gt: boolean ground-truth mask, same shape
        beta2: F-measure weight

    返回值:
        SaliencyScores with the 256-threshold PR curve, the adaptive
        precision, recall and F-measure, and the VOC overlap of the
        adaptive-threshold mask
    """
    values = quantize_map(saliency)
    curve = pr_curve(values, gt)
    prf = adaptive_fmeasure(values, gt, beta2)
    voc = voc_overlap(values >= adaptive_threshold(values), gt)
    return SaliencyScores(name, curve, prf.precision, prf.recall, prf.fmeasure, voc)


@dataclass(frozen=True)
class SaliencySummary:
    count: int
    curve: PRCurve
    precision: float
    recall: float
    fmeasure: float
    voc: float
    skipped: list[str] = field(default_factory=list)


def aggregate(results: Sequence[SaliencyScores]) -> SaliencySummary:
    """Dataset-level scores: arithmetic mean per threshold and per metric."""
    if not results:
        raise ValueError("aggregate needs at least one result")
    curve = PRCurve(
        precision=np.mean([r.curve.precision for r in results], axis=0),
        recall=np.mean([r.curve.recall for r in results], axis=0),
    )
    return SaliencySummary(
        count=len(results),
        curve=curve,
        precision=float(np.mean([r.precision for r in results])),
        recall=float(np.mean([r.recall for r in results])),
        fmeasure=float(np.mean([r.fmeasure for r in results])),
        voc=float(np.mean([r.voc for r in results])),
    )


# ═══════════════════════════════════════════════════════════════════════════════
# 📦 文字框评估 (text boxes)
# ═══════════════════════════════════════════════════════════════════════════════

def box_iou(a: Box, b: Box) -> float:
    """
    交并比 (intersection over union) of two axis-aligned boxes.

    参数说明:
        a, b: boxes in pixel units, w and h exclusive extents

    返回值:
        IoU in [0, 1]; 0 for disjoint or touching boxes
    """
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def _match_count(pred: Sequence[Box], gt: Sequence[Box], match_threshold: float) -> int:
    candidates = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            iou = box_iou(p, g)
            if iou > 0.0 and iou >= match_threshold:
                candidates.append((-iou, tuple(p), tuple(g), i, j))
    # sorting on the box coordinates, not the indices, keeps the result
    # independent of input order
    candidates.sort(key=lambda c: c[:3])
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    for _, _, _, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
    return len(used_pred)


def box_prf(pred: Sequence[Box], gt: Sequence[Box], match_threshold: float = 0.5) -> PRF:
    """
    One-to-one greedy best-match detection scores.

    A pair matches when its IoU is at least ``match_threshold`` and the boxes
    overlap at all, so a threshold of 0 never pairs disjoint boxes.
    Empty ``pred`` gives precision 1, empty ``gt`` gives recall 1.
    """
    matches = _match_count(pred, gt, match_threshold)
    precision = matches / len(pred) if pred else 1.0
    recall = matches / len(gt) if gt else 1.0
    return PRF(precision, recall, harmonic_fmeasure(precision, recall))


def aggregate_boxes(
    pairs: Iterable[tuple[Sequence[Box], Sequence[Box]]], match_threshold: float = 0.5
) -> PRF:
    """Dataset-level box scores: mean of the per-image precision and recall."""
    scores = [box_prf(p, g, match_threshold) for p, g in pairs]
    if not scores:
        raise ValueError("aggregate_boxes needs at least one image")
    precision = float(np.mean([s.precision for s in scores]))
    recall = float(np.mean([s.recall for s in scores]))
    return PRF(precision, recall, harmonic_fmeasure(precision, recall))

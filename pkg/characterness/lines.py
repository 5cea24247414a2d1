"""
Text line formation and the full detection pipeline.

Characters kept by the labeling step, one per chain of nested
near-duplicates, are clustered with flat-kernel mean
shift on (characteristic scale, major orientation); clusters with at least
two members are then grouped bottom-up into lines:

- two unlabeled regions that are nearby start a line whose angle is the
  angle of the segment joining their centroids
- an unlabeled region nearby a labeled one joins its line when the joining
  angle is within ``angle_limit`` degrees of the line angle; the line angle
  becomes the circular mean of its accepted pair angles

"Nearby" means a centroid distance below the mean skeleton length (pixel
count) of the two regions. Angles are undirected, in [0, pi).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Sequence, Union

import numpy as np

from .charmodel import CharacternessModel, posterior
from .cues import CueVector, PreparedImage
from .errors import DegenerateRegionError, InputOutputError
from .evalkit import Box
from .imageio import write_indexed
from .labeling import RegionGraph, dump_graph, label_candidates
from .log import get_logger, stage_timer
from .regions import Region, mask_iou

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "TextLine",
    "DetectionResult",
    "line_features",
    "mean_shift",
    "group_lines",
    "suppress_nested",
    "characterness_map",
    "detect",
    "write_debug_artifacts",
]

logger = get_logger(__name__)

# boxes overlapping more than this (over the smaller box) never share a line
MAX_BOX_OVERLAP = 0.5


@dataclass(frozen=True)
class TextLine:
    members: tuple[int, ...]
    angle: float
    bbox: tuple[int, int, int, int]

    @property
    def box(self) -> Box:
        x0, y0, x1, y1 = self.bbox
        return Box(x0, y0, x1 - x0, y1 - y0)

    def to_json(self) -> dict[str, Any]:
        x, y, w, h = self.box
        return {
            "x": x,
            "y": y,
            "w": w,
            "h": h,
            "angle": round(math.degrees(self.angle), 6),
            "region_ids": list(self.members),
        }


def line_features(
    regions: Sequence[Region],
    shape: tuple[int, int],
    scale_norm: float = 100.0,
    orientation_norm: float = 10.0,
) -> np.ndarray:
    """(n, 2) features: char_scale / image diagonal * scale_norm, orientation in degrees / orientation_norm."""
    diagonal = math.hypot(shape[0], shape[1]) or 1.0
    features = [
        (
            r.geometry.char_scale / diagonal * scale_norm,
            math.degrees(r.geometry.orientation) / orientation_norm,
        )
        for r in regions
    ]
    return np.array(features, dtype=np.float64).reshape(-1, 2)


# ═══════════════════════════════════════════════════════════════════════════════
# 📏 文字行形成 (line formation)
# ═══════════════════════════════════════════════════════════════════════════════

def mean_shift(
    points: np.ndarray, bandwidth: float = 2.2, max_iter: int = 300, tol: float = 1e-6
) -> np.ndarray:
    """
    Flat-kernel mean shift. Returns one cluster label per input point.

    Every point is shifted to the mean of the data points within
    ``bandwidth`` until it stops moving; modes closer than ``bandwidth / 2``
    share a cluster. Points are processed in lexicographic order, so the
    partition does not depend on the input order. Labels are numbered in
    the lexicographic order of their modes.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    data = np.asarray(points, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    n = data.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    order = np.lexsort(data.T[::-1])
    sorted_data = data[order]

    modes = np.empty_like(sorted_data)
    for k, seed in enumerate(sorted_data):
        current = seed
        for _ in range(max_iter):
            inside = np.linalg.norm(sorted_data - current, axis=1) <= bandwidth
            shifted = sorted_data[inside].mean(axis=0)
            if np.linalg.norm(shifted - current) < tol:
                current = shifted
                break
            current = shifted
        modes[k] = current

    centers: list[np.ndarray] = []
    sorted_labels = np.empty(n, dtype=np.int64)
    for k, mode in enumerate(modes):
        for c, center in enumerate(centers):
            if np.linalg.norm(mode - center) < bandwidth / 2.0:
                sorted_labels[k] = c
                break
        else:
            centers.append(mode)
            sorted_labels[k] = len(centers) - 1

    center_order = np.lexsort(np.array(centers).T[::-1])
    rank = np.empty(len(centers), dtype=np.int64)
    rank[center_order] = np.arange(len(centers))

    labels = np.empty(n, dtype=np.int64)
    labels[order] = rank[sorted_labels]
    return labels


def _pair_angle(a: Region, b: Region) -> float:
    (ax, ay), (bx, by) = a.centroid, b.centroid
    return math.atan2(by - ay, bx - ax) % math.pi


def _angle_gap(a: float, b: float) -> float:
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def _circular_mean(angles: Sequence[float]) -> float:
    s = sum(math.sin(2.0 * t) for t in angles)
    c = sum(math.cos(2.0 * t) for t in angles)
    return (math.atan2(s, c) / 2.0) % math.pi


def _nearby(a: Region, b: Region) -> bool:
    (ax, ay), (bx, by) = a.centroid, b.centroid
    return math.hypot(bx - ax, by - ay) < (a.skeleton_length + b.skeleton_length) / 2.0


def _box_overlap(a: Region, b: Region) -> float:
    """Box intersection over the smaller box area."""
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    smaller = min((ax1 - ax0) * (ay1 - ay0), (bx1 - bx0) * (by1 - by0))
    return iw * ih / smaller


def _nested(a: Region, b: Region, min_overlap: float) -> bool:
    small, large = (a, b) if a.area <= b.area else (b, a)
    if small.area * 2 <= large.area:
        return False
    iou = mask_iou(small, large)
    shared = iou * (small.area + large.area) / (1.0 + iou)
    return shared >= min_overlap * small.area


def suppress_nested(
    regions: Sequence[Region], scores: Sequence[float], min_overlap: float = 0.8
) -> list[Region]:
    """
    嵌套候选去重: keep one region per chain of nested near-duplicates.

    MSER returns a glyph and the same glyph with its blurred rim as two
    stable regions. Two regions count as nested when at least
    ``min_overlap`` of the smaller one lies inside the larger and the
    smaller has more than half the larger's area, so a word-sized blob
    never suppresses the glyphs inside it. The higher score wins, then the
    larger area.

    参数说明:
        regions: labeled characters
        scores: characterness of each region, same order
        min_overlap: shared fraction of the smaller region

    返回值:
        surviving regions, in input order
    """
    if len(regions) != len(scores):
        raise ValueError(f"{len(regions)} regions but {len(scores)} scores")
    rank = sorted(
        range(len(regions)),
        key=lambda k: (-scores[k], -regions[k].area, regions[k].centroid[1], regions[k].centroid[0]),
    )
    kept: list[int] = []
    for k in rank:
        region = regions[k]
        if not any(_box_overlap(region, regions[j]) > 0 and _nested(region, regions[j], min_overlap) for j in kept):
            kept.append(k)
    return [regions[k] for k in sorted(kept)]



@dataclass
class _OpenLine:
    members: list[int]
    pair_angles: list[float] = field(default_factory=list)
    angle: float = 0.0


def group_lines(regions: Sequence[Region], angle_limit: float = 30.0) -> list[TextLine]:
    """
    Bottom-up grouping of one cluster into text lines.

    Regions are scanned left to right (centroid x, then y) and the scan is
    repeated until a full pass changes nothing. A region never joins a line
    holding a member whose box overlaps its own by more than half of the
    smaller box.
    ``TextLine.members`` hold ``Region.id`` values.
    """
    limit = math.radians(angle_limit)
    order = sorted(range(len(regions)), key=lambda k: (regions[k].centroid[0], regions[k].centroid[1]))
    owner: dict[int, int] = {}
    open_lines: list[_OpenLine] = []

    changed = True
    while changed:
        changed = False
        for a in order:
            for b in order:
                if a == b or b in owner or not _nearby(regions[a], regions[b]):
                    continue
                angle = _pair_angle(regions[a], regions[b])
                if a not in owner:
                    if _box_overlap(regions[a], regions[b]) > MAX_BOX_OVERLAP:
                        continue
                    owner[a] = owner[b] = len(open_lines)
                    open_lines.append(_OpenLine([a, b], [angle], angle))
                    changed = True
                else:
                    line = open_lines[owner[a]]
                    stacked = any(_box_overlap(regions[b], regions[m]) > MAX_BOX_OVERLAP for m in line.members)
                    if not stacked and _angle_gap(angle, line.angle) < limit:
                        owner[b] = owner[a]
                        line.members.append(b)
                        line.pair_angles.append(angle)
                        line.angle = _circular_mean(line.pair_angles)
                        changed = True

    lines = []
    for line in open_lines:
        if len(line.members) < 2:
            continue
        boxes = np.array([regions[k].bbox for k in line.members])
        bbox = (
            int(boxes[:, 0].min()),
            int(boxes[:, 1].min()),
            int(boxes[:, 2].max()),
            int(boxes[:, 3].max()),
        )
        members = tuple(sorted(regions[k].id if regions[k].id >= 0 else k for k in line.members))
        lines.append(TextLine(members, line.angle, bbox))
    return lines


# ═══════════════════════════════════════════════════════════════════════════════
# 🚀 检测流程 (detection pipeline)
# ═══════════════════════════════════════════════════════════════════════════════

def characterness_map(
    shape: tuple[int, int], regions: Sequence[Region], scores: Sequence[float]
) -> np.ndarray:
    """Per-pixel maximum characterness over the regions covering it, 0 elsewhere."""
    result = np.zeros(shape, dtype=np.float64)
    for region, score in zip(regions, scores):
        x0, y0, x1, y1 = region.bbox
        window = result[y0:y1, x0:x1]
        np.maximum(window, np.where(region.mask, float(score), 0.0), out=window)
    return result


@dataclass
class DetectionResult:
    lines: list[TextLine]
    saliency: np.ndarray
    regions: list[Region] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    cues: list[Optional[CueVector]] = field(default_factory=list)
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    graph: Optional[RegionGraph] = None

    def boxes_json(self) -> list[dict[str, Any]]:
        return [line.to_json() for line in self.lines]


def _score_regions(
    prepared: PreparedImage,
    regions: Sequence[Region],
    model: CharacternessModel,
    config: "PipelineConfig",
) -> tuple[list[float], list[Optional[CueVector]]]:
    scores: list[float] = []
    cues: list[Optional[CueVector]] = []
    for region in regions:
        try:
            vector = prepared.cues(region, config)
        except DegenerateRegionError as exc:
            logger.debug("region %d scored 0: %s", region.id, exc)
            scores.append(0.0)
            cues.append(None)
            continue
        scores.append(posterior(model, vector, config.cues))
        cues.append(vector)
    return scores, cues


def detect(img: np.ndarray, model: CharacternessModel, config: "PipelineConfig") -> DetectionResult:
    """
    完整检测流程: candidates, cues, posterior, labeling, nested-candidate
    suppression, mean-shift clustering and line grouping, plus the
    characterness map

    参数说明:
        img: (H, W, 3) uint8 RGB image
        model: trained characterness model
        config: pipeline settings (MSER, cue, labeling and grouping keys)

    返回值:
        DetectionResult with the text lines sorted top to bottom, the
        per-pixel characterness map in [0, 1] and every intermediate the
        debug artifacts need

    示例:
        result = detect(read_image("scene.png"), load_model("model.txt"), PipelineConfig())
        boxes = result.boxes_json()
    """
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        return DetectionResult([], np.zeros((h, w), dtype=np.float64))

    with stage_timer("preprocess", logger) as stage:
        prepared = PreparedImage.build(img, config)
        stage.count(edges=int(prepared.edges.mask.sum()))

    with stage_timer("candidates", logger) as stage:
        regions = prepared.candidates(config)
        stage.count(regions=len(regions))

    with stage_timer("cues", logger) as stage:
        scores, cues = _score_regions(prepared, regions, model, config)
        stage.count(scored=sum(c is not None for c in cues), degenerate=sum(c is None for c in cues))

    with stage_timer("labeling", logger) as stage:
        labels, graph = label_candidates(regions, scores, img, config, lab=prepared.lab if regions else None)
        stage.count(characters=int(labels.sum()), edges=len(graph.edges) if graph else 0)

    with stage_timer("lines", logger) as stage:
        labeled = [(r, s) for r, s, keep in zip(regions, scores, labels) if keep]
        characters = suppress_nested([r for r, _ in labeled], [s for _, s in labeled])
        lines: list[TextLine] = []
        if len(characters) >= 2:
            features = line_features(characters, (h, w), config.scale_norm, config.orientation_norm)
            clusters = mean_shift(features, config.bandwidth)
            for cluster in np.unique(clusters):
                members = [r for r, c in zip(characters, clusters) if c == cluster]
                if len(members) >= 2:
                    lines.extend(group_lines(members, config.angle_limit))
        lines.sort(key=lambda line: (line.bbox[1], line.bbox[0], line.members))
        stage.count(nested=len(labeled) - len(characters), lines=len(lines))

    saliency = characterness_map((h, w), regions, scores)
    return DetectionResult(lines, saliency, list(regions), scores, cues, labels, graph)


def write_debug_artifacts(result: DetectionResult, debug_dir: Union[str, Path], stem: str) -> None:
    """
    ``<stem>_candidates.png`` (palette index = region id + 1),
    ``<stem>_cues.csv`` and ``<stem>_graph.txt``.
    """
    out = Path(debug_dir)
    shape = result.saliency.shape
    label_image = np.zeros(shape, dtype=np.int64)
    for region in sorted(result.regions, key=lambda r: -r.area):
        x0, y0, x1, y1 = region.bbox
        label_image[y0:y1, x0:x1][region.mask] = region.id + 1
    write_indexed(out / f"{stem}_candidates.png", label_image)

    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{stem}_cues.csv", "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "polarity", "area", "cx", "cy", "sw", "pd", "ehog", "score", "label"])
            for k, region in enumerate(result.regions):
                cx, cy = region.centroid
                vector = result.cues[k] if k < len(result.cues) else None
                values = ["", "", ""] if vector is None else [f"{v:.6f}" for v in vector.as_tuple()]
                label = int(result.labels[k]) if k < len(result.labels) else ""
                writer.writerow(
                    [region.id, region.polarity.value, region.area, f"{cx:.3f}", f"{cy:.3f}", *values,
                     f"{result.scores[k]:.6f}", label]
                )
        graph_text = dump_graph(result.graph) if result.graph is not None else ""
        (out / f"{stem}_graph.txt").write_text(graph_text, encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot write debug artifacts to {out}: {exc}") from exc

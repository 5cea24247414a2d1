"""
Candidate character extraction with edge-enhanced MSER.

Pipeline for one colour image:

1. intensity I = BT.601 grey, smoothed with the self-guided filter
2. gradient magnitude of the smoothed image, normalised to [0, 255]
3. per polarity, I* = I + gamma * grad on the bright rim of edges (dark
   text) or I - gamma * grad on the dark rim (bright text),
   clamped and rounded to 8 bits
4. maximally stable extremal regions of I* (bright text: of 255 - I*)
5. union of both passes, near duplicates across polarities removed

The component tree is the sequence of 8-connected components of
``{I* <= t}`` for t = 0..255, each component linked to the one containing
it at t + 1. Stability of a component at level t is

    q(t) = (|R(t + delta)| - |R(t - delta)|) / |R(t)|

where R(t + delta) is its ancestor delta levels up and R(t - delta) its
descendant delta levels down along the largest-child chain (empty below
level 0, the level-255 component above 255).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, ClassVar, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ImageShapeError
from .imgcore import (
    FLAT_TOLERANCE,
    RegionGeometry,
    distance_transform,
    gradient_magnitude,
    guided_filter,
    region_geometry,
    skeletonize,
    to_intensity,
)
from .log import get_logger

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "Polarity",
    "Region",
    "MserParams",
    "ExtremalPass",
    "DarkOnBright",
    "BrightOnDark",
    "mask_iou",
    "emser_preprocess",
    "mser_detect",
    "preprocess",
    "extract_candidates",
    "candidates_from_prepared",
    "dedup_regions",
]

logger = get_logger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
N_LEVELS = 256


class Polarity(str, Enum):
    DARK_ON_BRIGHT = "dark"
    BRIGHT_ON_DARK = "bright"


@dataclass(eq=False)
class Region:
    """
    One connected candidate region.

    ``mask`` is cropped to ``bbox`` = (x0, y0, x1, y1), x1/y1 exclusive.
    ``source_threshold`` is in the units of the original intensity: for a
    dark region every member is <= it, for a bright region every member is
    >= it. Geometry, skeleton and distance map are computed on first use.
    """

    bbox: tuple[int, int, int, int]
    mask: np.ndarray
    polarity: Polarity = Polarity.DARK_ON_BRIGHT
    source_threshold: int = 0
    id: int = -1

    @classmethod
    def from_mask(
        cls,
        mask: np.ndarray,
        polarity: Polarity = Polarity.DARK_ON_BRIGHT,
        source_threshold: int = 0,
    ) -> "Region":
        """Build a region from a full-size mask (cropped to its bounding box)."""
        mask = np.asarray(mask) != 0
        ys, xs = np.nonzero(mask)
        if xs.size == 0:
            raise ImageShapeError("cannot build a region from an empty mask")
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        crop = mask[y0:y1, x0:x1].copy()
        return cls((x0, y0, x1, y1), crop, polarity, source_threshold)

    @property
    def offset(self) -> tuple[int, int]:
        return self.bbox[0], self.bbox[1]

    @cached_property
    def area(self) -> int:
        return int(self.mask.sum())

    @cached_property
    def geometry(self) -> RegionGeometry:
        return region_geometry(self.mask, offset=self.offset)

    @property
    def centroid(self) -> tuple[float, float]:
        return self.geometry.centroid

    @cached_property
    def skeleton(self) -> np.ndarray:
        return skeletonize(self.mask)

    @cached_property
    def distance(self) -> np.ndarray:
        return distance_transform(self.mask)

    @property
    def skeleton_length(self) -> int:
        return int(self.skeleton.sum())

    def full_mask(self, shape: tuple[int, int]) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        x0, y0, x1, y1 = self.bbox
        out[y0:y1, x0:x1] = self.mask
        return out

    def translated(self, dx: int, dy: int) -> "Region":
        x0, y0, x1, y1 = self.bbox
        return Region(
            (x0 + dx, y0 + dy, x1 + dx, y1 + dy),
            self.mask.copy(),
            self.polarity,
            self.source_threshold,
            self.id,
        )


def mask_iou(a: Region, b: Region) -> float:
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    inter = 0
    if ix0 < ix1 and iy0 < iy1:
        wa = a.mask[iy0 - ay0 : iy1 - ay0, ix0 - ax0 : ix1 - ax0]
        wb = b.mask[iy0 - by0 : iy1 - by0, ix0 - bx0 : ix1 - bx0]
        inter = int((wa & wb).sum())
    union = a.area + b.area - inter
    return inter / union if union else 0.0


@dataclass(frozen=True)
class MserParams:
    """min_area is in pixels, max_area a fraction of the image area."""

    delta: int = 10
    min_area: int = 30
    max_area: float = 0.25
    max_variation: float = 0.5
    gamma: float = 0.5

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.min_area < 0 or not 0 < self.max_area <= 1:
            raise ValueError("area bounds need min_area >= 0 and 0 < max_area <= 1")

    @classmethod
    def from_config(cls, config: "PipelineConfig") -> "MserParams":
        return cls(
            delta=config.mser_delta,
            min_area=config.mser_min_area,
            max_area=config.mser_max_area,
            max_variation=config.mser_max_variation,
            gamma=config.mser_gamma,
        )


def emser_preprocess(
    img: np.ndarray, grad: np.ndarray, gamma: float, polarity: Polarity
) -> np.ndarray:
    """Push mixed boundary pixels towards the background by ``gamma * grad``.

    Dark text: I* = I + gamma * grad on pixels brighter than their 3x3
    mean, I elsewhere. Bright text: I* = I - gamma * grad on pixels darker
    than their 3x3 mean. Pixels on the stroke side of an edge keep their
    value, so strokes keep their width while the blurred rim around them
    moves out of the extremal region. Clamped to [0, 255].

    参数说明:
        img: smoothed intensity, float, values in [0, 255]
        grad: normalised gradient magnitude, same shape as ``img``
        gamma: enhancement weight, 0 gives back ``img``
        polarity: which pass the result feeds

    返回值:
        float64 array I*, same shape as ``img``
    """
    if img.shape != grad.shape:
        raise ImageShapeError(f"image {img.shape} and gradient {grad.shape} differ in size")
    base = img.astype(np.float64)
    if gamma == 0:
        return np.clip(base, 0.0, 255.0)
    local_mean = ndimage.uniform_filter(base, size=3, mode="nearest")
    if Polarity(polarity) is Polarity.DARK_ON_BRIGHT:
        rim = base > local_mean + FLAT_TOLERANCE
        return np.clip(base + gamma * grad * rim, 0.0, 255.0)
    rim = base < local_mean - FLAT_TOLERANCE
    return np.clip(base - gamma * grad * rim, 0.0, 255.0)


@dataclass
class _LevelTree:
    """Per-level component arrays; index 0 is the 'no component' slot."""

    area: list[np.ndarray] = field(default_factory=list)
    parent: list[np.ndarray] = field(default_factory=list)
    best_child: list[np.ndarray] = field(default_factory=list)


def _label(img: np.ndarray, level: int) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(img <= level, structure=EIGHT_CONNECTED)
    return labels, int(count)


def _build_tree(img: np.ndarray) -> _LevelTree:
    tree = _LevelTree()
    prev_labels: Optional[np.ndarray] = None
    for level in range(N_LEVELS):
        labels, count = _label(img, level)
        flat = labels.ravel()
        tree.area.append(np.bincount(flat, minlength=count + 1).astype(np.int64))
        tree.area[-1][0] = 0
        tree.parent.append(np.zeros(count + 1, dtype=np.int64))

        best = np.zeros(count + 1, dtype=np.int64)
        if prev_labels is not None:
            prev_flat = prev_labels.ravel()
            inside = prev_flat > 0
            # components only grow with the level, so every pixel of a
            # component at level - 1 lands in the same component here
            tree.parent[level - 1][prev_flat[inside]] = flat[inside]
            child_area = tree.area[level - 1]
            order = np.argsort(child_area[1:], kind="stable") + 1
            best[tree.parent[level - 1][order]] = order
            best[0] = 0
        tree.best_child.append(best)
        prev_labels = labels
    return tree


def _stability(tree: _LevelTree, delta: int) -> list[np.ndarray]:
    top = N_LEVELS - 1
    variation = []
    for level in range(N_LEVELS):
        area = tree.area[level]
        idx = np.arange(area.size)

        up = idx
        for lvl in range(level, min(level + delta, top)):
            up = tree.parent[lvl][up]
        up_area = tree.area[min(level + delta, top)][up]

        if level - delta < 0:
            down_area = np.zeros_like(area)
        else:
            down = idx
            for lvl in range(level, level - delta, -1):
                down = tree.best_child[lvl][down]
            down_area = tree.area[level - delta][down]

        q = np.full(area.size, np.inf)
        alive = area > 0
        q[alive] = (up_area[alive] - down_area[alive]) / area[alive]
        variation.append(q)
    return variation


# ═══════════════════════════════════════════════════════════════════════════════
# 🌳 组件树与稳定区域 (component tree, stable regions)
# ═══════════════════════════════════════════════════════════════════════════════

def mser_detect(
    img: np.ndarray,
    params: MserParams,
    polarity: Polarity = Polarity.DARK_ON_BRIGHT,
) -> list[Region]:
    """
    Maximally stable extremal regions of ``img`` for one polarity.

    ``img`` is the (already enhanced) intensity image. Bright-on-dark regions
    are found as dark regions of the inverted image.
    """
    if img.ndim != 2:
        raise ImageShapeError(f"mser_detect needs a single-channel image, got {img.shape}")
    polarity = Polarity(polarity)
    levels = np.clip(np.rint(img.astype(np.float64)), 0, 255).astype(np.uint8)
    if polarity is Polarity.BRIGHT_ON_DARK:
        levels = 255 - levels
    return _stable_regions(levels, params, polarity)


def _stable_regions(levels: np.ndarray, params: MserParams, polarity: Polarity) -> list[Region]:
    tree = _build_tree(levels)
    variation = _stability(tree, params.delta)
    max_pixels = params.max_area * levels.size

    selected: dict[int, list[int]] = {}
    for level in range(N_LEVELS):
        area = tree.area[level]
        q = variation[level]
        if level < N_LEVELS - 1:
            parent_q = variation[level + 1][tree.parent[level]]
        else:
            parent_q = np.full(area.size, np.inf)
        if level > 0:
            child_q = variation[level - 1][tree.best_child[level]]
        else:
            child_q = np.full(area.size, np.inf)
        keep = (
            (area >= max(params.min_area, 1))
            & (area <= max_pixels)
            & (q <= params.max_variation)
            & (q <= parent_q)
            & (q < child_q)
        )
        keep[0] = False
        hits = np.flatnonzero(keep)
        if hits.size:
            selected[level] = hits.tolist()

    regions = []
    for level, ids in selected.items():
        labels, _ = _label(levels, level)
        boxes = ndimage.find_objects(labels)
        threshold = level if polarity is Polarity.DARK_ON_BRIGHT else 255 - level
        for k in ids:
            rows, cols = boxes[k - 1]
            crop = labels[rows, cols] == k
            bbox = (cols.start, rows.start, cols.stop, rows.stop)
            regions.append(Region(bbox, crop, polarity, threshold))

    logger.debug("%s pass: %d stable regions", polarity.value, len(regions))
    return regions


# ═══════════════════════════════════════════════════════════════════════════════
# 🔍 双极性候选提取 (two-polarity extraction)
# ═══════════════════════════════════════════════════════════════════════════════

class ExtremalPass(ABC):
    """
    One polarity pass of the edge-enhanced MSER.

    Subclasses decide the sign of the gradient term and how the enhanced
    image is flooded; the flooding itself is shared.
    """

    polarity: ClassVar[Polarity]

    def __init__(self, params: MserParams):
        self.params = params

    @abstractmethod
    def enhance(self, smoothed: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return I* for this polarity."""
        raise NotImplementedError("subclasses must implement enhance")

    def run(self, smoothed: np.ndarray, grad: np.ndarray) -> list[Region]:
        return mser_detect(self.enhance(smoothed, grad), self.params, self.polarity)


class DarkOnBright(ExtremalPass):
    polarity = Polarity.DARK_ON_BRIGHT

    def enhance(self, smoothed: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return emser_preprocess(smoothed, grad, self.params.gamma, self.polarity)


class BrightOnDark(DarkOnBright):
    """Same as DarkOnBright with the gradient subtracted and the image flooded inverted."""

    polarity = Polarity.BRIGHT_ON_DARK


def preprocess(
    img: np.ndarray, radius: int = 1, epsilon: float = 650.25
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed intensity and its normalised gradient magnitude."""
    smoothed = guided_filter(to_intensity(img), radius, epsilon)
    return smoothed, gradient_magnitude(smoothed)


def _order_key(region: Region) -> tuple[int, float, float, str]:
    cx, cy = region.centroid
    return region.area, round(cy, 6), round(cx, 6), region.polarity.value


def dedup_regions(regions: Sequence[Region], max_iou: float = 0.9) -> list[Region]:
    """
    Sort by area then centroid and drop each region whose IoU with an
    already kept region exceeds ``max_iou``.
    """
    kept: list[Region] = []
    for region in sorted(regions, key=_order_key):
        if any(mask_iou(region, other) > max_iou for other in kept if _boxes_touch(region, other)):
            continue
        kept.append(region)
    return kept


def _boxes_touch(a: Region, b: Region) -> bool:
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def extract_candidates(
    img: np.ndarray,
    params: MserParams,
    radius: int = 1,
    epsilon: float = 650.25,
    dedup_iou: float = 0.9,
) -> list[Region]:
    """
    提取候选字符区域: edge-enhanced MSER in both polarities

    参数说明:
        img: (H, W, 3) uint8 RGB image
        params: MSER delta, area bounds, max variation and gamma
        radius, epsilon: self-guided filter window radius and regulariser
        dedup_iou: regions overlapping a kept one above this IoU are dropped

    返回值:
        regions ordered by area then centroid and numbered 0..n-1 in that
        order (``Region.id``); an empty image gives an empty list

    示例:
        regions = extract_candidates(read_image("scene.png"), MserParams(gamma=0.5))
    """
    h, w = img.shape[:2]
    if h == 0 or w == 0:
        return []
    smoothed, grad = preprocess(img, radius, epsilon)
    return candidates_from_prepared(smoothed, grad, params, dedup_iou)


def candidates_from_prepared(
    smoothed: np.ndarray, grad: np.ndarray, params: MserParams, dedup_iou: float = 0.9
) -> list[Region]:
    """extract_candidates for callers that already hold the output of ``preprocess``."""
    found: list[Region] = []
    for pass_cls in (DarkOnBright, BrightOnDark):
        found.extend(pass_cls(params).run(smoothed, grad))

    regions = dedup_regions(found, dedup_iou)
    for i, region in enumerate(regions):
        region.id = i
    logger.debug("candidates: %d from both polarities, %d after dedup", len(found), len(regions))
    return regions

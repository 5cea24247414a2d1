"""
Per-region characterness cues and pairwise region divergences.

Unary cues (low SW, high PD and low eHOG suggest a character):

    SW   = Var(l) / E(l)^2, l = stroke widths sampled on the skeleton
    PD   = sum over R, G, B of KL(h(r) || h(r*)), r* = box surround
    eHOG = sqrt((w1 - w3)^2 + (w2 - w4)^2) / (w1 + w2 + w3 + w4)

Pairwise divergences feeding the labeling graph:

    SWD = KL between stroke-width histograms over all region pixels
    CD  = L2 distance of mean LAB colours
    UD  = beta * SWD + (1 - beta) * CD
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, NamedTuple, Optional, Sequence

import numpy as np
from scipy import ndimage
from skimage import color

from .config import CUE_NAMES
from .errors import DegenerateRegionError, ImageShapeError
from .imgcore import EdgeMap, detect_edges, prune_skeleton
from .regions import MserParams, Region, candidates_from_prepared, preprocess

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "StrokeWidthStats",
    "CueVector",
    "EdgeTypeCounts",
    "StrokeWidthHistogram",
    "smooth_histogram",
    "kl_divergence",
    "stroke_width_stats",
    "cue_sw",
    "color_histogram",
    "cue_pd",
    "edge_type_counts",
    "ehog_from_counts",
    "cue_ehog",
    "stroke_width_histogram",
    "pair_histograms",
    "divergence_swd",
    "mean_lab",
    "divergence_cd",
    "divergence_ud",
    "compute_cues",
    "PreparedImage",
]

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class StrokeWidthStats:
    mean: float
    variance: float
    samples: int


@dataclass(frozen=True)
class CueVector:
    sw: float
    pd: float
    ehog: float

    def get(self, name: str) -> float:
        if name not in CUE_NAMES:
            raise KeyError(f"unknown cue {name!r}")
        return float(getattr(self, name))

    def as_tuple(self) -> tuple[float, float, float]:
        return self.sw, self.pd, self.ehog


class EdgeTypeCounts(NamedTuple):
    w1: int
    w2: int
    w3: int
    w4: int

    @property
    def total(self) -> int:
        return self.w1 + self.w2 + self.w3 + self.w4


@dataclass(frozen=True)
class StrokeWidthHistogram:
    probs: np.ndarray
    upper: float

    @property
    def bins(self) -> int:
        return int(self.probs.size)


# ═══════════════════════════════════════════════════════════════════════════════
# 📊 直方图工具 (histograms)
# ═══════════════════════════════════════════════════════════════════════════════

def smooth_histogram(counts: np.ndarray, epsilon: float = -1.0) -> np.ndarray:
    """
    Normalise counts and add epsilon to every bin, renormalised.

    h' = (h + eps) / (1 + b * eps) with h the normalised counts and b the
    bin count, so h' sums to 1 and has no empty bin. A negative epsilon
    means eps = 1 / (N + b), N the total count. All-zero counts give the
    uniform histogram whatever epsilon is.
    """
    counts = np.asarray(counts, dtype=np.float64)
    n = float(counts.sum())
    bins = counts.size
    if n <= 0:
        return np.full(bins, 1.0 / bins)
    if epsilon < 0:
        epsilon = 1.0 / (n + bins)
    h = counts / n
    return (h + epsilon) / (1.0 + bins * epsilon)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Discrete KL(p || q) of strictly positive distributions, clamped at 0."""
    if p.shape != q.shape:
        raise ValueError(f"histogram layouts differ: {p.shape} vs {q.shape}")
    value = float(np.sum(p * np.log(p / q)))
    return max(value, 0.0)


# ═══════════════════════════════════════════════════════════════════════════════
# 🔤 单区域线索 (per-region cues: SW, PD, eHOG)
# ═══════════════════════════════════════════════════════════════════════════════

def stroke_width_stats(region: Region) -> StrokeWidthStats:
    """
    Distance-to-boundary sampled on the pruned skeleton; population variance.

    Tails inside the end caps of a stroke are left out (see
    ``prune_skeleton``) so the samples measure the stroke body.
    """
    samples = region.distance[prune_skeleton(region.skeleton, region.distance)]
    if samples.size == 0:
        raise DegenerateRegionError(f"region {region.id} has an empty skeleton")
    return StrokeWidthStats(float(samples.mean()), float(samples.var()), int(samples.size))


def cue_sw(stats: StrokeWidthStats) -> float:
    """Var(l) / E(l)^2, unchanged when every width is scaled by the same factor."""
    if stats.mean <= 0:
        raise DegenerateRegionError("stroke width mean is zero")
    return stats.variance / (stats.mean * stats.mean)


def color_histogram(pixels: np.ndarray, bins: int = 16, epsilon: float = -1.0) -> np.ndarray:
    """
    Per-channel smoothed histograms of (N, 3) uint8 pixels.

    Returns a (3, bins) array, each row sums to 1.
    """
    pixels = np.asarray(pixels).reshape(-1, 3).astype(np.int64)
    index = np.clip(pixels * bins // 256, 0, bins - 1)
    return np.stack(
        [smooth_histogram(np.bincount(index[:, c], minlength=bins), epsilon) for c in range(3)]
    )


def _surround(img: np.ndarray, region: Region) -> np.ndarray:
    """Pixels of r* (box minus region); the box grows by one pixel if r* is empty."""
    h, w = img.shape[:2]
    x0, y0, x1, y1 = region.bbox
    outside = ~region.mask
    if outside.any():
        return img[y0:y1, x0:x1][outside]

    gx0, gy0 = max(x0 - 1, 0), max(y0 - 1, 0)
    gx1, gy1 = min(x1 + 1, w), min(y1 + 1, h)
    grown = np.ones((gy1 - gy0, gx1 - gx0), dtype=bool)
    grown[y0 - gy0 : y1 - gy0, x0 - gx0 : x1 - gx0] &= ~region.mask
    return img[gy0:gy1, gx0:gx1][grown]


def cue_pd(img: np.ndarray, region: Region, bins: int = 16, epsilon: float = -1.0) -> float:
    """
    Perceptual divergence between a region and its bounding-box surround.

    PD is 0 when the region covers the whole image and no surround exists.
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageShapeError(f"cue_pd needs an (H, W, 3) image, got {img.shape}")
    x0, y0, x1, y1 = region.bbox
    inside = img[y0:y1, x0:x1][region.mask]
    outside = _surround(img, region)
    if outside.size == 0:
        return 0.0
    h_in = color_histogram(inside, bins, epsilon)
    h_out = color_histogram(outside, bins, epsilon)
    return sum(kl_divergence(h_in[c], h_out[c]) for c in range(3))


def _orientation_types(theta: np.ndarray) -> np.ndarray:
    """0..3 for types 1..4; type 1 is (7pi/4, 2pi) plus [0, pi/4]."""
    index = np.ceil(theta / HALF_PI - 0.5).astype(np.int64)
    return np.mod(index, 4)


def edge_type_counts(region: Region, edges: EdgeMap, dilation: int = 1) -> EdgeTypeCounts:
    """
    Count edge pixels of the region per orientation type.

    An edge pixel belongs to the region when it lies inside the region mask
    grown by ``dilation`` pixels (Canny may put the edge just outside).
    """
    h, w = edges.mask.shape
    x0, y0, x1, y1 = region.bbox
    gx0, gy0 = max(x0 - dilation, 0), max(y0 - dilation, 0)
    gx1, gy1 = min(x1 + dilation, w), min(y1 + dilation, h)

    local = np.zeros((gy1 - gy0, gx1 - gx0), dtype=bool)
    local[y0 - gy0 : y1 - gy0, x0 - gx0 : x1 - gx0] = region.mask
    if dilation > 0:
        local = ndimage.binary_dilation(local, structure=np.ones((3, 3), bool), iterations=dilation)

    hits = local & edges.mask[gy0:gy1, gx0:gx1]
    types = _orientation_types(edges.theta[gy0:gy1, gx0:gx1][hits])
    counts = np.bincount(types, minlength=4)
    return EdgeTypeCounts(*(int(c) for c in counts))


def ehog_from_counts(counts: Sequence[int]) -> float:
    """
    边缘方向直方图 eHOG = sqrt((w1 - w3)^2 + (w2 - w4)^2) / (w1 + w2 + w3 + w4)

    Opposite orientation types pair up on the two sides of a stroke, so a
    character scores near 0 and a one-sided blob near 1.

    参数说明:
        counts: (w1, w2, w3, w4) edge pixels per orientation type

    返回值:
        value in [0, 1]; DegenerateRegionError when every count is 0
    """
    w1, w2, w3, w4 = counts
    total = w1 + w2 + w3 + w4
    if total <= 0:
        raise DegenerateRegionError("region has no edge pixels")
    return math.hypot(w1 - w3, w2 - w4) / total


def cue_ehog(region: Region, edges: EdgeMap, dilation: int = 1) -> float:
    """eHOG of the edge pixels inside the region grown by ``dilation``."""
    return ehog_from_counts(edge_type_counts(region, edges, dilation))


# ═══════════════════════════════════════════════════════════════════════════════
# 🔗 区域对差异 (pair divergences: SWD, CD, UD)
# ═══════════════════════════════════════════════════════════════════════════════

def stroke_width_histogram(
    region: Region, bins: int = 16, upper: Optional[float] = None, epsilon: float = -1.0
) -> StrokeWidthHistogram:
    """
    Smoothed histogram of the distance transform over every region pixel.

    Bins split [0, upper]; ``upper`` defaults to the region's own maximum.
    Use ``pair_histograms`` to get two histograms on a shared layout.
    """
    values = region.distance[region.mask]
    if upper is None:
        upper = float(values.max()) if values.size else 1.0
    upper = max(upper, 1e-9)
    counts, _ = np.histogram(np.minimum(values, upper), bins=bins, range=(0.0, upper))
    return StrokeWidthHistogram(smooth_histogram(counts, epsilon), upper)


def pair_histograms(
    a: Region, b: Region, bins: int = 16, epsilon: float = -1.0
) -> tuple[StrokeWidthHistogram, StrokeWidthHistogram]:
    upper = max(float(a.distance.max()), float(b.distance.max()))
    return (
        stroke_width_histogram(a, bins, upper, epsilon),
        stroke_width_histogram(b, bins, upper, epsilon),
    )


def divergence_swd(a: StrokeWidthHistogram, b: StrokeWidthHistogram) -> float:
    """KL(a || b) of two stroke width histograms built on the same bins."""
    if a.bins != b.bins or not math.isclose(a.upper, b.upper):
        raise ValueError(
            f"stroke width histograms use different bins: {a.bins}/{a.upper} vs {b.bins}/{b.upper}"
        )
    return kl_divergence(a.probs, b.probs)


def mean_lab(lab: np.ndarray, region: Region) -> np.ndarray:
    x0, y0, x1, y1 = region.bbox
    return lab[y0:y1, x0:x1][region.mask].mean(axis=0)


def divergence_cd(
    img: np.ndarray, a: Region, b: Region, lab: Optional[np.ndarray] = None
) -> float:
    """
    L2 distance between the mean LAB colours (D65) of two regions.

    Pass a precomputed ``lab = skimage.color.rgb2lab(img)`` when scoring
    many pairs of the same image.
    """
    if lab is None:
        lab = color.rgb2lab(img)
    return float(np.linalg.norm(mean_lab(lab, a) - mean_lab(lab, b)))


def divergence_ud(swd: float, cd: float, beta: float = 0.5) -> float:
    """beta * swd + (1 - beta) * cd, both already on comparable scales."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    return beta * swd + (1.0 - beta) * cd


# ═══════════════════════════════════════════════════════════════════════════════
# 🖼️ 整图入口 (whole-image entry points)
# ═══════════════════════════════════════════════════════════════════════════════

def compute_cues(
    img: np.ndarray,
    region: Region,
    edges: EdgeMap,
    pd_bins: int = 16,
    epsilon: float = -1.0,
    edge_dilation: int = 1,
    use: Sequence[str] = CUE_NAMES,
) -> CueVector:
    """
    计算单个区域的三个字符性线索 (SW, PD, eHOG)

    Cues left out of ``use`` are reported as 0 and never computed, so a
    region without edge pixels still scores when eHOG is not requested.

    参数说明:
        img: (H, W, 3) uint8 RGB image the region came from
        region: candidate region
        edges: Canny edge map of the same image
        pd_bins: colour histogram bins per channel for PD
        epsilon: histogram smoothing, negative means 1 / (N + bins)
        edge_dilation: pixels the mask grows by before edges are counted
        use: names of the cues to compute

    返回值:
        CueVector(sw, pd, ehog)

    异常:
        DegenerateRegionError when a requested cue is undefined (empty
        skeleton, no edge pixel)
    """
    sw = cue_sw(stroke_width_stats(region)) if "sw" in use else 0.0
    pd = cue_pd(img, region, pd_bins, epsilon) if "pd" in use else 0.0
    ehog = cue_ehog(region, edges, edge_dilation) if "ehog" in use else 0.0
    return CueVector(sw, pd, ehog)


@dataclass
class PreparedImage:
    """
    Per-image intermediates shared by candidate extraction and cue scoring.

    Built once per image with ``PreparedImage.build``; immutable afterwards.
    """

    rgb: np.ndarray
    smoothed: np.ndarray
    grad: np.ndarray
    edges: EdgeMap

    @classmethod
    def build(cls, rgb: np.ndarray, config: "PipelineConfig") -> "PreparedImage":
        smoothed, grad = preprocess(rgb, config.guided_radius, config.guided_eps)
        edges = detect_edges(smoothed, config.canny_sigma, config.canny_high, config.canny_low_ratio)
        return cls(rgb, smoothed, grad, edges)

    @cached_property
    def lab(self) -> np.ndarray:
        return color.rgb2lab(self.rgb)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rgb.shape[0], self.rgb.shape[1]

    def candidates(self, config: "PipelineConfig") -> list[Region]:
        return candidates_from_prepared(
            self.smoothed, self.grad, MserParams.from_config(config), config.dedup_iou
        )

    def cues(self, region: Region, config: "PipelineConfig") -> CueVector:
        return compute_cues(
            self.rgb,
            region,
            self.edges,
            pd_bins=config.pd_bins,
            epsilon=config.hist_epsilon,
            edge_dilation=config.edge_dilation,
            use=config.cues,
        )

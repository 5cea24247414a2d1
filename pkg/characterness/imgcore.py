"""
Raster primitives every later stage consumes.

Images are numpy arrays: ``(H, W, 3)`` uint8 for colour, ``(H, W)`` for
intensity (uint8 on disk, float64 in between). Masks are ``(H, W)`` bool.
Coordinates follow the image convention: x is the column, y is the row,
y grows downwards.

Connectivity is 8 for regions and skeletons, 4 for the background.
All functions are pure and safe to call concurrently on different images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage
from skimage import feature, filters, measure, morphology

from .errors import DegenerateRegionError, ImageShapeError

__all__ = [
    "BT601_WEIGHTS",
    "FLAT_TOLERANCE",
    "RegionGeometry",
    "EdgeMap",
    "to_intensity",
    "guided_filter",
    "gradient_magnitude",
    "canny_thresholds",
    "canny_edges",
    "detect_edges",
    "distance_transform",
    "skeletonize",
    "prune_skeleton",
    "region_geometry",
]

BT601_WEIGHTS = (0.299, 0.587, 0.114)
TWO_PI = 2.0 * math.pi
EIGHT = np.ones((3, 3), dtype=bool)

# gradients below this (intensity units) are float noise left by filtering a flat image
FLAT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class RegionGeometry:
    """
    Moment-derived shape of a pixel set.

    area: pixel count
    centroid: (x, y) in image coordinates
    bbox: (x0, y0, x1, y1), x1/y1 exclusive
    major_axis_len, minor_axis_len: axes of the ellipse with the same
        second-order central moments
    orientation: angle of the major axis from the x axis, in [0, pi)
    """

    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    major_axis_len: float
    minor_axis_len: float
    orientation: float

    @property
    def char_scale(self) -> float:
        """Characteristic scale: major plus minor axis length."""
        return self.major_axis_len + self.minor_axis_len


class EdgeMap(NamedTuple):
    """Thinned Canny edges plus the orientation at every pixel (radians, [0, 2pi))."""

    mask: np.ndarray
    theta: np.ndarray


def _require_2d(img: np.ndarray, what: str = "image") -> None:
    if img.ndim != 2:
        raise ImageShapeError(f"{what} must be single-channel (H, W), got shape {img.shape}")


# ═══════════════════════════════════════════════════════════════════════════════
# 🎨 灰度、滤波与边缘 (intensity, filtering, edges)
# ═══════════════════════════════════════════════════════════════════════════════

def to_intensity(img: np.ndarray) -> np.ndarray:
    """
    Convert an RGB image to intensity with the ITU-R BT.601 weights.

    Returns a float64 (H, W) array with values in [0, 255].
    (255, 0, 0) maps to 0.299 * 255 = 76.245.
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageShapeError(f"expected an (H, W, 3) colour image, got shape {img.shape}")
    rgb = img.astype(np.float64)
    r, g, b = BT601_WEIGHTS
    gray = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return np.clip(gray, 0.0, 255.0)


def _box_mean(x: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window, clipped at the image border."""
    size = 2 * radius + 1
    sums = ndimage.uniform_filter(x, size=size, mode="constant", cval=0.0)
    counts = ndimage.uniform_filter(np.ones_like(x), size=size, mode="constant", cval=0.0)
    return sums / counts


def guided_filter(img: np.ndarray, radius: int = 1, epsilon: float = 650.25) -> np.ndarray:
    """
    Self-guided filter (the image is its own guide).

    Parameters:
    img: (H, W) intensity image on the [0, 255] scale
    radius: window radius, the window is (2 * radius + 1) pixels wide
    epsilon: regulariser; the default is (0.1 * 255) ** 2

    Returns the edge-preserving smoothed image, same shape, float64.
    Window statistics are averaged over the part of the window inside the image.
    """
    _require_2d(img)
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    h, w = img.shape
    if radius > min(h, w):
        raise ImageShapeError(f"radius {radius} is larger than the {w}x{h} image")

    guide = img.astype(np.float64)
    mean_i = _box_mean(guide, radius)
    var_i = _box_mean(guide * guide, radius) - mean_i * mean_i
    var_i = np.maximum(var_i, 0.0)

    a = var_i / (var_i + epsilon)
    b = mean_i - a * mean_i

    return _box_mean(a, radius) * guide + _box_mean(b, radius)


def gradient_magnitude(img: np.ndarray, normalize: bool = True) -> np.ndarray:
    """
    Central-difference gradient magnitude.

    With ``normalize`` the map is rescaled linearly so that its maximum is 255;
    a map whose maximum is below FLAT_TOLERANCE comes back all zero.
    """
    _require_2d(img)
    gy, gx = np.gradient(img.astype(np.float64))
    magnitude = np.hypot(gx, gy)
    if not normalize:
        return magnitude
    peak = magnitude.max(initial=0.0)
    if peak <= FLAT_TOLERANCE:
        return np.zeros_like(magnitude)
    return magnitude * (255.0 / peak)


def _smoothed_sobel(img: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    smoothed = ndimage.gaussian_filter(img.astype(np.float64), sigma) if sigma > 0 else img.astype(np.float64)
    gx = ndimage.sobel(smoothed, axis=1)
    gy = ndimage.sobel(smoothed, axis=0)
    return gx, gy


def canny_thresholds(
    img: np.ndarray,
    sigma: float = 1.0,
    high: float = -1.0,
    low_ratio: float = 0.4,
) -> tuple[float, float]:
    """
    Resolve the hysteresis thresholds.

    A negative ``high`` means automatic: Otsu's threshold of the smoothed
    Sobel magnitude. ``low`` is always ``low_ratio * high``.
    Returns (0.0, 0.0) on a flat image, where no edge can exist.
    """
    if high < 0:
        gx, gy = _smoothed_sobel(img, sigma)
        magnitude = np.hypot(gx, gy)
        if magnitude.max(initial=0.0) <= FLAT_TOLERANCE or np.ptp(magnitude) <= FLAT_TOLERANCE:
            return 0.0, 0.0
        high = float(filters.threshold_otsu(magnitude))
    return low_ratio * high, high


def canny_edges(img: np.ndarray, low: float, high: float, sigma: float = 1.0) -> EdgeMap:
    """
    Canny edges with hysteresis, plus the gradient orientation per pixel.

    Parameters:
    img: (H, W) intensity image
    low, high: hysteresis thresholds on the smoothed Sobel magnitude, 0 < low < high
    sigma: Gaussian smoothing applied before differentiation

    theta is the direction of steepest intensity decrease, atan2(-gy, -gx)
    in image coordinates, mapped to [0, 2pi). On a bright blob it points
    outwards. Outside the edge mask theta is still filled in but unused.
    """
    _require_2d(img)
    gx, gy = _smoothed_sobel(img, sigma)
    theta = np.mod(np.arctan2(-gy, -gx), TWO_PI)
    theta[theta >= TWO_PI] = 0.0

    if high <= 0.0 and low <= 0.0:
        # flat input, see canny_thresholds
        return EdgeMap(np.zeros(img.shape, dtype=bool), theta)
    if not 0.0 < low < high:
        raise ValueError(f"canny thresholds need 0 < low < high, got low={low}, high={high}")

    mask = feature.canny(
        img.astype(np.float64),
        sigma=sigma,
        low_threshold=low,
        high_threshold=high,
    )
    return EdgeMap(mask.astype(bool), theta)


def detect_edges(
    img: np.ndarray, sigma: float = 1.0, high: float = -1.0, low_ratio: float = 0.4
) -> EdgeMap:
    """canny_edges with thresholds resolved by canny_thresholds."""
    low, high = canny_thresholds(img, sigma, high, low_ratio)
    return canny_edges(img, low, high, sigma)


# ═══════════════════════════════════════════════════════════════════════════════
# 🦴 距离变换与骨架 (distance transform, skeleton)
# ═══════════════════════════════════════════════════════════════════════════════

def distance_transform(mask: np.ndarray) -> np.ndarray:
    """
    Exact Euclidean distance from each member pixel to the nearest non-member.

    Pixels outside the image count as non-members, so an isolated pixel has
    distance 1. Non-member pixels get 0. Any nonzero value is a member.
    """
    _require_2d(mask, "mask")
    padded = np.pad(np.asarray(mask) != 0, 1, mode="constant", constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def _ridge_peaks(mask: np.ndarray) -> np.ndarray:
    """Pixels at the largest distance-to-boundary of their 8-connected component."""
    distance = distance_transform(mask)
    labels, count = ndimage.label(mask, structure=EIGHT)
    peaks = ndimage.maximum(distance, labels, index=np.arange(1, count + 1))
    return mask & (distance == np.concatenate(([np.inf], peaks))[labels])


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """
    Zhang-Suen thinning plus the deepest pixels of each component.

    Thinning alone can drop the centre of a blob (an odd square loses its
    middle pixel), so the pixels at each component's maximum distance to the
    boundary are added back. The step repeats until nothing changes, which
    makes the result a fixpoint: ``skeletonize(skeletonize(m)) == skeletonize(m)``.
    The result is a subset of ``mask``; any nonzero value is a member.
    """
    _require_2d(mask, "mask")
    current = np.asarray(mask) != 0
    while current.any():
        padded = np.pad(current, 1, mode="constant", constant_values=False)
        thin = morphology.skeletonize(padded)[1:-1, 1:-1] & current
        nxt = thin | _ridge_peaks(current)
        if np.array_equal(nxt, current):
            break
        current = nxt
    return current


def _walk_tail(
    start: tuple[int, int], skeleton: np.ndarray, degree: np.ndarray, distance: np.ndarray
) -> list[tuple[int, int]]:
    """
    Pixels to drop from the branch ending at ``start``.

    Walking inwards, the tail ends at the first pixel whose disc of radius
    ``distance`` reaches back to the endpoint. A branch that meets a junction
    before that is dropped whole (the junction stays).
    """
    h, w = skeleton.shape
    tail: list[tuple[int, int]] = []
    seen = {start}
    y, x = start
    walked = 0.0
    while True:
        if degree[y, x] >= 3:
            return tail
        if walked >= distance[y, x]:
            return tail
        tail.append((y, x))
        step = None
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if (dy or dx) and 0 <= ny < h and 0 <= nx < w and skeleton[ny, nx] and (ny, nx) not in seen:
                    if step is None or (step[0] and step[1] and not (dy and dx)):
                        step = (dy, dx)
        if step is None:
            # the whole path fits inside one disc
            return []
        y, x = y + step[0], x + step[1]
        seen.add((y, x))
        walked += math.sqrt(2.0) if step[0] and step[1] else 1.0


def prune_skeleton(skeleton: np.ndarray, distance: np.ndarray) -> np.ndarray:
    """
    Drop skeleton tails that lie inside the maximal disc of an inner pixel.

    Thinning runs every stroke out to its boundary, where the distance map
    falls to 1 whatever the stroke width; those tails and short spurs are
    removed here. Closed loops are untouched and a component is never
    emptied.

    参数说明:
        skeleton: boolean skeleton, as from ``skeletonize``
        distance: distance map of the mask the skeleton came from

    返回值:
        boolean subset of ``skeleton``
    """
    _require_2d(skeleton, "skeleton")
    if skeleton.shape != distance.shape:
        raise ImageShapeError(f"skeleton {skeleton.shape} and distance {distance.shape} differ in size")
    skeleton = np.asarray(skeleton) != 0
    degree = ndimage.convolve(skeleton.astype(np.int32), EIGHT.astype(np.int32), mode="constant") - 1
    degree = np.where(skeleton, degree, 0)
    pruned = skeleton.copy()
    for y, x in np.argwhere(skeleton & (degree == 1)):
        for py, px in _walk_tail((int(y), int(x)), skeleton, degree, distance):
            pruned[py, px] = False
    labels, count = ndimage.label(skeleton, structure=EIGHT)
    survivors = ndimage.sum(pruned, labels, index=np.arange(1, count + 1))
    emptied = np.concatenate(([False], np.asarray(survivors) == 0))[labels]
    return pruned | (skeleton & emptied)


# ═══════════════════════════════════════════════════════════════════════════════
# 📐 区域几何 (region moments)
# ═══════════════════════════════════════════════════════════════════════════════

def region_geometry(mask: np.ndarray, offset: tuple[int, int] = (0, 0)) -> RegionGeometry:
    """
    Area, centroid, bounding box and moment ellipse of a pixel set.

    ``offset`` is the (x, y) position of ``mask[0, 0]`` in the full image, so
    callers can pass a cropped mask.
    """
    _require_2d(mask, "mask")
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise DegenerateRegionError("region_geometry needs a non-empty mask")

    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    crop = mask[y0:y1, x0:x1].astype(np.float64)

    raw = measure.moments(crop, order=1)
    area = raw[0, 0]
    cy_local = raw[1, 0] / area
    cx_local = raw[0, 1] / area

    # skimage indexes moments as [row power, column power]
    mu = measure.moments_central(crop, center=(cy_local, cx_local), order=2)
    mu20 = mu[0, 2] / area  # along x
    mu02 = mu[2, 0] / area  # along y
    mu11 = mu[1, 1] / area

    half_sum = (mu20 + mu02) / 2.0
    root = math.sqrt(((mu20 - mu02) / 2.0) ** 2 + mu11**2)
    lambda_major = max(half_sum + root, 0.0)
    lambda_minor = max(half_sum - root, 0.0)

    orientation = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    orientation = orientation % math.pi
    if orientation >= math.pi:
        orientation = 0.0

    ox, oy = offset
    return RegionGeometry(
        area=int(area),
        centroid=(cx_local + x0 + ox, cy_local + y0 + oy),
        bbox=(x0 + ox, y0 + oy, x1 + ox, y1 + oy),
        major_axis_len=4.0 * math.sqrt(lambda_major),
        minor_axis_len=4.0 * math.sqrt(lambda_minor),
        orientation=orientation,
    )

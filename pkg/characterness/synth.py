"""
Synthetic scene-text fixtures.

Glyphs are blocky letters drawn with PIL rectangles and ellipses, so no
font files are needed. Scenes place one or two words on a flat ground,
optionally blurred; textures are smooth text-free images. Everything is
seeded through ``numpy.random.default_rng`` and fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .evalkit import Box

__all__ = [
    "GLYPHS",
    "Scene",
    "glyph_mask",
    "render_word",
    "render_scene",
    "render_texture",
]

Painter = Callable[[ImageDraw.ImageDraw, int, int, int], None]


def _bar(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    x0 = (w - s) // 2
    d.rectangle([x0, 0, x0 + s - 1, h - 1], fill=1)


def _ring(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    d.ellipse([0, 0, w - 1, h - 1], fill=1)
    d.ellipse([s, s, w - 1 - s, h - 1 - s], fill=0)


def _left(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    d.rectangle([0, 0, s - 1, h - 1], fill=1)


def _right(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    d.rectangle([w - s, 0, w - 1, h - 1], fill=1)


def _top(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    d.rectangle([0, 0, w - 1, s - 1], fill=1)


def _middle(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    y0 = (h - s) // 2
    d.rectangle([0, y0, w - 1, y0 + s - 1], fill=1)


def _bottom(d: ImageDraw.ImageDraw, w: int, h: int, s: int) -> None:
    d.rectangle([0, h - s, w - 1, h - 1], fill=1)


GLYPHS: dict[str, tuple[Painter, ...]] = {
    "I": (_bar,),
    "O": (_ring,),
    "L": (_left, _bottom),
    "T": (_top, _bar),
    "H": (_left, _right, _middle),
    "E": (_left, _top, _middle, _bottom),
    "F": (_left, _top, _middle),
    "U": (_left, _right, _bottom),
    "C": (_left, _top, _bottom),
}

VOCABULARY = ("ECHO", "HUE", "CUE", "OUCH", "HOE", "FOE", "CHEF", "COHO", "FUEL", "HOLE")


def glyph_mask(char: str, width: int = 12, height: int = 20, stroke: int = 3) -> np.ndarray:
    """Boolean (height, width) mask of one glyph; unknown letters raise KeyError."""
    canvas = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    for painter in GLYPHS[char.upper()]:
        painter(draw, width, height, stroke)
    return np.asarray(canvas.convert("L")) > 0


@dataclass
class Scene:
    image: np.ndarray
    glyph_masks: list[np.ndarray] = field(default_factory=list)
    word_boxes: list[Box] = field(default_factory=list)

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.image.shape[:2], dtype=bool)
        for m in self.glyph_masks:
            out |= m
        return out


def render_word(
    text: str,
    origin: tuple[int, int],
    shape: tuple[int, int],
    glyph_size: tuple[int, int] = (12, 20),
    stroke: int = 3,
    spacing: int = 5,
) -> tuple[list[np.ndarray], Box]:
    """
    Full-size masks of each glyph of ``text`` starting at ``origin`` = (x, y),
    plus the word's tight box. Letters missing from GLYPHS fall back to "I".

    Glyphs are clipped to the canvas; one that falls entirely outside gets
    an empty mask. A word with no visible pixel raises ValueError.
    """
    gw, gh = glyph_size
    h, w = shape
    x, y = origin
    masks = []
    for char in text:
        local = glyph_mask(char if char.upper() in GLYPHS else "I", gw, gh, stroke)
        full = np.zeros(shape, dtype=bool)
        x0, y0 = max(x, 0), max(y, 0)
        x1, y1 = min(x + gw, w), min(y + gh, h)
        if x0 < x1 and y0 < y1:
            full[y0:y1, x0:x1] = local[y0 - y : y1 - y, x0 - x : x1 - x]
        masks.append(full)
        x += gw + spacing

    union = np.zeros(shape, dtype=bool)
    for m in masks:
        union |= m
    ys, xs = np.nonzero(union)
    if xs.size == 0:
        raise ValueError(f"word {text!r} at {origin} is outside the {w}x{h} canvas")
    box = Box(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
    return masks, box



def _blur(image: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return image
    smoothed = ndimage.gaussian_filter(image.astype(np.float64), sigma=(sigma, sigma, 0))
    return np.clip(np.rint(smoothed), 0, 255).astype(np.uint8)


def render_scene(
    seed: int,
    shape: tuple[int, int] = (120, 220),
    words: Optional[Sequence[str]] = None,
    n_words: int = 2,
    dark_text: bool = True,
    blur: float = 0.0,
    foreground: Optional[tuple[int, int, int]] = None,
    background: Optional[tuple[int, int, int]] = None,
    glyph_size: tuple[int, int] = (12, 20),
    stroke: int = 3,
) -> Scene:
    """
    One or two words on a flat ground.

    Words sit on separate rows with a random horizontal offset. Colours
    default to a dark-on-light (or light-on-dark) grey pair drawn from the
    seed.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    if words is None:
        picks = rng.choice(len(VOCABULARY), size=n_words, replace=False)
        words = [VOCABULARY[int(k)] for k in picks]
    if foreground is None or background is None:
        dark = tuple(int(v) for v in rng.integers(10, 60, size=3))
        light = tuple(int(v) for v in rng.integers(190, 245, size=3))
        foreground, background = (dark, light) if dark_text else (light, dark)

    image = np.empty((h, w, 3), dtype=np.uint8)
    image[:] = background
    scene = Scene(image)

    gw, gh = glyph_size
    rows = len(words)
    row_height = h // max(rows, 1)
    for row, word in enumerate(words):
        width = len(word) * gw + (len(word) - 1) * 5
        slack = max(w - width - 8, 0)
        x = 4 + int(rng.integers(0, slack + 1))
        y = row * row_height + max((row_height - gh) // 2, 0)
        masks, box = render_word(word, (x, y), (h, w), glyph_size, stroke)
        for m in masks:
            scene.image[m] = foreground
        scene.glyph_masks.extend(masks)
        scene.word_boxes.append(box)

    scene.image = _blur(scene.image, blur)
    return scene


def render_texture(seed: int, shape: tuple[int, int] = (120, 220), contrast: float = 30.0) -> np.ndarray:
    """Smooth low-contrast colour noise without any character-like structure."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(shape[0], shape[1], 3))
    smooth = ndimage.gaussian_filter(noise, sigma=(12, 12, 0))
    smooth /= np.abs(smooth).max() or 1.0
    base = rng.integers(90, 170, size=3)
    return np.clip(np.rint(base + contrast * smooth), 0, 255).astype(np.uint8)

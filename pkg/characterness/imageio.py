"""Reading and writing rasters, masks, maps and box files."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputOutputError
from .evalkit import Box

__all__ = [
    "read_image",
    "read_mask",
    "read_map",
    "write_mask",
    "write_map",
    "write_indexed",
    "read_boxes",
    "write_json",
]

PathLike = Union[str, Path]


def _open(path: PathLike, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert(mode))
    except (OSError, UnidentifiedImageError) as exc:
        raise InputOutputError(f"cannot read image {path}: {exc}") from exc


def read_image(path: PathLike) -> np.ndarray:
    """Any PIL-readable 8-bit image (PNG, PGM, PPM, ...) as (H, W, 3) uint8."""
    return _open(path, "RGB").copy()


def read_mask(path: PathLike) -> np.ndarray:
    """Ground-truth mask: nonzero pixels are text."""
    return _open(path, "L") > 0


def read_map(path: PathLike) -> np.ndarray:
    return _open(path, "L").copy()


def _save(image: Image.Image, path: PathLike) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        image.save(path)
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    _save(Image.fromarray(mask.astype(np.uint8) * 255, mode="L"), path)


def write_map(path: PathLike, values: np.ndarray) -> None:
    """Write a [0, 1] map as 8-bit PNG, ``rint(255 * v)``."""
    scaled = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    _save(Image.fromarray(scaled, mode="L"), path)


def write_indexed(path: PathLike, labels: np.ndarray, seed: int = 0) -> None:
    """
    Indexed-colour PNG of a label image (0 = background, k = region k - 1).

    Labels above 255 wrap around the palette.
    """
    rng = np.random.default_rng(seed)
    palette = rng.integers(64, 256, size=(256, 3), dtype=np.uint8)
    palette[0] = 0
    image = Image.fromarray((labels % 256).astype(np.uint8), mode="P")
    image.putpalette(palette.ravel().tolist())
    _save(image, path)


def _box_from_obj(obj: Any) -> Box:
    if isinstance(obj, dict):
        return Box(int(obj["x"]), int(obj["y"]), int(obj["w"]), int(obj["h"]))
    x, y, w, h = obj[:4]
    return Box(int(x), int(y), int(w), int(h))


def read_boxes(path: PathLike) -> list[Box]:
    """
    Box file reader.

    Accepts a JSON array of ``{"x", "y", "w", "h"}`` objects (the detect
    output qualifies, extra keys are ignored) or ``[x, y, w, h]`` lists, or
    plain text with one whitespace- or comma-separated ``x y w h`` per line.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot read boxes {path}: {exc}") from exc

    stripped = text.strip()
    if not stripped:
        return []
    try:
        if stripped.startswith("[") or stripped.startswith("{"):
            data = json.loads(stripped)
            if isinstance(data, dict):
                data = data.get("boxes", [])
            return [_box_from_obj(item) for item in data]
        boxes = []
        for line in stripped.splitlines():
            line = line.split("#", 1)[0].replace(",", " ").split()
            if line:
                boxes.append(_box_from_obj([float(v) for v in line]))
        return boxes
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise InputOutputError(f"malformed box file {path}: {exc}") from exc


def write_json(path: PathLike, payload: Union[Sequence[Any], dict]) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, ensure_ascii=False)
            f.write("\n")
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc

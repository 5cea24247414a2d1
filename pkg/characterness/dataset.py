"""
Dataset manifests.

A manifest is a JSON list; each entry names an image and optionally a
ground-truth mask and a box file, relative to the manifest's directory::

    [
      {"image": "img/0001.png", "mask": "gt/0001.png"},
      {"image": "img/0002.png", "mask": "gt/0002.png", "boxes": "gt/0002.txt"}
    ]
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from .errors import DatasetError, InputOutputError

__all__ = ["ManifestEntry", "DatasetManifest", "IMAGE_SUFFIXES", "index_directory"]

IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass(frozen=True)
class ManifestEntry:
    image: Path
    mask: Optional[Path] = None
    boxes: Optional[Path] = None

    @property
    def stem(self) -> str:
        return self.image.stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    source: Optional[Path] = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    @property
    def has_masks(self) -> bool:
        return any(e.mask is not None for e in self.entries)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        """Read and validate a manifest; every referenced file must exist."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputOutputError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DatasetError(f"manifest {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, list):
            raise DatasetError(f"manifest {path} must be a JSON list of entries")

        root = path.parent
        entries = []
        missing = []
        for number, item in enumerate(data):
            if not isinstance(item, dict) or "image" not in item:
                raise DatasetError(f"manifest entry {number} has no 'image' field")
            resolved = {
                key: (root / item[key]) if item.get(key) else None for key in ("image", "mask", "boxes")
            }
            missing.extend(str(p) for p in resolved.values() if p is not None and not p.is_file())
            entries.append(ManifestEntry(resolved["image"], resolved["mask"], resolved["boxes"]))

        if missing:
            raise DatasetError(f"manifest {path} references missing files: {', '.join(missing)}")
        return cls(tuple(entries), path)

    def dump(self) -> str:
        root = self.source.parent if self.source else Path(".")
        items = []
        for entry in self.entries:
            item = {"image": _relative(entry.image, root)}
            if entry.mask is not None:
                item["mask"] = _relative(entry.mask, root)
            if entry.boxes is not None:
                item["boxes"] = _relative(entry.boxes, root)
            items.append(item)
        return json.dumps(items, indent=2, ensure_ascii=False) + "\n"


def _relative(path: Path, root: Path) -> str:
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return path.as_posix()


def index_directory(directory: Union[str, Path], suffixes: tuple[str, ...] = IMAGE_SUFFIXES) -> dict[str, Path]:
    """Map file stem to path for every matching file directly inside ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputOutputError(f"{directory} is not a directory")
    return {p.stem: p for p in sorted(directory.iterdir()) if p.is_file() and p.suffix.lower() in suffixes}

"""
Naive-Bayes characterness model.

Each cue gets a pair of histogram likelihoods p(cue | char) and
p(cue | background) over a fixed range; the priors are the relative
frequency of the training samples. The posterior of a cue vector is

    p(c | cues) = p(c) prod p(cue | c) / sum_k p(k) prod p(cue | k)

Model file (text, floats written with ``repr`` so a round trip is exact)::

    characterness-model v1
    prior 0.3
    cue sw 0.0 0.5 50
    char 0.0196... (50 values)
    bg 0.0196... (50 values)
    cue pd 0.0 12.0 50
    ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from skimage import measure
from tqdm import tqdm

from .config import CUE_NAMES
from .cues import CueVector, PreparedImage
from .errors import (
    DatasetError,
    DegenerateRegionError,
    ImageShapeError,
    InputOutputError,
    ModelFormatError,
    ModelVersionError,
)
from .log import get_logger
from .regions import Polarity, Region, mask_iou

if TYPE_CHECKING:
    from .config import PipelineConfig

__all__ = [
    "MODEL_HEADER",
    "MODEL_VERSION",
    "CHAR",
    "BACKGROUND",
    "CueLikelihood",
    "CharacternessModel",
    "train",
    "posterior",
    "posterior_bg",
    "format_model",
    "parse_model",
    "save_model",
    "load_model",
    "harvest_training_samples",
]

logger = get_logger(__name__)

MODEL_HEADER = "characterness-model"
MODEL_VERSION = "v1"
CHAR = 1
BACKGROUND = 0

DEFAULT_RANGES = {"sw": 0.5, "pd": 12.0, "ehog": 0.5}

Sample = tuple[CueVector, int]


@dataclass(frozen=True)
class CueLikelihood:
    """Binned class-conditional likelihoods of one cue over [lower, upper]."""

    name: str
    lower: float
    upper: float
    p_char: np.ndarray
    p_bg: np.ndarray

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise ValueError(f"{self.name}: range [{self.lower}, {self.upper}] is empty")
        if self.p_char.shape != self.p_bg.shape or self.p_char.ndim != 1:
            raise ValueError(f"{self.name}: likelihood vectors must be 1-D and equally long")
        for label, probs in (("char", self.p_char), ("bg", self.p_bg)):
            if np.any(probs <= 0) or not math.isclose(float(probs.sum()), 1.0, abs_tol=1e-9):
                raise ValueError(f"{self.name}: {label} probabilities must be positive and sum to 1")

    @property
    def bins(self) -> int:
        return int(self.p_char.size)

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.bins + 1)

    def bin_index(self, value: float) -> int:
        """Bin of ``value``; values outside the range fall in the end bins."""
        position = (value - self.lower) / (self.upper - self.lower) * self.bins
        return int(min(max(math.floor(position), 0), self.bins - 1))

    def likelihoods(self, value: float) -> tuple[float, float]:
        k = self.bin_index(value)
        return float(self.p_char[k]), float(self.p_bg[k])


@dataclass(frozen=True)
class CharacternessModel:
    likelihoods: Mapping[str, CueLikelihood]
    prior_char: float

    def __post_init__(self) -> None:
        if not 0.0 < self.prior_char < 1.0:
            raise ValueError(f"prior_char must be in (0, 1), got {self.prior_char}")

    @property
    def prior_bg(self) -> float:
        return 1.0 - self.prior_char

    @property
    def cue_names(self) -> tuple[str, ...]:
        return tuple(self.likelihoods)


def _histogram(values: np.ndarray, lower: float, upper: float, bins: int, pseudocount: float) -> np.ndarray:
    position = np.floor((values - lower) / (upper - lower) * bins)
    index = np.clip(position, 0, bins - 1).astype(np.int64)
    counts = np.bincount(index, minlength=bins).astype(np.float64) + pseudocount
    return counts / counts.sum()


# ═══════════════════════════════════════════════════════════════════════════════
# 🧠 训练与推断 (training and inference)
# ═══════════════════════════════════════════════════════════════════════════════

def train(
    samples: Sequence[Sample],
    bins: int = 50,
    ranges: Optional[Mapping[str, float]] = None,
    pseudocount: float = 1.0,
) -> CharacternessModel:
    """
    训练朴素贝叶斯字符性模型: per-cue histograms and class priors

    参数说明:
        samples: (CueVector, label) pairs, label 1 for characters, 0 for
            background; both classes need at least one sample
        bins: histogram bins per cue
        ranges: upper bound of each cue's histogram (lower bound 0); cues
            missing here use DEFAULT_RANGES, values past the bound land in
            the last bin
        pseudocount: added to every bin before normalising

    返回值:
        CharacternessModel with one CueLikelihood per cue and
        prior_char = characters / samples

    示例:
        model = train(harvest_training_samples(images, masks, config))
        save_model(model, "model.txt")
    """
    ranges = dict(DEFAULT_RANGES, **(ranges or {}))
    chars = [cues for cues, label in samples if label == CHAR]
    background = [cues for cues, label in samples if label == BACKGROUND]
    if not chars or not background:
        raise DatasetError(
            f"training needs both classes, got {len(chars)} character and "
            f"{len(background)} background samples"
        )

    likelihoods = {}
    for name in CUE_NAMES:
        upper = float(ranges[name])
        char_values = np.array([c.get(name) for c in chars], dtype=np.float64)
        bg_values = np.array([c.get(name) for c in background], dtype=np.float64)
        likelihoods[name] = CueLikelihood(
            name,
            0.0,
            upper,
            _histogram(char_values, 0.0, upper, bins, pseudocount),
            _histogram(bg_values, 0.0, upper, bins, pseudocount),
        )

    prior = len(chars) / (len(chars) + len(background))
    logger.info(
        "trained on %d character / %d background samples, prior %.4f",
        len(chars),
        len(background),
        prior,
    )
    return CharacternessModel(likelihoods, prior)


def _class_scores(model: CharacternessModel, cues: CueVector, use: Iterable[str]) -> tuple[float, float]:
    score_char = model.prior_char
    score_bg = model.prior_bg
    for name in use:
        p_char, p_bg = model.likelihoods[name].likelihoods(cues.get(name))
        score_char *= p_char
        score_bg *= p_bg
    return score_char, score_bg


def posterior(model: CharacternessModel, cues: CueVector, use: Iterable[str] = CUE_NAMES) -> float:
    """p(char | cues) over the cues named in ``use``."""
    score_char, score_bg = _class_scores(model, cues, use)
    return score_char / (score_char + score_bg)


def posterior_bg(model: CharacternessModel, cues: CueVector, use: Iterable[str] = CUE_NAMES) -> float:
    """p(background | cues); equals 1 - posterior up to rounding."""
    score_char, score_bg = _class_scores(model, cues, use)
    return score_bg / (score_char + score_bg)


# ═══════════════════════════════════════════════════════════════════════════════
# 💾 模型文件 (model file)
# ═══════════════════════════════════════════════════════════════════════════════

def _floats(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def format_model(model: CharacternessModel) -> str:
    lines = [f"{MODEL_HEADER} {MODEL_VERSION}", f"prior {model.prior_char!r}"]
    for name, lk in model.likelihoods.items():
        lines.append(f"cue {name} {lk.lower!r} {lk.upper!r} {lk.bins}")
        lines.append(f"char {_floats(lk.p_char)}")
        lines.append(f"bg {_floats(lk.p_bg)}")
    return "\n".join(lines) + "\n"


class _LineReader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.number = 0

    def next(self, keyword: str) -> list[str]:
        while self.number < len(self.lines):
            self.number += 1
            fields = self.lines[self.number - 1].split()
            if fields:
                if fields[0] != keyword:
                    raise ModelFormatError(f"expected {keyword!r}, got {fields[0]!r}", self.number)
                return fields[1:]
        raise ModelFormatError(f"unexpected end of file, expected {keyword!r}", self.number + 1)

    def floats(self, keyword: str, count: int) -> np.ndarray:
        fields = self.next(keyword)
        if len(fields) != count:
            raise ModelFormatError(f"{keyword}: expected {count} values, got {len(fields)}", self.number)
        try:
            return np.array([float(v) for v in fields], dtype=np.float64)
        except ValueError as exc:
            raise ModelFormatError(f"{keyword}: {exc}", self.number) from exc


def parse_model(text: str) -> CharacternessModel:
    reader = _LineReader(text)
    header = reader.next(MODEL_HEADER)
    if header != [MODEL_VERSION]:
        raise ModelVersionError(
            f"unsupported model version {' '.join(header) or '(none)'}, expected {MODEL_VERSION}",
            reader.number,
        )
    try:
        prior = float(reader.next("prior")[0])
    except (IndexError, ValueError) as exc:
        raise ModelFormatError(f"bad prior: {exc}", reader.number) from exc

    likelihoods = {}
    for expected in CUE_NAMES:
        fields = reader.next("cue")
        try:
            name, lower, upper, bins = fields[0], float(fields[1]), float(fields[2]), int(fields[3])
        except (IndexError, ValueError) as exc:
            raise ModelFormatError(f"bad cue line: {exc}", reader.number) from exc
        if name != expected:
            raise ModelFormatError(f"expected cue {expected!r}, got {name!r}", reader.number)
        p_char = reader.floats("char", bins)
        p_bg = reader.floats("bg", bins)
        try:
            likelihoods[name] = CueLikelihood(name, lower, upper, p_char, p_bg)
        except ValueError as exc:
            raise ModelFormatError(str(exc), reader.number) from exc

    try:
        return CharacternessModel(likelihoods, prior)
    except ValueError as exc:
        raise ModelFormatError(str(exc), 2) from exc


def save_model(model: CharacternessModel, path: Union[str, Path]) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(format_model(model), encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot write model {path}: {exc}") from exc


def load_model(path: Union[str, Path]) -> CharacternessModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputOutputError(f"cannot read model {path}: {exc}") from exc
    return parse_model(text)


# ═══════════════════════════════════════════════════════════════════════════════
# 📚 训练样本采集 (sample harvesting)
# ═══════════════════════════════════════════════════════════════════════════════

def _gt_components(gt: np.ndarray) -> list[Region]:
    labels = measure.label(gt.astype(bool), connectivity=2)
    return [Region.from_mask(labels == k, Polarity.DARK_ON_BRIGHT) for k in range(1, int(labels.max()) + 1)]


def _is_erased(candidate: Region, components: Sequence[Region], gt: np.ndarray, max_iou: float) -> bool:
    x0, y0, x1, y1 = candidate.bbox
    covered = int((gt[y0:y1, x0:x1] & candidate.mask).sum())
    if covered / candidate.area > max_iou:
        return True
    return any(mask_iou(candidate, comp) > max_iou for comp in components)


def harvest_training_samples(
    images: Sequence[np.ndarray],
    gt_masks: Sequence[Optional[np.ndarray]],
    config: "PipelineConfig",
    progress: bool = False,
) -> list[Sample]:
    """
    Labelled cue vectors from images with pixel ground truth.

    Positives: 8-connected components of the ground-truth mask.
    Negatives: candidates left after erasing the ground truth, i.e. those
    with IoU <= ``erase_iou`` against every component and no more than
    ``erase_iou`` of their pixels inside the mask.
    Images without a mask are skipped with a warning; regions on which a
    cue is undefined are skipped.
    """
    if len(images) != len(gt_masks):
        raise ValueError("images and gt_masks must have the same length")

    # the model always stores all three likelihoods, whatever subset scoring uses
    full = config.replace(cues=CUE_NAMES)
    samples: list[Sample] = []
    skipped = 0
    for index, (rgb, gt) in enumerate(
        tqdm(list(zip(images, gt_masks)), desc="harvest", unit="img", disable=not progress)
    ):
        if gt is None:
            logger.warning("image %d has no ground-truth mask, skipped", index)
            continue
        if gt.shape != rgb.shape[:2]:
            raise ImageShapeError(f"image {index}: mask {gt.shape} does not match image {rgb.shape[:2]}")
        gt = gt.astype(bool)
        prepared = PreparedImage.build(rgb, config)
        components = _gt_components(gt)

        for label, regions in (
            (CHAR, components),
            (
                BACKGROUND,
                [c for c in prepared.candidates(config) if not _is_erased(c, components, gt, config.erase_iou)],
            ),
        ):
            for region in regions:
                try:
                    samples.append((prepared.cues(region, full), label))
                except DegenerateRegionError as exc:
                    skipped += 1
                    logger.debug("image %d: skipped sample (%s)", index, exc)

    n_char = sum(1 for _, label in samples if label == CHAR)
    logger.info(
        "harvested %d character / %d background samples (%d degenerate skipped)",
        n_char,
        len(samples) - n_char,
        skipped,
    )
    return samples

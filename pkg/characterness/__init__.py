"""
Scene text detection driven by a learned characterness score.

Pipeline: edge-preserving MSER candidates, three characterness cues fused
by naive Bayes, graph-cut character labeling, mean-shift line grouping,
plus saliency and box evaluation.

Compatibility: Python 3.9+, NumPy 1.20+
"""

from __future__ import annotations

import sys

if sys.version_info < (3, 9):
    raise RuntimeError("characterness requires Python 3.9 or newer")

from .charmodel import CharacternessModel, harvest_training_samples, load_model, posterior, save_model, train
from .config import PipelineConfig, dump_config, load_config, parse_config
from .cues import CueVector, PreparedImage, compute_cues
from .errors import CharacternessError
from .evalkit import Box, box_prf, score_saliency
from .labeling import RegionGraph, build_graph, min_cut_label
from .lines import DetectionResult, TextLine, detect
from .regions import MserParams, Polarity, Region, extract_candidates

__all__ = [
    "Box",
    "CharacternessError",
    "CharacternessModel",
    "CueVector",
    "DetectionResult",
    "MserParams",
    "PipelineConfig",
    "Polarity",
    "PreparedImage",
    "Region",
    "RegionGraph",
    "TextLine",
    "box_prf",
    "build_graph",
    "compute_cues",
    "detect",
    "dump_config",
    "extract_candidates",
    "harvest_training_samples",
    "load_config",
    "load_model",
    "min_cut_label",
    "parse_config",
    "posterior",
    "save_model",
    "score_saliency",
    "train",
]

__version__ = "1.0.0"
__author__ = "Characterness Team"
__license__ = "MIT"

"""
Pipeline configuration.

Every tunable of the detector lives in ``PipelineConfig``; the dataclass
fields are the registry of valid keys. The on-disk format is a flat text
file::

    # characterness configuration
    mser_delta = 10
    mser_gamma = 0.5
    cues = sw,pd,ehog

Unknown keys are rejected, values are parsed with the type of the field's
default, and ``--set key=value`` overrides from the command line are applied
on top of the file.

Negative values of ``canny_high`` and ``hist_epsilon`` mean "derive it":
Otsu's threshold on the gradient magnitude and ``1 / (N + bins)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import ConfigError, InputOutputError

__all__ = [
    "CUE_NAMES",
    "PipelineConfig",
    "config_keys",
    "load_config",
    "parse_config",
    "dump_config",
    "apply_overrides",
]

CUE_NAMES = ("sw", "pd", "ehog")
LABELING_MODES = ("mrf", "none")


@dataclass(frozen=True)
class PipelineConfig:
    # preprocessing (imgcore)
    guided_radius: int = 1
    guided_eps: float = 650.25  # (0.1 * 255) ** 2
    canny_sigma: float = 1.0
    canny_high: float = -1.0
    canny_low_ratio: float = 0.4

    # candidate extraction (regions)
    mser_delta: int = 10
    mser_gamma: float = 0.5
    mser_min_area: int = 30
    mser_max_area: float = 0.25
    mser_max_variation: float = 0.5
    dedup_iou: float = 0.9

    # cues
    pd_bins: int = 16
    swd_bins: int = 16
    hist_epsilon: float = -1.0
    edge_dilation: int = 1

    # characterness model
    likelihood_bins: int = 50
    sw_range: float = 0.5
    pd_range: float = 12.0
    ehog_range: float = 0.5
    likelihood_pseudocount: float = 1.0
    erase_iou: float = 0.5
    cues: tuple[str, ...] = CUE_NAMES

    # labeling
    labeling: str = "mrf"
    beta: float = 0.5
    cd_scale: float = 100.0

    # text lines
    bandwidth: float = 2.2
    scale_norm: float = 100.0
    orientation_norm: float = 10.0
    angle_limit: float = 30.0

    # evaluation
    match_iou: float = 0.5
    fmeasure_beta2: float = 0.3

    # runtime
    workers: int = 4
    debug_dir: str = field(default="")

    def __post_init__(self) -> None:
        checks = [
            (self.guided_radius >= 1, "guided_radius must be >= 1"),
            (self.guided_eps > 0, "guided_eps must be > 0"),
            (self.canny_sigma >= 0, "canny_sigma must be >= 0"),
            (0 < self.canny_low_ratio < 1, "canny_low_ratio must be in (0, 1)"),
            (self.mser_delta >= 1, "mser_delta must be >= 1"),
            (self.mser_gamma >= 0, "mser_gamma must be >= 0"),
            (self.mser_min_area >= 0, "mser_min_area must be >= 0"),
            (0 < self.mser_max_area <= 1, "mser_max_area must be in (0, 1]"),
            (self.mser_max_variation >= 0, "mser_max_variation must be >= 0"),
            (0 <= self.dedup_iou <= 1, "dedup_iou must be in [0, 1]"),
            (self.pd_bins >= 2, "pd_bins must be >= 2"),
            (self.swd_bins >= 2, "swd_bins must be >= 2"),
            (self.edge_dilation >= 0, "edge_dilation must be >= 0"),
            (self.likelihood_bins >= 2, "likelihood_bins must be >= 2"),
            (self.sw_range > 0, "sw_range must be > 0"),
            (self.pd_range > 0, "pd_range must be > 0"),
            (self.ehog_range > 0, "ehog_range must be > 0"),
            (self.likelihood_pseudocount > 0, "likelihood_pseudocount must be > 0"),
            (0 <= self.erase_iou <= 1, "erase_iou must be in [0, 1]"),
            (len(self.cues) > 0, "cues must name at least one cue"),
            (set(self.cues) <= set(CUE_NAMES), f"cues must be a subset of {CUE_NAMES}"),
            (len(set(self.cues)) == len(self.cues), "cues must not repeat"),
            (self.labeling in LABELING_MODES, f"labeling must be one of {LABELING_MODES}"),
            (0 <= self.beta <= 1, "beta must be in [0, 1]"),
            (self.cd_scale > 0, "cd_scale must be > 0"),
            (self.bandwidth > 0, "bandwidth must be > 0"),
            (self.scale_norm > 0, "scale_norm must be > 0"),
            (self.orientation_norm > 0, "orientation_norm must be > 0"),
            (0 < self.angle_limit <= 90, "angle_limit must be in (0, 90]"),
            (0 < self.match_iou <= 1, "match_iou must be in (0, 1]"),
            (self.fmeasure_beta2 > 0, "fmeasure_beta2 must be > 0"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def config_keys() -> list[str]:
    """Registry of every configurable key, in declaration order."""
    return [f.name for f in fields(PipelineConfig)]


_DEFAULTS = PipelineConfig()


def _parse_value(key: str, raw: str) -> Any:
    default = getattr(_DEFAULTS, key)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(part.strip() for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from exc
    return raw


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _build(values: Mapping[str, Any], base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or _DEFAULTS
    try:
        return dataclasses.replace(base, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines. Unknown keys fail with their line number."""
    known = set(config_keys())
    values: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {number}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return _build(values, base)


def load_config(path: str | Path | None = None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def apply_overrides(config: PipelineConfig, overrides: Iterable[str]) -> PipelineConfig:
    """Apply ``key=value`` strings (the CLI's repeatable ``--set``)."""
    known = set(config_keys())
    values: dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return _build(values, config)


def dump_config(config: PipelineConfig) -> str:
    lines = ["# characterness configuration"]
    for key in config_keys():
        lines.append(f"{key} = {_format_value(getattr(config, key))}")
    return "\n".join(lines) + "\n"

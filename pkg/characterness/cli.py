"""
Command line interface.

    characterness [--config FILE] [--set key=value ...] [-v|-q] COMMAND

Commands: train, detect, saliency, eval-saliency, eval-boxes, config-dump.
Exit codes: 0 success, 1 usage, 2 I/O, 3 data error. Logs go to stderr,
machine-readable output (JSON, summaries) to stdout.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, TypeVar

import click
from tqdm import tqdm

from . import __version__
from .charmodel import harvest_training_samples, load_model, save_model, train
from .config import PipelineConfig, apply_overrides, dump_config, load_config
from .dataset import DatasetManifest, index_directory
from .errors import EXIT_OK, EXIT_USAGE, CharacternessError, DatasetError, UsageError
from .evalkit import PRF, SaliencySummary, aggregate, aggregate_boxes, box_prf, score_saliency
from .imageio import read_boxes, read_image, read_map, read_mask, write_json, write_map
from .lines import DetectionResult, detect, write_debug_artifacts
from .log import get_logger, setup_logging, stage_timer

__all__ = ["cli", "main", "format_box_summary", "format_saliency_summary"]

logger = get_logger("cli")

T = TypeVar("T")
R = TypeVar("R")

BOX_SUFFIXES = (".json", ".txt")


def _pool_map(fn: Callable[[T], R], items: Sequence[T], workers: int, desc: str) -> list[R]:
    """Run ``fn`` over ``items`` on a bounded thread pool; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, unit="img", disable=len(items) <= 1, file=sys.stderr)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, unit="img", file=sys.stderr))


def format_box_summary(prf: PRF, count: int) -> str:
    return (
        f"images {count}\n"
        f"precision {prf.precision:.4f}\n"
        f"recall {prf.recall:.4f}\n"
        f"fmeasure {prf.fmeasure:.4f}\n"
    )


def format_saliency_summary(summary: SaliencySummary) -> str:
    return (
        f"images {summary.count}\n"
        f"precision {summary.precision:.4f}\n"
        f"recall {summary.recall:.4f}\n"
        f"fmeasure {summary.fmeasure:.4f}\n"
        f"voc {summary.voc:.4f}\n"
    )


@click.group()
@click.version_option(__version__, prog_name="characterness")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value configuration file.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one configuration key.")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
@click.option("-q", "--quiet", is_flag=True, help="Only warnings and errors.")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], overrides: Sequence[str], verbose: int, quiet: bool) -> None:
    """Scene text detection with a learned characterness model."""
    setup_logging(-1 if quiet else verbose)
    config = apply_overrides(load_config(config_path), overrides)
    ctx.obj = config


@cli.command("config-dump")
@click.pass_obj
def config_dump(config: PipelineConfig) -> None:
    """Print the effective configuration (every key)."""
    click.echo(dump_config(config), nl=False)


@cli.command("train")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", "model_path", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@click.pass_obj
def train_command(config: PipelineConfig, manifest: str, model_path: str) -> None:
    """Learn cue likelihoods from images with ground-truth masks."""
    dataset = DatasetManifest.load(manifest)
    if not dataset.has_masks:
        raise DatasetError(f"manifest {manifest} has no ground-truth masks")

    def load(entry: Any) -> tuple[Any, Any]:
        return read_image(entry.image), (read_mask(entry.mask) if entry.mask else None)

    with stage_timer("load", logger) as stage:
        pairs = _pool_map(load, list(dataset), config.workers, "load")
        stage.count(images=len(pairs))

    samples = harvest_training_samples(
        [img for img, _ in pairs], [mask for _, mask in pairs], config, progress=len(pairs) > 1
    )
    model = train(
        samples,
        bins=config.likelihood_bins,
        ranges={"sw": config.sw_range, "pd": config.pd_range, "ehog": config.ehog_range},
        pseudocount=config.likelihood_pseudocount,
    )
    save_model(model, model_path)
    logger.info("model written to %s", model_path)


def _run_detection(paths: Sequence[str], model_path: str, config: PipelineConfig) -> list[tuple[Path, DetectionResult]]:
    model = load_model(model_path)
    images = [Path(p) for p in paths]

    def run(path: Path) -> tuple[Path, DetectionResult]:
        result = detect(read_image(path), model, config)
        if config.debug_dir:
            write_debug_artifacts(result, config.debug_dir, path.stem)
        return path, result

    return _pool_map(run, images, config.workers, "detect")


@cli.command("detect")
@click.argument("images", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("-m", "--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("-o", "--output-dir", type=click.Path(file_okay=False), default=None,
              help="Write <stem>_boxes.json and <stem>_map.png here.")
@click.pass_obj
def detect_command(config: PipelineConfig, images: Sequence[str], model_path: str, output_dir: Optional[str]) -> None:
    """Detect text lines; prints the boxes as JSON."""
    results = _run_detection(images, model_path, config)
    if output_dir:
        out = Path(output_dir)
        for path, result in results:
            write_json(out / f"{path.stem}_boxes.json", result.boxes_json())
            write_map(out / f"{path.stem}_map.png", result.saliency)

    if len(results) == 1:
        payload: Any = results[0][1].boxes_json()
    else:
        payload = {path.name: result.boxes_json() for path, result in results}
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@cli.command("saliency")
@click.argument("images", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("-m", "--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("-o", "--output-dir", required=True, type=click.Path(file_okay=False), help="Write <stem>.png maps here.")
@click.pass_obj
def saliency_command(config: PipelineConfig, images: Sequence[str], model_path: str, output_dir: str) -> None:
    """Write only the characterness maps, named after the input images."""
    for path, result in _run_detection(images, model_path, config):
        write_map(Path(output_dir) / f"{path.stem}.png", result.saliency)


def _pair_files(pred: dict[str, Path], gt: dict[str, Path], what: str) -> list[tuple[str, Path, Path]]:
    if not pred or not gt:
        raise DatasetError(f"no {what} files to evaluate")
    pairs = [(stem, pred[stem], gt[stem]) for stem in sorted(pred) if stem in gt]
    for stem in sorted(set(pred) ^ set(gt)):
        logger.warning("%s: no counterpart for %s, skipped", what, stem)
    if not pairs:
        raise DatasetError(f"no {what} file has a counterpart, nothing evaluated")
    return pairs


@cli.command("eval-saliency")
@click.argument("maps_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("gt_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output-dir", type=click.Path(file_okay=False), default=".",
              help="Where pr_curve.csv, per_image.csv and summary.txt go.")
@click.pass_obj
def eval_saliency_command(config: PipelineConfig, maps_dir: str, gt_dir: str, output_dir: str) -> None:
    """PR curve, adaptive F-measure and VOC overlap of maps against masks."""
    pairs = _pair_files(index_directory(maps_dir), index_directory(gt_dir), "saliency")

    def score(item: tuple[str, Path, Path]) -> Any:
        stem, map_path, gt_path = item
        return score_saliency(stem, read_map(map_path), read_mask(gt_path), config.fmeasure_beta2)

    results = _pool_map(score, pairs, config.workers, "eval")
    summary = aggregate(results)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pr_curve.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in summary.curve.rows():
            writer.writerow([t, f"{p:.6f}", f"{r:.6f}"])
    with open(out / "per_image.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["image", "precision", "recall", "fmeasure", "voc"])
        for r in results:
            writer.writerow([r.name, f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.fmeasure:.6f}", f"{r.voc:.6f}"])
    text = format_saliency_summary(summary)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


def _box_index(directory: str) -> dict[str, Path]:
    index = {}
    for stem, path in index_directory(directory, BOX_SUFFIXES).items():
        index[stem[: -len("_boxes")] if stem.endswith("_boxes") else stem] = path
    return index


@cli.command("eval-boxes")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("gt_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--iou", type=float, default=None, help="Match threshold (default: match_iou).")
@click.option("-o", "--output-dir", type=click.Path(file_okay=False), default=None,
              help="Also write per_image.csv and summary.txt here.")
@click.pass_obj
def eval_boxes_command(config: PipelineConfig, pred_dir: str, gt_dir: str, iou: Optional[float],
                       output_dir: Optional[str]) -> None:
    """Precision, recall and f-measure of detected boxes against ground truth."""
    threshold = config.match_iou if iou is None else iou
    if not 0 < threshold <= 1:
        raise UsageError(f"--iou must be in (0, 1], got {threshold}")
    pairs = _pair_files(_box_index(pred_dir), _box_index(gt_dir), "box")
    loaded = [(stem, read_boxes(p), read_boxes(g)) for stem, p, g in pairs]
    summary = aggregate_boxes([(p, g) for _, p, g in loaded], threshold)
    text = format_box_summary(summary, len(loaded))

    if output_dir:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "per_image.csv", "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["image", "precision", "recall", "fmeasure"])
            for stem, p, g in loaded:
                prf = box_prf(p, g, threshold)
                writer.writerow([stem, f"{prf.precision:.6f}", f"{prf.recall:.6f}", f"{prf.fmeasure:.6f}"])
        (out / "summary.txt").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns (and exits with) the process exit code."""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="characterness", standalone_mode=False)
    except click.exceptions.Abort:
        logger.error("aborted")
        return _exit(EXIT_USAGE, argv)
    except click.ClickException as exc:
        exc.show()
        return _exit(EXIT_USAGE, argv)
    except CharacternessError as exc:
        logger.error("%s", exc)
        return _exit(exc.exit_code, argv)
    return _exit(EXIT_OK, argv)


def _exit(code: int, argv: Optional[Sequence[str]]) -> int:
    if argv is None:
        sys.exit(code)
    return code

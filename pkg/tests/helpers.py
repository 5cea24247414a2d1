"""Small image builders used across the test modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def square_image(size: int = 64, x0: int = 20, y0: int = 20, side: int = 20, fg: int = 200, bg: int = 40) -> np.ndarray:
    """Float intensity image with one filled square."""
    img = np.full((size, size), float(bg))
    img[y0 : y0 + side, x0 : x0 + side] = fg
    return img


def rgb(gray: np.ndarray) -> np.ndarray:
    g = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    return np.stack([g, g, g], axis=-1)


def brute_distance(mask: np.ndarray) -> np.ndarray:
    """Nearest non-member distance by exhaustive search; the image border counts as outside."""
    padded = np.pad(mask.astype(bool), 1)
    outside = np.argwhere(~padded)
    out = np.zeros(mask.shape, dtype=np.float64)
    for y, x in np.argwhere(mask):
        d2 = ((outside - (y + 1, x + 1)) ** 2).sum(axis=1)
        out[y, x] = np.sqrt(d2.min())
    return out


def two_bin_model(ratios=(1.0, 1.0, 1.0), prior: float = 0.5):
    """
    Model whose cues have two bins; a value in bin 0 has likelihood ratio
    ``ratios[k]`` (char over background), bin 1 the inverse arrangement.
    """
    from characterness.charmodel import CharacternessModel, CueLikelihood

    likelihoods = {}
    for name, ratio in zip(("sw", "pd", "ehog"), ratios):
        p_char = np.array([ratio / (ratio + 1.0), 1.0 / (ratio + 1.0)])
        p_bg = np.array([1.0 / (ratio + 1.0), ratio / (ratio + 1.0)])
        likelihoods[name] = CueLikelihood(name, 0.0, 2.0, p_char, p_bg)
    return CharacternessModel(likelihoods, prior)


@lru_cache(maxsize=None)
def fixture_model(count: int = 30, first_seed: int = 0):
    """Model trained on ``count`` rendered scenes; cached for the whole test session."""
    from characterness.charmodel import harvest_training_samples, train
    from characterness.config import PipelineConfig
    from characterness.synth import render_scene

    config = PipelineConfig()
    scenes = [render_scene(first_seed + k, dark_text=k % 2 == 0) for k in range(count)]
    samples = harvest_training_samples([s.image for s in scenes], [s.mask for s in scenes], config)
    return train(samples, bins=config.likelihood_bins)

"""Synthetic two-class blob images for demos and end-to-end tests.

Class 0 images hold one small bright blob, class 1 one large blob, both
with jittered position, intensity variation, and background noise. Sizes
are chosen so the classes are cleanly separable yet non-trivial for the
random-feature extractor.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .preprocess import Image, write_png
from .seeding import substream

SMALL_RADIUS = (2.5, 4.0)
LARGE_RADIUS = (7.5, 10.0)
CENTER_JITTER = 2.5


def blob_image(rng: np.random.Generator, label: int, side: int = 32) -> Image:
    """One grayscale blob image; blob radius encodes the class.

    Jitter is kept moderate so same-class images stay closer to each other
    than to the other class in any reasonable feature space.
    """
    lo, hi = LARGE_RADIUS if label == 1 else SMALL_RADIUS
    radius = rng.uniform(lo, hi)
    cy = side / 2 + rng.uniform(-CENTER_JITTER, CENTER_JITTER)
    cx = side / 2 + rng.uniform(-CENTER_JITTER, CENTER_JITTER)
    yy, xx = np.mgrid[0:side, 0:side]
    dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
    peak = rng.uniform(180, 220)
    blob = peak * np.exp(-dist2 / (2.0 * radius ** 2))
    noise = rng.normal(0.0, 6.0, size=(side, side))
    background = rng.uniform(25, 45)
    pixels = np.clip(background + blob + noise, 0, 255).astype(np.uint8)
    return Image(pixels[:, :, None])


def make_blob_dataset(root: str | Path, counts: dict[int, int], seed: int,
                      side: int = 32,
                      class_names: dict[int, str] = {0: "normal", 1: "blast"}) -> Path:
    """Write a ``root/<class-name>/<file>.png`` tree and return ``root``."""
    root = Path(root)
    for label, count in sorted(counts.items()):
        class_dir = root / class_names[label]
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            rng = substream(seed, "blob", label, i)
            write_png(class_dir / f"img{i:04d}.png", blob_image(rng, label, side))
    return root


def make_planted_features(n_samples: int, dim: int, informative: int, seed: int,
                          label_noise: float = 0.3):
    """Gaussian features where only the first ``informative`` columns carry
    signal: the label thresholds their sum plus a little noise.

    Returns ``(features, labels, informative_indices)``.
    """
    rng = substream(seed, "planted")
    features = rng.normal(size=(n_samples, dim))
    signal = features[:, :informative].sum(axis=1)
    labels = (signal + label_noise * rng.normal(size=n_samples) > 0).astype(int)
    return features, labels, tuple(range(informative))

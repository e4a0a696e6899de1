"""Overlay rendering: highlighted top segments on an attenuated background."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..imgcore.image import Image
from .engine import Explanation

ATTENUATION = 0.3
POSITIVE_COLOR = np.array([0.1, 0.9, 0.1], dtype=np.float32)  # supports the class
NEGATIVE_COLOR = np.array([0.9, 0.1, 0.1], dtype=np.float32)  # counts against it


def segment_boundaries(labels: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbor carrying a different label."""
    edge = np.zeros(labels.shape, dtype=bool)
    edge[1:, :] |= labels[1:, :] != labels[:-1, :]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    return edge


def render_overlay(image: Image, explanation: Explanation, top_k: int) -> Image:
    """Top-k |weight| segments at original intensity with colored boundaries
    (one hue for positive weights, another for negative); everything else
    attenuated to 30%."""
    if top_k > len(explanation.segment_ids):
        raise ConfigError(
            f"top_k={top_k} exceeds the {len(explanation.segment_ids)} selected segments"
        )
    sp = explanation.superpixels
    chosen = explanation.top_segments(top_k)
    out = image.data * ATTENUATION
    if chosen:
        keep = np.zeros(sp.segment_count, dtype=bool)
        keep[[s for s, _ in chosen]] = True
        keep_px = keep[sp.labels]
        out[keep_px] = image.data[keep_px]
        edges = segment_boundaries(sp.labels)
        for seg, weight in chosen:
            color = POSITIVE_COLOR if weight >= 0 else NEGATIVE_COLOR
            out[(sp.labels == seg) & edges] = color
    return Image(np.clip(out, 0.0, 1.0), validate=False)

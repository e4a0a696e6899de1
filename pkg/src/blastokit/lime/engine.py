"""Local surrogate explanations over superpixel perturbations.

Pipeline: segment the image, draw binary masks (first sample = all ones,
anchoring the surrogate at the explained instance), gray out the zeroed
segments with their mean color, query the model, weight each sample by an
exponential kernel on its distance to the full image, pick at most K
segments by lasso-path entry order, and refit those by weighted least
squares.  The fidelity score is the kernel-weighted R^2 of the surrogate.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..imgcore.image import Image
from ..rng import stream
from .lasso import fit_weighted_least_squares, select_features_klasso
from .slic import SuperpixelMap, segment_superpixels

PREDICT_CHUNK = 32


@dataclass
class LimeConfig:
    segments: int = 50
    compactness: float = 10.0
    slic_iterations: int = 10
    n_samples: int = 1000
    sigma: float = 0.25
    distance: str = "cosine"  # or "hamming"
    k: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ConfigError(f"kernel width must be positive, got {self.sigma}")
        if self.k < 1:
            raise ConfigError(f"K must be >= 1, got {self.k}")
        if self.distance not in ("cosine", "hamming"):
            raise ConfigError(f"unknown distance {self.distance!r}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")


@dataclass
class PerturbationSample:
    mask: np.ndarray  # (d',) uint8
    probability: float  # model output for the explained class
    weight: float  # kernel proximity to the full image


@dataclass
class Explanation:
    explained_class: int
    segment_ids: list[int]
    segment_weights: list[float]
    intercept: float
    fidelity: float
    superpixels: SuperpixelMap
    config: LimeConfig
    rank_deficient: bool = False
    samples: list[PerturbationSample] = field(default_factory=list)

    def top_segments(self, top_k: int) -> list[tuple[int, float]]:
        ranked = sorted(
            zip(self.segment_ids, self.segment_weights),
            key=lambda sw: abs(sw[1]),
            reverse=True,
        )
        return ranked[:top_k]

    def as_json_dict(self) -> dict:
        counts = self.superpixels.pixel_counts
        return {
            "class": int(self.explained_class),
            "segments": [
                {"id": int(s), "weight": float(w), "pixel_count": int(counts[s])}
                for s, w in zip(self.segment_ids, self.segment_weights)
            ],
            "intercept": float(self.intercept),
            "fidelity": float(self.fidelity),
            "rank_deficient": bool(self.rank_deficient),
            "config": {
                "sigma": self.config.sigma,
                "K": self.config.k,
                "n_samples": self.config.n_samples,
                "seed": self.config.seed,
                "segments": self.config.segments,
                "compactness": self.config.compactness,
                "slic_iterations": self.config.slic_iterations,
                "distance": self.config.distance,
            },
        }


def mask_image(image: Image, mask: np.ndarray, superpixels: SuperpixelMap) -> Image:
    """Copy of the image with zeroed segments filled by their mean color."""
    mask = np.asarray(mask)
    if mask.shape != (superpixels.segment_count,):
        raise ShapeError(
            f"mask length {mask.shape} does not match {superpixels.segment_count} segments"
        )
    out = _masked_pixels(image.data, mask, superpixels)
    return Image(out, validate=False)


def _masked_pixels(data: np.ndarray, mask: np.ndarray, sp: SuperpixelMap) -> np.ndarray:
    if mask.all():
        return data.copy()
    fill = sp.mean_colors[sp.labels]  # (H, W, 3)
    keep = np.asarray(mask, dtype=bool)[sp.labels][..., None]
    return np.where(keep, data, fill)


def sample_perturbations(d: int, n_samples: int, seed: int) -> np.ndarray:
    """(n_samples, d) binary masks; row 0 is all ones, the rest Bernoulli(0.5).

    Row i depends only on (seed, i), so generation order is irrelevant.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    out = np.empty((n_samples, d), dtype=np.uint8)
    out[0] = 1
    for i in range(1, n_samples):
        out[i] = stream(seed, "perturb", i).random(d) < 0.5
    return out


def kernel_weight(mask: np.ndarray, sigma: float, distance: str = "cosine") -> float:
    """exp(-D^2 / sigma^2) against the all-ones vector.

    cosine:  D = 1 - sum(z) / (sqrt(d) * sqrt(sum(z)));  all-zero -> D = 1
    hamming: D = (count of zeros) / d
    """
    mask = np.asarray(mask, dtype=np.float64)
    d = mask.size
    ones = mask.sum()
    if distance == "cosine":
        dist = 1.0 if ones == 0 else 1.0 - ones / (np.sqrt(d) * np.sqrt(ones))
    elif distance == "hamming":
        dist = (d - ones) / d
    else:
        raise ConfigError(f"unknown distance {distance!r}")
    return float(np.exp(-(dist**2) / sigma**2))


def fidelity(y: np.ndarray, y_hat: np.ndarray, weights: np.ndarray) -> float:
    """Weighted R^2 = 1 - sum(pi (y-yhat)^2) / sum(pi (y-ybar)^2).

    ybar is the pi-weighted mean.  Zero-variance responses score 1 when the
    residuals vanish and 0 otherwise.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if y.size < 2:
        raise ConfigError("fidelity needs at least 2 samples")
    ybar = (weights * y).sum() / weights.sum()
    ss_res = (weights * (y - y_hat) ** 2).sum()
    ss_tot = (weights * (y - ybar) ** 2).sum()
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return float(1.0 - ss_res / ss_tot)


def explain(predict_fn, image: Image, config: LimeConfig,
            superpixels: SuperpixelMap | None = None) -> Explanation:
    """Explain predict_fn's output on ``image``.

    predict_fn takes a BATCH of images, shape (B, H, W, 3) float32 in
    [0, 1], and returns (B, n_classes) probabilities; queries are issued in
    chunks.  The explained class defaults to the model argmax on the
    unmasked image.  K is clamped to the segment count with a warning.
    """
    config.validate()
    sp = superpixels
    if sp is None:
        sp = segment_superpixels(image, config.segments, config.compactness,
                                 config.slic_iterations)
    d = sp.segment_count
    k = config.k
    if k > d:
        warnings.warn(f"K={k} exceeds {d} segments; clamping to {d}")
        k = d
    if config.n_samples < d + 2:
        raise ConfigError(
            f"n_samples={config.n_samples} must be at least segments+2={d + 2}"
        )
    masks = sample_perturbations(d, config.n_samples, config.seed)
    probs = _query(predict_fn, image, masks, sp)
    explained_class = int(np.argmax(probs[0]))
    y = probs[:, explained_class].astype(np.float64)
    weights = np.array([kernel_weight(m, config.sigma, config.distance) for m in masks])

    x_masks = masks.astype(np.float64)
    if np.ptp(y) == 0.0:
        # constant model: nothing is informative, surrogate is the constant
        selected: list[int] = []
        coef: list[float] = []
        intercept = float(y[0])
        rank_deficient = False
        y_hat = np.full_like(y, intercept)
    else:
        selected = select_features_klasso(x_masks, y, weights, k)
        if selected:
            fit = fit_weighted_least_squares(x_masks[:, selected], y, weights)
            coef = [float(c) for c in fit.weights]
            intercept = fit.intercept
            rank_deficient = fit.rank_deficient
            y_hat = fit.predict(x_masks[:, selected])
        else:
            selected, coef = [], []
            intercept = float((weights * y).sum() / weights.sum())
            rank_deficient = False
            y_hat = np.full_like(y, intercept)
    score = fidelity(y, y_hat, weights)
    samples = [
        PerturbationSample(m, float(p), float(w))
        for m, p, w in zip(masks, y, weights)
    ]
    return Explanation(
        explained_class=explained_class,
        segment_ids=selected,
        segment_weights=coef,
        intercept=intercept,
        fidelity=score,
        superpixels=sp,
        config=config,
        rank_deficient=rank_deficient,
        samples=samples,
    )


def _query(predict_fn, image: Image, masks: np.ndarray, sp: SuperpixelMap) -> np.ndarray:
    rows = []
    for start in range(0, len(masks), PREDICT_CHUNK):
        chunk = masks[start : start + PREDICT_CHUNK]
        batch = np.stack([_masked_pixels(image.data, m, sp) for m in chunk])
        try:
            out = np.asarray(predict_fn(batch), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(
                f"predict_fn failed on samples {start}..{start + len(chunk) - 1}: {exc}"
            ) from exc
        if out.shape[0] != len(chunk) or out.ndim != 2:
            raise ShapeError(
                f"predict_fn returned shape {out.shape} for a batch of {len(chunk)}"
            )
        rows.append(out)
    return np.concatenate(rows, axis=0)


def explanation_iou(explanation: Explanation, annotation_mask: np.ndarray) -> float:
    """IoU between the union of selected superpixels and a binary annotation.

    Empty-vs-empty is defined as 1.
    """
    annotation = np.asarray(annotation_mask) != 0
    sp = explanation.superpixels
    if annotation.shape != sp.shape:
        raise ShapeError(
            f"annotation {annotation.shape} does not match image {sp.shape}"
        )
    chosen = np.zeros(sp.segment_count, dtype=bool)
    chosen[list(explanation.segment_ids)] = True
    raster = chosen[sp.labels]
    inter = int(np.logical_and(raster, annotation).sum())
    union = int(np.logical_or(raster, annotation).sum())
    if union == 0:
        return 1.0
    return inter / union

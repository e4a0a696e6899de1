"""Model-agnostic local explanations: segmentation through overlay rendering."""
from .engine import (
    Explanation,
    LimeConfig,
    PerturbationSample,
    explain,
    explanation_iou,
    fidelity,
    kernel_weight,
    mask_image,
    sample_perturbations,
)
from .lasso import WlsFit, fit_weighted_least_squares, select_features_klasso
from .overlay import render_overlay, segment_boundaries
from .slic import SuperpixelMap, rgb_to_lab, segment_superpixels

__all__ = [
    "Explanation",
    "LimeConfig",
    "PerturbationSample",
    "SuperpixelMap",
    "WlsFit",
    "explain",
    "explanation_iou",
    "fidelity",
    "fit_weighted_least_squares",
    "kernel_weight",
    "mask_image",
    "render_overlay",
    "rgb_to_lab",
    "sample_perturbations",
    "segment_boundaries",
    "segment_superpixels",
    "select_features_klasso",
]

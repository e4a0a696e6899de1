"""Geometric augmentation protocol.

Each variant of a source image is drawn independently from the stream
(seed, source index, variant index), so results do not depend on evaluation
order: rotation is applied with probability 0.5 with an angle uniform in
[-10, 10] degrees, then a horizontal reflection is always applied.  Labels
(and split markers, when present) are inherited from the source.
"""
from __future__ import annotations

from ..errors import DataError
from ..rng import stream
from .dataset import Dataset, LabeledSample
from .image import reflect, rotate

ROTATE_PROBABILITY = 0.5
ANGLE_RANGE = 10.0


def draw_transform(seed: int, source_index: int, variant_index: int):
    """(apply_rotation, angle) for one variant; angle is always consumed so
    the stream layout stays stable."""
    rng = stream(seed, "aug", source_index, variant_index)
    apply_rot = rng.random() < ROTATE_PROBABILITY
    angle = float(rng.uniform(-ANGLE_RANGE, ANGLE_RANGE))
    return apply_rot, angle


def transform_tag(apply_rot: bool, angle: float) -> str:
    return f"rot{angle:+08.4f}+mirror" if apply_rot else "mirror"


def augment_dataset(originals: Dataset, variants_per_image: int = 14, seed: int = 0) -> Dataset:
    """All originals plus ``variants_per_image`` derived samples per original.

    Output order is source-major: original, its variants, next original...
    Deterministic given the seed; byte-identical across repeat calls.
    """
    if variants_per_image < 0:
        raise DataError(f"variants_per_image must be >= 0, got {variants_per_image}")
    if any(s.transform_tag != "original" for s in originals.samples):
        raise DataError("augment_dataset expects only original samples")
    samples: list[LabeledSample] = []
    splits: list[str] | None = [] if originals.split_assignment is not None else None
    for si, sample in enumerate(originals.samples):
        src_split = originals.split_assignment[si] if splits is not None else None
        samples.append(sample)
        if splits is not None:
            splits.append(src_split)
        for vi in range(variants_per_image):
            apply_rot, angle = draw_transform(seed, si, vi)
            img = rotate(sample.image, angle) if apply_rot else sample.image
            img = reflect(img)
            samples.append(
                LabeledSample(img, sample.label, sample.source_id,
                              transform_tag(apply_rot, angle))
            )
            if splits is not None:
                splits.append(src_split)
    return Dataset(samples, originals.class_names, splits)

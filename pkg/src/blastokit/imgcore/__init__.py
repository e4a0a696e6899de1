"""Image decoding, geometric augmentation, dataset assembly and splits."""
from .augment import augment_dataset, draw_transform, transform_tag
from .dataset import (
    CLASS_NAMES,
    Dataset,
    LabeledSample,
    ManifestRow,
    dataset_hash,
    load_dataset,
    load_split_arrays,
    read_manifest,
    scan_class_dirs,
    split_stratified,
    write_tree,
)
from .image import Image, load_image, reflect, resize, rotate, save_image

__all__ = [
    "CLASS_NAMES",
    "Dataset",
    "Image",
    "LabeledSample",
    "ManifestRow",
    "augment_dataset",
    "dataset_hash",
    "draw_transform",
    "load_dataset",
    "load_image",
    "load_split_arrays",
    "read_manifest",
    "reflect",
    "resize",
    "rotate",
    "save_image",
    "scan_class_dirs",
    "split_stratified",
    "transform_tag",
    "write_tree",
]

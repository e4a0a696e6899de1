"""Dataset assembly, stratified splitting, manifests and the on-disk layout.

Source layout:   <root>/good/*.png|jpg  and  <root>/poor/*.png|jpg
Augmented tree:  same two class directories plus manifest.csv with one row
per sample: path, label, source_id, transform_tag, split.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..rng import stream
from .image import Image, load_image, save_image

CLASS_NAMES = ("good", "poor")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class LabeledSample:
    image: Image
    label: int  # 0 = good, 1 = poor
    source_id: str
    transform_tag: str = "original"

    def __post_init__(self):
        if not self.source_id:
            raise DataError("source_id must be nonempty")


@dataclass
class Dataset:
    samples: list[LabeledSample] = field(default_factory=list)
    class_names: tuple[str, str] = CLASS_NAMES
    split_assignment: list[str] | None = None  # "train" / "test" per sample

    def __post_init__(self):
        if len(self.class_names) != 2:
            raise DataError("class_names must have exactly 2 entries")
        if self.split_assignment is not None and len(self.split_assignment) != len(self.samples):
            raise DataError("split_assignment must cover every sample")

    def class_counts(self) -> tuple[int, int]:
        labels = [s.label for s in self.samples]
        return labels.count(0), labels.count(1)

    def subset(self, split: str) -> "Dataset":
        if self.split_assignment is None:
            raise DataError("dataset has no split assignment")
        samples = [s for s, sp in zip(self.samples, self.split_assignment) if sp == split]
        return Dataset(samples, self.class_names)


def scan_class_dirs(root) -> list[tuple[Path, int]]:
    """Sorted (path, label) pairs from <root>/good and <root>/poor."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist")
    found = []
    for label, cls in enumerate(CLASS_NAMES):
        cdir = root / cls
        if not cdir.is_dir():
            raise DataError(f"missing class directory {cdir}")
        files = sorted(
            p for p in cdir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise DataError(f"class directory {cdir} contains no images")
        found.extend((p, label) for p in files)
    return found


def load_dataset(root, size: int) -> Dataset:
    """Load the class-directory tree, resizing everything to size x size."""
    samples = [
        LabeledSample(load_image(path, (size, size)), label, source_id=path.stem)
        for path, label in scan_class_dirs(root)
    ]
    return Dataset(samples)


def split_stratified(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> Dataset:
    """Per class, floor(n * fraction) samples go to train; deterministic in seed."""
    if not 0.0 <= train_fraction <= 1.0:
        raise DataError(f"train_fraction must be in [0, 1], got {train_fraction}")
    labels = np.array([s.label for s in dataset.samples])
    assignment = np.empty(len(labels), dtype=object)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) == 0:
            raise DataError(f"class {dataset.class_names[cls]!r} is empty")
        order = idx[stream(seed, "split", cls).permutation(len(idx))]
        n_train = int(np.floor(len(idx) * train_fraction))
        assignment[order[:n_train]] = "train"
        assignment[order[n_train:]] = "test"
    return Dataset(list(dataset.samples), dataset.class_names, list(assignment))


def dataset_hash(dataset: Dataset) -> str:
    """Content hash over pixels and metadata, order-sensitive."""
    h = hashlib.sha256()
    splits = dataset.split_assignment or ["-"] * len(dataset.samples)
    for sample, split in zip(dataset.samples, splits):
        h.update(sample.image.data.tobytes())
        h.update(f"|{sample.label}|{sample.source_id}|{sample.transform_tag}|{split}\n".encode())
    return h.hexdigest()


def sample_filename(sample: LabeledSample, variant_index: int | None) -> str:
    if variant_index is None:
        return f"{sample.source_id}.png"
    return f"{sample.source_id}__v{variant_index:02d}.png"


def write_tree(dataset: Dataset, out_root) -> Path:
    """Write images into class directories plus manifest.csv; returns manifest path."""
    out_root = Path(out_root)
    variant_counter: dict[str, int] = {}
    rows = []
    for i, sample in enumerate(dataset.samples):
        cls = dataset.class_names[sample.label]
        if sample.transform_tag == "original":
            name = sample_filename(sample, None)
        else:
            v = variant_counter.get(sample.source_id, 0)
            variant_counter[sample.source_id] = v + 1
            name = sample_filename(sample, v)
        rel = f"{cls}/{name}"
        (out_root / cls).mkdir(parents=True, exist_ok=True)
        save_image(sample.image, out_root / rel)
        split = dataset.split_assignment[i] if dataset.split_assignment else ""
        rows.append((rel, cls, sample.source_id, sample.transform_tag, split))
    manifest = out_root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("path", "label", "source_id", "transform_tag", "split"))
        writer.writerows(rows)
    return manifest


@dataclass
class ManifestRow:
    path: str
    label: int
    source_id: str
    transform_tag: str
    split: str


def read_manifest(root) -> list[ManifestRow]:
    root = Path(root)
    manifest = root / "manifest.csv"
    if not manifest.is_file():
        raise DataError(f"no manifest.csv under {root}")
    rows = []
    with open(manifest, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            try:
                label = CLASS_NAMES.index(rec["label"])
            except ValueError:
                raise DataError(f"manifest row has unknown label {rec['label']!r}")
            rows.append(ManifestRow(rec["path"], label, rec["source_id"],
                                    rec["transform_tag"], rec["split"]))
    if not rows:
        raise DataError(f"manifest {manifest} is empty")
    return rows


def load_split_arrays(root, rows: list[ManifestRow], split: str, size: int):
    """(images (N,H,W,3) float32, labels (N,)) for one manifest split."""
    chosen = [r for r in rows if r.split == split]
    if not chosen:
        raise DataError(f"manifest has no {split!r} samples")
    images = np.empty((len(chosen), size, size, 3), dtype=np.float32)
    labels = np.empty(len(chosen), dtype=np.int64)
    for i, row in enumerate(chosen):
        images[i] = load_image(Path(root) / row.path, (size, size)).data
        labels[i] = row.label
    return images, labels

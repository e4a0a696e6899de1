import numpy as np
import pytest

from blastokit.imgcore import Image, save_image
from blastokit.util import tune_allocator

tune_allocator()


def blob_image(rng: np.random.Generator, size: int = 224, label: int = 0) -> Image:
    """Synthetic blastocyst-ish blob; the two labels differ in color balance."""
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.uniform(size * 0.35, size * 0.65, 2)
    r = rng.uniform(size * 0.18, size * 0.3)
    blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))).astype(np.float32)
    channels = (0.9, 0.5, 0.3) if label == 0 else (0.4, 0.5, 0.8)
    img = np.stack([blob * c for c in channels], axis=2)
    img += rng.normal(0, 0.03, img.shape).astype(np.float32)
    return Image(np.clip(img, 0.0, 1.0), validate=False)


def make_class_tree(root, per_class: int, size: int = 224, seed: int = 0):
    """Write a good/poor PNG tree; returns the root path."""
    rng = np.random.default_rng(seed)
    for label, cls in enumerate(("good", "poor")):
        (root / cls).mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            save_image(blob_image(rng, size, label), root / cls / f"img{i:02d}.png")
    return root


@pytest.fixture(scope="session")
def fixture_tree(tmp_path_factory):
    """Small shared source tree: 8 images per class at 224x224."""
    root = tmp_path_factory.mktemp("srcdata")
    return make_class_tree(root, per_class=8, seed=11)

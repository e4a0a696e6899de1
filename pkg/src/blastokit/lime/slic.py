"""SLIC superpixels: k-means in (L, a, b, x, y) with connectivity cleanup.

Centers start on a regular grid with spacing S = sqrt(H*W / target); each
iteration assigns pixels to the nearest center within that center's 2S
window under d^2 = d_lab^2 + (compactness / S)^2 * d_xy^2, then recomputes
centers as member means.  Afterwards every label is reduced to a single
4-connected region: each non-largest component is merged into its largest
resolved neighbor.  The whole procedure is deterministic (no RNG).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..backends import kernels
from ..errors import ConfigError
from ..imgcore.image import Image

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# sRGB (D65) -> XYZ
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """CIE Lab from sRGB in [0, 1]; L in [0, 100], a/b roughly [-110, 110]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


@dataclass
class SuperpixelMap:
    labels: np.ndarray  # (H, W) int64, values 0 .. segment_count-1
    segment_count: int
    pixel_counts: np.ndarray  # (segment_count,) int64
    mean_colors: np.ndarray  # (segment_count, 3) float32, RGB in [0, 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def _grid_centers(h: int, w: int, target: int, lab: np.ndarray) -> np.ndarray:
    spacing = np.sqrt(h * w / target)
    rows = np.arange(spacing / 2.0, h, spacing)
    cols = np.arange(spacing / 2.0, w, spacing)
    centers = np.empty((len(rows) * len(cols), 5), dtype=np.float64)
    i = 0
    for r in rows:
        for c in cols:
            ri, ci = int(r), int(c)
            centers[i, :3] = lab[ri, ci]
            centers[i, 3] = r
            centers[i, 4] = c
            i += 1
    return centers


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Merge every non-largest component of each label into a neighbor.

    Components are resolved outward from each label's largest ("anchor")
    component; an orphan joins the largest already-resolved 4-neighbor.
    """
    h, w = labels.shape
    comp = np.zeros((h, w), dtype=np.int64)
    comp_label = [0]  # component id -> segment label (id 0 unused)
    next_id = 1
    for seg in np.unique(labels):
        seg_comp, n = ndimage.label(labels == seg, structure=FOUR_CONNECTED)
        comp[seg_comp > 0] = seg_comp[seg_comp > 0] + (next_id - 1)
        comp_label.extend([int(seg)] * n)
        next_id += n
    n_comp = next_id - 1
    sizes = np.bincount(comp.ravel(), minlength=n_comp + 1)

    # adjacency between components (4-connectivity)
    adjacency: dict[int, set[int]] = {i: set() for i in range(1, n_comp + 1)}
    for shifted, original in (
        (comp[1:, :], comp[:-1, :]),
        (comp[:, 1:], comp[:, :-1]),
    ):
        edge = shifted != original
        for a, b in zip(shifted[edge].ravel(), original[edge].ravel()):
            adjacency[int(a)].add(int(b))
            adjacency[int(b)].add(int(a))

    anchors = {}
    for cid in range(1, n_comp + 1):
        seg = comp_label[cid]
        if seg not in anchors or sizes[cid] > sizes[anchors[seg]]:
            anchors[seg] = cid
    resolved = {cid: comp_label[cid] for cid in anchors.values()}
    pending = [cid for cid in range(1, n_comp + 1) if cid not in resolved]
    while pending:
        progressed = []
        for cid in pending:
            candidates = [n for n in adjacency[cid] if n in resolved]
            if candidates:
                best = max(candidates, key=lambda n: (sizes[n], -n))
                resolved[cid] = resolved[best]
                progressed.append(cid)
        if not progressed:  # isolated island: adopt any neighbor's label
            cid = pending[0]
            neighbor = max(adjacency[cid], key=lambda n: (sizes[n], -n))
            resolved[cid] = comp_label[neighbor]
            progressed.append(cid)
        pending = [cid for cid in pending if cid not in set(progressed)]

    remap = np.zeros(n_comp + 1, dtype=np.int64)
    for cid, seg in resolved.items():
        remap[cid] = seg
    merged = remap[comp]
    # compress to a contiguous 0..d'-1 range
    uniq, compact = np.unique(merged, return_inverse=True)
    return compact.reshape(h, w).astype(np.int64)


def segment_superpixels(image: Image, target_segments: int = 50,
                        compactness: float = 10.0, iterations: int = 10) -> SuperpixelMap:
    h, w = image.height, image.width
    if h < 2 or w < 2:
        raise ConfigError("segmentation needs an image of at least 2x2 pixels")
    if target_segments < 1 or target_segments > h * w:
        raise ConfigError(
            f"target segment count {target_segments} outside [1, {h * w}]"
        )
    data = np.ascontiguousarray(image.data, dtype=np.float64)
    lab = np.ascontiguousarray(rgb_to_lab(data))
    if target_segments == 1:
        labels = np.zeros((h, w), dtype=np.int64)
    else:
        spacing = float(np.sqrt(h * w / target_segments))
        centers = _grid_centers(h, w, target_segments, lab)
        labels = np.zeros((h, w), dtype=np.int64)
        for _ in range(max(1, iterations)):
            labels = kernels.slic_assign(lab, centers, spacing, compactness)
            sums, counts = kernels.slic_accumulate(lab, labels, len(centers))
            occupied = counts > 0
            centers[occupied] = sums[occupied] / counts[occupied, None]
        labels = _enforce_connectivity(labels)
    count = int(labels.max()) + 1
    flat = labels.ravel()
    pixel_counts = np.bincount(flat, minlength=count).astype(np.int64)
    means = np.empty((count, 3), dtype=np.float32)
    pixels = image.data.reshape(-1, 3)
    for ch in range(3):
        means[:, ch] = np.bincount(flat, weights=pixels[:, ch], minlength=count) / pixel_counts
    return SuperpixelMap(labels, count, pixel_counts, means)

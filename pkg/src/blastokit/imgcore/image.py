"""Image type, decoding, bilinear resampling and geometric transforms.

An Image wraps an (H, W, 3) float32 array with values in [0, 1].  All
resampling (resize and rotation) is inverse-mapped bilinear interpolation
with half-pixel-center alignment:

    src = (dst + 0.5) * (src_size / dst_size) - 0.5

Rotation about the image center uses, for output pixel (r, c) and angle
theta (degrees, positive turns the content clockwise on screen):

    sx = cx + cos(t) * (c - cx) + sin(t) * (r - cy)
    sy = cy - sin(t) * (c - cx) + cos(t) * (r - cy)

Samples whose source coordinate leaves [0, W-1] x [0, H-1] take the
per-channel image mean, which avoids dark-corner artifacts leaking the
augmentation into learned features.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from ..backends import kernels
from ..errors import ImageFormatError, ShapeError


class Image:
    """Immutable raster: (H, W, 3) float32, every value finite and in [0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray, validate: bool = True):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ShapeError(f"image data must be (H, W, 3), got {data.shape}")
        if validate:
            if not np.all(np.isfinite(data)):
                raise ShapeError("image contains non-finite values")
            if data.min() < 0.0 or data.max() > 1.0:
                raise ShapeError("image values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError("Image is immutable")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def load_image(path, target_size: tuple[int, int] | None = None) -> Image:
    """Decode a PNG/JPEG file, normalize to [0, 1] and optionally resize.

    target_size is (width, height).  Grayscale sources are replicated to
    three channels; 8-bit values are divided by 255.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as pil:
            if pil.format not in ("PNG", "JPEG"):
                raise ImageFormatError(f"{path}: unsupported format {pil.format!r}")
            arr = np.asarray(pil.convert("RGB"), dtype=np.float32) / 255.0
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a decodable image") from exc
    img = Image(arr, validate=False)
    if target_size is not None and (img.width, img.height) != tuple(target_size):
        img = resize(img, target_size)
    return img


def save_image(image: Image, path) -> None:
    """Write as 8-bit PNG (values quantized by round(v * 255))."""
    arr = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(Path(path), format="PNG")


def resize(image: Image, target_size: tuple[int, int]) -> Image:
    """Bilinear resize to (width, height) with half-pixel-center alignment."""
    tw, th = int(target_size[0]), int(target_size[1])
    if tw < 1 or th < 1:
        raise ShapeError(f"target size must be positive, got {target_size}")
    sy = image.height / th
    sx = image.width / tw
    ys = ((np.arange(th, dtype=np.float64) + 0.5) * sy - 0.5)[:, None] + np.zeros((1, tw))
    xs = ((np.arange(tw, dtype=np.float64) + 0.5) * sx - 0.5)[None, :] + np.zeros((th, 1))
    out = kernels.sample_bilinear(np.ascontiguousarray(image.data), ys, xs, fill=None)
    return Image(np.clip(out, 0.0, 1.0), validate=False)


def rotate(image: Image, angle: float) -> Image:
    """Rotate about the center by ``angle`` degrees (see module docstring).

    Output dimensions match the input; out-of-bounds samples are filled
    with the per-channel mean.  angle 0 returns the input unchanged.
    """
    if not np.isfinite(angle):
        raise ShapeError(f"rotation angle must be finite, got {angle}")
    if angle == 0.0:
        return image
    h, w = image.height, image.width
    t = np.deg2rad(angle)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = cc - cx
    dy = rr - cy
    xs = cx + np.cos(t) * dx + np.sin(t) * dy
    ys = cy - np.sin(t) * dx + np.cos(t) * dy
    fill = image.data.reshape(-1, 3).mean(axis=0)
    out = kernels.sample_bilinear(
        np.ascontiguousarray(image.data), np.ascontiguousarray(ys),
        np.ascontiguousarray(xs), fill=fill,
    )
    return Image(np.clip(out, 0.0, 1.0), validate=False)


def reflect(image: Image) -> Image:
    """Horizontal mirror: column c maps to width-1-c."""
    return Image(np.ascontiguousarray(image.data[:, ::-1, :]), validate=False)

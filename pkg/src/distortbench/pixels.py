"""Preprocessing primitives: greyscale conversion, cropping, resampling, contrast."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .buffers import SAMPLE_DTYPE, ImageBuffer, clip_unit

# Rec. 709 luma weights; recorded in metadata of every conversion.
LUMA_WEIGHTS = (0.2125, 0.7154, 0.0721)

# Fallback mean grey when no corpus statistics are supplied. Filter padding,
# high-pass mean restoration and mask normalization all default to this;
# corpus-derived statistics override it wherever available.
DEFAULT_MEAN_GREY = 0.4423


def to_greyscale(img: ImageBuffer) -> ImageBuffer:
    """Luma-weighted greyscale conversion of a 3-channel image."""
    if img.channels != 3:
        raise ValueError("to_greyscale expects a 3-channel image")
    w = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    grey = img.data.astype(np.float64) @ w
    out, _ = clip_unit(grey)
    return ImageBuffer(out.astype(SAMPLE_DTYPE), {"luma_weights": LUMA_WEIGHTS})


def center_crop_square(img: ImageBuffer) -> ImageBuffer:
    """Crop to the largest centred square.

    An odd surplus loses its extra row/column on the bottom/right.
    """
    side = min(img.height, img.width)
    top = (img.height - side) // 2
    left = (img.width - side) // 2
    return ImageBuffer(img.data[top : top + side, left : left + side].copy())


def downsample(img: ImageBuffer, side: int) -> ImageBuffer:
    """Antialiased resample of a square image down to side x side.

    Integer ratios use exact area averaging; anything else uses a 3-lobe
    windowed sinc (Lanczos). The filter actually used is recorded in
    metadata.
    """
    if not img.is_square:
        raise ValueError("downsample expects a square image")
    if side < 1:
        raise ValueError("target side must be >= 1")
    if side > img.height:
        raise ValueError(f"upsampling {img.height} -> {side} is not supported")
    if side == img.height:
        out = img.copy()
        out.meta["resample_filter"] = "identity"
        return out

    if img.height % side == 0:
        k = img.height // side
        if img.channels == 1:
            blocks = img.data.astype(np.float64).reshape(side, k, side, k)
            arr = blocks.mean(axis=(1, 3))
        else:
            blocks = img.data.astype(np.float64).reshape(side, k, side, k, 3)
            arr = blocks.mean(axis=(1, 3))
        filter_name = "area"
    else:
        arr = _lanczos_resize(img.data, side)
        filter_name = "lanczos3"

    out, _ = clip_unit(arr)
    return ImageBuffer(out.astype(SAMPLE_DTYPE), {"resample_filter": filter_name})


def _lanczos_resize(data: np.ndarray, side: int) -> np.ndarray:
    if data.ndim == 2:
        im = Image.fromarray(np.ascontiguousarray(data, dtype=np.float32), mode="F")
        return np.asarray(im.resize((side, side), Image.LANCZOS), dtype=np.float64)
    channels = [
        np.asarray(
            Image.fromarray(np.ascontiguousarray(data[:, :, c], dtype=np.float32), mode="F").resize(
                (side, side), Image.LANCZOS
            ),
            dtype=np.float64,
        )
        for c in range(3)
    ]
    return np.stack(channels, axis=2)


def scale_contrast(img: ImageBuffer, c: float) -> ImageBuffer:
    """Affine contrast reduction toward mid-grey: v -> c*v + (1-c)/2.

    c is a fraction in (0, 1]; the output range is [0.5-c/2, 0.5+c/2], so no
    clipping is ever needed.
    """
    if not 0.0 < c <= 1.0:
        raise ValueError(f"contrast level must be in (0, 1], got {c}")
    arr = img.data.astype(np.float64) * c + (1.0 - c) / 2.0
    return ImageBuffer(arr.astype(SAMPLE_DTYPE), {"contrast": c})


def preprocess(img: ImageBuffer, side: int) -> ImageBuffer:
    """Centre-crop to a square then downsample to the stimulus side."""
    return downsample(center_crop_square(img), side)

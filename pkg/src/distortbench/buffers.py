"""Planar floating-point image buffers with samples in the [0, 1] range."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

SAMPLE_DTYPE = np.float32  # stored samples; accumulations run in float64


@dataclass
class ImageBuffer:
    """A 1- or 3-channel image with float samples in [0, 1].

    ``data`` has shape (height, width) for greyscale and (height, width, 3)
    for colour. ``meta`` carries provenance written by whatever operation
    produced the buffer (seeds, algorithm identifiers, clip fractions); it is
    never consumed by the numeric code itself.
    """

    data: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise ValueError(f"image shape {arr.shape} is not (H, W) or (H, W, 3)")
        if arr.size == 0:
            raise ValueError("empty image")
        self.data = np.ascontiguousarray(arr, dtype=SAMPLE_DTYPE)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def is_square(self) -> bool:
        return self.height == self.width

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy(), dict(self.meta))

    def assert_unit_range(self, tol: float = 0.0) -> None:
        lo = float(self.data.min())
        hi = float(self.data.max())
        if lo < -tol or hi > 1.0 + tol:
            raise ValueError(f"samples outside [0, 1]: min={lo}, max={hi}")

    @classmethod
    def constant(cls, value: float, side: int, channels: int = 1) -> "ImageBuffer":
        shape = (side, side) if channels == 1 else (side, side, 3)
        return cls(np.full(shape, value, dtype=SAMPLE_DTYPE))


def clip_unit(values: np.ndarray) -> tuple[np.ndarray, dict[str, float]]:
    """Clip an array to [0, 1] and report what was clipped.

    Returns the clipped array (same dtype as the input) along with
    ``clip_fraction`` (fraction of samples that were out of range) and
    ``mean_clip_amount`` (mean absolute amount clipped away, over the
    clipped samples; 0.0 if nothing clipped).
    """
    arr = np.asarray(values)
    out = np.clip(arr, 0.0, 1.0)
    overshoot = np.abs(arr.astype(np.float64) - out)
    clipped = overshoot > 0
    n_clipped = int(np.count_nonzero(clipped))
    stats = {
        "clip_fraction": n_clipped / arr.size,
        "mean_clip_amount": float(overshoot[clipped].mean()) if n_clipped else 0.0,
    }
    return out, stats

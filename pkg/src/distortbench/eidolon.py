"""Multi-scale disarray ("eidolon-variant").

A documented stand-in for the original eidolon toolbox, keeping the same
parameter names and semantics: the image is split into octave band-pass
layers, each layer is warped by a smooth random displacement field, and the
layers are summed back. ``reach`` is the RMS displacement magnitude in
pixels, ``grain`` the spatial scale of the fields, and ``coherence`` blends
per-scale independent fields with one field shared across scales (1.0 = all
scales move together, 0.0 = fully independent). Outputs are labelled with
VARIANT_ID; they are not bit-compatible with the original toolbox.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .buffers import SAMPLE_DTYPE, ImageBuffer, clip_unit
from .rng import StreamSeed, normal_plane

VARIANT_ID = "eidolon-variant/octave-warp-v1"


def band_sigmas(side: int) -> list[float]:
    """Octave blur scales 1, 2, 4, ... up to a quarter of the image side."""
    sigmas = []
    s = 1.0
    while s <= side / 4:
        sigmas.append(s)
        s *= 2.0
    return sigmas


def band_decompose(arr: np.ndarray, sigmas: list[float]) -> list[np.ndarray]:
    """Difference-of-Gaussian bands plus a final low-pass residual; sums to arr."""
    levels = [np.asarray(arr, dtype=np.float64)]
    for s in sigmas:
        levels.append(ndimage.gaussian_filter(levels[0], s, mode="reflect"))
    bands = [levels[i] - levels[i + 1] for i in range(len(sigmas))]
    bands.append(levels[-1])  # residual
    return bands


def _smooth_unit_field(key: int, height: int, width: int, pair_base: int, grain: float) -> np.ndarray:
    """(2, H, W) smooth random field with unit RMS vector magnitude."""
    dy = ndimage.gaussian_filter(normal_plane(key, height, width, pair_base), grain, mode="reflect")
    dx = ndimage.gaussian_filter(normal_plane(key, height, width, pair_base + 1), grain, mode="reflect")
    field = np.stack([dy, dx])
    rms = np.sqrt(np.mean(field[0] ** 2 + field[1] ** 2))
    return field / rms


def displacement_fields(
    key: int, height: int, width: int, n_scales: int, reach: float, coherence: float, grain: float
) -> list[np.ndarray]:
    """Per-scale displacement fields, each with RMS vector magnitude = reach.

    Exposed for verification: at coherence 1.0 all returned fields are
    identical arrays, at 0.0 they are independent.
    """
    shared = _smooth_unit_field(key, height, width, 0, grain)
    fields = []
    for s in range(n_scales):
        independent = _smooth_unit_field(key, height, width, 2 * (s + 1), grain)
        blend = coherence * shared + (1.0 - coherence) * independent
        rms = np.sqrt(np.mean(blend[0] ** 2 + blend[1] ** 2))
        fields.append(blend * (reach / rms))
    return fields


def eidolon(img: ImageBuffer, reach: float, coherence: float, grain: float, seed: StreamSeed) -> ImageBuffer:
    """Warp each band-pass layer of the image by its displacement field."""
    if img.channels != 1:
        raise ValueError("eidolon is defined on greyscale images only")
    if reach <= 0:
        raise ValueError("reach must be positive")
    if grain <= 0:
        raise ValueError("grain must be positive")
    if not 0.0 <= coherence <= 1.0:
        raise ValueError("coherence must be in [0, 1]")

    arr = img.data.astype(np.float64)
    sigmas = band_sigmas(img.height)
    bands = band_decompose(arr, sigmas)
    fields = displacement_fields(seed.key, img.height, img.width, len(sigmas), reach, coherence, grain)

    rows, cols = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    result = np.zeros_like(arr)
    for band, field in zip(bands[:-1], fields):
        coords = np.stack([rows + field[0], cols + field[1]])
        result += ndimage.map_coordinates(band, coords, order=1, mode="reflect")
    result += bands[-1]  # residual carries the image mean; left in place

    out, clip_stats = clip_unit(result)
    meta = {
        "reach": reach,
        "coherence": coherence,
        "grain": grain,
        "variant": VARIANT_ID,
        "n_scales": len(sigmas),
        **clip_stats,
        **seed.provenance(),
    }
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)

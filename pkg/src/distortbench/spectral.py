"""Fourier-domain manipulations: phase noise, power equalisation, 1/f masks.

All operations act on square greyscale images and preserve the realness of
the inverse transform by treating conjugate frequency pairs together: one
random draw per pair, applied with opposite signs, and the self-conjugate
bins (DC and the Nyquist rows/columns) left untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .buffers import SAMPLE_DTYPE, ImageBuffer, clip_unit
from .pixels import DEFAULT_MEAN_GREY
from .rng import StreamSeed, uniform_plane

IMAG_RESIDUE_TOL = 1e-6  # inverse transforms must be real to this tolerance

DEFAULT_MASK_RMS_CONTRAST = 0.2  # unenhanced mask contrast; configurable, not published
MASK_ENHANCE_FACTOR = 4.0  # "multiply each pixel value by four", applied pre-clip


@dataclass
class Spectrum:
    """Amplitudes and phases of a real square image's 2-D DFT (unshifted layout)."""

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)
        if self.amplitudes.shape != self.phases.shape or self.amplitudes.ndim != 2:
            raise ValueError("amplitudes and phases must be matching 2-D arrays")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be nonnegative")

    @property
    def height(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def width(self) -> int:
        return self.amplitudes.shape[1]

    def to_complex(self) -> np.ndarray:
        return self.amplitudes * np.exp(1j * self.phases)

    def max_asymmetry(self) -> float:
        """How far this spectrum is from conjugate symmetry (0 for real images)."""
        f = self.to_complex()
        return float(np.max(np.abs(f - np.conj(_reverse_bins(f)))))


def _reverse_bins(arr: np.ndarray) -> np.ndarray:
    """arr evaluated at the negated frequency of every bin (indices mod size)."""
    return np.roll(arr[::-1, ::-1], 1, axis=(0, 1))


@lru_cache(maxsize=8)
def conjugate_pairs(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """(representative flat index, sign) for every bin.

    Each conjugate pair has one representative (the lower flat index); sign is
    +1 at the representative, -1 at its partner and 0 at self-conjugate bins.
    """
    u = np.arange(height)[:, None]
    v = np.arange(width)[None, :]
    flat = u * width + v
    neg_flat = ((height - u) % height) * width + (width - v) % width
    rep = np.minimum(flat, neg_flat)
    sign = np.sign(neg_flat - flat)
    return rep, sign


def fft_decompose(img: ImageBuffer) -> Spectrum:
    """Forward 2-D FFT of a square greyscale image."""
    if img.channels != 1:
        raise ValueError("fft_decompose expects a greyscale image")
    if not img.is_square:
        raise ValueError("fft_decompose expects a square image")
    f = np.fft.fft2(img.data.astype(np.float64))
    return Spectrum(np.abs(f), np.angle(f))


def recompose_field(spec: Spectrum) -> np.ndarray:
    """Inverse transform to a real pre-clip float64 image.

    Raises if the imaginary residue exceeds IMAG_RESIDUE_TOL, which would
    mean the spectrum lost conjugate symmetry.
    """
    inv = np.fft.ifft2(spec.to_complex())
    residue = float(np.max(np.abs(inv.imag)))
    if residue > IMAG_RESIDUE_TOL:
        raise ValueError(f"inverse transform is not real: max |imag| = {residue}")
    return np.ascontiguousarray(inv.real)


def fft_recompose(spec: Spectrum) -> ImageBuffer:
    """Inverse transform, clipped to [0, 1], with pre-clip stats in metadata."""
    pre = recompose_field(spec)
    out, clip_stats = clip_unit(pre)
    return ImageBuffer(out.astype(SAMPLE_DTYPE), clip_stats)


def phase_noise_field(arr: np.ndarray, w_degrees: float, key: int) -> np.ndarray:
    """Pre-clip phase-scrambled image (float64)."""
    if not 0.0 <= w_degrees <= 180.0:
        raise ValueError("phase noise width must be in [0, 180] degrees")
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape
    f = np.fft.fft2(arr)
    rep, sign = conjugate_pairs(h, w)
    draws = uniform_plane(key, h, w, plane=0)
    theta = (2.0 * draws - 1.0) * np.deg2rad(w_degrees)
    shift = sign * theta.reshape(-1)[rep]  # one draw per pair, opposite signs
    spec = Spectrum(np.abs(f), np.angle(f) + shift)
    return recompose_field(spec)


def phase_noise(img: ImageBuffer, w_degrees: float, seed: StreamSeed) -> ImageBuffer:
    """Add one U[-w, w] phase shift per conjugate pair; amplitudes untouched."""
    if img.channels != 1 or not img.is_square:
        raise ValueError("phase_noise expects a square greyscale image")
    pre = phase_noise_field(img.data, w_degrees, seed.key)
    out, clip_stats = clip_unit(pre)
    meta = {"w_degrees": w_degrees, **clip_stats, **seed.provenance()}
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


@dataclass
class MeanAmplitudeSpectrum:
    """Pointwise mean of amplitude spectra over a corpus."""

    amplitudes: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.amplitudes.ndim != 2:
            raise ValueError("amplitudes must be 2-D")


def mean_amplitude_spectrum(images: list[tuple[str, ImageBuffer]]) -> MeanAmplitudeSpectrum:
    """Mean amplitude spectrum over (image_id, buffer) pairs; id-sorted reduction."""
    if not images:
        raise ValueError("cannot average over an empty corpus")
    ordered = sorted(images, key=lambda pair: pair[0])
    shape = None
    total = None
    for image_id, img in ordered:
        spec = fft_decompose(img)
        if shape is None:
            shape = spec.amplitudes.shape
            total = np.zeros(shape, dtype=np.float64)
        elif spec.amplitudes.shape != shape:
            raise ValueError(f"image {image_id} has FFT shape {spec.amplitudes.shape}, expected {shape}")
        total += spec.amplitudes
    return MeanAmplitudeSpectrum(total / len(ordered), len(ordered))


def power_equalise_field(arr: np.ndarray, target_amplitudes: np.ndarray) -> np.ndarray:
    """Pre-clip image with its amplitudes replaced by the (symmetrized) target."""
    arr = np.asarray(arr, dtype=np.float64)
    target = np.asarray(target_amplitudes, dtype=np.float64)
    if target.shape != arr.shape:
        raise ValueError(f"target shape {target.shape} does not match image FFT shape {arr.shape}")
    target = 0.5 * (target + _reverse_bins(target))
    f = np.fft.fft2(arr)
    spec = Spectrum(target, np.angle(f))
    return recompose_field(spec)


def power_equalise(img: ImageBuffer, target: MeanAmplitudeSpectrum) -> ImageBuffer:
    """Keep the image's phases, impose the corpus-mean amplitude spectrum."""
    if img.channels != 1 or not img.is_square:
        raise ValueError("power_equalise expects a square greyscale image")
    pre = power_equalise_field(img.data, target.amplitudes)
    out, clip_stats = clip_unit(pre)
    meta = {"target_samples": target.sample_count, **clip_stats}
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def pink_noise_field(side: int, key: int, mean_grey: float, rms_contrast: float) -> np.ndarray:
    """Raw (unclipped) 1/f noise image with the requested mean and RMS contrast."""
    if side < 2:
        raise ValueError("mask side must be >= 2")
    fx = np.fft.fftfreq(side)
    radial = np.sqrt(fx[:, None] ** 2 + fx[None, :] ** 2)
    amplitudes = np.zeros_like(radial)
    nonzero = radial > 0
    amplitudes[nonzero] = 1.0 / radial[nonzero]  # 1/f; DC stays 0, mean added below

    rep, sign = conjugate_pairs(side, side)
    draws = uniform_plane(key, side, side, plane=0)
    phases = sign * ((2.0 * draws - 1.0) * np.pi).reshape(-1)[rep]
    field = recompose_field(Spectrum(amplitudes, phases))

    std = float(field.std())
    return field * (rms_contrast / std) + mean_grey


def pink_noise_mask(
    side: int,
    seed: StreamSeed,
    enhance: bool = False,
    mean_grey: float = DEFAULT_MEAN_GREY,
    rms_contrast: float = DEFAULT_MASK_RMS_CONTRAST,
) -> ImageBuffer:
    """Noise mask with a 1/f amplitude spectrum.

    The enhanced variant multiplies each raw pixel value by four before the
    final clip, which pushes most of the mask to the gamut limits.
    """
    raw = pink_noise_field(side, seed.key, mean_grey, rms_contrast)
    if enhance:
        raw = raw * MASK_ENHANCE_FACTOR
    out, clip_stats = clip_unit(raw)
    meta = {
        "mask": "pink-1/f",
        "mean_grey": mean_grey,
        "rms_contrast": rms_contrast,
        "enhanced": enhance,
        "enhance_rule": "pixel-values-x4-then-clip" if enhance else None,
        **clip_stats,
        **seed.provenance(),
    }
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def save_spectrum(mas: MeanAmplitudeSpectrum, path) -> None:
    """Little-endian float64 array file with a one-line JSON header."""
    header = json.dumps(
        {"shape": list(mas.amplitudes.shape), "sample_count": mas.sample_count, "dtype": "<f8"}
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(mas.amplitudes, dtype="<f8").tobytes())


def load_spectrum(path) -> MeanAmplitudeSpectrum:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        if header.get("dtype") != "<f8":
            raise ValueError(f"unsupported spectrum dtype {header.get('dtype')!r}")
        shape = tuple(header["shape"])
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return MeanAmplitudeSpectrum(data.copy(), int(header["sample_count"]))

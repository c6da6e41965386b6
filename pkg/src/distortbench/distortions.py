"""Parametric image manipulations and the tagged spec that names them.

Each manipulation family ships with the level grid used for benchmarking;
off-grid levels are rejected unless explicitly allowed. Stochastic operations
are bit-reproducible given a :class:`~distortbench.rng.StreamSeed`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields
from typing import ClassVar, Union

import numpy as np
from scipy import ndimage

from .buffers import SAMPLE_DTYPE, ImageBuffer, clip_unit
from .colour import MonitorModel, opponent_colours
from .pixels import DEFAULT_MEAN_GREY, scale_contrast, to_greyscale
from .rng import StreamSeed, uniform_plane

# Benchmark level grids.
CONTRAST_LEVELS = (0.01, 0.03, 0.05, 0.10, 0.15, 0.30, 0.50, 1.0)
UNIFORM_NOISE_WIDTHS = (0.0, 0.03, 0.05, 0.1, 0.2, 0.35, 0.6, 0.9)
SALT_PEPPER_PROBS = (0.0, 0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95)
LOWPASS_SIGMAS = (0.0, 1.0, 3.0, 5.0, 7.0, 10.0, 15.0, 40.0)
LOWPASS_INTERPOLATED_SIGMAS = (5.0,)  # grid filler, not a published level
HIGHPASS_SIGMAS = (0.4, 0.45, 0.55, 0.7, 1.0, 1.5, 3.0, math.inf)
PHASE_NOISE_WIDTHS = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0)
ROTATION_ANGLES = (0, 90, 180, 270)
EIDOLON_REACHES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
EIDOLON_COHERENCES = (0.0, 0.3, 1.0)
EIDOLON_GRAIN = 10.0

# Noise manipulations embed a fixed contrast reduction before the noise.
NOISE_PRE_CONTRAST = 0.3

GAUSSIAN_TRUNCATE = 4.0  # kernel support in standard deviations


class OffGridError(ValueError):
    """A spec parameter lies outside the benchmark level grid."""


@dataclass(frozen=True)
class Greyscale:
    KIND: ClassVar[str] = "greyscale"


@dataclass(frozen=True)
class Colour:
    KIND: ClassVar[str] = "colour"


@dataclass(frozen=True)
class Contrast:
    c: float
    KIND: ClassVar[str] = "contrast"
    GRID: ClassVar[dict] = {"c": CONTRAST_LEVELS}


@dataclass(frozen=True)
class UniformNoise:
    w: float
    pre_contrast: float = NOISE_PRE_CONTRAST
    KIND: ClassVar[str] = "uniform-noise"
    GRID: ClassVar[dict] = {"w": UNIFORM_NOISE_WIDTHS}


@dataclass(frozen=True)
class SaltPepper:
    p: float
    pre_contrast: float = NOISE_PRE_CONTRAST
    KIND: ClassVar[str] = "salt-pepper"
    GRID: ClassVar[dict] = {"p": SALT_PEPPER_PROBS}


@dataclass(frozen=True)
class LowPass:
    sigma: float
    KIND: ClassVar[str] = "low-pass"
    GRID: ClassVar[dict] = {"sigma": LOWPASS_SIGMAS}


@dataclass(frozen=True)
class HighPass:
    sigma: float
    KIND: ClassVar[str] = "high-pass"
    GRID: ClassVar[dict] = {"sigma": HIGHPASS_SIGMAS}


@dataclass(frozen=True)
class PhaseNoise:
    w_degrees: float
    KIND: ClassVar[str] = "phase-noise"
    GRID: ClassVar[dict] = {"w_degrees": PHASE_NOISE_WIDTHS}


@dataclass(frozen=True)
class PowerEqualise:
    KIND: ClassVar[str] = "power-equalise"


@dataclass(frozen=True)
class OpponentColour:
    KIND: ClassVar[str] = "opponent-colour"


@dataclass(frozen=True)
class Rotation:
    angle: int
    KIND: ClassVar[str] = "rotation"
    GRID: ClassVar[dict] = {"angle": ROTATION_ANGLES}


@dataclass(frozen=True)
class Eidolon:
    reach: float
    coherence: float
    grain: float = EIDOLON_GRAIN
    KIND: ClassVar[str] = "eidolon"
    GRID: ClassVar[dict] = {"reach": EIDOLON_REACHES, "coherence": EIDOLON_COHERENCES}


DistortionSpec = Union[
    Greyscale,
    Colour,
    Contrast,
    UniformNoise,
    SaltPepper,
    LowPass,
    HighPass,
    PhaseNoise,
    PowerEqualise,
    OpponentColour,
    Rotation,
    Eidolon,
]

SPEC_KINDS: dict[str, type] = {
    cls.KIND: cls
    for cls in (
        Greyscale,
        Colour,
        Contrast,
        UniformNoise,
        SaltPepper,
        LowPass,
        HighPass,
        PhaseNoise,
        PowerEqualise,
        OpponentColour,
        Rotation,
        Eidolon,
    )
}


def spec_to_json(spec: DistortionSpec) -> dict:
    """JSON form mirroring the spec field-for-field (infinity as \"inf\")."""
    rec: dict = {"kind": spec.KIND}
    for f in fields(spec):
        value = getattr(spec, f.name)
        if isinstance(value, float) and math.isinf(value):
            value = "inf"
        rec[f.name] = value
    return rec


def spec_from_json(rec: dict) -> DistortionSpec:
    rec = dict(rec)
    kind = rec.pop("kind", None)
    if kind not in SPEC_KINDS:
        raise ValueError(f"unknown distortion kind: {kind!r}")
    cls = SPEC_KINDS[kind]
    kwargs = {}
    for f in fields(cls):
        if f.name in rec:
            value = rec.pop(f.name)
            if value == "inf":
                value = math.inf
            kwargs[f.name] = value
    if rec:
        raise ValueError(f"unknown fields for {kind}: {sorted(rec)}")
    return cls(**kwargs)


def spec_digest(spec: DistortionSpec) -> str:
    """Stable hash of a spec; part of every derived stream seed."""
    canonical = json.dumps(spec_to_json(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def validate_grid(spec: DistortionSpec, allow_off_grid: bool = False) -> None:
    """Check spec parameters against the benchmark grids."""
    grid = getattr(spec, "GRID", None)
    if not grid or allow_off_grid:
        return
    for name, levels in grid.items():
        value = getattr(spec, name)
        if not any(math.isclose(value, lv) or value == lv for lv in levels):
            raise OffGridError(
                f"{spec.KIND}.{name}={value} is off the benchmark grid {levels}; "
                "pass allow_off_grid=True to use it anyway"
            )


def stream_seed(experiment_seed: int, image_id: str, spec: DistortionSpec) -> StreamSeed:
    return StreamSeed(experiment_seed, image_id, spec_digest(spec))


# ---------------------------------------------------------------------------
# Spatial-domain operations


def _require_grey(img: ImageBuffer, op: str) -> None:
    if img.channels != 1:
        raise ValueError(f"{op} is defined on greyscale images only")


def uniform_noise(img: ImageBuffer, w: float, seed: StreamSeed, pre_contrast: float = NOISE_PRE_CONTRAST) -> ImageBuffer:
    """Contrast-reduce then add pixelwise uniform noise from [-w, w], clipping last."""
    _require_grey(img, "uniform_noise")
    if w < 0:
        raise ValueError("noise width must be >= 0")
    base = scale_contrast(img, pre_contrast).data.astype(np.float64)
    u = uniform_plane(seed.key, img.height, img.width, plane=0)
    noisy = base + (2.0 * u - 1.0) * w
    out, clip_stats = clip_unit(noisy)
    meta = {"w": w, "pre_contrast": pre_contrast, **clip_stats, **seed.provenance()}
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def salt_pepper(img: ImageBuffer, p: float, seed: StreamSeed, pre_contrast: float = NOISE_PRE_CONTRAST) -> ImageBuffer:
    """Contrast-reduce then replace each pixel with black or white with probability p.

    Replacement polarity splits evenly: p/2 black, p/2 white (an even split is
    the symmetric reading; recorded in metadata).
    """
    _require_grey(img, "salt_pepper")
    if not 0.0 <= p <= 1.0:
        raise ValueError("replacement probability must be in [0, 1]")
    base = scale_contrast(img, pre_contrast).data.astype(np.float64)
    u = uniform_plane(seed.key, img.height, img.width, plane=0)
    out = np.where(u < p / 2.0, 0.0, np.where(u < p, 1.0, base))
    replaced = float(np.mean(u < p))
    meta = {
        "p": p,
        "pre_contrast": pre_contrast,
        "polarity_split": "50/50",
        "replaced_fraction": replaced,
        "clip_fraction": 0.0,
        **seed.provenance(),
    }
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def lowpass_field(arr: np.ndarray, sigma: float, pad_value: float) -> np.ndarray:
    """Gaussian low-pass of a float64 array, truncated at 4 SD, constant padding."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    arr = np.asarray(arr, dtype=np.float64)
    if sigma == 0:
        return arr.copy()
    return ndimage.gaussian_filter(arr, sigma, mode="constant", cval=pad_value, truncate=GAUSSIAN_TRUNCATE)


def gaussian_lowpass(img: ImageBuffer, sigma: float, pad_value: float = DEFAULT_MEAN_GREY) -> ImageBuffer:
    """Separable Gaussian blur; sigma = 0 is the identity."""
    _require_grey(img, "gaussian_lowpass")
    blurred = lowpass_field(img.data, sigma, pad_value)
    out, clip_stats = clip_unit(blurred)
    meta = {"sigma": sigma, "pad_value": pad_value, "truncate": GAUSSIAN_TRUNCATE, **clip_stats}
    if any(math.isclose(sigma, lv) for lv in LOWPASS_INTERPOLATED_SIGMAS):
        meta["interpolated_level"] = True
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def highpass_field(
    arr: np.ndarray, sigma: float, target_mean: float, pad_value: float | None = None
) -> np.ndarray:
    """Pre-clip high-pass: subtract the blur, then shift so the mean equals target_mean."""
    if sigma == 0:
        raise ValueError("sigma = 0 would high-pass everything away; use sigma = inf for identity")
    if sigma < 0:
        raise ValueError("sigma must be positive (or inf)")
    arr = np.asarray(arr, dtype=np.float64)
    if math.isinf(sigma):
        return arr.copy()
    if pad_value is None:
        pad_value = target_mean
    residual = arr - lowpass_field(arr, sigma, pad_value)
    return residual + (target_mean - residual.mean())


def gaussian_highpass(
    img: ImageBuffer,
    sigma: float,
    target_mean: float = DEFAULT_MEAN_GREY,
    pad_value: float | None = None,
) -> ImageBuffer:
    """High-pass filter with the mean restored to target_mean before clipping.

    sigma = inf is the identity; small sigmas approach a uniform image at
    target_mean.
    """
    _require_grey(img, "gaussian_highpass")
    pre = highpass_field(img.data, sigma, target_mean, pad_value)
    out, clip_stats = clip_unit(pre)
    meta = {
        "sigma": sigma,
        "target_mean": target_mean,
        "preclip_mean": float(pre.mean()),
        **clip_stats,
    }
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def rotate(img: ImageBuffer, angle: int) -> ImageBuffer:
    """Exact right-angle rotation as a lossless pixel permutation.

    90: transpose then reverse column order; 180: reverse rows and columns;
    270: reverse columns then transpose.
    """
    if angle not in ROTATION_ANGLES:
        raise ValueError(f"angle must be one of {ROTATION_ANGLES}")
    data = img.data
    axes = (1, 0) if data.ndim == 2 else (1, 0, 2)
    if angle == 0:
        out = data.copy()
    elif angle == 90:
        out = data.transpose(axes)[:, ::-1].copy()
    elif angle == 180:
        out = data[::-1, ::-1].copy()
    else:
        out = data[:, ::-1].transpose(axes).copy()
    return ImageBuffer(out, {"angle": angle})


# ---------------------------------------------------------------------------
# Spec dispatch


@dataclass
class DistortionContext:
    """Corpus-level inputs some manipulations need."""

    mean_grey: float = DEFAULT_MEAN_GREY
    amplitude_target: "object | None" = None  # spectral.MeanAmplitudeSpectrum
    monitor: MonitorModel | None = None
    allow_off_grid: bool = False


def _as_grey(img: ImageBuffer) -> ImageBuffer:
    return to_greyscale(img) if img.channels == 3 else img


def apply_distortion(
    img: ImageBuffer,
    spec: DistortionSpec,
    seed: StreamSeed | None = None,
    context: DistortionContext | None = None,
) -> ImageBuffer:
    """Apply one manipulation to a preprocessed image.

    Everything except the colour-preserving manipulations (colour,
    opponent-colour) operates on the greyscale conversion, which is part of
    each manipulation's definition. Stochastic specs require a seed.
    """
    # local imports: spectral/eidolon depend on buffers/rng only, but importing
    # them lazily keeps this module importable on its own
    from .eidolon import eidolon as _apply_eidolon
    from .spectral import phase_noise as _apply_phase_noise
    from .spectral import power_equalise as _apply_power_equalise

    ctx = context or DistortionContext()
    validate_grid(spec, ctx.allow_off_grid)

    stochastic = isinstance(spec, (UniformNoise, SaltPepper, PhaseNoise, Eidolon))
    if stochastic and seed is None:
        raise ValueError(f"{spec.KIND} requires a StreamSeed")

    if isinstance(spec, Colour):
        out = img.copy()
    elif isinstance(spec, Greyscale):
        out = _as_grey(img)
    elif isinstance(spec, Contrast):
        out = scale_contrast(_as_grey(img), spec.c)
    elif isinstance(spec, UniformNoise):
        out = uniform_noise(_as_grey(img), spec.w, seed, spec.pre_contrast)
    elif isinstance(spec, SaltPepper):
        out = salt_pepper(_as_grey(img), spec.p, seed, spec.pre_contrast)
    elif isinstance(spec, LowPass):
        out = gaussian_lowpass(_as_grey(img), spec.sigma, pad_value=ctx.mean_grey)
    elif isinstance(spec, HighPass):
        out = gaussian_highpass(_as_grey(img), spec.sigma, target_mean=ctx.mean_grey)
    elif isinstance(spec, PhaseNoise):
        out = _apply_phase_noise(_as_grey(img), spec.w_degrees, seed)
    elif isinstance(spec, PowerEqualise):
        if ctx.amplitude_target is None:
            raise ValueError("power-equalise requires context.amplitude_target")
        out = _apply_power_equalise(_as_grey(img), ctx.amplitude_target)
    elif isinstance(spec, OpponentColour):
        out = opponent_colours(img, ctx.monitor)
    elif isinstance(spec, Rotation):
        out = rotate(_as_grey(img), spec.angle)
    elif isinstance(spec, Eidolon):
        out = _apply_eidolon(_as_grey(img), spec.reach, spec.coherence, spec.grain, seed)
    else:  # pragma: no cover - union is closed
        raise TypeError(f"unhandled spec {spec!r}")

    out.meta["distortion"] = spec_to_json(spec)
    return out

"""Image-degradation benchmarking: parametric distortions, 16-way forced-choice
decision metrics, and a timed psychophysics session engine."""

__version__ = "0.1.0"

from .buffers import ImageBuffer, clip_unit
from .distortions import (
    DistortionContext,
    apply_distortion,
    gaussian_highpass,
    gaussian_lowpass,
    rotate,
    salt_pepper,
    spec_digest,
    spec_from_json,
    spec_to_json,
    stream_seed,
    uniform_noise,
)
from .eidolon import eidolon
from .pixels import (
    DEFAULT_MEAN_GREY,
    LUMA_WEIGHTS,
    center_crop_square,
    downsample,
    preprocess,
    scale_contrast,
    to_greyscale,
)
from .rng import StreamSeed
from .spectral import (
    MeanAmplitudeSpectrum,
    Spectrum,
    fft_decompose,
    fft_recompose,
    mean_amplitude_spectrum,
    phase_noise,
    pink_noise_mask,
    power_equalise,
)
from .taxonomy import (
    CATEGORIES,
    CategoryMap,
    aggregate,
    decide,
    load_category_map,
    load_labels,
    sample_decision,
)

__all__ = [
    "CATEGORIES",
    "CategoryMap",
    "DEFAULT_MEAN_GREY",
    "DistortionContext",
    "ImageBuffer",
    "LUMA_WEIGHTS",
    "MeanAmplitudeSpectrum",
    "Spectrum",
    "StreamSeed",
    "aggregate",
    "apply_distortion",
    "center_crop_square",
    "clip_unit",
    "decide",
    "downsample",
    "eidolon",
    "fft_decompose",
    "fft_recompose",
    "gaussian_highpass",
    "gaussian_lowpass",
    "load_category_map",
    "load_labels",
    "mean_amplitude_spectrum",
    "phase_noise",
    "pink_noise_mask",
    "power_equalise",
    "preprocess",
    "rotate",
    "salt_pepper",
    "sample_decision",
    "scale_contrast",
    "spec_digest",
    "spec_from_json",
    "spec_to_json",
    "stream_seed",
    "to_greyscale",
    "uniform_noise",
]

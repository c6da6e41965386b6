"""Opponent-colour conversion through a monitor model and the DKL opponent space.

The pipeline linearizes device RGB with a monitor lookup table, converts to
cone activations (LMS) with a 3x3 matrix, then to an opponent space with a
luminance channel and two chromatic channels (L-M and S-luminance). Negating
the chromatic channels and inverting the pipeline yields opposite colours at
unchanged luminance. A real calibration can be loaded from a text file; the
default model is a surrogate (gamma-2.2 lookup table plus standard
cone-fundamental matrices) and is clearly labelled as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .buffers import SAMPLE_DTYPE, ImageBuffer, clip_unit

# Linear sRGB -> XYZ (D65) followed by the Hunt-Pointer-Estevez XYZ -> LMS
# transform. Used only as the swappable default when no measured calibration
# is available.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_LMS = np.array(
    [
        [0.4002, 0.7076, -0.0808],
        [-0.2263, 1.1653, 0.0457],
        [0.0, 0.0, 0.9182],
    ]
)


@dataclass
class MonitorModel:
    """Display model: grey-level lookup table plus RGB->LMS and LMS->DKL matrices."""

    lut: np.ndarray  # 256 emitted luminances, monotone nondecreasing
    rgb_to_lms: np.ndarray  # 3x3
    lms_to_dkl: np.ndarray  # 3x3
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.lut = np.asarray(self.lut, dtype=np.float64)
        self.rgb_to_lms = np.asarray(self.rgb_to_lms, dtype=np.float64)
        self.lms_to_dkl = np.asarray(self.lms_to_dkl, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.lut.shape != (256,):
            raise ValueError("lut must have 256 entries")
        if np.any(np.diff(self.lut) < 0):
            raise ValueError("lut must be monotone nondecreasing")
        for name, m in (("rgb_to_lms", self.rgb_to_lms), ("lms_to_dkl", self.lms_to_dkl)):
            if m.shape != (3, 3):
                raise ValueError(f"{name} must be 3x3")
            if abs(np.linalg.det(m)) < 1e-12:
                raise ValueError(f"{name} is singular")
        # Achromatic inputs must carry no chromatic signal.
        white = self.rgb_to_lms @ np.ones(3)
        chroma = self.lms_to_dkl[1:] @ white
        if np.max(np.abs(chroma)) > 1e-6 * max(1.0, float(np.abs(white).max())):
            raise ValueError("chromatic DKL channels are nonzero for achromatic input")


def dkl_matrix_from_cones(rgb_to_lms: np.ndarray) -> np.ndarray:
    """Build the LMS->DKL matrix for a display with the given cone matrix.

    Rows are the luminance mechanism (L+M), the L-M mechanism and the
    S-(L+M) mechanism, each tuned so the chromatic rows give zero response to
    the display's achromatic axis.
    """
    w = np.asarray(rgb_to_lms, dtype=np.float64) @ np.ones(3)
    wl, wm, ws = w
    if wl <= 0 or wm <= 0 or (wl + wm) <= 0:
        raise ValueError("cone response to white must be positive")
    return np.array(
        [
            [1.0, 1.0, 0.0],
            [1.0, -wl / wm, 0.0],
            [-ws / (wl + wm), -ws / (wl + wm), 1.0],
        ]
    )


def default_monitor() -> MonitorModel:
    """Surrogate display model: normalized gamma-2.2 lut, standard cone matrix."""
    lut = (np.arange(256) / 255.0) ** 2.2
    rgb_to_lms = _XYZ_TO_LMS @ _SRGB_TO_XYZ
    return MonitorModel(
        lut=lut,
        rgb_to_lms=rgb_to_lms,
        lms_to_dkl=dkl_matrix_from_cones(rgb_to_lms),
        name="surrogate-gamma22-hpe",
        meta={"surrogate": True},
    )


def _linearize(monitor: MonitorModel, values: np.ndarray) -> np.ndarray:
    return np.interp(values * 255.0, np.arange(256), monitor.lut)


def _delinearize(monitor: MonitorModel, luminance: np.ndarray) -> tuple[np.ndarray, float]:
    lo, hi = monitor.lut[0], monitor.lut[-1]
    out_of_gamut = float(np.mean((luminance < lo) | (luminance > hi)))
    device = np.interp(luminance, monitor.lut, np.arange(256) / 255.0)
    return device, out_of_gamut


def rgb_to_dkl(img: ImageBuffer, monitor: MonitorModel) -> np.ndarray:
    """Convert a colour image to DKL coordinates (float64, shape (H, W, 3))."""
    if img.channels != 3:
        raise ValueError("rgb_to_dkl expects a 3-channel image")
    linear = _linearize(monitor, img.data.astype(np.float64))
    lms = np.einsum("ij,hwj->hwi", monitor.rgb_to_lms, linear)
    return np.einsum("ij,hwj->hwi", monitor.lms_to_dkl, lms)


def dkl_to_rgb(dkl: np.ndarray, monitor: MonitorModel) -> tuple[np.ndarray, float]:
    """Inverse of rgb_to_dkl; returns (device RGB pre-clip, out-of-gamut fraction)."""
    lms = np.einsum("ij,hwj->hwi", np.linalg.inv(monitor.lms_to_dkl), dkl)
    linear = np.einsum("ij,hwj->hwi", np.linalg.inv(monitor.rgb_to_lms), lms)
    return _delinearize(monitor, linear)


def opponent_colours(img: ImageBuffer, monitor: MonitorModel | None = None) -> ImageBuffer:
    """Invert the chromatic DKL channels while keeping luminance unchanged."""
    if img.channels != 3:
        raise ValueError("opponent_colours expects a 3-channel image")
    if monitor is None:
        monitor = default_monitor()
    dkl = rgb_to_dkl(img, monitor)
    dkl[..., 1] *= -1.0
    dkl[..., 2] *= -1.0
    device, out_of_gamut = dkl_to_rgb(dkl, monitor)
    out, clip_stats = clip_unit(device)
    meta = {"monitor": monitor.name, "out_of_gamut_fraction": out_of_gamut, **clip_stats}
    return ImageBuffer(out.astype(SAMPLE_DTYPE), meta)


def save_monitor(monitor: MonitorModel, path) -> None:
    """Write a calibration file (documented plain-text schema, v1)."""
    lines = ["# distortbench monitor calibration v1", f"# name: {monitor.name}", "[lut]"]
    lines += [f"{i} {float(monitor.lut[i])!r}" for i in range(256)]
    lines.append("[rgb_to_lms]")
    lines += [" ".join(repr(float(v)) for v in row) for row in monitor.rgb_to_lms]
    lines.append("[lms_to_dkl]")
    lines += [" ".join(repr(float(v)) for v in row) for row in monitor.lms_to_dkl]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_monitor(path) -> MonitorModel:
    """Read a calibration file written by save_monitor (or by hand)."""
    sections: dict[str, list[list[float]]] = {}
    name = "custom"
    current: list[list[float]] | None = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# name:"):
                    name = line.split(":", 1)[1].strip()
                continue
            if line.startswith("[") and line.endswith("]"):
                current = sections.setdefault(line[1:-1], [])
                continue
            if current is None:
                raise ValueError(f"calibration data before any section: {line!r}")
            current.append([float(tok) for tok in line.split()])

    for required in ("lut", "rgb_to_lms", "lms_to_dkl"):
        if required not in sections:
            raise ValueError(f"calibration file missing [{required}] section")
    lut_rows = sections["lut"]
    if len(lut_rows) != 256 or any(len(r) != 2 for r in lut_rows):
        raise ValueError("lut section must hold 256 'grey_level luminance' rows")
    lut = np.empty(256)
    for level, luminance in lut_rows:
        idx = int(level)
        if not 0 <= idx <= 255:
            raise ValueError(f"grey level {level} out of range")
        lut[idx] = luminance
    return MonitorModel(
        lut=lut,
        rgb_to_lms=np.array(sections["rgb_to_lms"]),
        lms_to_dkl=np.array(sections["lms_to_dkl"]),
        name=name,
    )

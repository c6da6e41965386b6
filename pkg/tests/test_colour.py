import numpy as np
import pytest

from distortbench.buffers import ImageBuffer
from distortbench.colour import (
    MonitorModel,
    default_monitor,
    dkl_matrix_from_cones,
    load_monitor,
    opponent_colours,
    rgb_to_dkl,
    save_monitor,
)

from conftest import synthetic_natural


def test_default_monitor_valid():
    mon = default_monitor()
    assert np.all(np.diff(mon.lut) >= 0)
    assert abs(np.linalg.det(mon.rgb_to_lms)) > 1e-12
    assert abs(np.linalg.det(mon.lms_to_dkl)) > 1e-12


def test_achromatic_input_has_zero_chromatic_channels():
    mon = default_monitor()
    greys = np.linspace(0, 1, 16, dtype=np.float32)
    img = ImageBuffer(np.tile(greys[:, None, None], (1, 4, 3)))
    dkl = rgb_to_dkl(img, mon)
    assert np.max(np.abs(dkl[..., 1])) < 1e-6
    assert np.max(np.abs(dkl[..., 2])) < 1e-6


def test_dkl_matrix_annihilates_white():
    mon = default_monitor()
    white = mon.rgb_to_lms @ np.ones(3)
    chroma = dkl_matrix_from_cones(mon.rgb_to_lms)[1:] @ white
    assert np.max(np.abs(chroma)) < 1e-12


def test_opponent_preserves_achromatic_pixels():
    mon = default_monitor()
    greys = np.linspace(0.05, 0.95, 8, dtype=np.float32)
    img = ImageBuffer(np.tile(greys[:, None, None], (1, 8, 3)))
    out = opponent_colours(img, mon)
    assert np.max(np.abs(out.data - img.data)) < 1e-6


def test_opponent_is_an_involution_in_gamut():
    # low-saturation image stays inside the gamut, so applying twice undoes it
    img = synthetic_natural(64, channels=3)
    desat = ImageBuffer((0.5 + 0.3 * (img.data - 0.5)).astype(np.float32))
    mon = default_monitor()
    once = opponent_colours(desat, mon)
    twice = opponent_colours(once, mon)
    assert once.meta["clip_fraction"] == 0.0
    assert np.max(np.abs(twice.data - desat.data)) < 1e-4


def test_opponent_actually_changes_chromatic_content():
    img = synthetic_natural(64, channels=3)
    out = opponent_colours(img)
    assert np.max(np.abs(out.data - img.data)) > 0.05


def test_opponent_luminance_unchanged():
    mon = default_monitor()
    img = synthetic_natural(64, channels=3)
    before = rgb_to_dkl(img, mon)[..., 0]
    out = opponent_colours(img, mon)
    after = rgb_to_dkl(out, mon)[..., 0]
    inside = np.abs(after - before) < 1e-4
    assert inside.mean() > 0.95  # clipped pixels may shift; the bulk must not


def test_rejects_greyscale():
    with pytest.raises(ValueError):
        opponent_colours(ImageBuffer(np.full((8, 8), 0.5, np.float32)))


def test_monitor_validation_rejects_nonmonotone_lut():
    mon = default_monitor()
    bad = mon.lut.copy()
    bad[100] = bad[90]
    bad[101] = bad[80]  # decreasing step
    with pytest.raises(ValueError):
        MonitorModel(lut=bad, rgb_to_lms=mon.rgb_to_lms, lms_to_dkl=mon.lms_to_dkl)


def test_monitor_validation_rejects_chromatic_leak():
    mon = default_monitor()
    leaky = mon.lms_to_dkl.copy()
    leaky[1] = (1.0, 1.0, 0.0)  # responds to the achromatic axis
    with pytest.raises(ValueError):
        MonitorModel(lut=mon.lut, rgb_to_lms=mon.rgb_to_lms, lms_to_dkl=leaky)


def test_calibration_file_round_trip(tmp_path):
    mon = default_monitor()
    path = tmp_path / "monitor.cal"
    save_monitor(mon, path)
    back = load_monitor(path)
    assert back.name == mon.name
    assert np.array_equal(back.lut, mon.lut)
    assert np.array_equal(back.rgb_to_lms, mon.rgb_to_lms)
    assert np.array_equal(back.lms_to_dkl, mon.lms_to_dkl)


def test_calibration_file_requires_all_sections(tmp_path):
    path = tmp_path / "broken.cal"
    path.write_text("[lut]\n0 0.0\n")
    with pytest.raises(ValueError):
        load_monitor(path)

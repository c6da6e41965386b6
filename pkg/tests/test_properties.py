"""Property tests for the algebraic invariants that hold for arbitrary inputs."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from distortbench.buffers import ImageBuffer, clip_unit
from distortbench.pixels import center_crop_square, scale_contrast
from distortbench.distortions import rotate
from distortbench.metrics import response_entropy
from distortbench.taxonomy import aggregate, decide, CategoryMap, CATEGORIES

TOY_MAP = CategoryMap(
    tuple(f"fine-{c}" for c in CATEGORIES) + ("spare",),
    {f"fine-{c}": c for c in CATEGORIES},
)

unit_images = hnp.arrays(
    np.float32,
    st.tuples(st.integers(2, 24), st.integers(2, 24)),
    elements=st.floats(0.0, 1.0, width=32),
)
square_images = hnp.arrays(
    np.float32, st.integers(2, 24).map(lambda n: (n, n)), elements=st.floats(0.0, 1.0, width=32)
)


@settings(max_examples=40, deadline=None)
@given(unit_images, st.floats(0.01, 1.0))
def test_scale_contrast_range_bound(arr, c):
    out = scale_contrast(ImageBuffer(arr), c)
    assert out.data.min() >= 0.5 - c / 2 - 1e-6
    assert out.data.max() <= 0.5 + c / 2 + 1e-6


@settings(max_examples=40, deadline=None)
@given(unit_images)
def test_center_crop_idempotent(arr):
    once = center_crop_square(ImageBuffer(arr))
    twice = center_crop_square(once)
    assert np.array_equal(once.data, twice.data)


@settings(max_examples=30, deadline=None)
@given(square_images, st.sampled_from([0, 90, 180, 270]), st.sampled_from([0, 90, 180, 270]))
def test_rotation_group_law(arr, a, b):
    img = ImageBuffer(arr)
    lhs = rotate(rotate(img, a), b)
    rhs = rotate(img, (a + b) % 360)
    assert np.array_equal(lhs.data, rhs.data)


@settings(max_examples=40, deadline=None)
@given(
    hnp.arrays(np.float64, 17, elements=st.floats(0.0, 100.0)),
    hnp.arrays(np.float64, 17, elements=st.floats(0.0, 100.0)),
    st.floats(0.1, 10.0),
    st.floats(0.1, 10.0),
)
def test_aggregate_linearity(s1, s2, a, b):
    lhs = aggregate(a * s1 + b * s2, TOY_MAP)
    rhs = a * aggregate(s1, TOY_MAP) + b * aggregate(s2, TOY_MAP)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, 16, elements=st.floats(0.001, 100.0)), st.floats(0.1, 1000.0))
def test_decide_scale_invariant(agg, scale):
    assert decide(agg) == decide(agg * scale)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, 16, elements=st.integers(0, 50).map(float)))
def test_response_entropy_bounds(counts):
    if counts.sum() == 0:
        return
    h = response_entropy(counts)
    assert 0.0 <= h <= 4.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(-3, 3)))
def test_clip_unit_reports_consistent_fraction(arr):
    out, stats = clip_unit(arr)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert stats["clip_fraction"] == np.mean((arr < 0) | (arr > 1))

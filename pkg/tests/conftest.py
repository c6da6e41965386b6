import numpy as np
import pytest

from distortbench.buffers import ImageBuffer


def synthetic_natural(side: int = 256, seed: int = 11, channels: int = 1) -> ImageBuffer:
    """Deterministic natural-ish test image: smooth blobs + gradient + texture."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:side, 0:side] / side
    img = 0.25 + 0.4 * x + 0.15 * np.sin(7 * np.pi * y)
    for _ in range(6):
        cy, cx, s, a = rng.uniform(0, 1, 2).tolist() + [rng.uniform(0.02, 0.15), rng.uniform(-0.3, 0.3)]
        img += a * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * s**2))
    img += 0.03 * rng.standard_normal((side, side))
    img = (img - img.min()) / (img.max() - img.min())
    if channels == 3:
        shift = np.stack([img, np.roll(img, 3, axis=0), np.roll(img, -3, axis=1)], axis=2)
        return ImageBuffer((0.15 + 0.7 * shift).astype(np.float32))
    return ImageBuffer(img.astype(np.float32))


@pytest.fixture
def natural_image() -> ImageBuffer:
    return synthetic_natural(256)


@pytest.fixture
def natural_colour() -> ImageBuffer:
    return synthetic_natural(256, channels=3)


@pytest.fixture
def small_image() -> ImageBuffer:
    return synthetic_natural(64, seed=5)

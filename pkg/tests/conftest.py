import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_plane(rng, shape=(64, 64), lo=0.0, hi=255.0):
    return rng.uniform(lo, hi, shape)


def textured_plane(rng, shape=(192, 160)):
    """Natural-ish content: smooth gradients plus band-limited texture."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    base = 96.0 + 64.0 * np.sin(2 * np.pi * xx / w) * np.cos(2 * np.pi * yy / h)
    texture = rng.normal(0.0, 18.0, shape)
    # light smoothing so the texture has spatial correlation
    texture = (
        texture
        + np.roll(texture, 1, axis=0)
        + np.roll(texture, 1, axis=1)
        + np.roll(texture, (1, 1), axis=(0, 1))
    ) / 4.0
    return np.clip(base + texture, 0.0, 255.0)

import numpy as np
import pytest

from funque.csf import (
    DEFAULT_PIXELS_PER_DEGREE,
    CsfKernel,
    apply_frequency_csf,
    apply_spatial_csf,
    build_spatial_csf_kernel,
    csf_value,
)


def test_csf_at_zero():
    assert csf_value(0.0) == pytest.approx(0.31, abs=1e-12)


def test_csf_at_one():
    assert csf_value(1.0) == pytest.approx(1.0 * np.exp(-0.29), rel=1e-12)


def test_csf_peak_location_and_value():
    # independent 1-D maximization on a fine grid
    f = np.linspace(0.0, 10.0, 2_000_001)
    values = csf_value(f)
    i = int(np.argmax(values))
    assert f[i] == pytest.approx(3.0039, abs=1e-3)
    assert values[i] == pytest.approx(0.99516, abs=1e-5)


def test_csf_rejects_negative():
    with pytest.raises(ValueError):
        csf_value(-0.1)


def test_kernel_symmetry_and_dc_gain():
    kernel = build_spatial_csf_kernel()
    assert np.array_equal(kernel.taps, kernel.taps[::-1])
    assert abs(kernel.taps.sum() - 0.31) <= 1e-3


def test_kernel_validation():
    taps = np.zeros(21)
    taps[10] = 0.31
    CsfKernel(taps, 12.0)  # flat-response kernel is structurally valid
    with pytest.raises(ValueError):
        CsfKernel(np.ones(21), 12.0)  # DC gain off
    bad = taps.copy()
    bad[0] = 0.01
    with pytest.raises(ValueError):
        CsfKernel(bad, 12.0)  # asymmetric


def test_kernel_requires_positive_inputs():
    with pytest.raises(ValueError):
        build_spatial_csf_kernel(0.0)
    with pytest.raises(ValueError):
        build_spatial_csf_kernel(12.0, grid_size=512)


def measured_attenuation(kernel, u, size=160):
    """Amplitude ratio of a separable product grating after filtering.

    Interior samples (further than a kernel half-width from every edge)
    see only true signal, so the projection there is exact.
    """
    n = np.arange(size)
    s = np.outer(np.sin(2 * np.pi * u * n + 0.7), np.sin(2 * np.pi * u * n + 0.3))
    filtered = apply_spatial_csf(s, kernel)
    core = (slice(12, size - 12),) * 2
    return float((filtered[core] * s[core]).sum() / (s[core] * s[core]).sum())


def test_sinusoid_attenuation_tracks_csf():
    kernel = build_spatial_csf_kernel()
    ppd = kernel.pixels_per_degree
    for u in np.linspace(0.05, 0.4, 10):
        per_axis = np.sqrt(measured_attenuation(kernel, u))
        assert per_axis == pytest.approx(csf_value(u * ppd), rel=0.02)


def test_spatial_csf_constant_plane():
    kernel = build_spatial_csf_kernel()
    out = apply_spatial_csf(np.full((40, 40), 100.0), kernel)
    assert np.all(np.abs(out - 31.0) <= 0.1)  # 100 * 0.31 within 1e-3 relative


def test_spatial_csf_impulse_gives_outer_product():
    kernel = build_spatial_csf_kernel()
    plane = np.zeros((64, 64))
    plane[32, 32] = 1.0
    out = apply_spatial_csf(plane, kernel)
    want = np.outer(kernel.taps, kernel.taps)
    got = out[32 - 10 : 32 + 11, 32 - 10 : 32 + 11]
    assert np.allclose(got, want, atol=1e-12)
    mask = np.ones_like(out, dtype=bool)
    mask[32 - 10 : 32 + 11, 32 - 10 : 32 + 11] = False
    assert np.all(out[mask] == 0.0)


def _reflect_index(i, n):
    # half-sample symmetric: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
    period = 2 * n
    i = i % period
    if i < 0:
        i += period
    return i if i < n else period - 1 - i


def naive_dense_filter(plane, taps):
    """Direct 2-D correlation with the separable kernel's outer product."""
    h, w = plane.shape
    half = len(taps) // 2
    k2 = np.outer(taps, taps)
    out = np.zeros_like(plane)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for dr in range(-half, half + 1):
                rr = _reflect_index(r + dr, h)
                for dc in range(-half, half + 1):
                    cc = _reflect_index(c + dc, w)
                    acc += plane[rr, cc] * k2[dr + half, dc + half]
            out[r, c] = acc
    return out


def test_spatial_csf_matches_dense_convolution_oracle(rng):
    kernel = build_spatial_csf_kernel()
    plane = rng.uniform(0, 255, (64, 64))
    got = apply_spatial_csf(plane, kernel)
    want = naive_dense_filter(plane, kernel.taps)
    assert np.allclose(got, want, atol=1e-9)


def test_spatial_csf_commutes_with_flips(rng):
    kernel = build_spatial_csf_kernel()
    plane = rng.uniform(0, 255, (48, 56))
    flipped = apply_spatial_csf(plane[::-1, ::-1], kernel)
    assert np.allclose(flipped[::-1, ::-1], apply_spatial_csf(plane, kernel), atol=1e-10)


def test_spatial_csf_rejects_small_planes():
    kernel = build_spatial_csf_kernel()
    with pytest.raises(ValueError):
        apply_spatial_csf(np.zeros((20, 64)), kernel)


def test_frequency_csf_constant_plane():
    out = apply_frequency_csf(np.full((32, 32), 100.0))
    assert np.allclose(out, 100.0 * 0.31 * 0.31, atol=1e-9)


def test_frequency_csf_horizontal_sinusoid():
    n = 64
    u = 8.0 / n
    ppd = DEFAULT_PIXELS_PER_DEGREE
    cols = np.sin(2 * np.pi * u * np.arange(n))
    plane = np.tile(cols, (n, 1))
    out = apply_frequency_csf(plane, ppd)
    expected = csf_value(u * ppd) * 0.31 * plane
    assert np.allclose(out, expected, atol=1e-6)


def test_frequency_csf_energy_bound(rng):
    plane = rng.uniform(-1, 1, (48, 48))
    out = apply_frequency_csf(plane)
    peak = csf_value(3.0039)
    assert (out**2).sum() <= peak**2 * (plane**2).sum() + 1e-9

import numpy as np
import pytest

from funque.integral import (
    box_filter_3x3,
    box_sum,
    build_integral,
    build_integral_product,
    build_integral_squared,
    windowed_moments,
)


def naive_box_sum(plane, top, left, h, w):
    total = 0.0
    for r in range(top, top + h):
        for c in range(left, left + w):
            total += plane[r, c]
    return total


def test_single_element_table():
    table = build_integral(np.array([[5.0]]))
    assert np.array_equal(table, [[0.0, 0.0], [0.0, 5.0]])


def test_ones_full_extent():
    table = build_integral(np.ones((3, 3)))
    assert box_sum(table, 0, 0, 3, 3) == 9.0


def test_every_3x3_box_matches_naive(rng):
    plane = rng.uniform(-10, 10, (16, 16))
    table = build_integral(plane)
    for top in range(14):
        for left in range(14):
            assert box_sum(table, top, left, 3, 3) == pytest.approx(
                naive_box_sum(plane, top, left, 3, 3), abs=1e-9
            )


def test_zero_plane_any_window():
    table = build_integral(np.zeros((5, 7)))
    assert box_sum(table, 1, 2, 3, 4) == 0.0


def test_1x1_window_returns_sample(rng):
    plane = rng.uniform(0, 1, (6, 6))
    table = build_integral(plane)
    assert box_sum(table, 4, 2, 1, 1) == pytest.approx(plane[4, 2], abs=1e-12)


def test_strided_9x9_sums_match_naive(rng):
    plane = rng.uniform(0, 255, (64, 64))
    table = build_integral(plane)
    for top in range(0, 56, 7):
        for left in range(0, 56, 7):
            assert box_sum(table, top, left, 9, 9) == pytest.approx(
                naive_box_sum(plane, top, left, 9, 9), rel=1e-12
            )


def test_out_of_bounds_window():
    table = build_integral(np.ones((4, 4)))
    with pytest.raises(ValueError):
        box_sum(table, 2, 2, 3, 3)
    with pytest.raises(ValueError):
        box_sum(table, -1, 0, 2, 2)


def test_product_variant_dim_mismatch():
    with pytest.raises(ValueError):
        build_integral_product(np.ones((2, 2)), np.ones((3, 2)))


def naive_moments(x, y, win, stride):
    rows = range(0, x.shape[0] - win + 1, stride)
    cols = range(0, x.shape[1] - win + 1, stride)
    shape = (len(rows), len(cols))
    mu_x = np.zeros(shape)
    mu_y = np.zeros(shape)
    var_x = np.zeros(shape)
    var_y = np.zeros(shape)
    cov = np.zeros(shape)
    for a, top in enumerate(rows):
        for b, left in enumerate(cols):
            wx = x[top : top + win, left : left + win]
            wy = y[top : top + win, left : left + win]
            mu_x[a, b] = wx.mean()
            mu_y[a, b] = wy.mean()
            var_x[a, b] = wx.var()
            var_y[a, b] = wy.var()
            cov[a, b] = ((wx - wx.mean()) * (wy - wy.mean())).mean()
    return mu_x, mu_y, var_x, var_y, cov


def test_windowed_moments_match_naive(rng):
    x = rng.uniform(0, 255, (40, 40))
    y = x + rng.normal(0, 20, (40, 40))
    m = windowed_moments(x, y, 9, 1)
    omx, omy, ovx, ovy, ocov = naive_moments(x, y, 9, 1)
    for got, want in ((m.mu_x, omx), (m.mu_y, omy), (m.var_x, ovx), (m.var_y, ovy), (m.cov_xy, ocov)):
        assert np.allclose(got, want, rtol=1e-6, atol=1e-9)


def test_moments_x_equals_y(rng):
    x = rng.uniform(0, 255, (20, 20))
    m = windowed_moments(x, x, 5)
    assert np.allclose(m.cov_xy, m.var_x, rtol=1e-9, atol=1e-9)
    assert np.allclose(m.var_x, m.var_y)


def test_moments_constant_windows():
    x = np.full((12, 12), 7.0)
    m = windowed_moments(x, x, 4, 2)
    assert np.all(m.var_x == 0.0)
    assert np.all(m.var_y == 0.0)
    assert np.allclose(m.mu_x, 7.0)


def test_moments_shape_and_errors(rng):
    x = rng.uniform(0, 1, (10, 10))
    with pytest.raises(ValueError):
        windowed_moments(x, x[:9], 3)
    with pytest.raises(ValueError):
        windowed_moments(x, x, 11)
    m = windowed_moments(x, x, 3, 2)
    assert m.mu_x.shape == (4, 4)


def test_box_sum_linearity(rng):
    x = rng.uniform(-5, 5, (20, 20))
    y = rng.uniform(-5, 5, (20, 20))
    a, b = 2.5, -1.25
    combined = build_integral(a * x + b * y)
    tx, ty = build_integral(x), build_integral(y)
    for top, left, h, w in ((0, 0, 20, 20), (3, 5, 7, 9), (10, 10, 1, 5)):
        lhs = box_sum(combined, top, left, h, w)
        rhs = a * box_sum(tx, top, left, h, w) + b * box_sum(ty, top, left, h, w)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_cauchy_schwarz_over_windows(rng):
    for trial in range(5):
        x = rng.uniform(0, 255, (24, 24))
        y = rng.uniform(0, 255, (24, 24))
        m = windowed_moments(x, y, 6, 3)
        assert np.all(m.var_x >= 0)
        assert np.all(np.abs(m.cov_xy) <= np.sqrt(m.var_x * m.var_y) + 1e-9)


def test_box_filter_3x3_matches_clipped_sums(rng):
    plane = rng.uniform(-3, 3, (9, 13))
    got = box_filter_3x3(plane)
    want = np.zeros_like(plane)
    h, w = plane.shape
    for r in range(h):
        for c in range(w):
            total = 0.0
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if 0 <= r + dr < h and 0 <= c + dc < w:
                        total += plane[r + dr, c + dc]
            want[r, c] = total
    assert np.allclose(got, want, atol=1e-10)


def test_squared_variant(rng):
    plane = rng.uniform(-4, 4, (8, 8))
    assert np.allclose(build_integral_squared(plane), build_integral(plane**2))

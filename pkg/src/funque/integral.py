"""Integral images (summed-area tables) and windowed moments.

These replace convolution wherever a feature only needs windowed sums:
once the (H+1) x (W+1) prefix table exists, any box sum is four lookups,
independent of the window size. Accumulation is always float64; prefix
sums over megapixel planes lose too much precision in single precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def build_integral(plane: np.ndarray) -> np.ndarray:
    """Prefix-sum table with a zero first row and column.

    table[i, j] equals the sum of plane over rows < i and cols < j.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    table = np.zeros((h + 1, w + 1), dtype=np.float64)
    table[1:, 1:] = plane.cumsum(axis=0).cumsum(axis=1)
    return table


def build_integral_squared(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    return build_integral(plane * plane)


def build_integral_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return build_integral(x * y)


def box_sum(table: np.ndarray, top: int, left: int, height: int, width: int) -> float:
    """Sum of the source over rows [top, top+height) x cols [left, left+width)."""
    h, w = table.shape[0] - 1, table.shape[1] - 1
    if top < 0 or left < 0 or height < 0 or width < 0 or top + height > h or left + width > w:
        raise ValueError(
            f"window (top={top}, left={left}, h={height}, w={width}) "
            f"out of bounds for {h}x{w} source"
        )
    return float(
        table[top + height, left + width]
        - table[top, left + width]
        - table[top + height, left]
        + table[top, left]
    )


def _strided_box_sums(table: np.ndarray, win: int, stride: int) -> np.ndarray:
    h, w = table.shape[0] - 1, table.shape[1] - 1
    rows = np.arange(0, h - win + 1, stride)
    cols = np.arange(0, w - win + 1, stride)
    return (
        table[np.ix_(rows + win, cols + win)]
        - table[np.ix_(rows, cols + win)]
        - table[np.ix_(rows + win, cols)]
        + table[np.ix_(rows, cols)]
    )


@dataclass
class MomentMaps:
    """Per-window means, variances and covariance for an image pair."""

    mu_x: np.ndarray
    mu_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    cov_xy: np.ndarray


def windowed_moments(x: np.ndarray, y: np.ndarray, win: int, stride: int = 1) -> MomentMaps:
    """Window statistics for every win x win window at the given stride.

    Built from three integral images instead of five convolutions.
    Variances are floored at zero: catastrophic cancellation can leave
    tiny negatives that would poison square roots downstream.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if win > min(x.shape):
        raise ValueError(f"window {win} exceeds plane {x.shape}")
    if win < 1 or stride < 1:
        raise ValueError("win and stride must be positive")
    n = float(win * win)
    mu_x = _strided_box_sums(build_integral(x), win, stride) / n
    mu_y = _strided_box_sums(build_integral(y), win, stride) / n
    ex2 = _strided_box_sums(build_integral_squared(x), win, stride) / n
    ey2 = _strided_box_sums(build_integral_squared(y), win, stride) / n
    exy = _strided_box_sums(build_integral_product(x, y), win, stride) / n
    var_x = np.maximum(ex2 - mu_x * mu_x, 0.0)
    var_y = np.maximum(ey2 - mu_y * mu_y, 0.0)
    cov_xy = exy - mu_x * mu_y
    return MomentMaps(mu_x, mu_y, var_x, var_y, cov_xy)


def box_filter_3x3(plane: np.ndarray) -> np.ndarray:
    """Same-size 3x3 box sums with windows clipped at the borders.

    Equals dense convolution with a zero-padded 3x3 ones kernel, but costs
    four lookups per site via the integral table.
    """
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    table = build_integral(plane)
    r0 = np.clip(np.arange(h) - 1, 0, h)
    r1 = np.clip(np.arange(h) + 2, 0, h)
    c0 = np.clip(np.arange(w) - 1, 0, w)
    c1 = np.clip(np.arange(w) + 2, 0, w)
    return (
        table[np.ix_(r1, c1)] - table[np.ix_(r0, c1)] - table[np.ix_(r1, c0)] + table[np.ix_(r0, c0)]
    )

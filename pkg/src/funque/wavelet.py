"""Orthonormal 2-D wavelet pyramids (Haar and Db2) and subband weighting.

The Haar analysis of a 2x2 block (a b / c d) is

    A = (a+b+c+d)/2   H = (a+b-c-d)/2   V = (a-b+c-d)/2   D = (a-b-c+d)/2

which is the orthonormal (1/sqrt(2)-normalized) convention: energy is
conserved exactly and the transpose is the inverse. Deeper levels recurse
on A. Odd dimensions are edge-replicated to even at each level, so the
level-k subbands measure ceil(n / 2^k) per axis.

Subband weighting applies one scalar gain per detail subband, either from
the analytic CSF evaluated at each band's center frequency ("li") or from
a checked-in table of CDF 9/7 visual sensitivities ("watson"). The
approximation band is left unweighted so low-pass consumers (motion, the
approximation-band VIF variants) see unscaled luma statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .csf import csf_value

MAX_LEVELS = 4

_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)
# Daubechies-2 orthonormal analysis pair
DB2_LO = np.array(
    [(1 + _SQRT3), (3 + _SQRT3), (3 - _SQRT3), (1 - _SQRT3)], dtype=np.float64
) / (4.0 * _SQRT2)
DB2_HI = np.array([DB2_LO[3], -DB2_LO[2], DB2_LO[1], -DB2_LO[0]], dtype=np.float64)

SUBBAND_NAMES = ("h", "v", "d")


class Subbands(NamedTuple):
    h: np.ndarray
    v: np.ndarray
    d: np.ndarray


@dataclass
class WaveletPyramid:
    """Detail subbands per level plus the residual approximation chain.

    `approx_chain[k-1]` is the level-k approximation band; the public
    `approx` is the deepest one. Keeping the intermediate approximations
    costs nothing (the analysis computes them anyway) and lets scale-style
    features read shallower low-pass bands without re-transforming.
    """

    wavelet: str
    bands: list[Subbands]
    approx_chain: list[np.ndarray]

    @property
    def n_levels(self) -> int:
        return len(self.bands)

    @property
    def approx(self) -> np.ndarray:
        return self.approx_chain[-1]


def _pad_even(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    if h % 2 == 0 and w % 2 == 0:
        return plane
    return np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")


def _haar_level(plane: np.ndarray):
    plane = _pad_even(plane)
    a = plane[0::2, 0::2]
    b = plane[0::2, 1::2]
    c = plane[1::2, 0::2]
    d = plane[1::2, 1::2]
    approx = (a + b + c + d) / 2.0
    hband = (a + b - c - d) / 2.0
    vband = (a - b + c - d) / 2.0
    dband = (a - b - c + d) / 2.0
    return approx, Subbands(hband, vband, dband)


def _db2_level(plane: np.ndarray):
    plane = _pad_even(plane)
    lo_rows = ndimage.correlate1d(plane, DB2_LO, axis=1, mode="reflect")[:, 0::2]
    hi_rows = ndimage.correlate1d(plane, DB2_HI, axis=1, mode="reflect")[:, 0::2]
    approx = ndimage.correlate1d(lo_rows, DB2_LO, axis=0, mode="reflect")[0::2, :]
    vband = ndimage.correlate1d(hi_rows, DB2_LO, axis=0, mode="reflect")[0::2, :]
    hband = ndimage.correlate1d(lo_rows, DB2_HI, axis=0, mode="reflect")[0::2, :]
    dband = ndimage.correlate1d(hi_rows, DB2_HI, axis=0, mode="reflect")[0::2, :]
    return approx, Subbands(hband, vband, dband)


_LEVEL_FN = {"haar": _haar_level, "db2": _db2_level}


def wavelet_pyramid(plane: np.ndarray, wavelet: str = "haar", levels: int = 1) -> WaveletPyramid:
    """Decompose a plane into `levels` of detail subbands plus A_L."""
    if wavelet not in _LEVEL_FN:
        raise ValueError(f"unsupported wavelet {wavelet!r}; expected 'haar' or 'db2'")
    if not 1 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must be in [1, {MAX_LEVELS}], got {levels}")
    plane = np.asarray(plane, dtype=np.float64)
    if min(plane.shape) < 2**levels:
        raise ValueError(f"plane {plane.shape} too small for {levels} levels")
    step = _LEVEL_FN[wavelet]
    bands: list[Subbands] = []
    chain: list[np.ndarray] = []
    approx = plane
    for _ in range(levels):
        approx, detail = step(approx)
        bands.append(detail)
        chain.append(approx)
    return WaveletPyramid(wavelet=wavelet, bands=bands, approx_chain=chain)


def haar_synthesize(pyr: WaveletPyramid) -> np.ndarray:
    """Invert a Haar pyramid (transpose of the orthonormal analysis).

    If odd dimensions forced edge padding during analysis, the padded-even
    plane is what comes back.
    """
    if pyr.wavelet != "haar":
        raise ValueError("synthesis is only provided for Haar pyramids")
    plane = pyr.approx
    for k in reversed(range(pyr.n_levels)):
        detail = pyr.bands[k]
        if plane.shape != detail.h.shape:
            plane = plane[: detail.h.shape[0], : detail.h.shape[1]]
        a = (plane + detail.h + detail.v + detail.d) / 2.0
        b = (plane + detail.h - detail.v - detail.d) / 2.0
        c = (plane - detail.h + detail.v - detail.d) / 2.0
        d = (plane - detail.h - detail.v + detail.d) / 2.0
        up = np.empty((2 * a.shape[0], 2 * a.shape[1]), dtype=np.float64)
        up[0::2, 0::2] = a
        up[0::2, 1::2] = b
        up[1::2, 0::2] = c
        up[1::2, 1::2] = d
        plane = up
    return plane


def approx_band(pyr: WaveletPyramid, level: int) -> np.ndarray:
    """Level-`level` approximation band, decomposing deeper on demand."""
    if level < 1:
        raise ValueError("level must be >= 1")
    if level <= pyr.n_levels:
        return pyr.approx_chain[level - 1]
    step = _LEVEL_FN[pyr.wavelet]
    approx = pyr.approx
    for _ in range(level - pyr.n_levels):
        approx, _detail = step(approx)
    return approx


def li_subband_weights(levels: int, pixels_per_degree: float) -> dict:
    """CSF gains at each detail band's center frequency.

    The level-k bands sit at f_k = ppd * 2^-(k+1) cycles/degree; the
    diagonal band's energy lies along the frequency-plane diagonal, a
    factor sqrt(2) further out.
    """
    weights = {}
    for k in range(1, levels + 1):
        f_k = pixels_per_degree * 2.0 ** -(k + 1)
        w_hv = csf_value(f_k)
        w_d = csf_value(f_k * math.sqrt(2.0))
        weights[(k, "h")] = w_hv
        weights[(k, "v")] = w_hv
        weights[(k, "d")] = w_d
    return weights


def _load_watson_table() -> dict:
    table = {}
    text = resources.files("funque.data").joinpath("watson_subband_weights.txt").read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        level_s, band, weight_s = line.split()
        table[(int(level_s), band)] = float(weight_s)
    return table


_WATSON_TABLE: dict | None = None


def watson_subband_weights(levels: int) -> dict:
    global _WATSON_TABLE
    if _WATSON_TABLE is None:
        _WATSON_TABLE = _load_watson_table()
    weights = {}
    for k in range(1, levels + 1):
        for band in SUBBAND_NAMES:
            try:
                weights[(k, band)] = _WATSON_TABLE[(k, band)]
            except KeyError:
                raise ValueError(f"no Watson weight for level {k} band {band!r}") from None
    return weights


def subband_weights(scheme: str, levels: int, pixels_per_degree: float) -> dict:
    if scheme == "li_sw":
        return li_subband_weights(levels, pixels_per_degree)
    if scheme == "watson_sw":
        return watson_subband_weights(levels)
    raise ValueError(f"unknown subband weighting scheme {scheme!r}")


def subband_weighting(
    pyr: WaveletPyramid, scheme: str, pixels_per_degree: float
) -> WaveletPyramid:
    """Scale each detail subband by its scheme weight (approx untouched)."""
    weights = subband_weights(scheme, pyr.n_levels, pixels_per_degree)
    return apply_subband_weights(pyr, weights)


def apply_subband_weights(pyr: WaveletPyramid, weights: dict) -> WaveletPyramid:
    bands = []
    for k, detail in enumerate(pyr.bands, start=1):
        try:
            scaled = Subbands(
                detail.h * weights[(k, "h")],
                detail.v * weights[(k, "v")],
                detail.d * weights[(k, "d")],
            )
        except KeyError as err:
            raise ValueError(f"missing subband weight for {err.args[0]}") from None
        bands.append(scaled)
    return WaveletPyramid(wavelet=pyr.wavelet, bands=bands, approx_chain=list(pyr.approx_chain))

"""Conventional per-feature pipeline used as the speed baseline.

This computes comparable quality features the pre-unification way: each
feature owns its transform. Spatial-domain VIF runs at four scales with
separable Gaussian windows (17/9/5/3 taps) and convolution-based moments;
the detail-loss score runs on its own 4-level Db2 wavelet with Watson
subband weights and a dense 3x3 masking convolution; motion blurs the
full-resolution luma and takes the mean absolute frame difference.

It exists so the speedup of the shared-transform pipeline can be measured
against an honestly implemented conventional one on the same hardware;
it is not a reimplementation of any particular published model.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import features as features_mod
from . import wavelet as wavelet_mod

VIF_SCALE_WINDOWS = (17, 9, 5, 3)
_EPS = 1e-10


def _gaussian_taps(n: int) -> np.ndarray:
    sigma = n / 5.0
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    taps = np.exp(-0.5 * (x / sigma) ** 2)
    return taps / taps.sum()


def _sep_filter(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(plane, taps, axis=0, mode="reflect")
    return ndimage.correlate1d(out, taps, axis=1, mode="reflect")


def vif_spatial_scales(ref: np.ndarray, dis: np.ndarray) -> list[float]:
    """Convolution-based pixel-domain VIF ratio at each of four scales."""
    ref = np.asarray(ref, dtype=np.float64)
    dis = np.asarray(dis, dtype=np.float64)
    ratios = []
    for scale, win in enumerate(VIF_SCALE_WINDOWS):
        taps = _gaussian_taps(win)
        if scale > 0:
            ref = _sep_filter(ref, taps)[::2, ::2]
            dis = _sep_filter(dis, taps)[::2, ::2]
        mu_x = _sep_filter(ref, taps)
        mu_y = _sep_filter(dis, taps)
        var_x = np.maximum(_sep_filter(ref * ref, taps) - mu_x * mu_x, 0.0)
        var_y = np.maximum(_sep_filter(dis * dis, taps) - mu_y * mu_y, 0.0)
        cov = _sep_filter(ref * dis, taps) - mu_x * mu_y
        valid = var_x >= _EPS
        gain = np.where(valid, cov / (var_x + _EPS), 0.0)
        noise = np.maximum(var_y - gain * cov, 0.0)
        num = np.where(valid, np.log2(1.0 + gain * gain * var_x / (noise + 2.0)), 0.0).sum()
        den = np.where(valid, np.log2(1.0 + var_x / 2.0), 0.0).sum()
        ratios.append(float(num / den) if den > 0 else 1.0)
    return ratios


def dlm_conventional(ref: np.ndarray, dis: np.ndarray) -> float:
    """Detail-loss score with its own 4-level Db2 transform and dense masking."""
    pyr_ref = wavelet_mod.wavelet_pyramid(ref, "db2", 4)
    pyr_dis = wavelet_mod.wavelet_pyramid(dis, "db2", 4)
    weights = wavelet_mod.watson_subband_weights(4)
    pyr_ref = wavelet_mod.apply_subband_weights(pyr_ref, weights)
    pyr_dis = wavelet_mod.apply_subband_weights(pyr_dis, weights)
    inter = features_mod.dlm_decouple(pyr_ref, pyr_dis)
    kernel = np.ones((3, 3), dtype=np.float64)
    kernel[1, 1] = 2.0
    numerator = 0.0
    denominator = 0.0
    for rest, add, ref_bands in zip(inter.restored, inter.additive, pyr_ref.bands):
        activity = np.abs(add.h) + np.abs(add.v) + np.abs(add.d)
        threshold = (
            ndimage.convolve(activity, kernel, mode="constant", cval=0.0)
            / features_mod.DLM_MASK_DIVISOR
        )
        for band_rest, band_ref in zip(rest, ref_bands):
            masked = np.maximum(np.abs(band_rest) - threshold, 0.0)
            numerator += features_mod._minkowski_pool(masked)
            denominator += features_mod._minkowski_pool(band_ref)
    if denominator == 0.0:
        raise features_mod.DegenerateReferenceError("blank reference")
    return float(np.clip(numerator / denominator, 0.0, 1.0))


def conventional_frame_features(
    ref: np.ndarray, dis: np.ndarray, prev_ref_blurred: np.ndarray | None
):
    """All baseline features for one frame pair.

    Returns (feature dict, blurred reference) so the caller can chain the
    motion state exactly like the shared-transform pipeline does.
    """
    taps = _gaussian_taps(5)
    blurred = _sep_filter(np.asarray(ref, dtype=np.float64), taps)
    motion = 0.0
    if prev_ref_blurred is not None:
        motion = float(np.abs(blurred - prev_ref_blurred).mean())
    values = {"dlm": dlm_conventional(ref, dis), "motion": motion}
    for k, ratio in enumerate(vif_spatial_scales(ref, dis)):
        values[f"vif_scale{k}"] = ratio
    return values, blurred

"""Quality features computed on shared wavelet pyramids.

Four families, all consuming the same per-frame transform output:

* structural similarity from wavelet coefficients (mean pooled, or
  coefficient-of-variation pooled for the enhanced variant),
* the detail-loss score (decoupling, contrast masking, Minkowski pooling),
* visual information fidelity in several flavors (scalar / vector GSM,
  edge, approximation, and per-scale low-pass variants),
* motion as the mean absolute difference of successive reference
  approximation bands.

Identity contracts: for identical inputs SSIM = 1, the enhanced-SSIM
dispersion = 0, detail loss = 1, every VIF ratio = 1, and motion of a
static sequence = 0.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass

import numpy as np

from . import integral
from .wavelet import Subbands, WaveletPyramid, approx_band

_EPS = 1e-10
_COS_1DEG_SQ = math.cos(math.radians(1.0)) ** 2


class DegenerateReferenceError(ValueError):
    """The reference carries no detail energy where some is required."""


# ---------------------------------------------------------------------------
# wavelet-domain local statistics and SSIM


@dataclass
class LocalStats:
    """Block statistics over disjoint 2^L x 2^L blocks, one entry per block."""

    mu_x: np.ndarray
    mu_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    cov_xy: np.ndarray


@dataclass(frozen=True)
class SsimConsts:
    c1: float = (0.01 * 255.0) ** 2
    c2: float = (0.03 * 255.0) ** 2

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("SSIM stabilizers must be positive")


DEFAULT_SSIM_CONSTS = SsimConsts()


def _block_reduce_sum(arr: np.ndarray, factor: int, out_shape) -> np.ndarray:
    """Sum over disjoint factor x factor blocks, zero-padding any ragged edge."""
    if factor == 1:
        res = arr
    else:
        h, w = arr.shape
        fh, fw = out_shape[0] * factor, out_shape[1] * factor
        if (h, w) != (fh, fw):
            padded = np.zeros((fh, fw), dtype=np.float64)
            padded[:h, :w] = arr
            arr = padded
        res = arr.reshape(out_shape[0], factor, out_shape[1], factor).sum(axis=(1, 3))
    if res.shape != tuple(out_shape):
        res = res[: out_shape[0], : out_shape[1]]
    return res


def wd_local_stats(pyr_x: WaveletPyramid, pyr_y: WaveletPyramid, levels: int) -> LocalStats:
    """Block means/variances/covariance straight from Haar coefficients.

    Orthonormality makes the detail energy inside each dyadic block equal
    the block's pixel-domain variance, so no pixel pass is needed:

        mu      = 2^-L * A_L
        sigma^2 = 2^-2L * sum over levels/bands/block of C^2
        sigma_xy likewise with products of the two inputs' coefficients.
    """
    for pyr in (pyr_x, pyr_y):
        if pyr.wavelet != "haar":
            raise ValueError("local statistics require Haar pyramids")
        if pyr.n_levels < levels:
            raise ValueError(f"pyramid has {pyr.n_levels} levels, need {levels}")
    if pyr_x.approx_chain[levels - 1].shape != pyr_y.approx_chain[levels - 1].shape:
        raise ValueError("pyramids were built from differently sized planes")

    out_shape = pyr_x.approx_chain[levels - 1].shape
    scale_mu = 2.0 ** -levels
    scale_var = 2.0 ** (-2 * levels)
    mu_x = pyr_x.approx_chain[levels - 1] * scale_mu
    mu_y = pyr_y.approx_chain[levels - 1] * scale_mu
    var_x = np.zeros(out_shape, dtype=np.float64)
    var_y = np.zeros(out_shape, dtype=np.float64)
    cov_xy = np.zeros(out_shape, dtype=np.float64)
    for k in range(1, levels + 1):
        factor = 2 ** (levels - k)
        bx, by = pyr_x.bands[k - 1], pyr_y.bands[k - 1]
        for cx, cy in zip(bx, by):
            var_x += _block_reduce_sum(cx * cx, factor, out_shape)
            var_y += _block_reduce_sum(cy * cy, factor, out_shape)
            cov_xy += _block_reduce_sum(cx * cy, factor, out_shape)
    return LocalStats(
        mu_x=mu_x,
        mu_y=mu_y,
        var_x=var_x * scale_var,
        var_y=var_y * scale_var,
        cov_xy=cov_xy * scale_var,
    )


def ssim_map(stats: LocalStats, consts: SsimConsts = DEFAULT_SSIM_CONSTS) -> np.ndarray:
    c1, c2 = consts.c1, consts.c2
    return ((2.0 * stats.mu_x * stats.mu_y + c1) * (2.0 * stats.cov_xy + c2)) / (
        (stats.mu_x**2 + stats.mu_y**2 + c1) * (stats.var_x + stats.var_y + c2)
    )


def wd_ssim(stats: LocalStats, consts: SsimConsts = DEFAULT_SSIM_CONSTS) -> float:
    """Mean-pooled wavelet-domain SSIM."""
    return float(ssim_map(stats, consts).mean())


def wd_essim(stats: LocalStats, consts: SsimConsts = DEFAULT_SSIM_CONSTS) -> float:
    """Coefficient-of-variation pooling of the local SSIM map.

    Dispersion grows with distortion, so larger values mean worse quality;
    the regressor learns the orientation. A zero-mean map (possible only
    for pathological inputs) yields 0 with a warning.
    """
    smap = ssim_map(stats, consts)
    mean = float(smap.mean())
    if mean == 0.0:
        warnings.warn("SSIM map has zero mean; returning 0 for its dispersion")
        return 0.0
    return float(smap.std() / mean)


# ---------------------------------------------------------------------------
# detail-loss score


@dataclass
class DlmIntermediate:
    """Per-subband decoupling products; restored + additive == distorted."""

    restored: list[Subbands]
    additive: list[Subbands]
    masked_restored: list[Subbands] | None = None


def dlm_decouple(pyr_ref: WaveletPyramid, pyr_dis: WaveletPyramid) -> DlmIntermediate:
    """Split each distorted coefficient into restored and additive parts.

    The restored part is gain-limited to the reference (gain clamped to
    [0, 1], zero where the reference is zero). Where the (h, v) detail
    vectors of reference and distorted point within 1 degree of each
    other, the detail is attributed entirely to restoration.
    """
    if pyr_ref.n_levels != pyr_dis.n_levels:
        raise ValueError("pyramids have different level counts")
    restored = []
    additive = []
    for bref, bdis in zip(pyr_ref.bands, pyr_dis.bands):
        if bref.h.shape != bdis.h.shape:
            raise ValueError("pyramids have different subband geometry")
        dot = bref.h * bdis.h + bref.v * bdis.v
        mag = (bref.h**2 + bref.v**2) * (bdis.h**2 + bdis.v**2)
        aligned = (dot >= 0.0) & (dot * dot >= _COS_1DEG_SQ * mag)
        rest_bands = []
        add_bands = []
        for cref, cdis in zip(bref, bdis):
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(cref != 0.0, cdis / np.where(cref != 0.0, cref, 1.0), 0.0)
            gain = np.clip(gain, 0.0, 1.0)
            rest = np.where(aligned, cdis, gain * cref)
            rest_bands.append(rest)
            add_bands.append(cdis - rest)
        restored.append(Subbands(*rest_bands))
        additive.append(Subbands(*add_bands))
    return DlmIntermediate(restored=restored, additive=additive)


DLM_MASK_DIVISOR = 30.0


def dlm_contrast_masking(inter: DlmIntermediate) -> DlmIntermediate:
    """Threshold the restored detail by the local additive activity.

    The masking kernel is a 3x3 all-ones block plus a center delta,
    divided by 30. The ones part is an integral-image box sum and the
    delta leaves the map unchanged, so no convolution is performed.
    """
    masked = []
    for rest, add in zip(inter.restored, inter.additive):
        activity = np.abs(add.h) + np.abs(add.v) + np.abs(add.d)
        threshold = (integral.box_filter_3x3(activity) + activity) / DLM_MASK_DIVISOR
        masked.append(
            Subbands(
                np.maximum(np.abs(rest.h) - threshold, 0.0),
                np.maximum(np.abs(rest.v) - threshold, 0.0),
                np.maximum(np.abs(rest.d) - threshold, 0.0),
            )
        )
    inter.masked_restored = masked
    return inter


DLM_BORDER_CROP = 0.1
DLM_POOL_EXPONENT = 3


def _center_crop(arr: np.ndarray) -> np.ndarray:
    rows = int(DLM_BORDER_CROP * arr.shape[0])
    cols = int(DLM_BORDER_CROP * arr.shape[1])
    return arr[rows : arr.shape[0] - rows, cols : arr.shape[1] - cols]


def _minkowski_pool(arr: np.ndarray) -> float:
    cropped = np.abs(_center_crop(arr))
    return float((cropped**DLM_POOL_EXPONENT).sum() ** (1.0 / DLM_POOL_EXPONENT))


def dlm_score(
    pyr_ref: WaveletPyramid, pyr_dis: WaveletPyramid, weights: dict | None = None
) -> float:
    """Detail-loss score in [0, 1]; 1 means all reference detail restored.

    `weights` carries deferred per-subband CSF gains for configurations
    where the shared transform left the pyramid unweighted. Applying them
    to the decoupled parts is equivalent to weighting the pyramids first,
    because the decoupling gain and alignment test are invariant to a
    positive scaling common to both inputs of a band.
    """
    inter = dlm_decouple(pyr_ref, pyr_dis)
    ref_bands = list(pyr_ref.bands)
    if weights is not None:
        for k in range(len(ref_bands)):
            w = tuple(weights[(k + 1, name)] for name in ("h", "v", "d"))
            inter.restored[k] = Subbands(*(c * wi for c, wi in zip(inter.restored[k], w)))
            inter.additive[k] = Subbands(*(c * wi for c, wi in zip(inter.additive[k], w)))
            ref_bands[k] = Subbands(*(c * wi for c, wi in zip(ref_bands[k], w)))
    dlm_contrast_masking(inter)
    numerator = 0.0
    denominator = 0.0
    for masked, ref in zip(inter.masked_restored, ref_bands):
        for band_masked, band_ref in zip(masked, ref):
            numerator += _minkowski_pool(band_masked)
            denominator += _minkowski_pool(band_ref)
    if denominator == 0.0:
        raise DegenerateReferenceError("reference has no detail energy to restore")
    return float(np.clip(numerator / denominator, 0.0, 1.0))


# ---------------------------------------------------------------------------
# visual information fidelity


@dataclass(frozen=True)
class VifParams:
    noise_variance: float = 2.0
    window: int = 9
    stride: int = 1

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")


DEFAULT_VIF_PARAMS = VifParams()


def vif_channel(bx: np.ndarray, by: np.ndarray, params: VifParams = DEFAULT_VIF_PARAMS):
    """Information numerator/denominator for one coefficient band.

    Windows whose reference variance is below epsilon are skipped from
    both sums: a flat reference carries no information to preserve.
    Returns (0.0, 0.0) when every window is skipped.
    """
    moments = integral.windowed_moments(bx, by, params.window, params.stride)
    valid = moments.var_x >= _EPS
    if not valid.any():
        return 0.0, 0.0
    var_x = moments.var_x[valid]
    var_y = moments.var_y[valid]
    cov = moments.cov_xy[valid]
    gain = cov / (var_x + _EPS)
    noise = np.maximum(var_y - gain * cov, 0.0)
    num = np.log2(1.0 + gain * gain * var_x / (noise + params.noise_variance)).sum()
    den = np.log2(1.0 + var_x / params.noise_variance).sum()
    return float(num), float(den)


def _vector_window_moments(channels_x, channels_y, win: int, stride: int):
    """First and second joint moments of 3-channel fields per window."""
    n = float(win * win)
    sums_x = [integral._strided_box_sums(integral.build_integral(c), win, stride) / n for c in channels_x]
    sums_y = [integral._strided_box_sums(integral.build_integral(c), win, stride) / n for c in channels_y]
    def second(a, b):
        return integral._strided_box_sums(integral.build_integral_product(a, b), win, stride) / n
    shape = sums_x[0].shape
    cov_x = np.empty(shape + (3, 3))
    cov_y = np.empty(shape + (3, 3))
    cov_xy = np.empty(shape + (3, 3))
    for i in range(3):
        for j in range(3):
            if j >= i:
                cov_x[..., i, j] = second(channels_x[i], channels_x[j]) - sums_x[i] * sums_x[j]
                cov_y[..., i, j] = second(channels_y[i], channels_y[j]) - sums_y[i] * sums_y[j]
            else:
                cov_x[..., i, j] = cov_x[..., j, i]
                cov_y[..., i, j] = cov_y[..., j, i]
            cov_xy[..., i, j] = second(channels_x[i], channels_y[j]) - sums_x[i] * sums_y[j]
    return cov_x, cov_y, cov_xy


VECTOR_VIF_WINDOW = 3


def _vif_vector_level(bref: Subbands, bdis: Subbands, params: VifParams):
    """Joint-GSM information ratio terms for one level's three bands."""
    cov_x, cov_y, cov_xy = _vector_window_moments(
        tuple(bref), tuple(bdis), VECTOR_VIF_WINDOW, params.stride
    )
    trace = cov_x[..., 0, 0] + cov_x[..., 1, 1] + cov_x[..., 2, 2]
    valid = trace >= _EPS
    if not valid.any():
        return 0.0, 0.0
    cov_x = cov_x[valid]
    cov_y = cov_y[valid]
    cov_xy = cov_xy[valid]
    eye = np.eye(3)
    reg = cov_x + _EPS * eye
    # gain matrix G = C_xy C_x^-1 (C_x symmetric)
    gain = np.linalg.solve(reg, np.transpose(cov_xy, (0, 2, 1)))
    gain = np.transpose(gain, (0, 2, 1))
    resid = cov_y - gain @ np.transpose(cov_xy, (0, 2, 1))
    resid = 0.5 * (resid + np.transpose(resid, (0, 2, 1)))
    sig = gain @ cov_x @ np.transpose(gain, (0, 2, 1))
    noisy = resid + params.noise_variance * eye
    def logdet(mats):
        eig = np.linalg.eigvalsh(mats)
        return np.log2(np.maximum(eig, _EPS)).sum(axis=-1)
    num = np.maximum(logdet(sig + noisy) - logdet(noisy), 0.0).sum()
    den = np.maximum(
        logdet(cov_x + params.noise_variance * eye)
        - 3.0 * math.log2(params.noise_variance),
        0.0,
    ).sum()
    return float(num), float(den)


VIF_VARIANTS = ("scalar", "vector", "edge", "approx")
_SCALE_RE = re.compile(r"^scale([1-9])$")


def vif_feature(
    pyr_ref: WaveletPyramid,
    pyr_dis: WaveletPyramid,
    variant: str,
    params: VifParams = DEFAULT_VIF_PARAMS,
) -> float:
    """Information-preservation ratio for the requested VIF variant.

    scalar: every detail band; edge: h and v bands; approx: the deepest
    approximation band; scaleK: the level-K approximation band (the
    pyramid decomposes further on demand when K exceeds its levels);
    vector: joint GSM over the three detail bands per level. The ratio is
    1.0 when the denominator is zero (no reference information at all).
    """
    num = 0.0
    den = 0.0
    match = _SCALE_RE.match(variant)
    if match:
        k = int(match.group(1))
        num, den = vif_channel(approx_band(pyr_ref, k), approx_band(pyr_dis, k), params)
    elif variant == "approx":
        num, den = vif_channel(pyr_ref.approx, pyr_dis.approx, params)
    elif variant == "edge":
        for bref, bdis in zip(pyr_ref.bands, pyr_dis.bands):
            for cref, cdis in ((bref.h, bdis.h), (bref.v, bdis.v)):
                n, d = vif_channel(cref, cdis, params)
                num += n
                den += d
    elif variant == "scalar":
        for bref, bdis in zip(pyr_ref.bands, pyr_dis.bands):
            for cref, cdis in zip(bref, bdis):
                n, d = vif_channel(cref, cdis, params)
                num += n
                den += d
    elif variant == "vector":
        for bref, bdis in zip(pyr_ref.bands, pyr_dis.bands):
            n, d = _vif_vector_level(bref, bdis, params)
            num += n
            den += d
    else:
        raise ValueError(f"unknown VIF variant {variant!r}")
    if den == 0.0:
        return 1.0
    return num / den


# ---------------------------------------------------------------------------
# motion


def motion_feature(approx_prev: np.ndarray, approx_cur: np.ndarray) -> float:
    """Mean absolute difference between successive low-pass bands."""
    approx_prev = np.asarray(approx_prev, dtype=np.float64)
    approx_cur = np.asarray(approx_cur, dtype=np.float64)
    if approx_prev.shape != approx_cur.shape:
        raise ValueError(f"shape mismatch {approx_prev.shape} vs {approx_cur.shape}")
    return float(np.abs(approx_cur - approx_prev).mean())


# ---------------------------------------------------------------------------
# feature registry


def _scale_variants():
    return tuple(f"vif_scale{k}" for k in range(1, 5))


FEATURE_NAMES = (
    "dlm",
    "wd_ssim",
    "wd_essim",
    "vif_scalar",
    "vif_vector",
    "vif_edge",
    "vif_approx",
) + _scale_variants() + ("motion",)


def compute_feature(
    name: str,
    pyr_ref: WaveletPyramid,
    pyr_dis: WaveletPyramid,
    prev_ref_approx: np.ndarray | None = None,
    dlm_weights: dict | None = None,
) -> float:
    """Evaluate one named feature on a frame's shared pyramids."""
    if name == "dlm":
        return dlm_score(pyr_ref, pyr_dis, weights=dlm_weights)
    if name in ("wd_ssim", "wd_essim"):
        stats = wd_local_stats(pyr_ref, pyr_dis, pyr_ref.n_levels)
        return wd_ssim(stats) if name == "wd_ssim" else wd_essim(stats)
    if name.startswith("vif_"):
        return vif_feature(pyr_ref, pyr_dis, name[len("vif_") :])
    if name == "motion":
        if prev_ref_approx is None:
            return 0.0
        return motion_feature(prev_ref_approx, pyr_ref.approx)
    raise ValueError(f"unknown feature {name!r}; expected one of {FEATURE_NAMES}")

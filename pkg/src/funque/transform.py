"""The shared front-end transform: SAST rescale, CSF, wavelet pyramid.

Every quality feature consumes the output of `unified_transform`, which
runs once per frame per input. Stage order:

    SAST (optional 2x block-mean downscale)
      -> spatial or frequency CSF filtering (if selected)
      -> wavelet pyramid
      -> subband weighting (if a subband-weighting CSF is selected
         and sharing is enabled)

When a subband-weighting CSF is configured with sharing disabled, the
returned pyramid is unweighted and the weights are applied inside the
detail-loss feature only, which is equivalent there because decoupling
commutes with positive per-band scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import csf as csf_mod
from . import wavelet as wavelet_mod
from .csf import DEFAULT_PIXELS_PER_DEGREE, CsfKernel
from .wavelet import WaveletPyramid

CSF_MODES = ("spatial_filter", "frequency_filter", "li_sw", "watson_sw")
SW_MODES = ("li_sw", "watson_sw")
WAVELETS = ("haar", "db2")


@dataclass(frozen=True)
class TransformConfig:
    wavelet: str = "haar"
    levels: int = 1
    csf: str = "spatial_filter"
    csf_shared: bool = True
    sast: bool = True
    pixels_per_degree: float = DEFAULT_PIXELS_PER_DEGREE

    def __post_init__(self):
        if self.wavelet not in WAVELETS:
            raise ValueError(f"wavelet must be one of {WAVELETS}, got {self.wavelet!r}")
        if not 1 <= self.levels <= wavelet_mod.MAX_LEVELS:
            raise ValueError(f"levels must be in [1, {wavelet_mod.MAX_LEVELS}]")
        if self.csf not in CSF_MODES:
            raise ValueError(f"csf must be one of {CSF_MODES}, got {self.csf!r}")
        if self.csf in ("spatial_filter", "frequency_filter") and not self.csf_shared:
            raise ValueError(f"{self.csf} is applied before the wavelet and must be shared")
        if self.pixels_per_degree <= 0:
            raise ValueError("pixels_per_degree must be positive")

    def to_text(self) -> str:
        return "".join(
            f"{key} = {value}\n"
            for key, value in (
                ("wavelet", self.wavelet),
                ("levels", self.levels),
                ("csf", self.csf),
                ("csf_shared", str(self.csf_shared).lower()),
                ("sast", str(self.sast).lower()),
                ("ppd", self.pixels_per_degree),
            )
        )

    @classmethod
    def from_text(cls, text: str) -> "TransformConfig":
        fields = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            fields[key] = value
        kwargs = {}
        if "wavelet" in fields:
            kwargs["wavelet"] = fields["wavelet"]
        if "levels" in fields:
            kwargs["levels"] = int(fields["levels"])
        if "csf" in fields:
            kwargs["csf"] = fields["csf"]
        for key, name in (("csf_shared", "csf_shared"), ("sast", "sast")):
            if key in fields:
                value = fields[key].lower()
                if value not in ("true", "false"):
                    raise ValueError(f"{key} must be true or false, got {fields[key]!r}")
                kwargs[name] = value == "true"
        if "ppd" in fields:
            kwargs["pixels_per_degree"] = float(fields["ppd"])
        return cls(**kwargs)


def sast_rescale(plane: np.ndarray) -> np.ndarray:
    """Halve resolution by averaging disjoint 2x2 blocks (edge-padded if odd)."""
    plane = wavelet_mod._pad_even(np.asarray(plane, dtype=np.float64))
    return (
        plane[0::2, 0::2] + plane[0::2, 1::2] + plane[1::2, 0::2] + plane[1::2, 1::2]
    ) / 4.0


def unified_transform(
    plane: np.ndarray, cfg: TransformConfig, kernel: CsfKernel | None = None
) -> WaveletPyramid:
    """Run the shared transform on one luma plane.

    `kernel` must be supplied exactly when `cfg.csf == "spatial_filter"`
    (build it once per run with `build_spatial_csf_kernel`).
    """
    if cfg.csf == "spatial_filter":
        if kernel is None:
            raise ValueError("spatial_filter CSF requires a prebuilt kernel")
    elif kernel is not None:
        raise ValueError(f"kernel given but cfg.csf is {cfg.csf!r}")

    plane = np.asarray(plane, dtype=np.float64)
    if cfg.sast:
        plane = sast_rescale(plane)
    if cfg.csf == "spatial_filter":
        plane = csf_mod.apply_spatial_csf(plane, kernel)
    elif cfg.csf == "frequency_filter":
        plane = csf_mod.apply_frequency_csf(plane, cfg.pixels_per_degree)
    pyr = wavelet_mod.wavelet_pyramid(plane, cfg.wavelet, cfg.levels)
    if cfg.csf in SW_MODES and cfg.csf_shared:
        pyr = wavelet_mod.subband_weighting(pyr, cfg.csf, cfg.pixels_per_degree)
    return pyr


def deferred_dlm_weights(cfg: TransformConfig) -> dict | None:
    """Per-band weights the detail-loss feature must apply itself.

    Non-None only for an unshared subband-weighting CSF; every other
    configuration bakes the CSF into the shared pyramid.
    """
    if cfg.csf in SW_MODES and not cfg.csf_shared:
        return wavelet_mod.subband_weights(cfg.csf, cfg.levels, cfg.pixels_per_degree)
    return None


def default_config() -> TransformConfig:
    """The shipping configuration: 1-level Haar, spatial CSF, SAST on."""
    return TransformConfig()


__all__ = [
    "TransformConfig",
    "sast_rescale",
    "unified_transform",
    "deferred_dlm_weights",
    "default_config",
]

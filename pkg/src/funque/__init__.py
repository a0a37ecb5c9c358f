"""funque: full-reference video quality assessment on a shared
HVS-aware wavelet transform, with SVR fusion and a benchmark harness."""

from .csf import (
    CsfKernel,
    apply_frequency_csf,
    apply_spatial_csf,
    build_spatial_csf_kernel,
    csf_value,
)
from .dataset import Dataset, load_dataset
from .evaluation import (
    SelectionSpace,
    cross_validate,
    exhaustive_select,
    fisher_average,
    ops_per_pixel,
    speedup_ratio,
    srocc,
)
from .features import (
    SsimConsts,
    VifParams,
    dlm_score,
    motion_feature,
    vif_feature,
    wd_essim,
    wd_local_stats,
    wd_ssim,
)
from .fusion import (
    DEFAULT_SCHEMA,
    FeatureVector,
    SvrHyper,
    SvrModel,
    aggregate_video_features,
    extract_frame_features,
    extract_sequence_features,
    load_model,
    save_model,
    svr_predict,
    svr_train,
)
from .transform import TransformConfig, default_config, sast_rescale, unified_transform
from .video_io import FrameSource, VideoSpec, open_sequence, read_luma
from .wavelet import WaveletPyramid, haar_synthesize, subband_weighting, wavelet_pyramid

__version__ = "0.1.0"

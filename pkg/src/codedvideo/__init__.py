"""Coded-exposure high-speed video capture and sparse reconstruction."""

from .coded_exposure import (
    Shutter,
    apply_measurement,
    apply_measurement_adjoint,
    code_exposure,
    generate_shutter,
    sampling_stats,
)
from .csc import CscParams, CscResult, reconstruct_csc
from .csc.training import CscTrainConfig, train_filters
from .estimators import (
    CodedExposureSampler,
    ConvolutionalFilterLearner,
    CSCVideoReconstructor,
    PatchVideoReconstructor,
)
from .exceptions import CodedVideoError, FormatError, IngestError, IoError, ParamError, SelectionError
from .metrics import QualityReport, ms_ssim, psnr, report
from .patch import BlockSelectionConfig, PatchConfig, reconstruct_patch, train_ksvd
from .tensor_io import load_frames, read_tensor, save_frames, write_tensor

__version__ = "0.1.0"

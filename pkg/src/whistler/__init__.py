"""Whistler detection in VLF recordings by kernel cross-correlation and CFAR."""

from ._backend import BACKEND
from .detect import CfarConfig, CorrelationSeries, cross_correlate, run_cfar
from .dispersion import DispersionParams, WhistlerKernel, rasterize_kernel, travel_time, whistler_duration
from .errors import DomainError, InvalidArgument, StageError, WhistlerError
from .pipeline import CcswDetector, Detection, DetectionReport, DetectorConfig, run_ccsw
from .preprocess import TransformKind
from .scenegen import SceneLabel, ScenePlan, SceneSpec, generate_scene
from .spectro import Spectrogram, TimeSeries, stft

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CcswDetector", "CfarConfig", "CorrelationSeries", "Detection", "DetectionReport",
    "DetectorConfig", "DispersionParams", "DomainError", "InvalidArgument", "SceneLabel", "ScenePlan",
    "SceneSpec", "Spectrogram", "StageError", "TimeSeries", "TransformKind", "WhistlerError",
    "WhistlerKernel", "cross_correlate", "generate_scene", "rasterize_kernel", "run_cfar", "run_ccsw",
    "stft", "travel_time", "whistler_duration",
]

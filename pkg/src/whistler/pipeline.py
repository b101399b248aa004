"""End-to-end cross-correlation detector.

stft -> crop to the kernel band -> row transform -> [0, 1] scaling ->
correlation with each detection kernel -> CA/OS/TM -> LF fusion ->
0.1 s grouping -> duration estimate from a grid of kernels.

With more than one detection kernel the per-kernel LF decisions are
OR-ed over their common lag range and the merit is the largest
correlation among the kernels.
"""

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .detect import CfarConfig, CfarRun, CorrelationSeries, DecisionSeries, cross_correlate, run_cfar
from .dispersion import DispersionParams, WhistlerKernel, rasterize_kernel
from .errors import InvalidArgument, StageError, WhistlerError
from .preprocess import TransformKind, apply_transform, reference_stats, scale_clamp
from .spectro import Spectrogram, TimeSeries, crop, stft

DEFAULT_GRID = (20.0, 35.0, 50.0, 65.0, 80.0)


@dataclass(frozen=True)
class Detection:
    t_start: float
    t_end: float
    f_lo: float
    f_hi: float
    merit: float
    d0_est: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "t_start_s": round(self.t_start, 6),
            "t_end_s": round(self.t_end, 6),
            "f_lo_hz": round(self.f_lo, 3),
            "f_hi_hz": round(self.f_hi, 3),
            "merit_db": round(self.merit, 6),
            "d0": self.d0_est,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(d["t_start_s"], d["t_end_s"], d["f_lo_hz"], d["f_hi_hz"], d["merit_db"], d.get("d0"))


@dataclass
class DetectionReport:
    source_file: str
    detections: List[Detection]
    config_digest: str = ""
    processing_time: float = 0.0
    sample_duration: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "file": self.source_file,
            "sample_duration_s": round(self.sample_duration, 6),
            "processing_s": round(self.processing_time, 6) if include_timing else None,
            "config_digest": self.config_digest,
            "detections": [det.to_dict() for det in self.detections],
        }
        if not include_timing:
            del d["processing_s"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionReport":
        return cls(
            d["file"],
            [Detection.from_dict(x) for x in d.get("detections", [])],
            d.get("config_digest", ""),
            d.get("processing_s", 0.0) or 0.0,
            d.get("sample_duration_s", 0.0),
        )


@dataclass(frozen=True)
class DetectorConfig:
    transform: str = "zscore"
    cfar: CfarConfig = field(default_factory=CfarConfig)
    detect_d0: Tuple[float, ...] = DEFAULT_GRID
    grid_d0: Tuple[float, ...] = DEFAULT_GRID
    f_n: float = 25e3
    lambda_n: float = 0.35
    f_min: float = 1.5e3
    f_max: float = 9.5e3
    nfft: int = 256
    hop: int = 256
    window: str = "hann"
    resolution: float = 0.1
    linkage: str = "gap"
    band_smoothing: int = 1

    def __post_init__(self):
        TransformKind.parse(self.transform)
        if self.linkage not in LINKAGES:
            raise InvalidArgument(f"linkage must be one of {LINKAGES}")
        if not self.detect_d0 or not self.grid_d0:
            raise InvalidArgument("detection and grid D0 lists must be non-empty")
        if self.resolution <= 0:
            raise InvalidArgument("resolution must be positive")

    def template(self, d0: float = 80.0) -> DispersionParams:
        return DispersionParams(self.f_n, d0, self.lambda_n, self.f_min, self.f_max)

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d["cfar"] = list(self.cfar.as_tuple())
        d["detect_d0"] = list(self.detect_d0)
        d["grid_d0"] = list(self.grid_d0)
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


class DurationEstimate(NamedTuple):
    t_end: float
    d0: float
    clipped: bool


LINKAGES = ("gap", "start")


def group_detections(
    decisions: DecisionSeries,
    series: CorrelationSeries,
    resolution: float = 0.1,
    linkage: str = "gap",
) -> List[Tuple[float, float]]:
    """Collapse positive bins closer than ``resolution`` into single events.

    With ``linkage="gap"`` a positive joins the current cluster when it is
    less than ``resolution`` after the previous positive, so clusters can
    chain.  With ``"start"`` it must be less than ``resolution`` after the
    cluster's first positive.

    Returns ``(time, merit)`` pairs, one per cluster, at the cluster's
    largest correlation value.
    """
    if linkage not in LINKAGES:
        raise InvalidArgument(f"linkage must be one of {LINKAGES}")
    if len(decisions) != len(series):
        raise InvalidArgument("decisions and series are not aligned")
    if resolution <= 0:
        raise InvalidArgument("resolution must be positive")
    idx = np.flatnonzero(decisions.decisions & decisions.valid)
    if idx.size == 0:
        return []
    # compare in bins so that exact multiples of dt do not merge through rounding
    max_gap = resolution / series.dt * (1.0 - 1e-9)
    if linkage == "gap":
        clusters = np.split(idx, np.flatnonzero(np.diff(idx) >= max_gap) + 1)
    else:
        clusters, first = [], 0
        for i in range(1, idx.size + 1):
            if i == idx.size or idx[i] - idx[first] >= max_gap:
                clusters.append(idx[first:i])
                first = i
    times = series.times()
    events = []
    for cluster in clusters:
        best = cluster[np.argmax(series.values_db[cluster])]
        events.append((float(times[best]), float(series.values_db[best])))
    return events


def _kernel_score(spec: np.ndarray, kernel: np.ndarray, lag: int) -> float:
    cols = min(kernel.shape[1], spec.shape[1] - lag)
    k = kernel[:, :cols]
    mass = k.sum()
    if cols <= 0 or mass <= 0:
        return -math.inf
    return float((spec[:, lag:lag + cols] * k).sum() / mass)


def estimate_duration(
    spec: Spectrogram, t: float, grid: Sequence[WhistlerKernel], search_bins: int = 2
) -> DurationEstimate:
    """Pick the grid kernel that best matches the cut starting at ``t``.

    Each kernel is scored by its mass-normalised correlation at lags within
    ``search_bins`` of ``t``.  Kernels running past the end of ``spec`` are
    scored on the part that fits and the result is flagged as clipped.
    """
    if not grid:
        raise InvalidArgument("duration grid is empty")
    j0 = int(round((t - spec.t_start) / spec.dt))
    if not 0 <= j0 < spec.n_time:
        raise InvalidArgument(f"t={t} outside the spectrogram")
    x = spec.power_db
    longest = max(max(k.n_time for k in grid), int(math.ceil(1.0 / spec.dt)))
    clipped = j0 + longest > spec.n_time
    best = None
    for kernel in grid:
        if kernel.n_freq != spec.n_freq:
            raise InvalidArgument("grid kernel frequency rows differ from the spectrogram")
        lags = range(max(0, j0 - search_bins), min(spec.n_time, j0 + search_bins + 1))
        score = max(_kernel_score(x, kernel.matrix, lag) for lag in lags)
        if best is None or score > best[0]:
            best = (score, kernel)
    kernel = best[1]
    return DurationEstimate(t + kernel.duration, kernel.d0, clipped)


@dataclass
class Analysis:
    """Every intermediate product of one detector run."""

    spectrogram: Spectrogram
    cropped: Spectrogram
    scaled: Spectrogram
    series: Dict[float, CorrelationSeries]
    cfar: Dict[float, CfarRun]
    combined: CorrelationSeries
    decisions: DecisionSeries
    detections: List[Detection]


class CcswDetector:
    """Reusable detector; kernels are cached per spectrogram grid."""

    def __init__(self, config: Optional[DetectorConfig] = None):
        self.config = config or DetectorConfig()
        self._kernel_cache: Dict[tuple, Tuple[List[WhistlerKernel], List[WhistlerKernel]]] = {}

    def kernels(self, cropped: Spectrogram):
        key = (cropped.dt, cropped.df, cropped.f_start, cropped.n_freq)
        if key not in self._kernel_cache:
            cfg = self.config

            def build(d0):
                return rasterize_kernel(
                    cfg.template(d0), cropped.dt, cropped.df, cfg.band_smoothing,
                    f_start=cropped.f_start, n_freq=cropped.n_freq,
                )

            detect = [build(d0) for d0 in cfg.detect_d0]
            grid = sorted((build(d0) for d0 in cfg.grid_d0), key=lambda k: (k.duration, k.d0))
            self._kernel_cache[key] = (detect, grid)
        return self._kernel_cache[key]

    def analyse(self, ts: TimeSeries, kernels: Optional[Sequence[WhistlerKernel]] = None) -> Analysis:
        cfg = self.config
        with _stage("stft"):
            spec = stft(ts, cfg.nfft, cfg.hop, cfg.window)
        with _stage("crop"):
            cropped = crop(spec, cfg.f_min, cfg.f_max)
        with _stage("preprocess"):
            pre = apply_transform(cropped, cfg.transform)
        with _stage("scale"):
            mu, sigma = reference_stats(pre)
            scaled = scale_clamp(pre, mu, sigma)
        with _stage("kernel"):
            detect_kernels, grid = self.kernels(cropped)
            if kernels is not None:
                detect_kernels = list(kernels)
        with _stage("correlate"):
            series = {k.d0: cross_correlate(scaled, k) for k in detect_kernels}
        with _stage("cfar"):
            runs = {d0: run_cfar(s, cfg.cfar) for d0, s in series.items()}
            combined, decisions = _combine(series, runs)
        with _stage("group"):
            events = group_detections(decisions, combined, cfg.resolution, cfg.linkage)
        with _stage("duration"):
            detections = []
            for t, merit in events:
                est = estimate_duration(scaled, t, grid)
                detections.append(Detection(t, est.t_end, cfg.f_min, cfg.f_max, merit, est.d0))
        return Analysis(spec, cropped, scaled, series, runs, combined, decisions, detections)

    def detect(self, ts: TimeSeries, source_file: str = "") -> DetectionReport:
        start = time.perf_counter()
        analysis = self.analyse(ts)
        elapsed = time.perf_counter() - start
        return DetectionReport(
            source_file, analysis.detections, self.config.digest(), elapsed, ts.duration
        )


def _combine(series: Dict[float, CorrelationSeries], runs: Dict[float, CfarRun]):
    n = min(len(s) for s in series.values())
    keys = list(series)
    values = np.max(np.vstack([series[k].values_db[:n] for k in keys]), axis=0)
    fired = np.zeros(n, dtype=bool)
    valid = np.zeros(n, dtype=bool)
    for k in keys:
        lf = runs[k].lf
        fired |= lf.decisions[:n] & lf.valid[:n]
        valid |= lf.valid[:n]
    first = series[keys[0]]
    combined = CorrelationSeries(
        values, first.dt, first.t_start, max(s.kernel_duration for s in series.values())
    )
    if len(keys) == 1:
        return combined, runs[keys[0]].lf
    thresholds = np.full(n, np.nan)
    return combined, DecisionSeries(fired, thresholds, valid)


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (WhistlerError, ValueError)) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_ccsw(
    ts: TimeSeries,
    kernel,
    transform="zscore",
    cfg: Optional[CfarConfig] = None,
    *,
    grid_d0: Sequence[float] = DEFAULT_GRID,
    resolution: float = 0.1,
    source_file: str = "",
) -> DetectionReport:
    """Detect whistlers in ``ts`` with one kernel (or a list of kernels).

    Kernel shape parameters and band are taken from the first kernel; the
    kernels are re-registered on the cropped spectrogram grid.
    """
    kernels = list(kernel) if isinstance(kernel, (list, tuple)) else [kernel]
    p = kernels[0].params
    config = DetectorConfig(
        transform=TransformKind.parse(transform).value,
        cfar=cfg or CfarConfig(),
        detect_d0=tuple(k.d0 for k in kernels),
        grid_d0=tuple(grid_d0),
        f_n=p.f_n,
        lambda_n=p.lambda_n,
        f_min=p.f_min,
        f_max=p.f_max,
        resolution=resolution,
    )
    return CcswDetector(config).detect(ts, source_file)

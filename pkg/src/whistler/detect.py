"""Kernel cross-correlation, static threshold statistics and the CFAR family.

CFAR noise estimates are formed on linear power; the ``x_db`` offset is
applied in dB.  Cells whose window does not fit inside the series are
left undecided (``valid`` is False there) and never count as detections.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .dispersion import WhistlerKernel
from .errors import InvalidArgument, ShapeMismatch, WindowTooLarge
from .spectro import DB_FLOOR, Spectrogram


@dataclass(frozen=True, eq=False)
class CorrelationSeries:
    values_db: np.ndarray
    dt: float
    t_start: float = 0.0
    kernel_duration: float = 0.0

    def __len__(self):
        return self.values_db.size

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.values_db.size)

    def power(self) -> np.ndarray:
        return 10.0 ** (self.values_db / 10.0)

    @classmethod
    def from_power(cls, power, dt=1.0, t_start=0.0, kernel_duration=0.0):
        power = np.asarray(power, dtype=np.float64)
        return cls(10.0 * np.log10(np.maximum(power, 0.0) + DB_FLOOR), dt, t_start, kernel_duration)


def cross_correlate(spec: Spectrogram, kernel: WhistlerKernel) -> CorrelationSeries:
    """Valid-mode correlation of a [0, 1]-scaled spectrogram with a kernel, in dB."""
    if spec.n_freq != kernel.n_freq or not math.isclose(spec.df, kernel.df, rel_tol=1e-9):
        raise ShapeMismatch(
            f"spectrogram has {spec.n_freq} rows at {spec.df} Hz, "
            f"kernel has {kernel.n_freq} rows at {kernel.df} Hz"
        )
    if not math.isclose(spec.dt, kernel.dt, rel_tol=1e-9):
        raise ShapeMismatch(f"time resolution differs: {spec.dt} vs {kernel.dt}")
    if spec.n_time < kernel.n_time:
        raise InvalidArgument(
            f"spectrogram ({spec.n_time} bins) shorter than kernel ({kernel.n_time} bins)"
        )
    raw = _backend.xcorr_valid(spec.power_db, kernel.matrix)
    return CorrelationSeries.from_power(raw, spec.dt, spec.t_start, kernel.duration)


# -- static detector ---------------------------------------------------------


@dataclass
class ThresholdStats:
    mu_i: float
    sigma_i: float
    mu_ti: float
    sigma_ti: float
    thresholds: np.ndarray
    p_fa: np.ndarray
    p_d: np.ndarray
    best_threshold: float = field(init=False)

    def __post_init__(self):
        self.best_threshold = float(self.thresholds[np.argmax(self.p_d - self.p_fa)])

    @property
    def curve(self):
        return list(zip(self.thresholds.tolist(), self.p_fa.tolist(), self.p_d.tolist()))


def target_mask(series: CorrelationSeries, label_times: Sequence[float], halfwidth: float = 0.1):
    """Bins whose lag time is within ``halfwidth`` of a whistler start."""
    t = series.times()
    mask = np.zeros(t.size, dtype=bool)
    for t0 in label_times:
        mask |= np.abs(t - t0) <= halfwidth + 1e-12
    return mask


def threshold_stats(
    series: Sequence[CorrelationSeries],
    truth: Sequence[Sequence],
    halfwidth: float = 0.1,
) -> ThresholdStats:
    """Pool interference and target-plus-interference bins and sweep thresholds.

    ``truth[i]`` holds the labels (objects with ``t0`` or plain start
    times) of ``series[i]``.  P_fa and P_D at threshold T are the fractions
    of each population strictly above T; every observed value is a
    candidate threshold.
    """
    if len(series) != len(truth):
        raise InvalidArgument("need one label list per correlation series")
    inter, target = [], []
    for s, labels in zip(series, truth):
        times = [getattr(lab, "t0", lab) for lab in labels]
        mask = target_mask(s, times, halfwidth)
        target.append(s.values_db[mask])
        inter.append(s.values_db[~mask])
    inter = np.concatenate(inter) if inter else np.empty(0)
    target = np.concatenate(target) if target else np.empty(0)
    if inter.size == 0 or target.size == 0:
        raise InvalidArgument("both interference and target populations must be non-empty")
    thresholds = np.unique(np.concatenate((inter, target)))
    inter_sorted = np.sort(inter)
    target_sorted = np.sort(target)
    p_fa = 1.0 - np.searchsorted(inter_sorted, thresholds, side="right") / inter.size
    p_d = 1.0 - np.searchsorted(target_sorted, thresholds, side="right") / target.size
    return ThresholdStats(
        float(inter.mean()), float(inter.std()), float(target.mean()), float(target.std()),
        thresholds, p_fa, p_d,
    )


# -- CFAR --------------------------------------------------------------------


@dataclass(frozen=True)
class CfarConfig:
    """Adaptive detector settings.

    ``n`` noise and ``g`` guard cells on each side of the cell under test,
    ``x_db`` threshold offset above the noise estimate, ``k`` the 1-based
    order statistic for OS, and ``t_s``/``t_l`` the number of cells trimmed
    from the low/high end of the sorted noise set for TM.
    """

    n: int = 12
    g: int = 10
    x_db: float = 0.5
    k: int = 13
    t_s: int = 5
    t_l: int = 3

    def __post_init__(self):
        if self.n < 1 or self.g < 0:
            raise InvalidArgument("need n >= 1 and g >= 0")
        if not 1 <= self.k <= 2 * self.n:
            raise InvalidArgument(f"k={self.k} outside [1, {2 * self.n}]")
        if self.t_s < 0 or self.t_l < 0 or self.t_s + self.t_l >= 2 * self.n:
            raise InvalidArgument(f"trim ({self.t_s}, {self.t_l}) leaves no noise cells")

    @property
    def window(self) -> int:
        return 2 * (self.n + self.g) + 1

    def as_tuple(self):
        return (self.n, self.g, self.x_db, self.k, self.t_s, self.t_l)

    @classmethod
    def parse(cls, text: str) -> "CfarConfig":
        """From ``"N,G,X_dB,k,Ts,Tl"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise InvalidArgument(f"expected N,G,X_dB,k,Ts,Tl, got {text!r}")
        try:
            n, g, k, t_s, t_l = (int(parts[i]) for i in (0, 1, 3, 4, 5))
            x_db = float(parts[2])
        except ValueError:
            raise InvalidArgument(f"malformed CFAR config {text!r}") from None
        return cls(n, g, x_db, k, t_s, t_l)

    def __str__(self):
        return ",".join(f"{v:g}" for v in self.as_tuple())


@dataclass(frozen=True, eq=False)
class DecisionSeries:
    decisions: np.ndarray
    thresholds_db: np.ndarray
    valid: np.ndarray

    def __len__(self):
        return self.decisions.size


def pfa_from_xdb(n: int, x_db: float) -> float:
    """CA-CFAR false-alarm probability for ``n`` noise cells per side and offset ``x_db``."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    m = 2 * n
    return (1.0 / (1.0 + 10.0 ** (x_db / 10.0) / m)) ** m


def xdb_from_pfa(n: int, pfa: float) -> float:
    """Inverse of :func:`pfa_from_xdb`."""
    if not 0 < pfa < 1:
        raise InvalidArgument("pfa must lie in (0, 1)")
    m = 2 * n
    return 10.0 * math.log10(m * (pfa ** (-1.0 / m) - 1.0))


def _decide(series: CorrelationSeries, estimate: np.ndarray, x_db: float) -> DecisionSeries:
    valid = np.isfinite(estimate)
    with np.errstate(divide="ignore", invalid="ignore"):
        thresholds = 10.0 * np.log10(estimate) + x_db
    decisions = valid & (series.values_db > np.where(valid, thresholds, np.inf))
    return DecisionSeries(decisions, thresholds, valid)


def _check_fits(series: CorrelationSeries, cfg: CfarConfig):
    if len(series) < cfg.window:
        raise WindowTooLarge(f"series of {len(series)} bins shorter than CFAR window {cfg.window}")


def ca_cfar(series: CorrelationSeries, cfg: CfarConfig) -> DecisionSeries:
    _check_fits(series, cfg)
    return _decide(series, _backend.cfar_ca(series.power(), cfg.n, cfg.g), cfg.x_db)


def os_cfar(series: CorrelationSeries, cfg: CfarConfig) -> DecisionSeries:
    _check_fits(series, cfg)
    return _decide(series, _backend.cfar_os(series.power(), cfg.n, cfg.g, cfg.k), cfg.x_db)


def tm_cfar(series: CorrelationSeries, cfg: CfarConfig) -> DecisionSeries:
    _check_fits(series, cfg)
    est = _backend.cfar_tm(series.power(), cfg.n, cfg.g, cfg.t_s, cfg.t_l)
    return _decide(series, est, cfg.x_db)


def lf_cfar(ca: DecisionSeries, os: DecisionSeries, tm: DecisionSeries) -> DecisionSeries:
    """Fuse three decisions: OS AND TM where CA is off, OS OR TM where CA fires.

    This is a 2-of-3 majority vote, so the fused threshold is the median of
    the three thresholds.
    """
    if not len(ca) == len(os) == len(tm):
        raise ShapeMismatch("decision series differ in length")
    fused = np.where(ca.decisions, os.decisions | tm.decisions, os.decisions & tm.decisions)
    thresholds = np.median(np.vstack((ca.thresholds_db, os.thresholds_db, tm.thresholds_db)), axis=0)
    return DecisionSeries(fused, thresholds, ca.valid & os.valid & tm.valid)


def static_detect(series: CorrelationSeries, threshold_db: float) -> DecisionSeries:
    thresholds = np.full(len(series), float(threshold_db))
    return DecisionSeries(series.values_db > thresholds, thresholds, np.ones(len(series), bool))


@dataclass
class CfarRun:
    ca: DecisionSeries
    os: DecisionSeries
    tm: DecisionSeries
    lf: DecisionSeries


def run_cfar(series: CorrelationSeries, cfg: CfarConfig) -> CfarRun:
    ca, os_, tm = ca_cfar(series, cfg), os_cfar(series, cfg), tm_cfar(series, cfg)
    return CfarRun(ca, os_, tm, lf_cfar(ca, os_, tm))


def write_decisions_csv(series: CorrelationSeries, dec: DecisionSeries, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t_s", "value_db", "threshold_db", "decision"])
    for t, v, thr, d in zip(series.times(), series.values_db, dec.thresholds_db, dec.decisions):
        thr_text = f"{thr:.6f}" if np.isfinite(thr) else ""
        writer.writerow([f"{t:.6f}", f"{v:.6f}", thr_text, int(d)])

"""Time series container, STFT spectrogram and frequency/time cropping."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import get_window

from .errors import InvalidArgument

DB_FLOOR = 1e-12
DEFAULT_NFFT = 256
DEFAULT_HOP = 256


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray
    fs: float
    channel_id: str = "NS"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidArgument("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("samples contain non-finite values")
        if not self.fs > 0:
            raise InvalidArgument(f"fs must be positive, got {self.fs}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """dB power on a regular grid.

    Row ``i`` is centred on ``f_start + i * df``; column ``j`` is the frame
    starting at ``t_start + j * dt``.
    """

    power_db: np.ndarray
    dt: float
    df: float
    f_start: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        if self.power_db.ndim != 2 or min(self.power_db.shape) < 1:
            raise InvalidArgument("power_db must be a non-empty 2-D matrix")

    @property
    def n_freq(self) -> int:
        return self.power_db.shape[0]

    @property
    def n_time(self) -> int:
        return self.power_db.shape[1]

    @property
    def duration(self) -> float:
        return self.n_time * self.dt

    def freqs(self) -> np.ndarray:
        return self.f_start + self.df * np.arange(self.n_freq)

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_time)

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        return replace(self, power_db=values)


def stft(
    ts: TimeSeries,
    nfft: int = DEFAULT_NFFT,
    hop: int = DEFAULT_HOP,
    window: str = "hann",
) -> Spectrogram:
    """One-sided power spectrogram in dB.

    Power is normalised so that summing the linear power of every bin of a
    frame gives the energy of the windowed frame.
    """
    if nfft < 2 or hop < 1:
        raise InvalidArgument("need nfft >= 2 and hop >= 1")
    x = ts.samples
    if x.size < nfft:
        raise InvalidArgument(f"series of {x.size} samples is shorter than nfft={nfft}")
    n_frames = (x.size - nfft) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(x, nfft)[::hop][:n_frames]
    w = get_window(window, nfft)
    spec = np.fft.rfft(frames * w, axis=1)
    power = (spec.real**2 + spec.imag**2) / nfft
    # interior bins carry their negative-frequency mirror
    if nfft % 2 == 0:
        power[:, 1:-1] *= 2.0
    else:
        power[:, 1:] *= 2.0
    power_db = 10.0 * np.log10(power.T + DB_FLOOR)
    return Spectrogram(np.ascontiguousarray(power_db), hop / ts.fs, ts.fs / nfft, 0.0, 0.0)


def crop(spec: Spectrogram, f_lo: float, f_hi: float) -> Spectrogram:
    """Keep rows whose frequency band overlaps ``[f_lo, f_hi]``.

    A row covers ``[f - df/2, f + df/2)``.  At 156.25 Hz resolution the
    1.5-9.5 kHz band keeps 52 rows.
    """
    if not f_lo < f_hi:
        raise InvalidArgument(f"empty band [{f_lo}, {f_hi}]")
    centres = spec.freqs()
    eps = 1e-9 * spec.df
    keep = np.nonzero((centres + 0.5 * spec.df > f_lo + eps) & (centres - 0.5 * spec.df < f_hi - eps))[0]
    if keep.size == 0:
        raise InvalidArgument(f"band [{f_lo}, {f_hi}] selects no rows")
    lo, hi = keep[0], keep[-1] + 1
    return replace(spec, power_db=spec.power_db[lo:hi], f_start=float(centres[lo]))


def cut_time(spec: Spectrogram, t0: float, duration: float) -> Spectrogram:
    """Columns whose frame starts in ``[t0, t0 + duration)``; may be clipped at the end."""
    if duration <= 0:
        raise InvalidArgument("duration must be positive")
    j0 = max(0, math.ceil((t0 - spec.t_start) / spec.dt - 1e-9))
    n = int(math.floor(duration / spec.dt + 1e-9))
    j1 = min(spec.n_time, j0 + n)
    if j1 <= j0:
        raise InvalidArgument(f"cut at t={t0} lies outside the spectrogram")
    return replace(spec, power_db=spec.power_db[:, j0:j1], t_start=spec.t_start + j0 * spec.dt)

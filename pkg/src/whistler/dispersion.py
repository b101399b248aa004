"""Bernard whistler-dispersion approximation and kernel rasterization.

The travel time of a whistler component at frequency ``f`` is

    t(f) = D0 / ((1 + L) sqrt(f)) * ((1 + L) - (3L - 1) f/fn) / (1 - L f/fn)

with ``fn`` the nose frequency, ``D0`` the zero dispersion and ``L`` the
normalised electron gyrofrequency.  ``t`` is linear in ``D0``.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .errors import DomainError, InvalidArgument

D0_RANGE = (20.0, 80.0)
LAMBDA_RANGE = (0.35, 0.45)


@dataclass(frozen=True)
class DispersionParams:
    """One whistler shape.

    Parameters
    ----------
    f_n : float
        Nose frequency in Hz.
    d0 : float
        Zero dispersion in s^(1/2).
    lambda_n : float
        Normalised electron gyrofrequency, dimensionless in (0, 1).
    f_min, f_max : float
        Frequency band of the whistler in Hz, below the nose.
    """

    f_n: float = 25e3
    d0: float = 80.0
    lambda_n: float = 0.35
    f_min: float = 1.5e3
    f_max: float = 9.5e3

    def __post_init__(self):
        if not (0 < self.f_min < self.f_max):
            raise InvalidArgument(f"need 0 < f_min < f_max, got {self.f_min}, {self.f_max}")
        if not self.f_max < self.f_n:
            raise InvalidArgument(f"f_max={self.f_max} must lie below the nose f_n={self.f_n}")
        if not 0 < self.lambda_n < 1:
            raise InvalidArgument(f"lambda_n must be in (0, 1), got {self.lambda_n}")
        if self.d0 <= 0:
            raise InvalidArgument(f"d0 must be positive, got {self.d0}")
        if self.lambda_n * self.f_max / self.f_n >= 1:
            raise DomainError("lambda_n * f_max / f_n >= 1: dispersion denominator not positive")
        if self.out_of_range:
            warnings.warn(
                f"d0={self.d0} outside the studied range {D0_RANGE}", RuntimeWarning, stacklevel=3
            )

    @property
    def out_of_range(self) -> bool:
        return not (D0_RANGE[0] <= self.d0 <= D0_RANGE[1])

    def with_d0(self, d0: float) -> "DispersionParams":
        return DispersionParams(self.f_n, d0, self.lambda_n, self.f_min, self.f_max)


def travel_time(p: DispersionParams, f):
    """Travel time in seconds at frequency ``f`` (scalar or array, Hz)."""
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr <= 0):
        raise DomainError("frequency must be positive")
    ratio = f_arr / p.f_n
    denom = 1.0 - p.lambda_n * ratio
    if np.any(denom <= 0):
        raise DomainError("1 - lambda_n * f / f_n <= 0")
    one_l = 1.0 + p.lambda_n
    t = p.d0 / (one_l * np.sqrt(f_arr)) * (one_l - (3.0 * p.lambda_n - 1.0) * ratio) / denom
    if t.ndim == 0:
        return float(t)
    return t


def nose_travel_time(p: DispersionParams) -> float:
    """Closed form of ``travel_time`` at the nose frequency."""
    return 2.0 * p.d0 / ((1.0 + p.lambda_n) * math.sqrt(p.f_n))


def whistler_duration(p: DispersionParams) -> float:
    """Time between the arrival of ``f_max`` and of ``f_min``."""
    return travel_time(p, p.f_min) - travel_time(p, p.f_max)


@dataclass(frozen=True, eq=False)
class WhistlerKernel:
    """Rasterized dispersion curve on a spectrogram grid.

    ``matrix`` is ``[n_freq, n_time]`` with row ``r`` centred on
    ``f_start + r * df``; column 0 is the arrival of the highest frequency.
    """

    matrix: np.ndarray
    dt: float
    df: float
    f_min: float
    f_max: float
    f_start: float
    params: DispersionParams

    @property
    def n_freq(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_time(self) -> int:
        return self.matrix.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_time - 1) * self.dt

    @property
    def d0(self) -> float:
        return self.params.d0

    def row_frequencies(self) -> np.ndarray:
        return self.f_start + self.df * np.arange(self.n_freq)

    def curve_bins(self) -> np.ndarray:
        """Time bin of the peak magnitude in each row."""
        return np.argmax(self.matrix, axis=1)


def rasterize_kernel(
    p: DispersionParams,
    dt: float,
    df: float,
    band_smoothing: int = 1,
    *,
    sigma_bins: float = 1.0,
    f_start: Optional[float] = None,
    n_freq: Optional[int] = None,
) -> WhistlerKernel:
    """Paint the dispersion curve of ``p`` onto a ``dt`` x ``df`` grid.

    Each row gets magnitude 1 at the time bin nearest its travel time
    (relative to the arrival of ``f_max``), spread over
    ``+-band_smoothing`` bins with a Gaussian of ``sigma_bins``.

    By default rows are centred on ``f_min + (r + 0.5) df``.  Pass
    ``f_start``/``n_freq`` to register the kernel on an existing
    spectrogram crop instead.  Row frequencies outside ``[f_min, f_max]``
    are clamped to the band edge.
    """
    if dt <= 0 or df <= 0:
        raise InvalidArgument("dt and df must be positive")
    if band_smoothing < 0:
        raise InvalidArgument("band_smoothing must be >= 0")
    if f_start is None:
        f_start = p.f_min + 0.5 * df
    if n_freq is None:
        n_freq = max(1, math.ceil((p.f_max - p.f_min) / df - 1e-9))
    if n_freq < 1:
        raise InvalidArgument("n_freq must be >= 1")

    t_ref = travel_time(p, p.f_max)
    n_time = int(round(whistler_duration(p) / dt)) + 1

    freqs = np.clip(f_start + df * np.arange(n_freq), p.f_min, p.f_max)
    bins = np.rint((travel_time(p, freqs) - t_ref) / dt).astype(np.int64)
    bins = np.clip(bins, 0, n_time - 1)

    matrix = np.zeros((n_freq, n_time))
    rows = np.arange(n_freq)
    for off in range(-band_smoothing, band_smoothing + 1):
        w = math.exp(-0.5 * (off / sigma_bins) ** 2) if off else 1.0
        cols = bins + off
        ok = (cols >= 0) & (cols < n_time)
        np.maximum.at(matrix, (rows[ok], cols[ok]), w)

    matrix.setflags(write=False)
    return WhistlerKernel(matrix, float(dt), float(df), p.f_min, p.f_max, float(f_start), p)


def kernel_grid(
    d0_values: Iterable[float],
    template: DispersionParams,
    dt: float,
    df: float,
    **kwargs,
) -> List[WhistlerKernel]:
    """One kernel per zero dispersion, sharing the template's other parameters.

    Returned sorted by ascending duration.
    """
    d0_values = list(d0_values)
    if not d0_values:
        raise InvalidArgument("d0_values is empty")
    kernels = [rasterize_kernel(template.with_d0(float(d0)), dt, df, **kwargs) for d0 in d0_values]
    return sorted(kernels, key=lambda k: (k.duration, k.d0))


def write_kernel_csv(kernel: WhistlerKernel, fh) -> None:
    """Write nonzero cells as ``freq_hz,time_s,magnitude`` rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["freq_hz", "time_s", "magnitude"])
    freqs = kernel.row_frequencies()
    rows, cols = np.nonzero(kernel.matrix)
    for r, c in zip(rows, cols):
        writer.writerow([f"{freqs[r]:.6g}", f"{c * kernel.dt:.6g}", f"{kernel.matrix[r, c]:.6g}"])

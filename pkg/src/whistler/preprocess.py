"""Row-wise noise reduction transforms, [0, 1] scaling and SNR scoring.

All 1-D transforms act along time, independently for each frequency row,
unless ``axis=0`` is passed (per time column).  Row normalisation flattens
constant-frequency features such as VLF transmitter lines.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DegenerateRow, InvalidArgument
from .spectro import DB_FLOOR, Spectrogram

ROW = 1
COLUMN = 0

Box = Tuple[float, float, float, float]  # t_start, t_end, f_lo, f_hi


class TransformKind(str, enum.Enum):
    NONE = "none"
    ZSCORE = "zscore"
    CDETREND = "cdetrend"
    LDETREND = "ldetrend"

    @classmethod
    def parse(cls, value) -> "TransformKind":
        try:
            return cls(value)
        except ValueError:
            choices = "|".join(k.value for k in cls)
            raise InvalidArgument(f"unknown transform {value!r}, expected {choices}") from None


def zscore_rows(spec: Spectrogram, axis: int = ROW) -> Spectrogram:
    x = spec.power_db
    mu = x.mean(axis=axis, keepdims=True)
    sigma = x.std(axis=axis, keepdims=True)
    scale = np.maximum(np.abs(mu), 1.0)
    if np.any(sigma <= 1e-12 * scale):
        raise DegenerateRow("constant row: zero standard deviation (silent or corrupt input?)")
    return spec.with_values((x - mu) / sigma)


def detrend_constant_rows(spec: Spectrogram, axis: int = ROW) -> Spectrogram:
    x = spec.power_db
    return spec.with_values(x - x.mean(axis=axis, keepdims=True))


def detrend_linear_rows(spec: Spectrogram, axis: int = ROW) -> Spectrogram:
    """Subtract each row's least-squares line over the bin index."""
    x = spec.power_db
    n = x.shape[axis]
    if n < 2:
        raise InvalidArgument("linear detrend needs at least two bins")
    shape = [1, 1]
    shape[axis] = n
    ramp = (np.arange(n) - 0.5 * (n - 1)).reshape(shape)
    centred = x - x.mean(axis=axis, keepdims=True)
    slope = (centred * ramp).sum(axis=axis, keepdims=True) / (ramp**2).sum()
    return spec.with_values(centred - slope * ramp)


def apply_transform(spec: Spectrogram, kind, axis: int = ROW) -> Spectrogram:
    kind = TransformKind.parse(kind)
    if kind is TransformKind.NONE:
        return spec
    if kind is TransformKind.ZSCORE:
        return zscore_rows(spec, axis)
    if kind is TransformKind.CDETREND:
        return detrend_constant_rows(spec, axis)
    return detrend_linear_rows(spec, axis)


def reference_stats(spec: Spectrogram) -> Tuple[float, float]:
    """Global mean and population std of every entry."""
    return float(spec.power_db.mean()), float(spec.power_db.std())


def scale_clamp(spec: Spectrogram, mu: float, sigma: float, width: float = 4.0) -> Spectrogram:
    """Clamp to ``mu +- width*sigma`` and map that interval onto [0, 1]."""
    if not sigma > 0:
        raise InvalidArgument("sigma must be positive")
    lo = mu - width * sigma
    scaled = (np.clip(spec.power_db, lo, mu + width * sigma) - lo) / (2.0 * width * sigma)
    return spec.with_values(scaled)


@dataclass
class SnrReport:
    snr_db: float
    signal_power: float
    noise_power: float
    boxes: List[Box] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "signal_power": self.signal_power,
            "noise_power": self.noise_power,
            "boxes": [list(b) for b in self.boxes],
        }


def _box_slices(spec: Spectrogram, box: Box) -> Tuple[slice, slice]:
    t0, t1, f_lo, f_hi = box
    if not (t1 > t0 and f_hi > f_lo):
        raise InvalidArgument(f"box {box} has no area")
    # one bin of slack at every edge, then clip
    j0 = math.floor((t0 - spec.t_start) / spec.dt + 1e-9)
    j1 = math.ceil((t1 - spec.t_start) / spec.dt - 1e-9)
    i0 = math.floor((f_lo - spec.f_start) / spec.df + 0.5 + 1e-9)
    i1 = math.ceil((f_hi - spec.f_start) / spec.df + 0.5 - 1e-9)
    if j0 < -1 or j1 > spec.n_time + 1 or i0 < -1 or i1 > spec.n_freq + 1:
        raise InvalidArgument(f"box {box} lies outside the spectrogram")
    rows = slice(max(i0, 0), min(i1, spec.n_freq))
    cols = slice(max(j0, 0), min(j1, spec.n_time))
    if rows.stop <= rows.start or cols.stop <= cols.start:
        raise InvalidArgument(f"box {box} covers no bins")
    return rows, cols


def snr(spec: Spectrogram, signal_boxes: Sequence[Box], from_db: bool = True) -> SnrReport:
    """Signal-to-noise ratio of boxed regions against the rest of the image.

    Signal power is the mean squared value inside the union of the boxes;
    noise power is the sum of squares outside them divided by the whole
    image area.  With ``from_db`` the entries are dB and their linear
    power is used directly; otherwise entries are magnitudes and squared.
    """
    if not signal_boxes:
        raise InvalidArgument("at least one signal box is required")
    mask = np.zeros(spec.power_db.shape, dtype=bool)
    for box in signal_boxes:
        rows, cols = _box_slices(spec, box)
        mask[rows, cols] = True
    if mask.all():
        raise InvalidArgument("boxes cover the whole spectrogram: noise power undefined")
    if from_db:
        power = 10.0 ** (spec.power_db / 10.0)
    else:
        power = spec.power_db**2
    signal_power = float(power[mask].sum() / mask.sum())
    noise_power = float(power[~mask].sum() / mask.size)
    snr_db = 10.0 * math.log10(signal_power / (noise_power + DB_FLOOR) + DB_FLOOR)
    return SnrReport(snr_db, signal_power, noise_power, [tuple(b) for b in signal_boxes])

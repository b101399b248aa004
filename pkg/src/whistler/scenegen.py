"""Synthetic VLF scenes with ground-truth whistler labels.

A scene is white Gaussian noise plus low-frequency hiss, Poisson-timed
sferics (short broadband pulses), constant transmitter tones and whistlers
synthesized in the time domain, so the full STFT path is exercised.

Whistlers are built as a tone bank: one Hann-windowed burst per STFT bin
centre in the whistler band, plus the two band edges.  Each burst fills
the analysis frame nearest its dispersion delay, so a whistler injected at
a nominal SNR shows that SNR in every cell it occupies.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import butter, freqz, lfilter

from .dispersion import D0_RANGE, DispersionParams, travel_time, whistler_duration
from .errors import InvalidArgument
from .spectro import DEFAULT_NFFT, TimeSeries

REFERENCE_FREQ = 5e3
# sum of squares of a periodic Hann window is 3/8 of its length
_HANN_POWER = 3.0 / 8.0


@dataclass(frozen=True)
class InjectedWhistler:
    t0: float
    params: DispersionParams
    amplitude: float


@dataclass(frozen=True)
class SceneSpec:
    fs: float = 40e3
    duration: float = 6.0
    rng_seed: int = 0
    whistlers: Tuple[InjectedWhistler, ...] = ()
    noise_floor: float = 1.0
    hiss_level: float = 2.0
    hiss_corner: float = 2.5e3
    sferic_rate: float = 2.0
    sferic_amplitude: float = 8.0
    tone_freqs: Tuple[float, ...] = (4.1e3, 7.3e3)
    tone_amplitude: float = 1.5
    nfft: int = DEFAULT_NFFT

    def __post_init__(self):
        if not self.duration > 0 or not self.fs > 0:
            raise InvalidArgument("duration and fs must be positive")
        for w in self.whistlers:
            end = w.t0 + whistler_duration(w.params)
            if w.t0 < 0 or end > self.duration + 1e-9:
                raise InvalidArgument(
                    f"whistler at t0={w.t0:.3f}s ends at {end:.3f}s, past the scene end {self.duration}s"
                )


@dataclass(frozen=True)
class SceneLabel:
    """Ground truth for one whistler; ``t0`` is the arrival of its top frequency."""

    t0: float
    t_5khz: float
    d0: Optional[float]
    duration: float
    box: Tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return {
            "t0_s": round(self.t0, 9),
            "t5khz_s": round(self.t_5khz, 9),
            "d0": self.d0,
            "duration_s": round(self.duration, 9),
            "box": [round(v, 9) for v in self.box],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneLabel":
        return cls(d["t0_s"], d["t5khz_s"], d.get("d0"), d["duration_s"], tuple(d["box"]))


def _reference_offset(p: DispersionParams) -> float:
    f_ref = min(max(REFERENCE_FREQ, p.f_min), p.f_max)
    return travel_time(p, f_ref) - travel_time(p, p.f_max)


def make_label(t0: float, p: DispersionParams) -> SceneLabel:
    dur = whistler_duration(p)
    return SceneLabel(t0, t0 + _reference_offset(p), p.d0, dur, (t0, t0 + dur, p.f_min, p.f_max))


def label_from_5khz(t_5khz: float, p: DispersionParams, d0=None) -> SceneLabel:
    """Back-project a 5 kHz arrival time to a full label using shape ``p``."""
    t0 = t_5khz - _reference_offset(p)
    dur = whistler_duration(p)
    return SceneLabel(t0, t_5khz, d0, dur, (t0, t0 + dur, p.f_min, p.f_max))


def amplitude_for_snr(snr_db: float, noise_floor: float = 1.0, nfft: int = DEFAULT_NFFT) -> float:
    """Burst amplitude whose STFT bin sits ``snr_db`` above the mean noise bin.

    For a frame-aligned Hann burst analysed with the same Hann window the
    bin power ratio is ``A^2 * sum(w^2) / (4 sigma^2)``.
    """
    ratio = 10.0 ** (snr_db / 10.0)
    return noise_floor * math.sqrt(4.0 * ratio / (_HANN_POWER * nfft))


def _hiss_filter(corner: float, fs: float):
    b, a = butter(1, corner, fs=fs)
    # scale to unit output variance for unit white input
    _, h = freqz(b, a, worN=8192, fs=fs)
    return b / math.sqrt(np.mean(np.abs(h) ** 2)), a


def inband_noise_level(
    noise_floor: float = 1.0,
    hiss_level: float = 0.0,
    hiss_corner: float = 2.5e3,
    fs: float = 40e3,
    band: Tuple[float, float] = (1.5e3, 9.5e3),
) -> float:
    """Std of white noise with the same mean power density over ``band`` as floor plus hiss."""
    if hiss_level <= 0:
        return noise_floor
    b, a = _hiss_filter(hiss_corner, fs)
    f = np.linspace(band[0], band[1], 512)
    _, h = freqz(b, a, worN=f, fs=fs)
    gain = 1.0 + hiss_level ** 2 * float(np.mean(np.abs(h) ** 2))
    return noise_floor * math.sqrt(gain)


def tone_bank_freqs(p: DispersionParams, df: float) -> np.ndarray:
    """STFT bin centres inside the band, plus the band edges themselves.

    The edge tones make the injected energy start at ``f_max`` and end at
    ``f_min`` exactly, matching the label box.
    """
    k0 = math.ceil(p.f_min / df - 1e-9)
    k1 = math.floor(p.f_max / df + 1e-9)
    centres = df * np.arange(k0, k1 + 1)
    return np.unique(np.concatenate(([p.f_min], centres, [p.f_max])))


def _add_whistler(out, p, fs, amplitude, t0, nfft, phase0):
    df = fs / nfft
    freqs = tone_bank_freqs(p, df)
    onsets = t0 + travel_time(p, freqs) - travel_time(p, p.f_max)
    window = np.hanning(nfft + 1)[:-1]
    n_local = np.arange(nfft)
    # quarter-cycle phase steps between neighbouring bins cancel their Hann leakage
    phases = phase0 + 0.5 * np.pi * freqs / df
    for f, onset, phase in zip(freqs, onsets, phases):
        start = int(round(onset * fs / nfft)) * nfft
        stop = min(start + nfft, out.size)
        if start >= out.size or stop <= 0:
            continue
        burst = amplitude * window * np.sin(2 * np.pi * f * n_local / fs + phase)
        lo = max(start, 0)
        out[lo:stop] += burst[lo - start:stop - start]


def synth_whistler(
    p: DispersionParams,
    fs: float,
    amplitude: float,
    *,
    t0: float = 0.0,
    n_samples: Optional[int] = None,
    nfft: int = DEFAULT_NFFT,
    seed: int = 0,
) -> TimeSeries:
    """Time-domain whistler whose STFT follows the dispersion curve of ``p``."""
    if n_samples is None:
        n_samples = int(math.ceil((t0 + whistler_duration(p)) * fs)) + nfft
    rng = np.random.default_rng(seed)
    out = np.zeros(n_samples)
    _add_whistler(out, p, fs, amplitude, t0, nfft, rng.uniform(0, 2 * np.pi))
    return TimeSeries(out, fs)


def sferic_times(rate: float, duration: float, rng) -> np.ndarray:
    count = rng.poisson(rate * duration)
    return np.sort(rng.uniform(0.0, duration, count))


def generate_scene(spec: SceneSpec) -> Tuple[TimeSeries, List[SceneLabel]]:
    rng = np.random.default_rng(spec.rng_seed)
    n = int(round(spec.duration * spec.fs))
    t = np.arange(n) / spec.fs
    x = rng.normal(0.0, spec.noise_floor, n)

    if spec.hiss_level > 0:
        b, a = _hiss_filter(spec.hiss_corner, spec.fs)
        x += spec.hiss_level * spec.noise_floor * lfilter(b, a, rng.normal(0.0, 1.0, n))

    pulse_len = int(spec.fs * 2e-3)
    decay = np.exp(-np.arange(pulse_len) / (spec.fs * 2e-4))
    for ts in sferic_times(spec.sferic_rate, spec.duration, rng):
        start = int(ts * spec.fs)
        amp = spec.sferic_amplitude * spec.noise_floor * rng.lognormal(0.0, 0.5)
        pulse = amp * decay * rng.normal(0.0, 1.0, pulse_len)
        stop = min(start + pulse_len, n)
        x[start:stop] += pulse[:stop - start]

    for f in spec.tone_freqs:
        x += spec.tone_amplitude * spec.noise_floor * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))

    labels = []
    for w in spec.whistlers:
        _add_whistler(x, w.params, spec.fs, w.amplitude, w.t0, spec.nfft, rng.uniform(0, 2 * np.pi))
        labels.append(make_label(w.t0, w.params))
    labels.sort(key=lambda lab: lab.t0)
    return TimeSeries(x, spec.fs), labels


@dataclass(frozen=True)
class ScenePlan:
    """Recipe for random labelled scenes used by batch simulation and benchmarks.

    Start times are drawn in ``[margin, duration - horizon - margin]`` so
    every whistler lies inside the valid correlation range of the longest
    kernel and away from the CFAR edge bins.
    """

    duration: float = 6.0
    fs: float = 40e3
    n_whistlers: Tuple[int, int] = (1, 5)
    d0_choices: Tuple[float, ...] = (35.0, 80.0)
    snr_db: float = 10.0
    min_separation: float = 0.2
    margin: float = 0.2
    horizon: Optional[float] = None
    template: DispersionParams = field(default_factory=DispersionParams)
    noise: dict = field(default_factory=dict)

    def scene(self, seed: int) -> SceneSpec:
        rng = np.random.default_rng([seed, 0x5C3E])
        horizon = self.horizon
        if horizon is None:
            longest = max(tuple(self.d0_choices) + (D0_RANGE[1],))
            horizon = whistler_duration(self.template.with_d0(longest))
        lo, hi = self.margin, self.duration - horizon - self.margin
        if hi < lo:
            raise InvalidArgument("scene too short for the requested horizon and margins")
        count = int(rng.integers(self.n_whistlers[0], self.n_whistlers[1] + 1))
        starts: List[float] = []
        for _ in range(1000 * max(count, 1)):
            if len(starts) == count:
                break
            t0 = float(rng.uniform(lo, hi))
            if all(abs(t0 - s) >= self.min_separation for s in starts):
                starts.append(t0)
        defaults = SceneSpec()
        level = inband_noise_level(
            self.noise.get("noise_floor", defaults.noise_floor),
            self.noise.get("hiss_level", defaults.hiss_level),
            self.noise.get("hiss_corner", defaults.hiss_corner),
            self.fs,
            (self.template.f_min, self.template.f_max),
        )
        amp = amplitude_for_snr(self.snr_db, level)
        whistlers = tuple(
            InjectedWhistler(t0, self.template.with_d0(float(rng.choice(self.d0_choices))), amp)
            for t0 in sorted(starts)
        )
        return SceneSpec(
            fs=self.fs, duration=self.duration, rng_seed=seed, whistlers=whistlers, **self.noise
        )

"""NumPy implementations of the hot kernels.

Used when the compiled ``_core`` extension is unavailable or disabled.
Every function mirrors the signature and results of its Cython twin.
Noise estimates are NaN wherever the CFAR window does not fit.
"""

import numpy as np

from .errors import InvalidArgument

_CHUNK = 1 << 16


def xcorr_valid(spec, kernel):
    """Valid-mode 2-D cross-correlation collapsed over frequency.

    ``out[j] = sum_i sum_tau spec[i, j + tau] * kernel[i, tau]``.  Zero
    kernel cells are skipped, which makes rasterized curves cheap.
    """
    spec = np.ascontiguousarray(spec, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if kernel.shape[0] != spec.shape[0] or kernel.shape[1] > spec.shape[1]:
        raise InvalidArgument("kernel must have the spectrogram's rows and fit in its length")
    n_out = spec.shape[1] - kernel.shape[1] + 1
    out = np.zeros(n_out)
    rows, taus = np.nonzero(kernel)
    for r, tau in zip(rows, taus):
        out += kernel[r, tau] * spec[r, tau:tau + n_out]
    return out


def _check(n, g, a=0, b=1):
    if n < 1 or g < 0:
        raise InvalidArgument("need n >= 1 and g >= 0")
    if not 0 <= a < b <= 2 * n:
        raise InvalidArgument("order statistic or trim outside the noise window")


def _noise_windows(power, n, g, start, stop):
    """``[stop - start, 2n]`` noise cells for CUTs ``start..stop-1``."""
    half = n + g
    win = np.lib.stride_tricks.sliding_window_view(power[start - half:stop + half], 2 * half + 1)
    return np.concatenate((win[:, :n], win[:, n + 2 * g + 1:]), axis=1)


def _sliding(power, n, g, reduce):
    power = np.ascontiguousarray(power, dtype=np.float64)
    out = np.full(power.size, np.nan)
    half = n + g
    first, last = half, power.size - half
    for start in range(first, last, _CHUNK):
        stop = min(start + _CHUNK, last)
        out[start:stop] = reduce(_noise_windows(power, n, g, start, stop))
    return out


def cfar_ca(power, n, g):
    _check(n, g)
    return _sliding(power, n, g, lambda cells: cells.sum(axis=1) / (2 * n))


def cfar_os(power, n, g, k):
    _check(n, g, k - 1, k)
    return _sliding(power, n, g, lambda cells: np.partition(cells, k - 1, axis=1)[:, k - 1])


def cfar_tm(power, n, g, t_s, t_l):
    _check(n, g, t_s, 2 * n - t_l)
    keep = 2 * n - t_s - t_l

    def reduce(cells):
        cells = np.sort(cells, axis=1)
        return cells[:, t_s:2 * n - t_l].sum(axis=1) / keep

    return _sliding(power, n, g, reduce)

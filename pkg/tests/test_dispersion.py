import io
import math
import warnings

import numpy as np
import pytest

from whistler.dispersion import (
    DispersionParams,
    kernel_grid,
    nose_travel_time,
    rasterize_kernel,
    travel_time,
    whistler_duration,
    write_kernel_csv,
)
from whistler.errors import DomainError, InvalidArgument

DT = 256 / 40e3
DF = 40e3 / 256

# reference values evaluated independently at 50-digit precision
DURATIONS = {20: 0.29296, 35: 0.51268, 50: 0.73240, 65: 0.95212, 80: 1.17184}
OFFSETS_5KHZ = {20: 0.06854, 35: 0.11994, 50: 0.17134, 65: 0.22274, 80: 0.27415}


def test_travel_time_at_nose():
    p = DispersionParams()
    assert travel_time(p, 25e3) == pytest.approx(0.749576926854727, rel=1e-13)
    assert travel_time(p, 25e3) == pytest.approx(2 * 80 / (1.35 * math.sqrt(25e3)), rel=1e-13)
    assert nose_travel_time(p) == pytest.approx(travel_time(p, p.f_n), rel=1e-14)


def test_travel_time_at_band_floor():
    assert travel_time(DispersionParams(), 1500.0) == pytest.approx(2.10521033, abs=1e-7)


def test_linear_in_d0():
    f = np.linspace(1500, 9500, 41)
    t1 = travel_time(DispersionParams(d0=30), f)
    t2 = travel_time(DispersionParams(d0=60), f)
    np.testing.assert_allclose(t2, 2 * t1, rtol=1e-13)


def test_decreasing_below_nose():
    for lam in (0.35, 0.4, 0.45):
        t = travel_time(DispersionParams(lambda_n=lam), np.linspace(1500, 9500, 200))
        assert np.all(np.diff(t) < 0)


def test_larger_lambda_shortens_travel_time():
    f = np.linspace(1500, 9500, 50)
    assert np.all(travel_time(DispersionParams(lambda_n=0.45), f) < travel_time(DispersionParams(), f))


def test_larger_lambda_lengthens_band_duration():
    # the spread between band edges grows even though every arrival is earlier
    assert whistler_duration(DispersionParams(lambda_n=0.45)) == pytest.approx(1.19289, abs=1e-5)
    assert whistler_duration(DispersionParams(lambda_n=0.45)) > whistler_duration(DispersionParams())


@pytest.mark.parametrize("d0,expected", sorted(DURATIONS.items()))
def test_durations(d0, expected):
    assert whistler_duration(DispersionParams(d0=d0)) == pytest.approx(expected, abs=1e-5)


def test_domain_errors():
    p = DispersionParams()
    with pytest.raises(DomainError):
        travel_time(p, 0.0)
    with pytest.raises(DomainError):
        travel_time(p, -5.0)
    with pytest.raises(InvalidArgument):
        DispersionParams(f_min=9e3, f_max=2e3)
    with pytest.raises(InvalidArgument):
        DispersionParams(lambda_n=1.2)


def test_d0_outside_range_is_flagged_not_rejected():
    with pytest.warns(RuntimeWarning):
        p = DispersionParams(d0=100)
    assert p.out_of_range
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not DispersionParams(d0=50).out_of_range


def test_default_kernel_geometry():
    k = rasterize_kernel(DispersionParams(), DT, DF)
    assert k.n_freq == 52
    assert k.duration == pytest.approx((k.n_time - 1) * DT)
    assert k.duration == pytest.approx(DURATIONS[80], abs=DT)
    assert np.all(k.matrix.max(axis=1) == 1.0)
    assert k.matrix.min() >= 0 and k.matrix.max() <= 1


def test_kernel_curve_monotone():
    k = rasterize_kernel(DispersionParams(d0=35), DT, DF)
    bins = k.curve_bins()
    assert np.all(np.diff(bins) <= 0)
    assert bins[-1] == 0


def test_kernel_duration_scales_with_d0():
    k20 = rasterize_kernel(DispersionParams(d0=20), DT, DF)
    k80 = rasterize_kernel(DispersionParams(d0=80), DT, DF)
    assert k20.duration == pytest.approx(k80.duration / 4, abs=DT)


def test_no_smoothing_marks_one_bin_per_row():
    k = rasterize_kernel(DispersionParams(), DT, DF, band_smoothing=0)
    assert np.all((k.matrix > 0).sum(axis=1) == 1)


def test_kernel_is_read_only():
    k = rasterize_kernel(DispersionParams(), DT, DF)
    with pytest.raises(ValueError):
        k.matrix[0, 0] = 3


def test_kernel_grid_sorted():
    grid = kernel_grid([80, 20, 50, 35, 65], DispersionParams(), DT, DF)
    durations = [k.duration for k in grid]
    assert durations == sorted(durations) and len(set(durations)) == 5
    assert [k.d0 for k in grid] == [20, 35, 50, 65, 80]
    with pytest.raises(InvalidArgument):
        kernel_grid([], DispersionParams(), DT, DF)


def test_kernel_csv():
    k = rasterize_kernel(DispersionParams(d0=20), DT, DF, band_smoothing=0)
    buf = io.StringIO()
    write_kernel_csv(k, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "freq_hz,time_s,magnitude"
    assert len(lines) == 1 + 52

import io
import math

import numpy as np
import pytest

from whistler.detect import (
    CfarConfig,
    CorrelationSeries,
    DecisionSeries,
    ca_cfar,
    cross_correlate,
    lf_cfar,
    os_cfar,
    pfa_from_xdb,
    run_cfar,
    static_detect,
    threshold_stats,
    tm_cfar,
    write_decisions_csv,
    xdb_from_pfa,
)
from whistler.dispersion import DispersionParams, rasterize_kernel
from whistler.errors import InvalidArgument, ShapeMismatch, WindowTooLarge
from whistler.spectro import DB_FLOOR, Spectrogram

DT, DF = 6.4e-3, 156.25


def series(power):
    return CorrelationSeries.from_power(np.asarray(power, float), DT)


def kernel(d0=20):
    return rasterize_kernel(DispersionParams(d0=d0), DT, DF)


# -- correlation ------------------------------------------------------------------


def test_matched_peak_and_length():
    k = kernel()
    x = np.zeros((k.n_freq, 300))
    x[:, 120:120 + k.n_time] = k.matrix
    s = cross_correlate(Spectrogram(x, DT, DF, 1562.5), k)
    assert len(s) == 300 - k.n_time + 1
    assert int(np.argmax(s.values_db)) == 120
    assert s.kernel_duration == pytest.approx(k.duration)


def test_zero_spectrogram_sits_at_floor():
    k = kernel()
    s = cross_correlate(Spectrogram(np.zeros((k.n_freq, 100)), DT, DF), k)
    np.testing.assert_allclose(s.values_db, 10 * math.log10(DB_FLOOR))


def test_correlation_value_definition(rng):
    k = kernel()
    x = rng.uniform(size=(k.n_freq, 80))
    s = cross_correlate(Spectrogram(x, DT, DF), k)
    j = 7
    expected = np.sum(x[:, j:j + k.n_time] * k.matrix)
    assert s.values_db[j] == pytest.approx(10 * np.log10(expected + DB_FLOOR), rel=1e-12)


def test_correlation_shape_errors():
    k = kernel()
    with pytest.raises(ShapeMismatch):
        cross_correlate(Spectrogram(np.zeros((k.n_freq + 1, 100)), DT, DF), k)
    with pytest.raises(ShapeMismatch):
        cross_correlate(Spectrogram(np.zeros((k.n_freq, 100)), DT, 2 * DF), k)
    with pytest.raises(InvalidArgument):
        cross_correlate(Spectrogram(np.zeros((k.n_freq, k.n_time - 1)), DT, DF), k)


# -- static detector --------------------------------------------------------------


def test_identical_populations_give_pd_equal_pfa():
    v = np.linspace(0, 1, 101)
    s = CorrelationSeries(np.concatenate([v, v]), 1.0)
    # targets are the second copy: bins 101..201 lie within 100 of t=151
    stats = threshold_stats([s], [[151.0]], halfwidth=50.0)
    np.testing.assert_allclose(stats.p_d, stats.p_fa, atol=0.02)


def test_separable_populations():
    vals = np.zeros(100)
    vals[40:50] = 1.0
    s = CorrelationSeries(vals, 1.0)
    stats = threshold_stats([s], [[44.5]], halfwidth=4.5)
    i = np.argmax(stats.p_d - stats.p_fa)
    assert stats.p_d[i] == 1.0 and stats.p_fa[i] == 0.0
    assert stats.best_threshold == 0.0
    assert np.all(np.diff(stats.p_fa) <= 0) and np.all(np.diff(stats.p_d) <= 0)
    assert stats.mu_ti == 1.0 and stats.mu_i == 0.0


def test_threshold_stats_needs_both_populations():
    s = CorrelationSeries(np.zeros(10), 1.0)
    with pytest.raises(InvalidArgument):
        threshold_stats([s], [[]])
    with pytest.raises(InvalidArgument):
        threshold_stats([s], [])


def test_static_detect():
    d = static_detect(CorrelationSeries(np.array([1.0, 3.0, 2.0]), 1.0), 2.0)
    assert d.decisions.tolist() == [False, True, False]


# -- configuration ----------------------------------------------------------------


def test_config_defaults_and_parse():
    cfg = CfarConfig()
    assert cfg.as_tuple() == (12, 10, 0.5, 13, 5, 3)
    assert cfg.window == 45
    assert CfarConfig.parse("12,10,0.5,13,5,3") == cfg
    assert CfarConfig.parse(str(cfg)) == cfg


@pytest.mark.parametrize("args", [(0, 1, 0, 1, 0, 0), (5, -1, 0, 1, 0, 0), (5, 1, 0, 11, 0, 0),
                                  (5, 1, 0, 0, 0, 0), (5, 1, 0, 1, 6, 4), (5, 1, 0, 1, -1, 0)])
def test_config_validation(args):
    with pytest.raises(InvalidArgument):
        CfarConfig(*args)


@pytest.mark.parametrize("text", ["1,2,3", "a,b,c,d,e,f", "12,10,x,13,5,3"])
def test_config_parse_errors(text):
    with pytest.raises(InvalidArgument):
        CfarConfig.parse(text)


# -- false-alarm formula ----------------------------------------------------------


@pytest.mark.parametrize("n,x,expected", [
    (10, 0, 0.376889), (10, 8, 4.1526e-3), (10, 3, 0.149285), (12, 0.5, 0.334011),
    (5, 0, 0.385543), (5, 3, 0.162145), (5, 8, 7.50886e-3),
    (15, 0, 0.373927), (15, 3, 0.144900), (15, 8, 3.25839e-3),
])
def test_pfa_values(n, x, expected):
    assert pfa_from_xdb(n, x) == pytest.approx(expected, rel=1e-4)


def test_pfa_limit():
    assert pfa_from_xdb(100000, 0) == pytest.approx(math.exp(-1), rel=1e-4)


def test_xdb_inverse():
    for n in (3, 10, 20):
        for x in (-1.0, 0.5, 6.0):
            assert xdb_from_pfa(n, pfa_from_xdb(n, x)) == pytest.approx(x, abs=1e-9)
    with pytest.raises(InvalidArgument):
        xdb_from_pfa(10, 1.5)


# -- CFAR behaviour ---------------------------------------------------------------


def test_ca_monte_carlo_n10_x0(rng):
    s = series(rng.exponential(size=300_000))
    d = ca_cfar(s, CfarConfig(10, 2, 0.0, 10, 0, 0))
    rate = d.decisions[d.valid].mean()
    assert rate == pytest.approx(pfa_from_xdb(10, 0), rel=0.10)


def test_huge_offset_never_fires(rng):
    s = series(rng.uniform(0.5, 1.5, size=5000))
    for fn in (ca_cfar, os_cfar, tm_cfar):
        assert not fn(s, CfarConfig(10, 2, 60.0, 10, 2, 2)).decisions.any()


def test_edges_undecided(rng):
    cfg = CfarConfig(4, 2, 0.0, 4, 1, 1)
    d = ca_cfar(series(rng.exponential(size=50) * 1e6), cfg)
    half = cfg.n + cfg.g
    assert not d.valid[:half].any() and not d.valid[-half:].any()
    assert d.valid[half:-half].all()
    assert not d.decisions[~d.valid].any()


def test_window_too_large():
    with pytest.raises(WindowTooLarge):
        ca_cfar(series(np.ones(44)), CfarConfig())


def test_decision_definition(rng):
    s = series(rng.exponential(size=2000))
    for fn in (ca_cfar, os_cfar, tm_cfar):
        d = fn(s, CfarConfig())
        v = d.valid
        np.testing.assert_array_equal(d.decisions[v], s.values_db[v] > d.thresholds_db[v])


def test_two_close_targets_mask_each_other_under_ca():
    p = np.ones(400)
    p[200] = p[210] = 30.0
    d = ca_cfar(series(p), CfarConfig(12, 2, 12.0, 12, 0, 0))
    assert not (d.decisions[200] and d.decisions[210])


def test_os_k_equals_n_tracks_ca(rng):
    s = series(rng.exponential(size=100_000))
    defaults = CfarConfig()
    cfg = CfarConfig(defaults.n, defaults.g, defaults.x_db, defaults.n, defaults.t_s, defaults.t_l)
    ca, os_ = ca_cfar(s, cfg), os_cfar(s, cfg)
    v = ca.valid
    assert np.mean(ca.decisions[v] == os_.decisions[v]) > 0.9


def _leading_cells(cut, cfg):
    start = cut - cfg.g - cfg.n
    return np.arange(start, start + cfg.n - 1)


def test_os_unaffected_by_interferer_above_rank_k(rng):
    cfg = CfarConfig(12, 3, 1.0, 10, 0, 0)
    cut = 200
    base = rng.uniform(0.5, 1.5, size=400)
    # the cells the interferer will occupy already rank above k
    base[_leading_cells(cut, cfg)] = 2.0
    clean = os_cfar(series(base), cfg)
    hit = base.copy()
    hit[_leading_cells(cut, cfg)] = 1e4
    dirty = os_cfar(series(hit), cfg)
    assert dirty.thresholds_db[cut] == clean.thresholds_db[cut]


def test_os_interferer_estimate_comes_from_clean_cells(rng):
    cfg = CfarConfig(12, 3, 0.0, 10, 0, 0)
    cut = 200
    p = rng.uniform(0.5, 1.5, size=400)
    p[_leading_cells(cut, cfg)] = 1e4
    d = os_cfar(series(p), cfg)
    window = np.concatenate([p[cut - cfg.g - cfg.n:cut - cfg.g], p[cut + cfg.g + 1:cut + cfg.g + cfg.n + 1]])
    clean = np.sort(window[window < 1e3])
    assert 10 ** (d.thresholds_db[cut] / 10) == pytest.approx(clean[cfg.k - 1], rel=1e-12)


def test_os_max_statistic_tracks_outlier(rng):
    p = rng.uniform(0.5, 1.5, size=200)
    p[100] = 50.0
    p[100 - 5] = 1e3  # inside the noise window of bin 100
    d = os_cfar(series(p), CfarConfig(6, 2, 0.0, 12, 0, 0))
    assert d.thresholds_db[100] == pytest.approx(30.0)
    assert not d.decisions[100]


def test_tm_trims_outlier(rng):
    p = rng.uniform(0.5, 1.5, size=200)
    cut, cfg = 100, CfarConfig(6, 2, 0.0, 6, 0, 1)
    p[cut + 4] = 1e5
    d = tm_cfar(series(p), cfg)
    cells = np.concatenate([p[cut - 8:cut - 2], p[cut + 3:cut + 9]])
    expected = np.sort(cells)[:-1].mean()
    assert 10 ** (d.thresholds_db[cut] / 10) == pytest.approx(expected, rel=1e-12)


def test_translation_equivariance(rng):
    p = rng.exponential(size=600)
    cfg = CfarConfig(8, 2, 1.0, 9, 2, 2)
    m = 37
    for fn in (ca_cfar, os_cfar, tm_cfar):
        a = fn(series(p), cfg)
        b = fn(series(np.concatenate([rng.exponential(size=m), p])), cfg)
        half = cfg.n + cfg.g
        np.testing.assert_array_equal(a.decisions[half:-half], b.decisions[m + half:m + len(p) - half])


def test_scale_invariance(rng):
    p = rng.exponential(size=3000)
    cfg = CfarConfig(8, 2, 1.0, 9, 2, 2)
    for fn in (ca_cfar, os_cfar, tm_cfar):
        # power-of-two scale keeps every product exact
        a, b = fn(series(p), cfg), fn(series(p * 1024.0), cfg)
        np.testing.assert_array_equal(a.decisions, b.decisions)


# -- fusion -----------------------------------------------------------------------


def _dec(bits):
    bits = np.asarray(bits, bool)
    return DecisionSeries(bits, np.zeros(bits.size), np.ones(bits.size, bool))


def test_lf_examples():
    assert lf_cfar(_dec([1]), _dec([0]), _dec([1])).decisions[0]
    assert not lf_cfar(_dec([0]), _dec([1]), _dec([0])).decisions[0]


def test_lf_threshold_is_median():
    a = DecisionSeries(np.zeros(2, bool), np.array([1.0, 9.0]), np.ones(2, bool))
    b = DecisionSeries(np.zeros(2, bool), np.array([5.0, 2.0]), np.ones(2, bool))
    c = DecisionSeries(np.zeros(2, bool), np.array([3.0, 4.0]), np.ones(2, bool))
    np.testing.assert_array_equal(lf_cfar(a, b, c).thresholds_db, [3.0, 4.0])


def test_lf_length_mismatch():
    with pytest.raises(ShapeMismatch):
        lf_cfar(_dec([1, 0]), _dec([1]), _dec([1]))


def test_run_cfar_and_csv(rng):
    s = series(rng.exponential(size=200))
    run = run_cfar(s, CfarConfig())
    buf = io.StringIO()
    write_decisions_csv(s, run.lf, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t_s,value_db,threshold_db,decision"
    assert len(lines) == 201
    assert lines[1].split(",")[2] == ""  # undecided edge bin

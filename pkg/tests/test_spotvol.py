import math
from dataclasses import replace

import numpy as np
import pytest

from jumplev.simkit import PriceJump, SimConfig, VolJump, simulate_paths
from jumplev.spotvol import (
    SpotVolConfig,
    SpotVolEstimate,
    adaptive_weights,
    averaging_bins_rule,
    bin_adaptive_stat,
    bin_adaptive_values,
    bins_rule,
    compute_bin_spectra,
    spot_vol,
    spot_vol_pair,
    vol_jump_statistic,
    vol_jump_test,
)
from jumplev.ticks import EstimationError, TickSeries

DAY = SpotVolConfig(K=100, J=30, r_bins=8)


def _diffusion(n, sig, seed, noise=0.0):
    rng = np.random.default_rng(seed)
    x = np.concatenate([[0.0], np.cumsum(sig * rng.normal(size=n) / math.sqrt(n))])
    return TickSeries.regular(x + noise * rng.normal(size=n + 1))


def test_bin_count_rule():
    # floor(3 * 152.97 / 10.06)
    assert bins_rule(23400) == 45
    # floor(3 * 77.31 / 8.696)
    assert bins_rule(5977) == 26


def test_averaging_rule():
    # ceil(3 * 12.37 / 10.06)
    assert averaging_bins_rule(23400) == 4
    assert SpotVolConfig(r_bins=8).averaging(23400) == 8


def test_adaptive_weights_sum_to_one_and_decrease():
    w = adaptive_weights(1e-4, 1e-7, 23400, 0.01, np.arange(1, 31))
    assert abs(w.sum() - 1) < 1e-12
    assert np.all(np.diff(w) < 0)


def test_pure_noise_bins_average_to_zero():
    rng = np.random.default_rng(1)
    ts = TickSeries.regular(1e-3 * rng.normal(size=23401))
    spec = compute_bin_spectra(ts, DAY)
    z = bin_adaptive_values(spec, range(1, spec.K + 1))
    assert abs(z.mean()) < 3 * z.std(ddof=1) / math.sqrt(z.size)


def test_noise_free_bins_average_to_spot_variance():
    ts = _diffusion(23400, 0.01, 2)
    spec = compute_bin_spectra(ts, DAY)
    z = bin_adaptive_values(spec, range(1, 101))
    assert z.mean() == pytest.approx(1e-4, rel=0.1)


def test_bin_stat_range():
    ts = _diffusion(2000, 0.01, 3)
    with pytest.raises(IndexError):
        bin_adaptive_stat(ts, 0, SpotVolConfig(K=10))


def test_flat_volatility_sides_agree():
    left, right = [], []
    for p in simulate_paths(SimConfig(n=23400, noise="multiplicative"), range(30)):
        est = spot_vol_pair(p.ticks(), 0.5, DAY)
        left.append(est.sig2_left)
        right.append(est.sig2_right)
    diff = np.array(right) - np.array(left)
    assert abs(diff.mean()) < 3 * diff.std(ddof=1) / math.sqrt(diff.size)


def test_doubling_variance_doubles_right_side():
    cfg = SimConfig(n=23400, noise="multiplicative", vol_jump=VolJump(0.5, 1.0))
    ratios = []
    for p in simulate_paths(cfg, range(30)):
        est = spot_vol_pair(p.ticks(), 0.5, DAY)
        ratios.append(est.sig2_right / est.sig2_left)
    assert np.mean(ratios) == pytest.approx(2.0, rel=0.2)


def test_large_price_jump_in_span_is_truncated():
    cfg = SimConfig(n=23400, noise="multiplicative")
    jumpy = replace(cfg, price_jump=PriceJump(0.535, 0.01))
    for seed in range(5):
        a = simulate_paths(cfg, [seed])[0].ticks()
        b = simulate_paths(jumpy, [seed])[0].ticks()
        ra = spot_vol(a, 0.5, "right", DAY)
        rb = spot_vol(b, 0.5, "right", DAY)
        assert rb == pytest.approx(ra, rel=0.25)


def test_all_bins_truncated_is_an_error():
    ts = _diffusion(23400, 0.01, 5)
    with pytest.raises(EstimationError):
        spot_vol(ts, 0.5, "left", replace(DAY, u_override=1e-30))


def test_no_bins_on_a_side_is_an_error():
    ts = _diffusion(23400, 0.01, 5)
    with pytest.raises(EstimationError):
        spot_vol(ts, 0.005, "left", DAY)


def test_equal_sides_give_zero_statistic():
    est = SpotVolEstimate(1e-4, 1e-4, 8, 8, 1e-8, 1e-8, 0.0, 0.2, 1e-10, 1e-10)
    t = vol_jump_statistic(est, 23400, 0.01, DAY)
    assert t.stat == 0.0 and t.pvalue == 1.0


def test_truncation_monotone_in_level():
    p = simulate_paths(SimConfig(n=23400, price_jump=PriceJump(0.47, 0.004)), [3])[0].ticks()
    spec = compute_bin_spectra(p, DAY)
    kept = []
    for u in (1.0, 1e-2, 1e-3, 4e-4, 2e-4, 1e-4):
        try:
            kept.append(spot_vol_pair(p, 0.5, replace(DAY, u_override=u), spec).r_left)
        except EstimationError:
            kept.append(0)
    assert all(a >= b for a, b in zip(kept, kept[1:]))


def test_reported_variances_are_nonnegative():
    rng = np.random.default_rng(9)
    ts = TickSeries.regular(1e-3 * rng.normal(size=23401))
    est = spot_vol_pair(ts, 0.5, DAY)
    assert est.sig2_left >= 0 and est.sig2_right >= 0


@pytest.mark.slow
def test_power_against_median_volatility_jump():
    cfg = SimConfig(n=23400, noise="multiplicative", vol_jump=VolJump(0.5, 1.373))
    rej = []
    for start in range(0, 200, 50):
        for p in simulate_paths(cfg, range(start, start + 50)):
            rej.append(vol_jump_test(p.ticks(), 0.5, DAY).pvalue < 0.05)
    assert np.mean(rej) > 0.9

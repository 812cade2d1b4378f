"""Invariants checked over generated inputs."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from jumplev.dle import estimate_dle
from jumplev.jumploc import DetectConfig, detect_events, flag_bins, qv_increments
from jumplev.preavg import LmConfig, lm_statistic
from jumplev.simkit import PriceJump, SimConfig, simulate_path
from jumplev.spectral import SpectralConfig, spectral_jump_estimator
from jumplev.spotvol import SpotVolConfig, compute_bin_spectra, spot_vol_pair
from jumplev.ticks import TickSeries

SMALL = SpotVolConfig(K=20, J=10, r_bins=4)


def _noisy(seed, n=4000, jump=0.003):
    p = simulate_path(SimConfig(n=n, q=0.0005, price_jump=PriceJump(0.537, jump), seed=seed))
    return p.ticks()


finite_dx = st.floats(-0.01, 0.01, allow_nan=False).filter(lambda v: abs(v) > 1e-6)
finite_ds = st.floats(-1e-4, 1e-4, allow_nan=False)


@st.composite
def event_lists(draw):
    m = draw(st.integers(1, 6))
    return [
        SimpleNamespace(dx_hat=draw(finite_dx), sig2_left=1e-4, sig2_right=1e-4 + draw(finite_ds), qv_inc=1.0,
                        eta2=1e-8, dx_variance=1e-8, dsig2_variance=1e-10)
        for _ in range(m)
    ]


@settings(max_examples=15)
@given(seed=st.integers(0, 5000), shift=st.floats(-10, 10, allow_nan=False))
def test_statistics_ignore_price_level(seed, shift):
    ts = _noisy(seed)
    moved = TickSeries(ts.times, ts.y + shift)
    assert lm_statistic(moved, 0.537) == pytest.approx(lm_statistic(ts, 0.537), abs=1e-9)
    cfg = SpectralConfig()
    assert spectral_jump_estimator(moved, 0.537, cfg).value == pytest.approx(
        spectral_jump_estimator(ts, 0.537, cfg).value, abs=1e-9)
    a, b = compute_bin_spectra(ts, SMALL), compute_bin_spectra(moved, SMALL)
    np.testing.assert_allclose(qv_increments(b), qv_increments(a), rtol=1e-6, atol=1e-14)


@given(event_lists())
def test_negating_jumps_negates_leverage(events):
    flipped = [SimpleNamespace(**{**vars(e), "dx_hat": -e.dx_hat}) for e in events]
    a, b = estimate_dle(events), estimate_dle(flipped)
    assert b.dle == pytest.approx(-a.dle, abs=1e-30)
    assert b.corr == pytest.approx(-a.corr, abs=1e-12)
    assert b.selfscale_var == pytest.approx(a.selfscale_var)


@given(event_lists(), st.floats(0.01, 100))
def test_scaling_variance_jumps(events, c):
    scaled = [SimpleNamespace(**{**vars(e), "sig2_right": e.sig2_left + c * (e.sig2_right - e.sig2_left)})
              for e in events]
    a, b = estimate_dle(events), estimate_dle(scaled)
    assert b.dle == pytest.approx(c * a.dle, rel=1e-9, abs=1e-30)
    assert b.corr == pytest.approx(a.corr, abs=1e-9)


@given(event_lists())
def test_correlation_bounded_and_audit(events):
    r = estimate_dle(events)
    assert -1.0 <= r.corr <= 1.0
    assert r.contributions.sum() == pytest.approx(r.dle, rel=1e-12, abs=1e-30)


@given(
    qv=st.lists(st.floats(0, 1e-4), min_size=3, max_size=30),
    scale=st.floats(0.1, 10),
    a1=st.floats(0, 0.01),
    a2=st.floats(0, 0.01),
)
def test_flags_shrink_as_cutoffs_rise(qv, scale, a1, a2):
    qv = np.array(qv)
    u = np.full(qv.size, 1e-5)
    lo, hi = sorted((a1, a2))
    assert set(flag_bins(qv, u, hi)) <= set(flag_bins(qv, u, lo))
    bigger = u * max(scale, 1.0)
    assert set(flag_bins(qv, bigger, lo)) <= set(flag_bins(qv, u, lo))
    flags = flag_bins(qv, u, lo)
    assert 1 not in flags and qv.size not in flags


@settings(max_examples=10)
@given(seed=st.integers(0, 5000), k=st.integers(6, 15))
def test_time_reversal_swaps_sides(seed, k):
    ts = _noisy(seed)
    rev = TickSeries(1.0 - ts.times[::-1], ts.y[::-1].copy())
    # a bin centre; reversal maps the bin grid onto itself
    tau = (k - 0.5) / 20
    fwd = spot_vol_pair(ts, tau, SMALL)
    back = spot_vol_pair(rev, 1.0 - tau, SMALL)
    assert back.sig2_left == pytest.approx(fwd.sig2_right, rel=1e-9)
    assert back.sig2_right == pytest.approx(fwd.sig2_left, rel=1e-9)


@settings(max_examples=5)
@given(seed=st.integers(0, 5000))
def test_detection_is_deterministic(seed):
    ts = _noisy(seed, n=23400, jump=0.004)
    cfg = DetectConfig(spot=SpotVolConfig(K=100, J=30, r_bins=8))
    first, _ = detect_events(ts, cfg)
    second, _ = detect_events(TickSeries(ts.times.copy(), ts.y.copy()), cfg)
    assert first == second

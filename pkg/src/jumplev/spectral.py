"""Sine-basis spectral statistics and the weighted spectral jump estimator.

Returns inside a window of length ``h`` centred at ``tau`` are projected on
the sine functions ``sqrt(2/h) sin(j pi (t - tau + h/2) / h)``. At the window
centre the odd basis functions take the values +-sqrt(2/h) with alternating
sign, so an alternating, weighted sum of odd-frequency statistics recovers a
jump located at ``tau``. Weights are inverse variances: the diffusion
contributes the average of the two one-sided spot variances to every
frequency, the noise adds ``pi^2 j^2 eta^2 / (n h^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ticks import EstimationError, TestResult, TickSeries, two_sided_pvalue

EDGE_TOL = 1e-12


def truncation_level(h: float, varpi: float, scale: float, override: float | None = None) -> float:
    """Level ``scale * h ** (varpi - 1)`` for absolute bin values, i.e. bins
    with ``h * |value| > h ** varpi * scale`` are dropped."""
    if override is not None:
        return float(override)
    return float(scale) * h ** (varpi - 1.0)


@dataclass(frozen=True)
class SpectralConfig:
    """Tuning for the spectral estimators.

    Attributes
    ----------
    kappa : float
        Window constant; ``h = kappa * log(n) / sqrt(n)`` unless ``h`` is set.
    J : int or None
        Number of odd frequencies (1, 3, ..., 2J-1). ``None`` means
        ``round(5 log n)``, capped so that ``2J - 1`` stays below the number
        of returns in the window.
    varpi : float
        Truncation exponent; a bin is dropped when ``h * |value|`` exceeds
        ``h ** varpi`` times the median absolute bin value, so the rule does
        not depend on the units of the prices. ``u_override`` replaces the
        level for ``|value|`` by an absolute number.
    R_pilot, J_pilot : float, int
        Pilot smoothing: ``R_pilot * n**0.25`` bins per side, frequencies
        1..J_pilot in each bin.
    sig2_floor : float
        Lower bound applied to pilot spot variances.
    variance : {"finite", "asymptotic"}
        Which variance standardizes the jump test. ``finite`` uses the
        plug-in variance of the weighted sum at the actual cut-off; it tends
        to the asymptotic expression as J grows.
    """

    kappa: float = 5.0 / 12.0
    h: float | None = None
    J: int | None = None
    varpi: float = 0.35
    R_pilot: float = 3.0
    J_pilot: int = 10
    sig2_floor: float = 1e-10
    u_override: float | None = None
    variance: str = "finite"

    def __post_init__(self):
        if self.h is not None and not 0 < self.h < 1:
            raise ValueError("h must lie in (0, 1)")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.J is not None and self.J < 1:
            raise ValueError("J must be at least 1")
        if not 0 < self.varpi < 1:
            raise ValueError("varpi must lie in (0, 1)")
        if self.R_pilot <= 0 or self.J_pilot < 1 or self.sig2_floor <= 0:
            raise ValueError("R_pilot, J_pilot and sig2_floor must be positive")
        if self.variance not in ("finite", "asymptotic"):
            raise ValueError("variance must be 'finite' or 'asymptotic'")

    def window(self, n: int) -> float:
        if self.h is not None:
            return float(self.h)
        h = self.kappa * math.log(n) / math.sqrt(n)
        if not 0 < h < 1:
            raise ValueError(f"window rule gives h={h:g} outside (0, 1) for n={n}")
        return h

    def cutoff(self, n: int, h: float) -> int:
        if self.J is not None:
            return int(self.J)
        J = int(round(5.0 * math.log(n)))
        # highest odd frequency must stay below the number of returns per window
        return max(1, min(J, int((n * h) // 2)))

    def threshold(self, h: float, scale: float) -> float:
        """Truncation level for absolute bin values with typical size ``scale``."""
        return truncation_level(h, self.varpi, scale, self.u_override)

    def pilot_bins(self, n: int) -> int:
        return max(1, int(math.ceil(self.R_pilot * n**0.25)))


@dataclass(frozen=True)
class PilotEstimates:
    eta2: float
    sig2_left: float
    sig2_right: float
    bins_left: np.ndarray = field(default_factory=lambda: np.empty(0), compare=False)
    bins_right: np.ndarray = field(default_factory=lambda: np.empty(0), compare=False)


@dataclass(frozen=True)
class JumpEstimate:
    """Spectral jump estimate.

    ``avar`` is the asymptotic variance of n^(1/4) (estimate - jump);
    ``variance`` is the plug-in variance of the estimate at the cut-off used.
    """

    value: float
    avar: float
    variance: float
    rate_factor: float
    weights: np.ndarray = field(compare=False)
    h: float = float("nan")
    center: float = float("nan")


def sine_basis(j, tau: float, h: float, t):
    """Window-localized sine function; zero outside [tau - h/2, tau + h/2]."""
    j_arr = np.asarray(j)
    if np.any(j_arr < 1):
        raise ValueError("frequency j must be >= 1")
    t = np.asarray(t, dtype=float)
    start, end = tau - 0.5 * h, tau + 0.5 * h
    inside = (t >= start) & (t <= end)
    # phase measured from the nearer edge so both edges are exact zeros;
    # sin(j pi (1 - v)) = (-1)^(j+1) sin(j pi v)
    right = t > tau
    frac = np.where(right, end - t, t - start) / h
    val = np.sin(np.multiply.outer(j_arr, frac) * math.pi)
    sign = np.where(np.multiply.outer(j_arr % 2 == 0, right), -1.0, 1.0)
    return np.where(inside, math.sqrt(2.0 / h) * sign * val, 0.0)


def _window_slice(ts: TickSeries, tau: float, h: float) -> slice:
    lo, hi = tau - 0.5 * h, tau + 0.5 * h
    if lo < -EDGE_TOL or hi > 1.0 + EDGE_TOL:
        raise ValueError(f"window [{lo:g}, {hi:g}] leaves [0, 1]")
    mid = ts.midpoints
    a = int(np.searchsorted(mid, lo, side="left"))
    b = int(np.searchsorted(mid, hi, side="right"))
    if b <= a:
        raise EstimationError(f"no returns inside the window around {tau:g}")
    return slice(a, b)


def spectral_statistics_from_returns(dy, mid, tau: float, h: float, freqs) -> np.ndarray:
    """S_j for each frequency from returns ``dy`` with midpoints ``mid``."""
    freqs = np.atleast_1d(np.asarray(freqs))
    phi = sine_basis(freqs, tau, h, mid)
    return phi @ np.asarray(dy, dtype=float)


def spectral_statistic(ts: TickSeries, tau: float, h: float, j) -> np.ndarray | float:
    """Sum of returns weighted by the basis function at return midpoints.

    ``j`` may be a scalar (returns a float) or an array of frequencies.
    """
    sl = _window_slice(ts, tau, h)
    out = spectral_statistics_from_returns(np.diff(ts.y)[sl], ts.midpoints[sl], tau, h, j)
    return float(out[0]) if np.ndim(j) == 0 else out


def estimate_noise_variance(ts: TickSeries) -> float:
    """Negative first-order return autocovariance, floored at zero."""
    if ts.n < 3:
        raise ValueError("need at least 3 returns")
    dy = ts.returns
    return max(0.0, -float(np.dot(dy[1:], dy[:-1])) / ts.n)


def noise_bias(freqs, eta2: float, n: int, h: float) -> np.ndarray:
    """Noise contribution pi^2 j^2 eta^2 / (n h^2) to E[S_j^2]."""
    freqs = np.asarray(freqs, dtype=float)
    return (math.pi**2) * freqs**2 * eta2 / (n * h * h)


def pilot_bin_values(ts: TickSeries, centers, h: float, eta2: float, J_pilot: int) -> np.ndarray:
    """Bias-corrected mean of S_j^2, j = 1..J_pilot, for windows at ``centers``."""
    freqs = np.arange(1, J_pilot + 1)
    bias = noise_bias(freqs, eta2, ts.n, h)
    dy = ts.returns
    mid = ts.midpoints
    vals = []
    for c in centers:
        sl = _window_slice(ts, c, h)
        s = spectral_statistics_from_returns(dy[sl], mid[sl], c, h, freqs)
        vals.append(float(np.mean(s * s - bias)))
    return np.asarray(vals)


def pilot_centers(tau: float, h: float, side: str, max_bins: int) -> np.ndarray:
    """Centres tau -+ k h, k = 1..max_bins, truncated to windows inside [0, 1]."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    sign = -1.0 if side == "left" else 1.0
    k = np.arange(1, max_bins + 1)
    c = tau + sign * k * h
    ok = (c - 0.5 * h >= -EDGE_TOL) & (c + 0.5 * h <= 1.0 + EDGE_TOL)
    # stop at the first window that leaves the sample
    stop = int(np.argmin(ok)) if not ok.all() else ok.size
    return c[:stop]


def pilot_spot_vol(
    ts: TickSeries,
    tau: float,
    side: str,
    cfg: SpectralConfig = SpectralConfig(),
    eta2: float | None = None,
    return_bins: bool = False,
):
    """Truncated average of bias-corrected squared spectral statistics on
    bins next to ``tau``.

    Bins whose mean statistic exceeds the truncation level in absolute value
    are dropped and the average runs over the bins kept. The number of bins
    is capped by what fits inside [0, 1].
    """
    n = ts.n
    h = cfg.window(n)
    if eta2 is None:
        eta2 = estimate_noise_variance(ts)
    centers = pilot_centers(tau, h, side, cfg.pilot_bins(n))
    if centers.size == 0:
        raise EstimationError(f"no complete pilot bin {side} of {tau:g}")
    vals = pilot_bin_values(ts, centers, h, eta2, cfg.J_pilot)
    keep = np.abs(vals) <= cfg.threshold(h, float(np.median(np.abs(vals))))
    if not keep.any():
        raise EstimationError(f"all {vals.size} pilot bins {side} of {tau:g} were truncated")
    est = max(float(np.mean(vals[keep])), cfg.sig2_floor)
    return (est, vals) if return_bins else est


def estimate_pilots(ts: TickSeries, tau: float, cfg: SpectralConfig = SpectralConfig()) -> PilotEstimates:
    eta2 = estimate_noise_variance(ts)
    left, bl = pilot_spot_vol(ts, tau, "left", cfg, eta2, return_bins=True)
    right, br = pilot_spot_vol(ts, tau, "right", cfg, eta2, return_bins=True)
    return PilotEstimates(eta2, left, right, bl, br)


def _odd_variances(sig2_left, sig2_right, eta2, h, n, J) -> np.ndarray:
    odd = 2.0 * np.arange(1, J + 1) - 1.0
    return 0.5 * (sig2_left + sig2_right) + noise_bias(odd, eta2, n, h)


def oracle_weights(sig2_left: float, sig2_right: float, eta2: float, h: float, n: int, J: int) -> np.ndarray:
    """Inverse-variance weights for frequencies 1, 3, ..., 2J-1, summing to one."""
    if sig2_left <= 0 or sig2_right <= 0 or eta2 < 0 or h <= 0 or n < 1 or J < 1:
        raise ValueError("oracle weights need positive variances, eta2 >= 0, h > 0, n >= 1, J >= 1")
    inv = 1.0 / _odd_variances(sig2_left, sig2_right, eta2, h, n, J)
    return inv / inv.sum()


def weighted_sum_variance(sig2_left, sig2_right, eta2, h, n, J) -> float:
    """Variance of the optimally weighted estimator at cut-off J."""
    inv = 1.0 / _odd_variances(sig2_left, sig2_right, eta2, h, n, J)
    return 0.5 * h / float(inv.sum())


def asymptotic_jump_avar(sig2_left: float, sig2_right: float, eta2: float) -> float:
    return 2.0 * math.sqrt(0.5 * (sig2_left + sig2_right)) * math.sqrt(eta2)


def combine_odd_statistics(s_odd: np.ndarray, weights: np.ndarray, h: float) -> float:
    signs = np.where(np.arange(weights.size) % 2 == 0, 1.0, -1.0)
    return float(np.sum(signs * weights * s_odd) * math.sqrt(0.5 * h))


def _estimate_from_returns(dy, mid, center, n, h, cfg, pilots, spacing=1.0) -> JumpEstimate:
    J = cfg.cutoff(n, h)
    eta2_eff = pilots.eta2 * spacing
    w = oracle_weights(pilots.sig2_left, pilots.sig2_right, eta2_eff, h, n, J)
    odd = 2 * np.arange(1, J + 1) - 1
    s = spectral_statistics_from_returns(dy, mid, center, h, odd)
    value = combine_odd_statistics(s, w, h)
    avar = asymptotic_jump_avar(pilots.sig2_left, pilots.sig2_right, eta2_eff)
    var = weighted_sum_variance(pilots.sig2_left, pilots.sig2_right, eta2_eff, h, n, J)
    return JumpEstimate(value, avar, var, n**0.25, w, h, center)


def local_spacing(ts: TickSeries, tau: float, h: float) -> float:
    """Average observation spacing on the window times n (1 on a regular grid)."""
    sl = _window_slice(ts, tau, h)
    dt = np.diff(ts.times)[sl]
    return float(np.mean(dt) * ts.n)


def spectral_jump_estimator(
    ts: TickSeries,
    tau: float,
    cfg: SpectralConfig = SpectralConfig(),
    pilots: PilotEstimates | None = None,
) -> JumpEstimate:
    """Jump estimate at ``tau`` from odd-frequency statistics with
    plug-in optimal weights.

    On irregular grids the noise level entering weights and variance is
    scaled by the local spacing relative to 1/n.
    """
    n = ts.n
    h = cfg.window(n)
    if pilots is None:
        pilots = estimate_pilots(ts, tau, cfg)
    sl = _window_slice(ts, tau, h)
    spacing = local_spacing(ts, tau, h)
    return _estimate_from_returns(ts.returns[sl], ts.midpoints[sl], tau, n, h, cfg, pilots, spacing)


def jump_test_from_estimate(est: JumpEstimate, n: int, cfg: SpectralConfig) -> TestResult:
    if cfg.variance == "finite":
        var = est.variance
    else:
        var = est.avar / math.sqrt(n)
    if not var > 0:
        raise EstimationError("non-positive jump-estimator variance")
    z = est.value / math.sqrt(var)
    return TestResult(stat=z, variance=var, pvalue=two_sided_pvalue(z), estimate=est.value)


def spectral_jump_test(
    ts: TickSeries,
    tau: float,
    cfg: SpectralConfig = SpectralConfig(),
    pilots: PilotEstimates | None = None,
) -> TestResult:
    est = spectral_jump_estimator(ts, tau, cfg, pilots)
    return jump_test_from_estimate(est, ts.n, cfg)

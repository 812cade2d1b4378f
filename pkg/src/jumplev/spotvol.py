"""Bin-wise spectral spot variance and the test for a volatility jump.

The unit interval is cut into ``K`` bins of width ``h = 1/K``. On each bin
the squared spectral statistics, corrected for their noise bias, are combined
with weights proportional to their inverse squared variances. Averaging those
bin estimates over ``r`` bins strictly left or right of a time point gives
the one-sided spot variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import estimate_noise_variance, noise_bias, spectral_statistics_from_returns, truncation_level
from .ticks import EstimationError, TestResult, TickSeries, two_sided_pvalue


def bins_rule(n: int) -> int:
    """Bin count growing like sqrt(n) / log(n)."""
    return int(math.floor(3.0 * math.sqrt(n) / math.log(n)))


def averaging_bins_rule(n: int) -> int:
    """Number of bins averaged on each side for spot variances."""
    return int(math.ceil(3.0 * n**0.25 / math.log(n)))


@dataclass(frozen=True)
class SpotVolConfig:
    """Settings shared by the bin-wise estimators.

    ``K``, ``J`` and ``r_bins`` default to growth rules in ``n``:
    ``floor(3 sqrt(n) / log n)`` bins, ``round(5 log n)`` frequencies (capped
    by the returns per bin) and ``ceil(3 n^(1/4) / log n)`` averaged bins.

    ``rate`` picks the normalization of the volatility-jump test:
    ``effective`` uses ``r_bins * h * sqrt(n)``, the number of noise-optimal
    degrees of freedom actually averaged; ``nominal`` uses ``n ** beta``.
    ``variance="finite"`` replaces the asymptotic bin variance
    ``8 eta sigma^3 / (h sqrt(n))`` by its value at the frequency cut-off.
    Bins with ``h * |value|`` above ``h ** varpi`` times the median absolute
    raw pilot are truncated; ``u_override`` sets an absolute level instead.
    """

    K: int | None = None
    J: int | None = None
    r_bins: int | None = None
    beta: float = 0.2
    varpi: float = 0.35
    u_override: float | None = None
    J_pilot: int = 10
    pilot_bins: int | None = None
    sig2_floor: float = 1e-10
    rate: str = "effective"
    variance: str = "finite"
    local_noise: bool = True

    def __post_init__(self):
        if self.K is not None and self.K < 3:
            raise ValueError("K must be at least 3")
        if self.J is not None and self.J < 1:
            raise ValueError("J must be at least 1")
        if self.r_bins is not None and self.r_bins < 1:
            raise ValueError("r_bins must be at least 1")
        if not 0 < self.beta < 0.25:
            raise ValueError("beta must lie in (0, 1/4)")
        if not 0 < self.varpi < 1:
            raise ValueError("varpi must lie in (0, 1)")
        if self.J_pilot < 1 or self.sig2_floor <= 0:
            raise ValueError("J_pilot and sig2_floor must be positive")
        if self.rate not in ("effective", "nominal"):
            raise ValueError("rate must be 'effective' or 'nominal'")
        if self.variance not in ("asymptotic", "finite"):
            raise ValueError("variance must be 'asymptotic' or 'finite'")

    def bins(self, n: int) -> int:
        K = self.K if self.K is not None else bins_rule(n)
        if K < 3:
            raise ValueError(f"n={n} gives fewer than 3 bins")
        return int(K)

    def cutoff(self, n: int, K: int) -> int:
        J = self.J if self.J is not None else int(round(5.0 * math.log(n)))
        return max(1, min(int(J), max(1, n // K - 1)))

    def averaging(self, n: int) -> int:
        return int(self.r_bins) if self.r_bins is not None else averaging_bins_rule(n)

    def pilot_span(self, n: int) -> int:
        return int(self.pilot_bins) if self.pilot_bins is not None else self.averaging(n)

    def threshold(self, h: float, scale: float) -> float:
        """Truncation level for absolute bin values with typical size ``scale``."""
        return truncation_level(h, self.varpi, scale, self.u_override)


@dataclass(frozen=True)
class BinSpectra:
    """Spectral statistics of one series on a regular bin partition.

    ``S[k-1, j-1]`` is the statistic of frequency j on bin k (window
    ((k-1)h, kh]). ``S_shift[l-1, j-1]`` uses the window centred at
    ``(l-1) h``, i.e. shifted by half a bin; rows whose window leaves [0, 1]
    (l = 1 and l = K + 1) are NaN. ``pilot_raw`` holds the bias-corrected mean
    of S^2 over frequencies 1..J_pilot per bin and ``bin_slices`` the return
    index range of every bin.
    """

    n: int
    K: int
    h: float
    J: int
    S: np.ndarray
    S_shift: np.ndarray
    eta2: float
    pilot_raw: np.ndarray
    sig2_pilot: np.ndarray
    bin_slices: list = field(compare=False)
    returns: np.ndarray = field(compare=False)

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(1, self.J + 1)

    def bin_of(self, t: float) -> int:
        """1-based index of the bin containing t (right-closed bins)."""
        return int(min(self.K, max(1, math.ceil(t * self.K - 1e-12))))

    def noise_in(self, k_lo: int, k_hi: int) -> float:
        """Noise variance from returns in bins k_lo..k_hi, floored at zero."""
        a = self.bin_slices[k_lo - 1].start
        b = self.bin_slices[k_hi - 1].stop
        dy = self.returns[a:b]
        if dy.size < 3:
            return self.eta2
        # same normalization as the full-sample estimator: sum over pairs / count
        return max(0.0, -float(np.dot(dy[1:], dy[:-1])) / dy.size)


def _returns_in(mid: np.ndarray, lo: float, hi: float) -> slice:
    return slice(int(np.searchsorted(mid, lo, side="left")), int(np.searchsorted(mid, hi, side="right")))


def _truncated_mean(values: np.ndarray, u: float) -> float:
    keep = np.abs(values) <= u
    return float(np.mean(values[keep])) if keep.any() else float("nan")


def bin_pilots(pilot_raw: np.ndarray, span: int, u: float, floor: float) -> np.ndarray:
    """Pilot spot variance per bin: the smaller of the truncated means over
    up to ``span`` bins on its left and on its right.

    The bin itself is left out so a jump inside it cannot inflate its own
    threshold, and taking the calmer side keeps a volatility jump next to
    the bin from doing so either. The rule is mirror-symmetric in time.
    Truncation drops raw values above ``u`` in absolute value; a side where
    nothing survives is ignored, and if both are empty the untruncated
    median of the neighbours is used.
    """
    K = pilot_raw.size
    out = np.empty(K)
    for k in range(K):
        left = pilot_raw[max(0, k - span) : k]
        right = pilot_raw[k + 1 : k + 1 + span]
        sides = [_truncated_mean(v, u) for v in (left, right) if v.size]
        sides = [v for v in sides if np.isfinite(v)]
        if sides:
            v = min(sides)
        else:
            nb = np.concatenate([left, right])
            v = float(np.median(nb if nb.size else pilot_raw))
        out[k] = max(v, floor)
    return out


def compute_bin_spectra(ts: TickSeries, cfg: SpotVolConfig = SpotVolConfig(), eta2: float | None = None) -> BinSpectra:
    n = ts.n
    K = cfg.bins(n)
    h = 1.0 / K
    J = cfg.cutoff(n, K)
    Jall = max(J, cfg.J_pilot)
    freqs = np.arange(1, Jall + 1)
    dy = ts.returns
    mid = ts.midpoints
    if eta2 is None:
        eta2 = estimate_noise_variance(ts)

    S = np.empty((K, Jall))
    slices = []
    for k in range(1, K + 1):
        sl = _returns_in(mid, (k - 1) * h, k * h)
        if sl.stop - sl.start < 2:
            raise EstimationError(f"bin {k} of {K} holds fewer than 2 returns")
        slices.append(sl)
        S[k - 1] = spectral_statistics_from_returns(dy[sl], mid[sl], (k - 0.5) * h, h, freqs)
    # returns with midpoints exactly on a bin edge appear in both neighbours
    # but the basis vanishes there, so the statistics are unaffected

    S_shift = np.full((K + 1, J), np.nan)
    for l in range(2, K + 1):
        c = (l - 1) * h
        sl = _returns_in(mid, c - 0.5 * h, c + 0.5 * h)
        S_shift[l - 1] = spectral_statistics_from_returns(dy[sl], mid[sl], c, h, freqs[:J])

    pfreq = np.arange(1, cfg.J_pilot + 1)
    pilot_raw = np.mean(S[:, : cfg.J_pilot] ** 2 - noise_bias(pfreq, eta2, n, h), axis=1)
    u = cfg.threshold(h, float(np.median(np.abs(pilot_raw))))
    sig2_pilot = bin_pilots(pilot_raw, cfg.pilot_span(n), u, cfg.sig2_floor)
    return BinSpectra(n, K, h, J, S[:, :J], S_shift, float(eta2), pilot_raw, sig2_pilot, slices, dy)


def adaptive_weights(sig2: float, eta2: float, n: int, h: float, freqs) -> np.ndarray:
    """Weights proportional to (sig2 + pi^2 j^2 eta2 / (n h^2))^-2, summing to one."""
    v = sig2 + noise_bias(freqs, eta2, n, h)
    inv2 = v**-2.0
    return inv2 / inv2.sum()


def bin_adaptive_variance(sig2: float, eta2: float, n: int, h: float, J: int) -> float:
    """Variance of one bin estimate under Gaussian statistics: 2 / sum V_j^-2."""
    v = sig2 + noise_bias(np.arange(1, J + 1), eta2, n, h)
    return 2.0 / float(np.sum(v**-2.0))


def bin_adaptive_values(spec: BinSpectra, ks, eta2: float | None = None) -> np.ndarray:
    """Weighted bias-corrected squared statistics for the 1-based bins ``ks``."""
    eta2 = spec.eta2 if eta2 is None else eta2
    freqs = spec.freqs
    bias = noise_bias(freqs, eta2, spec.n, spec.h)
    out = []
    for k in ks:
        w = adaptive_weights(spec.sig2_pilot[k - 1], eta2, spec.n, spec.h, freqs)
        out.append(float(np.dot(w, spec.S[k - 1] ** 2 - bias)))
    return np.asarray(out)


def bin_adaptive_stat(ts: TickSeries, k: int, cfg: SpotVolConfig = SpotVolConfig(), spec: BinSpectra | None = None) -> float:
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg)
    if not 1 <= k <= spec.K:
        raise IndexError(f"bin {k} outside 1..{spec.K}")
    return float(bin_adaptive_values(spec, [k])[0])


@dataclass(frozen=True)
class SpotVolEstimate:
    sig2_left: float
    sig2_right: float
    r_left: int
    r_right: int
    eta2_left: float
    eta2_right: float
    avar: float
    beta: float
    var_left: float = float("nan")
    var_right: float = float("nan")


@dataclass(frozen=True)
class _Side:
    value: float
    kept: int
    eta2: float
    var: float


def _side_estimate(spec: BinSpectra, k_tau: int, side: str, cfg: SpotVolConfig) -> _Side:
    r = cfg.averaging(spec.n)
    if side == "left":
        ks = list(range(max(1, k_tau - r), k_tau))
    elif side == "right":
        ks = list(range(k_tau + 1, min(spec.K, k_tau + r) + 1))
    else:
        raise ValueError("side must be 'left' or 'right'")
    if not ks:
        raise EstimationError(f"no complete bins {side} of bin {k_tau}")
    eta2 = spec.noise_in(min(ks), max(ks)) if cfg.local_noise else spec.eta2
    z = bin_adaptive_values(spec, ks, eta2)
    # typical size from the raw pilots of all bins, robust to the few jump bins
    keep = np.abs(z) <= cfg.threshold(spec.h, float(np.median(np.abs(spec.pilot_raw))))
    if not keep.any():
        raise EstimationError(f"all {len(ks)} bins {side} of bin {k_tau} were truncated")
    value = max(float(np.mean(z[keep])), 0.0)
    kept_ks = [k for k, ok in zip(ks, keep) if ok]
    var_bins = [bin_adaptive_variance(max(value, cfg.sig2_floor), eta2, spec.n, spec.h, spec.J) for _ in kept_ks]
    var = float(np.sum(var_bins)) / len(kept_ks) ** 2
    return _Side(value, int(keep.sum()), eta2, var)


def spot_vol(ts: TickSeries, tau: float, side: str, cfg: SpotVolConfig = SpotVolConfig(), spec: BinSpectra | None = None) -> float:
    """Truncated average of bin estimates strictly left or right of the bin holding ``tau``."""
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg)
    return _side_estimate(spec, spec.bin_of(tau), side, cfg).value


def spot_vol_pair(ts: TickSeries, tau: float, cfg: SpotVolConfig = SpotVolConfig(), spec: BinSpectra | None = None) -> SpotVolEstimate:
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg)
    k = spec.bin_of(tau)
    left = _side_estimate(spec, k, "left", cfg)
    right = _side_estimate(spec, k, "right", cfg)
    eta = math.sqrt(0.5 * (left.eta2 + right.eta2))
    avar = 8.0 * (left.value**1.5 + right.value**1.5) * eta
    return SpotVolEstimate(left.value, right.value, left.kept, right.kept, left.eta2, right.eta2, avar, cfg.beta, left.var, right.var)


def vol_jump_statistic(est: SpotVolEstimate, n: int, h: float, cfg: SpotVolConfig, eta_tau: float | None = None) -> TestResult:
    """Standardized difference of right and left spot variances."""
    diff = est.sig2_right - est.sig2_left
    if cfg.variance == "finite":
        var = est.var_left + est.var_right
    else:
        eta = math.sqrt(0.5 * (est.eta2_left + est.eta2_right)) if eta_tau is None else eta_tau
        s_l = math.sqrt(max(est.sig2_left, cfg.sig2_floor))
        s_r = math.sqrt(max(est.sig2_right, cfg.sig2_floor))
        avar = 8.0 * (s_l**3 + s_r**3) * eta
        if cfg.rate == "nominal":
            var = avar / n**cfg.beta
        else:
            # each side averages its own number of kept bins
            var = 8.0 * eta * (s_l**3 / est.r_left + s_r**3 / est.r_right) / (h * math.sqrt(n))
    if not var > 0:
        if diff == 0:
            return TestResult(0.0, 0.0, 1.0, estimate=0.0)
        raise EstimationError("degenerate volatility-jump variance")
    z = diff / math.sqrt(var)
    return TestResult(stat=z, variance=var, pvalue=two_sided_pvalue(z), estimate=diff)


def vol_jump_test(
    ts: TickSeries,
    tau: float,
    cfg: SpotVolConfig = SpotVolConfig(),
    eta_tau: float | None = None,
    spec: BinSpectra | None = None,
) -> TestResult:
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg)
    est = spot_vol_pair(ts, tau, cfg, spec)
    return vol_jump_statistic(est, ts.n, spec.h, cfg, eta_tau)

"""Locating price jumps on a bin grid and estimating them at unknown times.

Detection compares a bin-wise estimate of the jump variation increment with a
moving threshold proportional to a pilot spot variance. A flagged bin is then
split into ``R`` sub-intervals; the one with the largest short pre-averaged
difference is cut out, the remaining observations are spliced together and
the spectral estimator is evaluated at the splice.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .preavg import preaveraged_price
from .spectral import PilotEstimates, SpectralConfig, _estimate_from_returns, noise_bias
from .spotvol import (
    BinSpectra,
    SpotVolConfig,
    adaptive_weights,
    compute_bin_spectra,
    spot_vol_pair,
    vol_jump_statistic,
)
from .ticks import EstimationError, TickSeries

THRESHOLD_RULES = ("log", "loglog")
SCANS = ("partition", "sliding")


@dataclass(frozen=True)
class DetectConfig:
    """Detection and refinement settings.

    ``threshold_rule`` selects the moving threshold
    ``scale * L(K) / K * pilot_k`` with ``L = log`` or ``log log``;
    ``a`` is the tail cut-off on the jump size, compared as ``a**2``.
    ``R`` and ``scan`` control the jump-time refinement, see
    ``refine_jump_time``.
    """

    spot: SpotVolConfig = SpotVolConfig()
    threshold_rule: str = "log"
    threshold_scale: float = 2.0
    a: float = 0.0
    R: int = 6
    scan: str = "partition"

    def __post_init__(self):
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ValueError(f"threshold_rule must be one of {THRESHOLD_RULES}")
        if self.threshold_scale <= 0 or self.a < 0 or self.R < 1:
            raise ValueError("threshold_scale must be positive, a >= 0 and R >= 1")
        if self.scan not in SCANS:
            raise ValueError(f"scan must be one of {SCANS}")


@dataclass(frozen=True)
class BinGrid:
    K: int
    h: float
    sig2_pilot: np.ndarray
    thresholds: np.ndarray
    spectra: BinSpectra = field(compare=False, repr=False)


@dataclass(frozen=True)
class JumpEvent:
    k: int
    tau_hat: float
    window: tuple
    dx_hat: float
    qv_inc: float
    sig2_left: float
    sig2_right: float
    vol_jump_stat: float
    vol_jump_pvalue: float
    dx_variance: float = float("nan")
    eta2: float = float("nan")
    dsig2_variance: float = float("nan")

    @property
    def dsig2(self) -> float:
        return self.sig2_right - self.sig2_left


def make_bin_grid(ts: TickSeries, cfg: DetectConfig = DetectConfig(), spectra: BinSpectra | None = None) -> BinGrid:
    if ts.n < 100:
        raise ValueError(f"bin detection needs at least 100 returns, got {ts.n}")
    spec = spectra if spectra is not None else compute_bin_spectra(ts, cfg.spot)
    K = spec.K
    L = math.log(K) if cfg.threshold_rule == "log" else math.log(math.log(K))
    u = cfg.threshold_scale * L / K * spec.sig2_pilot
    return BinGrid(K, spec.h, spec.sig2_pilot.copy(), u, spec)


def _odd(J: int) -> np.ndarray:
    return np.arange(1, J + 1, 2)


def shifted_bin_values(spec: BinSpectra) -> np.ndarray:
    """zeta-tilde for every bin k = 1..K (boundary bins use the one shifted
    window that fits inside [0, 1])."""
    odd = _odd(spec.J)
    bias = noise_bias(odd, spec.eta2, spec.n, spec.h)
    out = np.empty(spec.K)
    for k in range(1, spec.K + 1):
        w = adaptive_weights(spec.sig2_pilot[k - 1], spec.eta2, spec.n, spec.h, odd)
        s2 = spec.S[k - 1, odd - 1] ** 2
        cands = []
        for l in (k, k + 1):
            shifted = spec.S_shift[l - 1, odd - 1]
            if np.all(np.isfinite(shifted)):
                cands.append(float(np.dot(w, 0.5 * s2 + 0.5 * shifted**2 - bias)))
        out[k - 1] = max(cands)
    return out


def shifted_bin_stats(ts: TickSeries, k: int, cfg: DetectConfig = DetectConfig(), spec: BinSpectra | None = None) -> float:
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg.spot)
    if not 2 <= k <= spec.K - 1:
        raise IndexError(f"bin {k} needs both neighbours inside 1..{spec.K}")
    return float(shifted_bin_values(spec)[k - 1])


def qv_increments(spec: BinSpectra, zeta: np.ndarray | None = None) -> np.ndarray:
    """Jump-variation increments for bins 1..K; zero at the two edge bins and
    wherever the bin is not a strict local maximum of zeta-tilde."""
    z = shifted_bin_values(spec) if zeta is None else zeta
    out = np.zeros(spec.K)
    for k in range(2, spec.K):
        if z[k - 1] > max(z[k - 2], z[k]):
            out[k - 1] = spec.h * z[k - 1]
    return out


def qv_increment(ts: TickSeries, k: int, cfg: DetectConfig = DetectConfig(), spec: BinSpectra | None = None) -> float:
    spec = spec if spec is not None else compute_bin_spectra(ts, cfg.spot)
    if not 2 <= k <= spec.K - 1:
        raise IndexError(f"bin {k} outside 2..{spec.K - 1}")
    return float(qv_increments(spec)[k - 1])


def flag_bins(qv: np.ndarray, thresholds: np.ndarray, a: float) -> list[int]:
    """1-based bins with qv > max(a^2, u_k); edge bins are never flagged."""
    K = qv.size
    cut = np.maximum(a * a, thresholds)
    return [k for k in range(2, K) if qv[k - 1] > cut[k - 1]]


def detect_jump_bins(ts: TickSeries, grid: BinGrid, a: float = 0.0) -> list[int]:
    return flag_bins(qv_increments(grid.spectra), grid.thresholds, a)


def _first_after(times: np.ndarray, t: float) -> int:
    return int(np.searchsorted(times, t, side="right"))


def _bin_span(ts: TickSeries, k: int, K: int) -> tuple[int, int]:
    """First and last observation index inside bin k = ((k-1)/K, k/K]."""
    h = 1.0 / K
    return _first_after(ts.times, (k - 1) * h), _first_after(ts.times, k * h) - 1


def _subinterval_scores(ts: TickSeries, k: int, R: int, K: int) -> list:
    """(|pre-averaged difference|, t_lo, t_hi) for the R sub-intervals of bin k."""
    if R < 1:
        raise ValueError("R must be at least 1")
    h = 1.0 / K
    t0 = (k - 1) * h
    times = ts.times
    first, last = _bin_span(ts, k, K)
    count = last - first + 1
    if count < 2:
        raise EstimationError(f"bin {k} holds fewer than 2 observations")
    if count < 2 * R:
        new_R = max(1, count // 2)
        warnings.warn(f"bin {k} holds {count} observations; reducing R from {R} to {new_R}", stacklevel=3)
        R = new_R
    sub = h / R
    scores = []
    for i in range(R):
        center = t0 + (i + 0.5) * sub
        m_obs = _first_after(times, t0 + (i + 1) * sub) - _first_after(times, t0 + i * sub)
        M = max(1, m_obs // 2)
        l = _first_after(times, center)
        if l - M < 0 or l + M - 1 > ts.n:
            stat = -1.0
        else:
            stat = abs(preaveraged_price(ts, l, M) - preaveraged_price(ts, l - M, M))
        scores.append((stat, t0 + i * sub, t0 + (i + 1) * sub))
    return scores


def _clip_to_bin(t: float, k: int, K: int) -> float:
    # a return straddling the bin edge has its midpoint outside on irregular grids
    return float(min(max(t, (k - 1) / K), k / K))


def _largest_return(ts: TickSeries, k: int, K: int) -> tuple[tuple[int, int], float]:
    first, last = _bin_span(ts, k, K)
    # returns ending at observations first..last lie inside the bin
    lo_ret = max(first, 1)
    dy = np.abs(ts.y[lo_ret : last + 1] - ts.y[lo_ret - 1 : last])
    i = lo_ret + int(np.argmax(dy))
    return (i - 1, i), _clip_to_bin(0.5 * (ts.times[i - 1] + ts.times[i]), k, K)


def _sliding(ts: TickSeries, k: int, R: int, K: int) -> tuple[tuple[int, int], float]:
    first, last = _bin_span(ts, k, K)
    count = last - first + 1
    M = max(1, count // (2 * R))
    y = ts.y
    csum = np.concatenate([[0.0], np.cumsum(y)])
    ls = np.arange(max(first, M), min(last, ts.n - M + 1) + 1)
    if ls.size == 0:
        raise EstimationError(f"bin {k} too short for sliding pre-averages")
    right = (csum[ls + M] - csum[ls]) / M
    left = (csum[ls] - csum[ls - M]) / M
    l = int(ls[int(np.argmax(np.abs(right - left)))])
    lo, hi = max(0, l - M), min(ts.n, l + M - 1)
    return (lo, hi), _clip_to_bin(0.5 * (ts.times[l - 1] + ts.times[l]), k, K)


def _window_indices(times: np.ndarray, n: int, t_lo: float, t_hi: float) -> tuple[int, int]:
    # last observation at or before t_lo and first at or after t_hi
    lo = max(0, int(np.searchsorted(times, t_lo, side="right")) - 1)
    hi = min(n, int(np.searchsorted(times, t_hi, side="left")))
    return (lo, max(hi, lo + 1))


def _best(scores: list):
    # max() keeps the first maximal element, so ties go to the lowest index
    return max(scores, key=lambda s: s[0])


def refine_jump_time(ts: TickSeries, k: int, R: int, K: int, scan: str = "partition") -> tuple[tuple[int, int], float]:
    """Cut-out window (tick indices) and jump-time estimate inside bin k.

    ``partition``: the bin ((k-1)/K, k/K] is split into R sub-intervals of
    equal length; at each centre the pre-averaged difference over half as
    many observations as the sub-interval holds is evaluated and the
    sub-interval with the largest absolute value is cut out (ties go to the
    lowest index). When sub-intervals would hold a single return (R at least
    the number of returns in the bin) this is the largest absolute return.

    ``sliding`` evaluates the same statistic at every observation of the bin
    and cuts out the window of equal length centred at the maximizer.
    """
    if scan not in SCANS:
        raise ValueError(f"scan must be one of {SCANS}")
    first, last = _bin_span(ts, k, K)
    if R >= last - first:
        return _largest_return(ts, k, K)
    if scan == "sliding":
        return _sliding(ts, k, R, K)
    scores = _subinterval_scores(ts, k, R, K)
    _, t_lo, t_hi = _best(scores)
    return _window_indices(ts.times, ts.n, t_lo, t_hi), 0.5 * (t_lo + t_hi)


def spliced_returns(ts: TickSeries, window: tuple[int, int], h: float, center: float = 0.5):
    """Returns around a cut-out window with the window collapsed to a single
    return Y[hi] - Y[lo] whose midpoint sits at ``center``.

    Flanks keep their own spacing and are shifted so that the observations
    at ``lo`` and ``hi`` lie half a local spacing left and right of
    ``center``. Only returns within ``h/2`` of the centre are kept.
    """
    lo, hi = int(window[0]), int(window[1])
    if not 0 <= lo < hi <= ts.n:
        raise ValueError(f"invalid window {window}")
    t, y = ts.times, ts.y
    gap_half = 0.5 / ts.n
    left_t = t[: lo + 1] - t[lo] + center - gap_half
    right_t = t[hi:] - t[hi] + center + gap_half
    if left_t[0] > center - 0.5 * h + 1e-12 or right_t[-1] < center + 0.5 * h - 1e-12:
        raise EstimationError("flanking windows of length h/2 are not available")
    times = np.concatenate([left_t, right_t])
    prices = np.concatenate([y[: lo + 1], y[hi:]])
    dy = np.diff(prices)
    mid = 0.5 * (times[:-1] + times[1:])
    keep = (mid >= center - 0.5 * h) & (mid <= center + 0.5 * h)
    return dy[keep], mid[keep]


def estimate_jump_at_window(
    ts: TickSeries,
    window: tuple[int, int],
    cfg: SpectralConfig,
    pilots: PilotEstimates,
):
    """Spectral jump estimate with the observations inside ``window`` deleted."""
    n = ts.n
    h = cfg.window(n)
    center = 0.5
    dy, mid = spliced_returns(ts, window, h, center)
    return _estimate_from_returns(dy, mid, center, n, h, cfg, pilots)


def detect_events(
    ts: TickSeries,
    cfg: DetectConfig = DetectConfig(),
    jump_cfg: SpectralConfig | None = None,
) -> tuple[list[JumpEvent], BinGrid]:
    """Full pass: bin grid, flags, refinement, jump sizes and spot variances."""
    spec = compute_bin_spectra(ts, cfg.spot)
    grid = make_bin_grid(ts, cfg, spec)
    qv = qv_increments(spec)
    flags = flag_bins(qv, grid.thresholds, cfg.a)
    if jump_cfg is None:
        jump_cfg = SpectralConfig(h=spec.h, J=spec.J)
    events = []
    seen = set()
    for k in flags:
        window, tau_hat = refine_jump_time(ts, k, cfg.R, spec.K, cfg.scan)
        # two flagged neighbours can resolve to the same jump
        if window in seen:
            continue
        seen.add(window)
        sv = spot_vol_pair(ts, tau_hat, cfg.spot, spec)
        floor = cfg.spot.sig2_floor
        pil = PilotEstimates(spec.eta2, max(sv.sig2_left, floor), max(sv.sig2_right, floor))
        est = estimate_jump_at_window(ts, window, jump_cfg, pil)
        vt = vol_jump_statistic(sv, ts.n, spec.h, cfg.spot)
        events.append(
            JumpEvent(
                k=k,
                tau_hat=tau_hat,
                window=window,
                dx_hat=est.value,
                qv_inc=float(qv[k - 1]),
                sig2_left=sv.sig2_left,
                sig2_right=sv.sig2_right,
                vol_jump_stat=vt.stat,
                vol_jump_pvalue=vt.pvalue,
                dx_variance=est.variance,
                eta2=0.5 * (sv.eta2_left + sv.eta2_right),
                dsig2_variance=vt.variance,
            )
        )
    return events, grid


EVENT_FIELDS = [
    "day", "bin", "tau_hat", "window_lo", "window_hi", "dx_hat", "sig2_left", "sig2_right", "qv_inc",
    "vol_jump_stat", "vol_jump_pvalue", "dx_variance", "eta2", "dsig2_variance",
]


def _event_row(e: JumpEvent, day: str) -> list:
    vals = [e.tau_hat, e.window[0], e.window[1], e.dx_hat, e.sig2_left, e.sig2_right, e.qv_inc,
            e.vol_jump_stat, e.vol_jump_pvalue, e.dx_variance, e.eta2, e.dsig2_variance]
    return [day, e.k] + [v if isinstance(v, int) else repr(float(v)) for v in vals]


def write_events_csv(path, events, day: str = "0") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for e in events:
            w.writerow(_event_row(e, day))


def read_events_csv(path) -> list[tuple[str, JumpEvent]]:
    """(day, event) pairs from a file written by ``write_events_csv``."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(EVENT_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"event file lacks columns {sorted(missing)}")
        for row in reader:
            f = {k: float(row[k]) for k in EVENT_FIELDS if k not in ("day", "bin", "window_lo", "window_hi")}
            ev = JumpEvent(
                k=int(row["bin"]), window=(int(row["window_lo"]), int(row["window_hi"])),
                tau_hat=f["tau_hat"], dx_hat=f["dx_hat"], qv_inc=f["qv_inc"], sig2_left=f["sig2_left"],
                sig2_right=f["sig2_right"], vol_jump_stat=f["vol_jump_stat"], vol_jump_pvalue=f["vol_jump_pvalue"],
                dx_variance=f["dx_variance"], eta2=f["eta2"], dsig2_variance=f["dsig2_variance"],
            )
            out.append((row["day"], ev))
    return out


def event_dict(e: JumpEvent) -> dict:
    d = asdict(e)
    d["window"] = list(e.window)
    return d

"""Discontinuous leverage: covariation of price jumps and spot-variance jumps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ticks import EstimationError, TestResult, two_sided_pvalue

SCALE = 1e7


@dataclass(frozen=True)
class DleResult:
    dle: float
    selfscale_var: float
    n_jumps: int
    xx: float
    ss: float
    contributions: np.ndarray = field(default_factory=lambda: np.empty(0), compare=False)
    finite_var: float = float("nan")

    @property
    def corr(self) -> float:
        """Cojump correlation; 0 when either component sum vanishes."""
        denom = math.sqrt(self.xx * self.ss)
        return float(np.clip(self.dle / denom, -1.0, 1.0)) if denom > 0 else 0.0


def estimate_dle(events, a: float = 0.0, keep=None) -> DleResult:
    """Sum of dx_hat * (sig2_right - sig2_left) over events with qv_inc > a^2.

    Events are anything with ``dx_hat``, ``sig2_left``, ``sig2_right``,
    ``qv_inc`` and ``eta2`` attributes; thresholding against the moving bin
    threshold already happened at detection. ``keep`` optionally masks
    events (for instance to volatility jumps found significant).
    """
    events = list(events)
    if keep is not None:
        events = [e for e, k in zip(events, keep) if k]
    events = [e for e in events if e.qv_inc > a * a]
    if not events:
        return DleResult(0.0, 0.0, 0, 0.0, 0.0)
    dx = np.array([e.dx_hat for e in events])
    ds = np.array([e.sig2_right - e.sig2_left for e in events])
    s_l = np.sqrt(np.maximum([e.sig2_left for e in events], 0.0))
    s_r = np.sqrt(np.maximum([e.sig2_right for e in events], 0.0))
    eta = np.sqrt(np.maximum([e.eta2 for e in events], 0.0))
    contrib = dx * ds
    var = float(np.sum(dx * dx * 8.0 * eta * (s_r**3 + s_l**3)))
    # delta method on each product, missing variances count as zero
    v_ds = np.nan_to_num(np.array([getattr(e, "dsig2_variance", np.nan) for e in events], dtype=float))
    v_dx = np.nan_to_num(np.array([getattr(e, "dx_variance", np.nan) for e in events], dtype=float))
    finite = float(np.sum(dx * dx * v_ds + ds * ds * v_dx))
    return DleResult(float(contrib.sum()), var, len(events), float(np.sum(dx * dx)), float(np.sum(ds * ds)), contrib, finite)


def dle_test(result: DleResult, rate: float | None = None) -> TestResult:
    """Self-normalized test of zero discontinuous leverage.

    With ``rate`` the asymptotic self-scaling variance is used, divided by
    ``rate`` (n^beta, or r * h * sqrt(n) for averaged bin estimates). Without
    it the finite-sample delta-method variance carried by the result is used.
    """
    if result.n_jumps == 0:
        return TestResult(0.0, 0.0, 1.0, estimate=0.0)
    if rate is not None and rate <= 0:
        raise ValueError("rate must be positive")
    var = result.selfscale_var / rate if rate is not None else result.finite_var
    if not var > 0:
        if result.dle == 0:
            return TestResult(0.0, 0.0, 1.0, estimate=0.0)
        raise EstimationError("zero self-scaling variance with nonzero estimate")
    z = result.dle / math.sqrt(var)
    return TestResult(stat=z, variance=var, pvalue=two_sided_pvalue(z), estimate=result.dle)


def effective_rate(n: int, h: float, r_bins: float) -> float:
    return r_bins * h * math.sqrt(n)


@dataclass(frozen=True)
class BiasVariance:
    bias: float
    variance: float
    reps: int


def dle_bias_variance(estimates, truth: float, scale: float = SCALE, min_reps: int = 100) -> BiasVariance:
    """Monte Carlo bias and variance of DLE estimates, both on the ``scale``-ed axis."""
    x = np.asarray(list(estimates), dtype=float) * scale
    if x.size < min_reps:
        raise ValueError(f"need at least {min_reps} replications, got {x.size}")
    return BiasVariance(float(x.mean() - truth * scale), float(x.var(ddof=1)), int(x.size))


def bh_stepup(pvalues, alpha: float = 0.1) -> np.ndarray:
    """Benjamini-Hochberg step-up: reject the k smallest p-values where k is
    the largest rank with p_(k) <= k alpha / m."""
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1:
        raise ValueError("pvalues must be one-dimensional")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    reject = np.zeros(m, dtype=bool)
    if m == 0:
        return reject
    order = np.argsort(p, kind="stable")
    below = p[order] <= alpha * np.arange(1, m + 1) / m
    if below.any():
        k = int(np.nonzero(below)[0].max())
        reject[order[: k + 1]] = True
    return reject

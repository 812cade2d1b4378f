"""Core containers shared by all estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class EstimationError(RuntimeError):
    """Raised when an estimator cannot produce a value from the data at hand
    (for example every averaging bin was truncated)."""


@dataclass(frozen=True)
class TickSeries:
    """Noisy log prices ``y`` observed at strictly increasing ``times`` in [0, 1].

    ``n`` is the number of returns, i.e. ``len(y) - 1``.
    """

    times: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if t.ndim != 1 or y.ndim != 1 or t.shape != y.shape:
            raise ValueError("times and y must be 1-d arrays of equal length")
        if t.size < 3:
            raise ValueError("a tick series needs at least 3 observations (n >= 2)")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ValueError("times and y must not contain NaN or inf")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if t[0] < -1e-12 or t[-1] > 1 + 1e-12:
            raise ValueError("times must lie in [0, 1]")
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "y", y)

    @classmethod
    def regular(cls, y) -> "TickSeries":
        """Series on the equidistant grid i/n."""
        y = np.asarray(y, dtype=float)
        return cls(np.linspace(0.0, 1.0, y.size), y)

    @property
    def n(self) -> int:
        return self.y.size - 1

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.y)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.times[:-1] + self.times[1:])

    def shifted(self, c: float) -> "TickSeries":
        return TickSeries(self.times, self.y + c)

    def reversed(self) -> "TickSeries":
        """Time-reversed copy: t -> 1 - t, order flipped."""
        return TickSeries(1.0 - self.times[::-1], self.y[::-1])


@dataclass(frozen=True)
class TestResult:
    """Standardized statistic with its two-sided normal p-value.

    ``estimate`` is the raw (unstandardized) quantity and ``variance`` the
    plug-in variance of that estimate used for standardization.
    """

    stat: float
    variance: float
    pvalue: float
    estimate: float = float("nan")
    extra: dict = field(default_factory=dict, compare=False)

    __test__ = False  # not a pytest class

    def reject(self, alpha: float = 0.05) -> bool:
        return bool(self.pvalue < alpha)


def two_sided_pvalue(z: float) -> float:
    return float(2.0 * stats.norm.sf(abs(z)))

"""Small deterministic inputs shared by several test modules."""

import numpy as np

from jumplev.ticks import TickSeries


def step_series(n: int, tau: float, size: float, level: float = 0.0) -> TickSeries:
    """Noise-free, volatility-free path with one jump in the return ending at floor(tau n) + 1."""
    y = np.full(n + 1, level)
    y[int(np.floor(tau * n)) + 1 :] += size
    return TickSeries.regular(y)

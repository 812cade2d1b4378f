"""Local price-jump, volatility-jump and discontinuous leverage estimation
from noisy high-frequency prices."""

__version__ = "0.1.0"

from .ticks import EstimationError, TestResult, TickSeries  # noqa: E402

__all__ = ["EstimationError", "TestResult", "TickSeries", "__version__"]

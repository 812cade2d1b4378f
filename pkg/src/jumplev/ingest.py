"""Reading tick files into a TickSeries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ticks import TickSeries

HEADER = ["time", "logprice"]
MIN_TICKS = 100


class IngestError(ValueError):
    """Malformed or too-short tick file."""


@dataclass(frozen=True)
class IngestReport:
    ticks: TickSeries
    rows: int
    duplicates: int
    zero_returns_dropped: int
    # t_unit = (t_raw - offset) / span; offset 0 and span 1 when already on [0, 1]
    offset: float = 0.0
    span: float = 1.0
    rescaled: bool = False
    meta: dict = field(default_factory=dict)

    def mapping(self) -> dict:
        return {"offset": self.offset, "span": self.span, "rescaled": self.rescaled}


def _read_rows(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != HEADER:
            raise IngestError(f"{path}: header must be 'time,logprice', got {header!r}")
        times, prices = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise IngestError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                t, p = float(row[0]), float(row[1])
            except ValueError:
                raise IngestError(f"{path}:{line}: non-numeric field in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(p)):
                raise IngestError(f"{path}:{line}: non-finite value in {row!r}")
            if times and t < times[-1]:
                raise IngestError(f"{path}:{line}: time {t!r} precedes previous time {times[-1]!r} (file not sorted)")
            times.append(t)
            prices.append(p)
    return np.asarray(times), np.asarray(prices)


def ingest_ticks(path, min_ticks: int = MIN_TICKS, drop_zero_returns: bool = False) -> IngestReport:
    """Validate a ``time,logprice`` CSV and map its clock onto [0, 1].

    Times already inside [0, 1] are kept. Anything else is read as raw
    seconds and mapped affinely so the first tick sits at 0 and the last at
    1. Repeated timestamps keep the last price. With ``drop_zero_returns``
    ticks whose price equals the previous kept price are removed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"tick file not found: {path}")
    t, y = _read_rows(path)
    rows = t.size
    if rows == 0:
        raise IngestError(f"{path}: no data rows")

    last = np.ones(rows, dtype=bool)
    last[:-1] = t[1:] != t[:-1]
    duplicates = int(rows - last.sum())
    t, y = t[last], y[last]

    dropped = 0
    if drop_zero_returns and y.size > 1:
        keep = np.ones(y.size, dtype=bool)
        keep[1:] = np.diff(y) != 0
        dropped = int(y.size - keep.sum())
        t, y = t[keep], y[keep]

    if t.size < max(min_ticks, 3):
        raise IngestError(f"{path}: {t.size} usable ticks, need at least {max(min_ticks, 3)}")

    offset, span, rescaled = 0.0, 1.0, False
    if t[0] < 0 or t[-1] > 1:
        offset, span, rescaled = float(t[0]), float(t[-1] - t[0]), True
        t = (t - offset) / span
        t[-1] = 1.0
    return IngestReport(TickSeries(t, y), rows, duplicates, dropped, offset, span, rescaled)

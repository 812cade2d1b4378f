"""Heston-type stochastic volatility paths with injected jumps and
return-correlated microstructure noise.

Model units follow the usual convention for the Heston parameters
(0.0162, 0.8465, 0.117): the variance state ``sig2`` is in squared percent
per trading day. The simulated interval [0, 1] covers ``horizon`` trading
days, and log prices are in decimal units, so the spot variance on the [0, 1]
clock seen by the estimators is ``sig2 * var_scale * horizon``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .rng import stream
from .ticks import TickSeries

VAR_FLOOR = 1e-12
HOURS_PER_DAY = 6.5
NOISE_MODELS = ("additive", "multiplicative")


@dataclass(frozen=True)
class PriceJump:
    time: float
    size: float


@dataclass(frozen=True)
class VolJump:
    """Additive jump of the variance state by ``ratio * theta``."""

    time: float
    ratio: float


@dataclass(frozen=True)
class SimConfig:
    n: int = 23400
    kappa_mr: float = 0.0162
    theta: float = 0.8465
    xi: float = 0.117
    q: float = 0.0005
    price_jump: PriceJump | None = None
    vol_jump: VolJump | None = None
    seed: int = 0
    sig2_0: float | None = None
    horizon: float = 1.0
    var_scale: float = 1e-4
    x0: float = 1.0
    noise: str = "additive"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if self.kappa_mr <= 0 or self.theta <= 0 or self.xi < 0:
            raise ValueError("kappa_mr and theta must be positive and xi non-negative")
        if self.q < 0:
            raise ValueError("noise scale q must be non-negative")
        if self.horizon <= 0 or self.var_scale <= 0:
            raise ValueError("horizon and var_scale must be positive")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"noise must be one of {NOISE_MODELS}")
        for jump in (self.price_jump, self.vol_jump):
            if jump is not None and not 0.0 < jump.time < 1.0:
                raise ValueError(f"jump time must lie strictly inside (0, 1), got {jump.time}")
        if self.sig2_0 is not None and self.sig2_0 <= 0:
            raise ValueError("sig2_0 must be positive")

    @property
    def initial_variance(self) -> float:
        return self.theta if self.sig2_0 is None else self.sig2_0

    @property
    def unit_variance(self) -> float:
        """Factor turning the variance state into spot variance on the [0, 1] clock."""
        return self.var_scale * self.horizon

    @property
    def vol_jump_size(self) -> float:
        """Jump of the variance state in model units (0 without a volatility jump)."""
        return 0.0 if self.vol_jump is None else self.vol_jump.ratio * self.theta

    def metadata(self) -> dict:
        d = asdict(self)
        d["unit_variance"] = self.unit_variance
        d["time_scaling"] = f"[0,1] = {self.horizon:g} trading day(s); drift and diffusion scaled by horizon"
        return d


@dataclass(frozen=True)
class SimPath:
    times: np.ndarray
    x: np.ndarray
    sig2: np.ndarray
    y: np.ndarray
    unit_variance: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def noise(self) -> np.ndarray:
        return self.y - self.x

    @property
    def spot_var(self) -> np.ndarray:
        """Spot variance on the [0, 1] clock (what the estimators target)."""
        return self.sig2 * self.unit_variance

    def ticks(self) -> TickSeries:
        return TickSeries(self.times, self.y)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "x", "sig2", "y"])
            for row in zip(self.times, self.x, self.sig2, self.y):
                w.writerow([repr(float(v)) for v in row])


def jump_index(n: int, time: float) -> int:
    """Grid index of the first observation strictly after ``time``."""
    return int(math.floor(time * n)) + 1


def _efficient_paths(cfg: SimConfig, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Variance and efficient log-price paths, one row per seed.

    The Euler recursion runs over time and is vectorized across seeds; each
    row draws its Brownian increments from its own stream (seed, 0).
    """
    n = cfg.n
    dt = cfg.horizon / n
    seeds = list(seeds)
    zw = np.empty((len(seeds), n))
    zb = np.empty((len(seeds), n))
    for r, seed in enumerate(seeds):
        z = stream(seed, 0).standard_normal((2, n))
        zw[r], zb[r] = z[0], z[1]

    jv = jump_index(n, cfg.vol_jump.time) if cfg.vol_jump is not None else -1
    sig2 = np.empty((len(seeds), n + 1))
    sig2[:, 0] = cfg.initial_variance
    drift = cfg.kappa_mr * dt
    diffusion = cfg.xi * math.sqrt(dt)
    v = sig2[:, 0].copy()
    for i in range(n):
        v = v + drift * (cfg.theta - v) + diffusion * np.sqrt(v) * zb[:, i]
        if i + 1 == jv:
            v += cfg.vol_jump_size
        np.maximum(v, VAR_FLOOR, out=v)
        sig2[:, i + 1] = v

    x = np.empty_like(sig2)
    x[:, 0] = cfg.x0
    np.cumsum(np.sqrt(sig2[:, :-1] * cfg.var_scale * dt) * zw, axis=1, out=x[:, 1:])
    x[:, 1:] += cfg.x0
    if cfg.price_jump is not None:
        x[:, jump_index(n, cfg.price_jump.time):] += cfg.price_jump.size
    return sig2, x


def simulate_paths(cfg: SimConfig, seeds) -> list[SimPath]:
    """``simulate_path`` for many seeds at once; row r equals
    ``simulate_path(replace(cfg, seed=seeds[r]))`` bit for bit."""
    seeds = list(seeds)
    sig2, x = _efficient_paths(cfg, seeds)
    times = np.arange(cfg.n + 1) / cfg.n
    out = []
    for r, seed in enumerate(seeds):
        base = SimPath(times, x[r], sig2[r], x[r].copy(), cfg.unit_variance, dict(cfg.metadata(), seed=seed))
        out.append(add_noise(base, cfg.q, seed, model=cfg.noise))
    return out


def simulate_path(cfg: SimConfig) -> SimPath:
    """Euler scheme on the grid i/n with noise from ``add_noise``.

    Brownian drivers come from stream (seed, 0) and the noise from
    stream (seed, 1), so re-noising a path never changes its efficient part.
    """
    return simulate_paths(cfg, [cfg.seed])[0]


def noise_sequence(x: np.ndarray, q: float, rng: np.random.Generator, model: str = "additive") -> np.ndarray:
    """Microstructure noise driven by the efficient returns of ``x``.

    ``multiplicative`` is the recursion read literally,
    eps_i = 0.0861 dX_i + 0.06 (dX_i + dX_{i-1}) U_i with U_i ~ N(0, q^2);
    ``additive`` moves U_i out of the product,
    eps_i = 0.0861 dX_i + 0.06 (dX_i + dX_{i-1}) + U_i.
    dX_0 and dX_{-1} are taken as zero.
    """
    dx = np.zeros_like(x)
    dx[1:] = np.diff(x)
    dx_prev = np.zeros_like(x)
    dx_prev[1:] = dx[:-1]
    u = q * rng.standard_normal(x.size)
    if model == "multiplicative":
        return 0.0861 * dx + 0.06 * (dx + dx_prev) * u
    if model == "additive":
        return 0.0861 * dx + 0.06 * (dx + dx_prev) + u
    raise ValueError(f"unknown noise model {model!r}")


def add_noise(path: SimPath, q: float, seed: int, model: str = "additive") -> SimPath:
    if q < 0:
        raise ValueError("noise scale q must be non-negative")
    eps = noise_sequence(path.x, q, stream(seed, 1), model)
    meta = dict(path.meta, q=q, noise=model)
    return replace(path, y=path.x + eps, meta=meta)


def read_path_csv(path) -> SimPath:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return SimPath(data[:, 0], data[:, 1], data[:, 2], data[:, 3])

"""Monte Carlo drivers for the size/power, RMSE and leverage studies.

Replications are grouped into batches that run in a process pool (capped by
``JUMPLEV_THREADS``). Every replication draws its path seed from
``stream(root, cell)``, so results do not depend on batch size, worker count
or completion order, and reductions always run in replication order.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .dle import SCALE, dle_test, estimate_dle
from .jumploc import DetectConfig, detect_events
from .preavg import LmConfig, lm_test
from .rng import stream
from .simkit import HOURS_PER_DAY, PriceJump, SimConfig, VolJump, jump_index, simulate_paths
from .spectral import SpectralConfig, estimate_pilots, jump_test_from_estimate, spectral_jump_estimator
from .spotvol import SpotVolConfig, compute_bin_spectra, spot_vol_pair, vol_jump_statistic
from .ticks import EstimationError

MODERATE_Q = 0.0005
JUMP_MULTIPLES = (0, 1, 2, 3)


def worker_count() -> int:
    env = os.environ.get("JUMPLEV_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            raise ValueError(f"JUMPLEV_THREADS must be an integer, got {env!r}") from None
    return cap


def replication_seeds(root: int, cell: int, reps: int) -> np.ndarray:
    return stream(root, cell).integers(0, 2**62, size=reps)


def _batches(seeds: np.ndarray, size: int) -> list[np.ndarray]:
    return [seeds[i : i + size] for i in range(0, seeds.size, size)]


def _run(fn, tasks: list, workers: int) -> list:
    """Map ``fn`` over ``tasks`` keeping input order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- tables 1-2


@dataclass(frozen=True)
class TableConfig:
    """Settings of the fixed-time jump studies on one trading hour.

    ``side`` selects the rejection rule for the tables: ``upper`` rejects when
    the statistic exceeds the upper ``alpha`` quantile (jumps are positive),
    ``two`` uses ``|stat|``.
    """

    reps: int = 6000
    seed: int = 20240
    qs: tuple = (MODERATE_Q, 0.005)
    ns: tuple = (1200, 1800, 3600)
    multiples: tuple = JUMP_MULTIPLES
    tau: float = 0.5
    horizon: float = 1.0 / HOURS_PER_DAY
    noise: str = "additive"
    alpha: float = 0.05
    side: str = "upper"
    variance: str = "finite"
    batch: int = 100

    def __post_init__(self):
        if self.reps < 1 or self.batch < 1:
            raise ValueError("reps and batch must be positive")
        if self.side not in ("upper", "two"):
            raise ValueError("side must be 'upper' or 'two'")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def cells(self) -> list[tuple[float, int, int]]:
        return [(q, n, m) for q in self.qs for n in self.ns for m in self.multiples]


def _is_moderate(q: float) -> bool:
    return q <= MODERATE_Q * 1.5


def table_tuning(q: float, multiple: int, variance: str = "finite") -> tuple[LmConfig, SpectralConfig]:
    """Window constants for the two noise regimes; the pre-average window is
    doubled for large noise and jumps of at least 2q."""
    if _is_moderate(q):
        return LmConfig(c=1.0 / 19.0), SpectralConfig(kappa=5.0 / 12.0, variance=variance)
    mult = 2.0 if multiple >= 2 else 1.0
    return LmConfig(c=1.0 / 9.0, multiplier=mult), SpectralConfig(kappa=2.0 / 3.0, variance=variance)


def _table_batch(task) -> np.ndarray:
    """Rows (lm_stat, lm_error, spectral_stat, spectral_error) for a batch."""
    cfg, q, n, m, seeds = task
    dx = m * q
    sim = SimConfig(n=n, horizon=cfg.horizon, q=q, noise=cfg.noise, price_jump=PriceJump(cfg.tau, dx) if dx else None)
    lcfg, scfg = table_tuning(q, m, cfg.variance)
    # evaluate at the midpoint of the return that carries the jump
    center = (jump_index(n, cfg.tau) - 0.5) / n
    out = np.full((len(seeds), 4), np.nan)
    for r, path in enumerate(simulate_paths(sim, seeds)):
        ts = path.ticks()
        try:
            pil = estimate_pilots(ts, center, scfg)
            lm = lm_test(ts, center, lcfg, pil.sig2_left, pil.sig2_right, pil.eta2)
            est = spectral_jump_estimator(ts, center, scfg, pil)
            sp = jump_test_from_estimate(est, n, scfg)
        except EstimationError:
            continue
        out[r] = (lm.stat, lm.estimate - dx, sp.stat, est.value - dx)
    return out


def _table_rows(cfg: TableConfig, workers: int | None = None) -> dict:
    workers = worker_count() if workers is None else workers
    tasks, owners = [], []
    for cell, (q, n, m) in enumerate(cfg.cells()):
        for b in _batches(replication_seeds(cfg.seed, cell, cfg.reps), cfg.batch):
            tasks.append((cfg, q, n, m, [int(s) for s in b]))
            owners.append((q, n, m))
    results = _run(_table_batch, tasks, workers)
    rows: dict = {}
    for key, res in zip(owners, results):
        rows.setdefault(key, []).append(res)
    return {k: np.vstack(v) for k, v in rows.items()}


def run_mc_tables(cfg: TableConfig = TableConfig(), workers: int | None = None) -> tuple[TableResult, TableResult]:
    """Both tables from one pass over the simulated paths."""
    data = _table_rows(cfg, workers)
    return run_mc_table1(cfg, data=data), run_mc_table2(cfg, data=data)


def _reject(z: np.ndarray, cfg: TableConfig) -> float:
    z = z[np.isfinite(z)]
    if cfg.side == "upper":
        return float(np.mean(z > stats.norm.ppf(1 - cfg.alpha)))
    return float(np.mean(np.abs(z) > stats.norm.ppf(1 - cfg.alpha / 2)))


@dataclass
class TableResult:
    columns: list
    rows: list
    failures: int = 0
    meta: dict = field(default_factory=dict)


def run_mc_table1(cfg: TableConfig = TableConfig(), workers: int | None = None, data: dict | None = None) -> TableResult:
    """Rejection rates of both tests per (q, n, jump multiple) cell."""
    data = _table_rows(cfg, workers) if data is None else data
    rows, failures = [], 0
    for (q, n, m), arr in data.items():
        failures += int(np.isnan(arr[:, 0]).sum())
        rows.append([q, n, m, _reject(arr[:, 0], cfg), _reject(arr[:, 2], cfg)])
    return TableResult(["q", "n", "jump_multiple", "lm_reject", "spectral_reject"], rows, failures, asdict(cfg))


def run_mc_table2(cfg: TableConfig = TableConfig(), workers: int | None = None, data: dict | None = None) -> TableResult:
    """RMSE (x 1e4) of both jump-size estimators; jump-free cells are skipped."""
    cfg = replace(cfg, multiples=tuple(m for m in cfg.multiples if m > 0))
    data = _table_rows(cfg, workers) if data is None else data
    rows, failures = [], 0
    for (q, n, m), arr in data.items():
        if m == 0:
            continue
        ok = np.isfinite(arr[:, 1])
        failures += int((~ok).sum())
        lm = 1e4 * math.sqrt(float(np.mean(arr[ok, 1] ** 2)))
        sp = 1e4 * math.sqrt(float(np.mean(arr[ok, 3] ** 2)))
        rows.append([q, n, m, lm, sp])
    return TableResult(["q", "n", "jump_multiple", "lm_rmse_1e4", "spectral_rmse_1e4"], rows, failures, asdict(cfg))


# ---------------------------------------------------------------- leverage study

DLE_MODES = ("cojump", "price_only", "none")


@dataclass(frozen=True)
class DleMcConfig:
    """Full-day leverage study.

    ``mode`` chooses the injected jumps: ``cojump`` (price and volatility jump
    at the same random time), ``price_only`` (zero leverage, the null of the
    test) or ``none``. Jump times are uniform on ``tau_range``.
    """

    reps: int = 500
    seed: int = 40
    n: int = 23400
    K: int = 100
    J: int = 30
    r_bins: int = 8
    R: int = 6
    scan: str = "partition"
    threshold_rule: str = "loglog"
    threshold_scale: float = 2.0
    q: float = MODERATE_Q
    noise: str = "multiplicative"
    price_jump: float = -0.002
    vol_ratio: float = 1.373
    tau_range: tuple = (0.1, 0.9)
    mode: str = "cojump"
    alpha: float = 0.05
    variance: str = "finite"
    batch: int = 25

    def __post_init__(self):
        if self.mode not in DLE_MODES:
            raise ValueError(f"mode must be one of {DLE_MODES}")
        lo, hi = self.tau_range
        if not 0 < lo < hi < 1:
            raise ValueError("tau_range must satisfy 0 < lo < hi < 1")
        if self.reps < 1 or self.batch < 1:
            raise ValueError("reps and batch must be positive")

    def detect_config(self) -> DetectConfig:
        spot = SpotVolConfig(K=self.K, J=self.J, r_bins=self.r_bins, variance=self.variance)
        return DetectConfig(spot=spot, threshold_rule=self.threshold_rule, threshold_scale=self.threshold_scale,
                            R=self.R, scan=self.scan)

    def sim_config(self, tau: float) -> SimConfig:
        pj = PriceJump(tau, self.price_jump) if self.mode != "none" else None
        vj = VolJump(tau, self.vol_ratio) if self.mode == "cojump" else None
        return SimConfig(n=self.n, q=self.q, noise=self.noise, price_jump=pj, vol_jump=vj)

    @property
    def truth(self) -> float:
        if self.mode != "cojump":
            return 0.0
        base = SimConfig(n=self.n)
        return self.price_jump * self.vol_ratio * base.theta * base.unit_variance


def _dle_batch(task) -> np.ndarray:
    """Rows (tau, dle, stat, variance, n_events) for a batch of seeds."""
    cfg, seeds = task
    dcfg = cfg.detect_config()
    out = np.full((len(seeds), 5), np.nan)
    for r, seed in enumerate(seeds):
        tau = float(stream(seed, 2).uniform(*cfg.tau_range))
        path = simulate_paths(replace(cfg.sim_config(tau), seed=seed), [seed])[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                events, grid = detect_events(path.ticks(), dcfg)
            except EstimationError:
                out[r, 0] = tau
                continue
        res = estimate_dle(events)
        if cfg.variance == "finite":
            test = dle_test(res)
        else:
            test = dle_test(res, rate=cfg.r_bins * grid.h * math.sqrt(cfg.n))
        out[r] = (tau, res.dle, test.stat, test.variance, res.n_jumps)
    return out


@dataclass
class DleMcResult:
    bias: float
    variance: float
    power: float
    ks_pvalue: float
    reps: int
    failures: int
    standardized: np.ndarray
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"bias_1e7": self.bias, "variance_1e14": self.variance, "reject_rate": self.power,
                "ks_pvalue": self.ks_pvalue, "reps": self.reps, "failures": self.failures}


def run_mc_dle(cfg: DleMcConfig = DleMcConfig(), workers: int | None = None) -> DleMcResult:
    """Simulate, detect, refine, estimate and test per replication.

    ``standardized`` holds (dle - truth) / sqrt(variance) for replications
    with at least one event, the sample used for the normality check.
    """
    workers = worker_count() if workers is None else workers
    seeds = replication_seeds(cfg.seed, 0, cfg.reps)
    tasks = [(cfg, [int(s) for s in b]) for b in _batches(seeds, cfg.batch)]
    samples = np.vstack(_run(_dle_batch, tasks, workers))
    ok = np.isfinite(samples[:, 1])
    dle = samples[ok, 1]
    stat = samples[ok, 2]
    var = samples[ok, 3]
    scaled = dle * SCALE
    has = var > 0
    z = (dle[has] - cfg.truth) / np.sqrt(var[has])
    crit = stats.norm.ppf(1 - cfg.alpha / 2)
    ks = float(stats.kstest(z, "norm").pvalue) if z.size >= 2 else float("nan")
    return DleMcResult(
        bias=float(scaled.mean() - cfg.truth * SCALE) if scaled.size else float("nan"),
        variance=float(scaled.var(ddof=1)) if scaled.size > 1 else float("nan"),
        power=float(np.mean(np.abs(stat) > crit)) if stat.size else float("nan"),
        ks_pvalue=ks,
        reps=int(ok.sum()),
        failures=int((~ok).sum()),
        standardized=z,
        samples=samples,
        meta=asdict(cfg),
    )


# ---------------------------------------------------------------- volatility-jump size


@dataclass(frozen=True)
class VolNullConfig:
    reps: int = 2000
    seed: int = 50
    n: int = 23400
    K: int = 100
    J: int = 30
    r_bins: int = 8
    q: float = MODERATE_Q
    noise: str = "multiplicative"
    tau: float = 0.5
    vol_ratio: float = 0.0
    alpha: float = 0.05
    variance: str = "finite"
    batch: int = 100


def _vol_batch(task) -> np.ndarray:
    cfg, seeds = task
    sim = SimConfig(n=cfg.n, q=cfg.q, noise=cfg.noise, vol_jump=VolJump(cfg.tau, cfg.vol_ratio) if cfg.vol_ratio else None)
    spot = SpotVolConfig(K=cfg.K, J=cfg.J, r_bins=cfg.r_bins, variance=cfg.variance)
    out = np.full(len(seeds), np.nan)
    for r, path in enumerate(simulate_paths(sim, seeds)):
        ts = path.ticks()
        try:
            spec = compute_bin_spectra(ts, spot)
            est = spot_vol_pair(ts, cfg.tau, spot, spec)
            out[r] = vol_jump_statistic(est, ts.n, spec.h, spot).stat
        except EstimationError:
            continue
    return out


def run_mc_voljump(cfg: VolNullConfig = VolNullConfig(), workers: int | None = None) -> dict:
    """Rejection rate of the volatility-jump test at a fixed time."""
    workers = worker_count() if workers is None else workers
    seeds = replication_seeds(cfg.seed, 0, cfg.reps)
    tasks = [(cfg, [int(s) for s in b]) for b in _batches(seeds, cfg.batch)]
    z = np.concatenate(_run(_vol_batch, tasks, workers))
    ok = np.isfinite(z)
    crit = stats.norm.ppf(1 - cfg.alpha / 2)
    return {"reject_rate": float(np.mean(np.abs(z[ok]) > crit)), "reps": int(ok.sum()),
            "failures": int((~ok).sum()), "stats": z}

"""Command-line front end.

Every option can also come from a flat JSON file given with ``--config``;
flags on the command line win. Exit status is 0 on success, 1 when an
estimator fails on the data and 2 for I/O or configuration errors.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
from scipy import stats

from . import __version__
from .dle import SCALE, bh_stepup, dle_test, estimate_dle
from .ingest import MIN_TICKS, IngestError, ingest_ticks
from .jumploc import SCANS, THRESHOLD_RULES, DetectConfig, detect_events, read_events_csv, write_events_csv
from .mc import DLE_MODES, DleMcConfig, TableConfig, run_mc_dle, run_mc_table1, run_mc_table2
from .simkit import NOISE_MODELS, PriceJump, SimConfig, VolJump, simulate_path
from .spotvol import SpotVolConfig
from .ticks import EstimationError

DLE_FIELDS = ["day", "mode", "n_jumps", "dle", "dle_1e7", "stat", "pvalue", "variance", "corr", "xx", "ss"]


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_sidecar(path: Path, command: str, config: dict, seed=None, extra: dict | None = None) -> Path:
    """Metadata next to an output file: ``<file>.meta.json``."""
    meta = {"command": command, "config": config, "config_hash": config_hash(config), "seed": seed,
            "version": __version__}
    if extra:
        meta.update(extra)
    side = path.with_name(path.name + ".meta.json")
    side.write_text(json.dumps(meta, sort_keys=True, indent=2, default=str) + "\n")
    return side


def write_csv(path: Path, header: list, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def aligned(header: list, rows, digits: int = 4) -> str:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{v:.{digits}f}" if abs(v) >= 1e-3 or v == 0 else f"{v:.3e}"
        return str(v)

    cells = [[str(h) for h in header]] + [[fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _load_config(ctx: click.Context, _param, value):
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text())
    except OSError as exc:
        raise click.BadParameter(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise click.BadParameter("config file must be a flat JSON object")
    known = {p.name for cmd in main.commands.values() for p in cmd.params}
    unknown = sorted(set(data) - known)
    if unknown:
        raise click.BadParameter(f"unknown config keys: {', '.join(unknown)}")
    ctx.default_map = {name: dict(data) for name in main.commands}
    return value


def _params(ctx: click.Context) -> dict:
    return {k: v for k, v in ctx.params.items()}


@click.group()
@click.version_option(__version__, prog_name="jumplev")
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True, expose_value=False,
              help="Flat JSON file with option values; command-line flags override it.")
def main():
    """Price-jump, volatility-jump and leverage estimation from tick data."""


# ---------------------------------------------------------------- simulate


@main.command()
@click.option("--n", type=click.IntRange(min=2), default=23400, show_default=True)
@click.option("--q", type=click.FloatRange(min=0), default=0.0005, show_default=True)
@click.option("--noise", type=click.Choice(NOISE_MODELS), default="additive", show_default=True)
@click.option("--horizon", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True,
              help="Trading days covered by [0, 1].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--price-jump-time", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None)
@click.option("--price-jump-size", type=float, default=0.0, show_default=True)
@click.option("--vol-jump-time", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None)
@click.option("--vol-jump-ratio", type=float, default=0.0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["full", "ticks"]), default="full", show_default=True,
              help="full: time,x,sig2,y; ticks: time,logprice for detect.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def simulate(ctx, n, q, noise, horizon, seed, price_jump_time, price_jump_size, vol_jump_time, vol_jump_ratio, fmt,
             out):
    """Simulate one path and write it as CSV."""
    pj = PriceJump(price_jump_time, price_jump_size) if price_jump_time is not None else None
    vj = VolJump(vol_jump_time, vol_jump_ratio) if vol_jump_time is not None else None
    cfg = SimConfig(n=n, q=q, noise=noise, horizon=horizon, seed=seed, price_jump=pj, vol_jump=vj)
    path = simulate_path(cfg)
    out = Path(out)
    if fmt == "full":
        path.to_csv(out)
    else:
        write_csv(out, ["time", "logprice"], zip(path.times, path.y))
    write_sidecar(out, "simulate", _params(ctx), seed, {"time_scaling": cfg.metadata()["time_scaling"]})
    click.echo(f"wrote {n + 1} rows to {out}")


# ---------------------------------------------------------------- ingest-check


def _ingest_options(f):
    f = click.option("--min-ticks", type=click.IntRange(min=3), default=MIN_TICKS, show_default=True)(f)
    f = click.option("--drop-zero-returns/--keep-zero-returns", default=False, show_default=True)(f)
    return click.argument("tickfile", type=click.Path(dir_okay=False))(f)


@main.command("ingest-check")
@_ingest_options
def ingest_check(tickfile, min_ticks, drop_zero_returns):
    """Validate a time,logprice file and report what ingestion did."""
    rep = ingest_ticks(tickfile, min_ticks=min_ticks, drop_zero_returns=drop_zero_returns)
    rows = [
        ("rows", rep.rows),
        ("ticks", rep.ticks.n + 1),
        ("duplicate_timestamps_collapsed", rep.duplicates),
        ("zero_returns_dropped", rep.zero_returns_dropped),
        ("rescaled", rep.rescaled),
        ("offset", rep.offset),
        ("span", rep.span),
    ]
    click.echo(aligned(["field", "value"], rows))


# ---------------------------------------------------------------- detect


def _detect_options(f, study: bool = False):
    opts = [
        click.option("--K", "K", type=click.IntRange(min=3), default=None, help="Bins per day (default: rule in n)."),
        click.option("--J", "J", type=click.IntRange(min=1), default=None, help="Spectral frequencies per bin."),
        click.option("--r-bins", type=click.IntRange(min=1), default=None, help="Bins averaged for spot variances."),
        click.option("--beta", type=click.FloatRange(0, 0.25, min_open=True, max_open=True), default=0.2,
                     show_default=True),
        click.option("--varpi", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.35,
                     show_default=True),
        click.option("--threshold-rule", type=click.Choice(THRESHOLD_RULES), default="loglog", show_default=True),
        click.option("--threshold-scale", type=click.FloatRange(min=0, min_open=True), default=2.0,
                     show_default=True),
        click.option("--a", type=click.FloatRange(min=0), default=0.0, show_default=True,
                     help="Tail cut-off on jump sizes."),
        click.option("--R", "R", type=click.IntRange(min=1), default=6, show_default=True,
                     help="Sub-intervals per flagged bin."),
        click.option("--scan", type=click.Choice(SCANS), default="partition", show_default=True),
    ]
    if study:
        # simulated days keep the default truncation, rate and tail cut-off
        opts = [o for i, o in enumerate(opts) if i not in (3, 4, 7)]
    for o in reversed(opts):
        f = o(f)
    return f


def detect_config(K, J, r_bins, beta, varpi, threshold_rule, threshold_scale, a, R, scan) -> DetectConfig:
    spot = SpotVolConfig(K=K, J=J, r_bins=r_bins, beta=beta, varpi=varpi)
    return DetectConfig(spot=spot, threshold_rule=threshold_rule, threshold_scale=threshold_scale, a=a, R=R,
                        scan=scan)


def _dle_rows(day: str, events, a: float, bh_alpha: float | None) -> list:
    modes = [("all", None)]
    if bh_alpha is not None:
        keep = bh_stepup([e.vol_jump_pvalue for e in events], bh_alpha) if events else []
        modes.append(("bh", keep))
    rows = []
    for mode, keep in modes:
        res = estimate_dle(events, a=a, keep=keep)
        t = dle_test(res)
        rows.append([day, mode, res.n_jumps, res.dle, res.dle * SCALE, t.stat, t.pvalue, t.variance, res.corr,
                     res.xx, res.ss])
    return rows


@main.command()
@_ingest_options
@_detect_options
@click.option("--day", default="0", show_default=True, help="Label written in the day column.")
@click.option("--events-out", type=click.Path(dir_okay=False), default=None)
@click.option("--dle-out", type=click.Path(dir_okay=False), default=None)
@click.option("--bh-alpha", type=click.FloatRange(0, 1, min_open=True), default=None,
              help="Also report the leverage over events whose volatility jump survives BH at this level.")
@click.pass_context
def detect(ctx, tickfile, min_ticks, drop_zero_returns, K, J, r_bins, beta, varpi, threshold_rule, threshold_scale,
           a, R, scan, day, events_out, dle_out, bh_alpha):
    """Locate price jumps in one day of ticks and estimate the leverage."""
    rep = ingest_ticks(tickfile, min_ticks=min_ticks, drop_zero_returns=drop_zero_returns)
    cfg = detect_config(K, J, r_bins, beta, varpi, threshold_rule, threshold_scale, a, R, scan)
    events, grid = detect_events(rep.ticks, cfg)
    params = _params(ctx)
    if events_out:
        write_events_csv(Path(events_out), events, day)
        write_sidecar(Path(events_out), "detect", params, None, {"time_mapping": rep.mapping()})
    rows = _dle_rows(day, events, a, bh_alpha)
    if dle_out:
        write_csv(Path(dle_out), DLE_FIELDS, rows)
        write_sidecar(Path(dle_out), "detect", params, None, {"time_mapping": rep.mapping()})
    click.echo(f"bins={grid.K} events={len(events)}")
    if events:
        click.echo(aligned(["bin", "tau_hat", "dx_hat", "dsig2", "vol_p"],
                           [[e.k, e.tau_hat, e.dx_hat, e.dsig2, e.vol_jump_pvalue] for e in events]))
    click.echo(aligned(DLE_FIELDS, rows))


# ---------------------------------------------------------------- dle


@main.command()
@click.argument("eventfile", type=click.Path(dir_okay=False))
@click.option("--a", type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option("--bh-alpha", type=click.FloatRange(0, 1, min_open=True), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def dle(ctx, eventfile, a, bh_alpha, out):
    """Leverage estimate and test per day from an event file."""
    if not Path(eventfile).is_file():
        raise FileNotFoundError(f"event file not found: {eventfile}")
    by_day: dict = {}
    for day, ev in read_events_csv(eventfile):
        by_day.setdefault(day, []).append(ev)
    rows = []
    for day, events in by_day.items():
        rows.extend(_dle_rows(day, events, a, bh_alpha))
    if out:
        write_csv(Path(out), DLE_FIELDS, rows)
        write_sidecar(Path(out), "dle", _params(ctx))
    click.echo(aligned(DLE_FIELDS, rows))


# ---------------------------------------------------------------- Monte Carlo


def _table_options(f):
    opts = [
        click.option("--reps", type=click.IntRange(min=1), default=6000, show_default=True),
        click.option("--seed", type=int, default=20240, show_default=True),
        click.option("--noise", type=click.Choice(NOISE_MODELS), default="additive", show_default=True),
        click.option("--side", type=click.Choice(["upper", "two"]), default="upper", show_default=True),
        click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.05,
                     show_default=True),
        click.option("--test-variance", type=click.Choice(["finite", "asymptotic"]), default="finite",
                     show_default=True),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _emit_table(ctx, name, result, out):
    if out:
        write_csv(Path(out), result.columns, result.rows)
        write_sidecar(Path(out), name, _params(ctx), ctx.params.get("seed"), {"failures": result.failures})
    click.echo(aligned(result.columns, result.rows, digits=3))
    if result.failures:
        click.echo(f"estimation failures skipped: {result.failures}")


@main.command("mc-table1")
@_table_options
@click.pass_context
def mc_table1(ctx, reps, seed, noise, side, alpha, test_variance, out):
    """Size and power of the two jump tests at a known time."""
    cfg = TableConfig(reps=reps, seed=seed, noise=noise, side=side, alpha=alpha, variance=test_variance)
    _emit_table(ctx, "mc-table1", run_mc_table1(cfg), out)


@main.command("mc-table2")
@_table_options
@click.pass_context
def mc_table2(ctx, reps, seed, noise, side, alpha, test_variance, out):
    """RMSE of the two jump-size estimators at a known time."""
    cfg = TableConfig(reps=reps, seed=seed, noise=noise, side=side, alpha=alpha, variance=test_variance)
    _emit_table(ctx, "mc-table2", run_mc_table2(cfg), out)


@main.command("mc-dle")
@click.option("--reps", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--seed", type=int, default=40, show_default=True)
@click.option("--n", type=click.IntRange(min=100), default=23400, show_default=True)
@(lambda f: _detect_options(f, study=True))
@click.option("--q", type=click.FloatRange(min=0), default=0.0005, show_default=True)
@click.option("--noise", type=click.Choice(NOISE_MODELS), default="multiplicative", show_default=True)
@click.option("--mode", type=click.Choice(DLE_MODES), default="cojump", show_default=True)
@click.option("--alpha", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=0.05,
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Summary CSV.")
@click.option("--qq-out", type=click.Path(dir_okay=False), default=None,
              help="Standardized statistics, one per replication with events.")
@click.pass_context
def mc_dle(ctx, reps, seed, n, K, J, r_bins, threshold_rule, threshold_scale, R, scan, q, noise, mode, alpha, out,
           qq_out):
    """Full leverage pipeline on simulated days with a random jump time."""
    base = DleMcConfig()
    cfg = replace(base, reps=reps, seed=seed, n=n, K=K if K is not None else (100 if n >= 23400 else 50),
                  J=J if J is not None else base.J, r_bins=r_bins if r_bins is not None else base.r_bins, R=R,
                  scan=scan, threshold_rule=threshold_rule, threshold_scale=threshold_scale, q=q, noise=noise,
                  mode=mode, alpha=alpha)
    res = run_mc_dle(cfg)
    summary = res.summary()
    header = list(summary)
    row = [summary[k] for k in header]
    if out:
        write_csv(Path(out), header, [row])
        write_sidecar(Path(out), "mc-dle", _params(ctx), seed)
    if qq_out:
        z = np.sort(res.standardized)
        theo = stats.norm.ppf((np.arange(1, z.size + 1) - 0.5) / max(z.size, 1))
        write_csv(Path(qq_out), ["normal_quantile", "standardized"], zip(theo, z))
        write_sidecar(Path(qq_out), "mc-dle", _params(ctx), seed)
    click.echo(aligned(header, [row], digits=3))


def run(argv=None) -> int:
    """Entry point returning the exit status instead of exiting."""
    try:
        main.main(args=argv, prog_name="jumplev", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        click.echo("aborted", err=True)
        return 2
    except EstimationError as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        return 1
    except (OSError, IngestError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def cli_entry() -> None:
    sys.exit(run())

"""Command-line pipeline: ingest, detect, trace, proxy, stats, regress.

Every run echoes its resolved configuration to ``config.txt`` in the output
directory so result files are reproducible artifacts. Data files carry no
timestamps and floats are rendered with 12 significant digits, which makes
repeated runs byte-identical regardless of the worker count.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure, each with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import csv
import sys
from datetime import date
from pathlib import Path

import click

from . import analytics
from .detection import DetectionParams, write_candidates_csv
from .errors import BribescanError, DataError
from .ingestion import ChainStore, fetch_rpc, import_files, validate_store
from .pipeline import PipelineConfig, PipelineResult, run_detection, run_pipeline
from .proxies import describe_proxies, write_daily_csv, write_per_block_csv
from .render import format_float
from .tracing import write_traces_csv

DEFAULT_FORK_DATE = date(2021, 8, 5)


def _store_options(fn):
    fn = click.option("--rpc", envvar="BRIBESCAN_RPC_URL", default=None, metavar="URL",
                      help="Node JSON-RPC endpoint (default from BRIBESCAN_RPC_URL).")(fn)
    fn = click.option("--txs", "txs_path", type=click.Path(dir_okay=False), default=None,
                      help="Transactions NDJSON file.")(fn)
    fn = click.option("--blocks", "blocks_path", type=click.Path(dir_okay=False), default=None,
                      help="Blocks NDJSON file.")(fn)
    return fn


def _range_options(fn):
    fn = click.option("--end", type=int, required=True, help="Last target block.")(fn)
    fn = click.option("--start", type=int, required=True, help="First target block.")(fn)
    return fn


def _detect_options(fn):
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="Worker parallelism cap (results are identical for any value).")(fn)
    fn = click.option("--min-value", "min_value", type=float, default=0.0, show_default=True,
                      help="Drop candidate payments below this ETH value.")(fn)
    fn = click.option("--step", type=int, default=1000, show_default=True,
                      help="Blocks scanned before each target block for payments to its miner.")(fn)
    return fn


def _scan_options(fn):
    fn = _detect_options(fn)
    fn = click.option("--epsilon", type=float, default=1e-18, show_default=True,
                      help="Guard added to value mismatches in trace weights.")(fn)
    fn = click.option("--c", "c", type=float, default=1.0, show_default=True,
                      help="Scale constant applied to every score.")(fn)
    fn = click.option("--d", "d", type=int, default=6000, show_default=True,
                      help="Blocks scanned backwards when tracing a payment's funding.")(fn)
    return fn


def _out_option(fn):
    return click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True,
                        help="Output directory.")(fn)


def _fork_option(fn):
    return click.option("--fork-date", "fork_date", type=click.DateTime(["%Y-%m-%d"]),
                        default=DEFAULT_FORK_DATE.isoformat(), show_default=True,
                        help="Date where the post dummy switches to 1.")(fn)


def _load_store(blocks_path, txs_path, rpc, start, end, lookback) -> ChainStore:
    if blocks_path and txs_path:
        return import_files(blocks_path, txs_path)
    if blocks_path or txs_path:
        raise click.UsageError("--blocks and --txs must be given together")
    if rpc:
        return fetch_rpc(rpc, max(start - lookback, 0), end)
    raise click.UsageError("provide --blocks/--txs files or an --rpc endpoint")


def _prepare_out(out_dir) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_config(out: Path, entries: list[tuple[str, object]]) -> None:
    with open(out / "config.txt", "w", encoding="utf-8", newline="\n") as fh:
        for key, value in entries:
            fh.write(f"{key} = {value}\n")


def _config_entries(subcommand, blocks_path, txs_path, rpc, start, end, **extra):
    entries = [
        ("subcommand", subcommand),
        ("blocks", blocks_path or ""),
        ("txs", txs_path or ""),
        ("rpc", rpc or ""),
        ("start", start),
        ("end", end),
    ]
    entries.extend(extra.items())
    return entries


@click.group()
def cli():
    """Scan chain data for payments to block miners and score the activity."""


@cli.command()
@_store_options
@click.option("--start", type=int, default=None, help="First block (required with --rpc).")
@click.option("--end", type=int, default=None, help="Last block (required with --rpc).")
@_out_option
def ingest(blocks_path, txs_path, rpc, start, end, out_dir):
    """Load chain data and write the validated canonical store."""
    if blocks_path and txs_path:
        store = import_files(blocks_path, txs_path)
    elif rpc:
        if start is None or end is None:
            raise click.UsageError("--rpc ingestion needs --start and --end")
        if start > end:
            raise click.UsageError("--start must not exceed --end")
        store = fetch_rpc(rpc, start, end)
    else:
        raise click.UsageError("provide --blocks/--txs files or an --rpc endpoint")
    out = _prepare_out(out_dir)
    report = validate_store(store)
    store.export_files(out / "blocks.ndjson", out / "txs.ndjson")
    _write_config(out, _config_entries("ingest", blocks_path, txs_path, rpc,
                                       store.first_block, store.last_block))
    click.echo(f"store: blocks={store.n_blocks} txs={store.n_txs} ok={str(report.ok).lower()}")


@cli.command()
@_store_options
@_range_options
@_detect_options
@_out_option
def detect(blocks_path, txs_path, rpc, start, end, step, min_value, threads, out_dir):
    """Write the candidate payments CSV for a block range."""
    if start > end:
        raise click.UsageError("--start must not exceed --end")
    store = _load_store(blocks_path, txs_path, rpc, start, end, step)
    params = DetectionParams(start, end, step, min_value)
    detections = run_detection(store, params, threads)
    out = _prepare_out(out_dir)
    write_candidates_csv(detections, store, out / "candidates.csv")
    _write_config(out, _config_entries("detect", blocks_path, txs_path, rpc, start, end,
                                       step=step, min_value_eth=min_value, threads=threads))
    total = sum(len(det.candidates) for det in detections)
    click.echo(f"candidates: {total}")


def _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads):
    if start > end:
        raise click.UsageError("--start must not exceed --end")
    store = _load_store(blocks_path, txs_path, rpc, start, end, step + d)
    config = PipelineConfig(start, end, step, d, c, epsilon, min_value, threads)
    result = run_pipeline(store, config)
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    return store, result


def _scan_config(subcommand, blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                 min_value, threads, **extra):
    return _config_entries(subcommand, blocks_path, txs_path, rpc, start, end,
                           step=step, d=d, c=c, epsilon=epsilon, min_value_eth=min_value,
                           threads=threads, **extra)


@cli.command()
@_store_options
@_range_options
@_scan_options
@_out_option
def trace(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads, out_dir):
    """Write the traced funding links CSV for a block range."""
    store, result = _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                              min_value, threads)
    out = _prepare_out(out_dir)
    write_traces_csv(result.traces, store, out / "traces.csv")
    _write_config(out, _scan_config("trace", blocks_path, txs_path, rpc, start, end, step, d,
                                    c, epsilon, min_value, threads))
    click.echo(f"trace links: {sum(len(t.links) for t in result.traces)}")


@cli.command()
@_store_options
@_range_options
@_scan_options
@_out_option
def proxy(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads, out_dir):
    """Write per-block and daily score CSVs (all three scores)."""
    store, result = _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                              min_value, threads)
    out = _prepare_out(out_dir)
    write_per_block_csv(result.proxies, store, out / "per_block.csv")
    write_daily_csv(result.daily, out / "daily.csv")
    _write_config(out, _scan_config("proxy", blocks_path, txs_path, rpc, start, end, step, d,
                                    c, epsilon, min_value, threads))
    click.echo(f"daily rows: {len(result.daily)}")


def _write_stats_files(store, result: PipelineResult, out: Path, fork: date, labels_path) -> None:
    labels = analytics.load_labels_csv(labels_path) if labels_path else None

    values = []
    fees = []
    for det in result.detections:
        for cand in det.candidates:
            values.append(cand.value_eth)
            fees.append(float(store.tx_fee_wei_at(cand.payment_block, cand.tx_index)))
    traced = [float(link.traced_value_eth) for tr in result.traces for link in tr.links]

    with open(out / "tx_stats.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value_eth", "fee_wei", "traced_value_eth"])
        if values:
            vs = analytics.describe_values(values)
            fs = analytics.describe_values(fees)
            ts = analytics.describe_values(traced) if traced else None
            for metric in ("mean", "median", "max", "min", "std"):
                row = [metric, format_float(getattr(vs, metric)), format_float(getattr(fs, metric))]
                row.append(format_float(getattr(ts, metric)) if ts else "")
                writer.writerow(row)

    analytics.write_frequency_csv(
        analytics.frequency_table(result.detections, "miner", 20, labels), out / "top_miners.csv"
    )
    analytics.write_frequency_csv(
        analytics.frequency_table(result.detections, "sender", 20, labels), out / "top_senders.csv"
    )

    with open(out / "proxy_stats.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scope", "metric", "benchmark", "a", "b"])
        if result.daily:
            summary = describe_proxies(result.daily, fork)
            for scope, stats in (("overall", summary.overall), ("before", summary.before),
                                 ("after", summary.after)):
                if stats is None:
                    continue
                for metric in ("mean", "median", "max", "min", "std"):
                    writer.writerow([
                        scope,
                        metric,
                        format_float(getattr(stats.benchmark, metric)),
                        format_float(getattr(stats.a, metric)),
                        format_float(getattr(stats.b, metric)),
                    ])


@cli.command()
@_store_options
@_range_options
@_scan_options
@_fork_option
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default=None,
              help="Optional address,label,is_mining_pool CSV.")
@_out_option
def stats(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads,
          fork_date, labels_path, out_dir):
    """Write descriptive statistics and top miner/sender tables."""
    fork = fork_date.date()
    store, result = _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                              min_value, threads)
    out = _prepare_out(out_dir)
    _write_stats_files(store, result, out, fork, labels_path)
    _write_config(out, _scan_config("stats", blocks_path, txs_path, rpc, start, end, step, d,
                                    c, epsilon, min_value, threads,
                                    fork_date=fork.isoformat(), labels=labels_path or ""))
    click.echo("stats written")


def _regression_options(fn):
    fn = click.option("--standardize", type=click.Choice(["on", "off"]), default="on",
                      show_default=True, help="Z-score non-dummy variables over the joined sample.")(fn)
    fn = click.option("--controls", default="", metavar="NAMES",
                      help="Comma-separated control column names.")(fn)
    fn = click.option("--dependent", default=None, metavar="NAME",
                      help="Dependent factor column.")(fn)
    fn = click.option("--factors", "factors_path", type=click.Path(dir_okay=False), default=None,
                      help="Factor CSV: date,<name1>,<name2>,...")(fn)
    fn = click.option("--proxy", "proxy_choice", type=click.Choice(["benchmark", "a", "b", "all"]),
                      default="all", show_default=True, help="Score series used as the regressor.")(fn)
    return fn


def _run_regressions(result: PipelineResult, factors_path, dependent, controls, fork: date,
                     standardize: str, proxy_choice: str, out: Path) -> int:
    factors = analytics.load_factors_csv(factors_path)
    control_names = [name.strip() for name in controls.split(",") if name.strip()]
    proxies = ("benchmark", "a", "b") if proxy_choice == "all" else (proxy_choice,)
    cells = analytics.run_regression_suite(
        result.daily, factors, [dependent], control_names, fork,
        standardize=(standardize == "on"), proxies=proxies,
    )
    analytics.write_results_csv(cells, control_names, out / "results.csv")
    return len(cells)


@cli.command()
@_store_options
@_range_options
@_scan_options
@_fork_option
@_regression_options
@_out_option
def regress(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads,
            fork_date, proxy_choice, factors_path, dependent, controls, standardize, out_dir):
    """Regress a factor on the daily scores with a post-fork interaction."""
    if not factors_path or not dependent:
        raise click.UsageError("regress needs --factors and --dependent")
    fork = fork_date.date()
    store, result = _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                              min_value, threads)
    out = _prepare_out(out_dir)
    n_cells = _run_regressions(result, factors_path, dependent, controls, fork, standardize,
                               proxy_choice, out)
    _write_config(out, _scan_config("regress", blocks_path, txs_path, rpc, start, end, step, d,
                                    c, epsilon, min_value, threads,
                                    fork_date=fork.isoformat(), proxy=proxy_choice,
                                    standardize=standardize, factors=factors_path,
                                    dependent=dependent, controls=controls))
    click.echo(f"regression cells: {n_cells}")


@cli.command()
@_store_options
@_range_options
@_scan_options
@_fork_option
@_regression_options
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default=None,
              help="Optional address,label,is_mining_pool CSV.")
@_out_option
def pipeline(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon, min_value, threads,
             fork_date, proxy_choice, factors_path, dependent, controls, standardize,
             labels_path, out_dir):
    """Run every stage and write all report files."""
    fork = fork_date.date()
    store, result = _run_scan(blocks_path, txs_path, rpc, start, end, step, d, c, epsilon,
                              min_value, threads)
    out = _prepare_out(out_dir)
    write_candidates_csv(result.detections, store, out / "candidates.csv")
    write_traces_csv(result.traces, store, out / "traces.csv")
    write_per_block_csv(result.proxies, store, out / "per_block.csv")
    write_daily_csv(result.daily, out / "daily.csv")
    _write_stats_files(store, result, out, fork, labels_path)
    if factors_path and dependent:
        _run_regressions(result, factors_path, dependent, controls, fork, standardize,
                         proxy_choice, out)
    _write_config(out, _scan_config("pipeline", blocks_path, txs_path, rpc, start, end, step, d,
                                    c, epsilon, min_value, threads,
                                    fork_date=fork.isoformat(), proxy=proxy_choice,
                                    standardize=standardize, labels=labels_path or "",
                                    factors=factors_path or "", dependent=dependent or "",
                                    controls=controls))
    click.echo(f"pipeline done: {len(result.daily)} daily rows in {out}")


def main(argv=None) -> int:
    """Run the CLI and map failures onto the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="bribescan", standalone_mode=False)
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except BribescanError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except Exception as exc:  # last resort: keep the one-line contract
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 3
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

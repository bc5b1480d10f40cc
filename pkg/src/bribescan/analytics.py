"""Frequency tables, descriptive statistics, panel assembly and OLS.

The regression design follows one template per (dependent, score) pair:

    dependent ~ const + bribing + post + controls... + post x bribing

where ``post`` is a 0/1 dummy switching on at a configurable fork date.
Variables other than the dummy can be z-scored over the joined sample; the
interaction column is the product of the dummy with the (possibly already
standardized) score, never re-standardized itself.
"""

from __future__ import annotations

import csv
import statistics
from collections import Counter
from dataclasses import dataclass
from datetime import date
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    MissingColumn,
    NoOverlap,
    RankDeficient,
    SchemaMismatch,
    TooFewRows,
)
from .render import format_float

if TYPE_CHECKING:  # pragma: no cover
    from .detection import BlockDetection
    from .proxies import DailyProxies


# -- frequency tables ------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LabelEntry:
    label: str
    is_mining_pool: bool | None


@dataclass(frozen=True, slots=True)
class FrequencyRow:
    address: str
    label: str | None
    count: int
    is_mining_pool: bool | None


def frequency_table(
    detections: Iterable["BlockDetection"],
    role: str,
    top_k: int,
    labels: Mapping[str, LabelEntry] | None = None,
) -> list[FrequencyRow]:
    """Most frequent miners or candidate senders, counted per candidate payment.

    Ties break on the address so the ranking is order-independent.
    """
    if role not in ("miner", "sender"):
        raise ValueError("role must be 'miner' or 'sender'")
    if top_k < 1:
        raise ValueError("top_k must be positive")
    counts: Counter[str] = Counter()
    for det in detections:
        for c in det.candidates:
            counts[c.miner if role == "miner" else c.sender] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    rows = []
    for addr, count in ranked:
        entry = labels.get(addr) if labels else None
        rows.append(
            FrequencyRow(addr, entry.label if entry else None, count, entry.is_mining_pool if entry else None)
        )
    return rows


def load_labels_csv(path) -> dict[str, LabelEntry]:
    """Read an ``address,label,is_mining_pool`` CSV into a lookup map."""
    out: dict[str, LabelEntry] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "address" not in reader.fieldnames:
            raise SchemaMismatch("address", "labels CSV needs an 'address' column")
        for row in reader:
            addr = (row.get("address") or "").strip().lower()
            if not addr:
                continue
            raw_pool = (row.get("is_mining_pool") or "").strip().lower()
            pool = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}.get(
                raw_pool
            )
            out[addr] = LabelEntry((row.get("label") or "").strip(), pool)
    return out


def write_frequency_csv(rows: Sequence[FrequencyRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["address", "label", "count", "is_mining_pool"])
        for r in rows:
            pool = "" if r.is_mining_pool is None else ("1" if r.is_mining_pool else "0")
            writer.writerow([r.address, r.label or "", r.count, pool])


# -- descriptive statistics -------------------------------------------------


@dataclass(frozen=True, slots=True)
class ValueStats:
    mean: float
    median: float
    max: float
    min: float
    std: float
    degenerate: bool  # single observation, std reported as 0


def describe_values(xs: Sequence[float]) -> ValueStats:
    """Mean, even-midpoint median, extremes and sample (n-1) standard deviation."""
    if not xs:
        raise EmptyInput("cannot describe an empty sample")
    if len(xs) == 1:
        v = float(xs[0])
        return ValueStats(v, v, v, v, 0.0, True)
    return ValueStats(
        statistics.fmean(xs),
        float(statistics.median(xs)),
        float(max(xs)),
        float(min(xs)),
        statistics.stdev(xs),
        False,
    )


# -- factor tables and panels -----------------------------------------------


@dataclass(frozen=True)
class FactorTable:
    columns: tuple[str, ...]
    rows: dict[date, dict[str, float]]


def load_factors_csv(path) -> FactorTable:
    """Read a ``date,<name>,...`` CSV; blank cells mean missing."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("date", "factor CSV is empty") from None
        if not header or header[0].strip() != "date":
            raise SchemaMismatch("date", "factor CSV must start with a 'date' column")
        names = [h.strip() for h in header[1:]]
        rows: dict[date, dict[str, float]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise SchemaMismatch("date", f"line {line_no}: {exc}") from exc
            if day in rows:
                raise SchemaMismatch("date", f"line {line_no}: duplicate date {day}")
            values: dict[str, float] = {}
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    values[name] = float(cell)
                except ValueError as exc:
                    raise SchemaMismatch(name, f"line {line_no}: {exc}") from exc
            rows[day] = values
    return FactorTable(tuple(names), rows)


@dataclass(frozen=True, slots=True)
class PanelRow:
    date: date
    bribing: float
    post: int
    dependent: float
    controls: tuple[float, ...]


@dataclass(frozen=True)
class Panel:
    rows: tuple[PanelRow, ...]
    control_names: tuple[str, ...]
    dropped: int
    standardized: bool
    proxy: str
    dependent_name: str


def _zscore(values: list[float]) -> list[float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    if std == 0.0:
        return [v - mean for v in values]
    return [(v - mean) / std for v in values]


def build_panel(
    daily: Sequence["DailyProxies"],
    proxy: str,
    factors: FactorTable,
    dependent: str,
    controls: Sequence[str],
    fork_date: date,
    standardize: bool = False,
) -> Panel:
    """Inner-join daily scores with factor columns on date.

    Rows missing the dependent or any control are dropped and counted. With
    ``standardize`` every non-dummy variable is z-scored over the joined
    sample; the post dummy stays 0/1.
    """
    if proxy not in ("benchmark", "a", "b"):
        raise ValueError("proxy must be 'benchmark', 'a' or 'b'")
    for name in (dependent, *controls):
        if name not in factors.columns:
            raise MissingColumn(name)
    dates: list[date] = []
    bribing: list[float] = []
    dep: list[float] = []
    ctrl_cols: list[list[float]] = [[] for _ in controls]
    dropped = 0
    for row in daily:
        f = factors.rows.get(row.date)
        if f is None or dependent not in f or any(c not in f for c in controls):
            dropped += 1
            continue
        dates.append(row.date)
        bribing.append({"benchmark": row.benchmark, "a": row.a, "b": row.b}[proxy])
        dep.append(f[dependent])
        for col, name in zip(ctrl_cols, controls):
            col.append(f[name])
    if not dates:
        raise NoOverlap("no dates shared between the proxy series and the factor table")
    if standardize:
        bribing = _zscore(bribing)
        dep = _zscore(dep)
        ctrl_cols = [_zscore(col) for col in ctrl_cols]
    rows = tuple(
        PanelRow(
            dates[i],
            bribing[i],
            1 if dates[i] >= fork_date else 0,
            dep[i],
            tuple(col[i] for col in ctrl_cols),
        )
        for i in range(len(dates))
    )
    return Panel(rows, tuple(controls), dropped, standardize, proxy, dependent)


def panel_design(panel: Panel) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Dependent vector and design matrix with intercept and interaction."""
    names = ["const", "bribing", "post", *panel.control_names, "post_x_bribing"]
    y = np.array([r.dependent for r in panel.rows], dtype=float)
    X = np.array(
        [[1.0, r.bribing, float(r.post), *r.controls, r.post * r.bribing] for r in panel.rows],
        dtype=float,
    )
    return y, X, names


# -- least squares -----------------------------------------------------------


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: dict[str, float]
    t_stats: dict[str, float]
    n: int
    r2: float
    adj_r2: float


def ols(y, X, names: Sequence[str] | None = None) -> RegressionResult:
    """Least squares through a QR decomposition, with classical t-statistics.

    ``adj_r2`` uses ``1 - (1 - R^2)(n - 1)/(n - p - 1)`` with ``p`` counting
    the slopes (intercept excluded). Collinear designs raise
    :class:`RankDeficient` instead of returning garbage.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, p) and y must be (n,)")
    n, p = X.shape
    if names is None:
        names = [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise ValueError("one name per design column")
    if n <= p:
        raise TooFewRows(f"{n} rows cannot identify {p} parameters")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise RankDeficient("design matrix is collinear")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - p
    sigma2 = rss / dof
    r_inv = np.linalg.inv(r)
    cov_diag = np.einsum("ij,ij->i", r_inv, r_inv) * sigma2
    se = np.sqrt(np.maximum(cov_diag, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.nan)
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss > 0.0:
        r2 = 1.0 - rss / tss
    else:
        r2 = 0.0
    slopes = p - 1
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - slopes - 1)
    return RegressionResult(
        tuple(names),
        dict(zip(names, beta.tolist())),
        dict(zip(names, t.tolist())),
        n,
        r2,
        adj_r2,
    )


# -- regression suite ---------------------------------------------------------


@dataclass(frozen=True)
class SuiteCell:
    dependent: str
    proxy: str
    spec: str  # "univariate" or "controls"
    result: RegressionResult | None
    error: str | None


def run_regression_suite(
    daily: Sequence["DailyProxies"],
    factors: FactorTable,
    dependents: Sequence[str],
    controls: Sequence[str],
    fork_date: date,
    standardize: bool = True,
    proxies: Sequence[str] = ("benchmark", "a", "b"),
) -> list[SuiteCell]:
    """Each dependent against each score, univariate then with controls.

    Estimation degeneracies (a collinear score column, too few joined rows)
    are recorded in their cell and the suite moves on; structural input
    errors (missing factor columns, empty joins) propagate.
    """
    specs: list[tuple[str, tuple[str, ...]]] = [("univariate", ())]
    if controls:
        specs.append(("controls", tuple(controls)))
    cells: list[SuiteCell] = []
    for dependent in dependents:
        for spec_name, ctrl in specs:
            for proxy in proxies:
                try:
                    panel = build_panel(daily, proxy, factors, dependent, ctrl, fork_date, standardize)
                    y, X, names = panel_design(panel)
                    result = ols(y, X, names)
                    cells.append(SuiteCell(dependent, proxy, spec_name, result, None))
                except (RankDeficient, TooFewRows) as exc:
                    cells.append(SuiteCell(dependent, proxy, spec_name, None, f"{type(exc).__name__}: {exc}"))
    return cells


def write_results_csv(cells: Sequence[SuiteCell], controls: Sequence[str], path) -> None:
    terms = ["const", "bribing", "post", *controls, "post_x_bribing"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["dependent", "proxy", "spec", "n", "r2", "adj_r2", "error"]
        for term in terms:
            header += [f"beta_{term}", f"t_{term}"]
        writer.writerow(header)
        for cell in cells:
            if cell.result is None:
                row = [cell.dependent, cell.proxy, cell.spec, "", "", "", cell.error or ""]
                row += ["", ""] * len(terms)
            else:
                res = cell.result
                row = [
                    cell.dependent,
                    cell.proxy,
                    cell.spec,
                    res.n,
                    format_float(res.r2),
                    format_float(res.adj_r2),
                    "",
                ]
                for term in terms:
                    if term in res.coefficients:
                        row += [format_float(res.coefficients[term]), format_float(res.t_stats[term])]
                    else:
                        row += ["", ""]
            writer.writerow(row)

"""Block-level activity scores and their daily aggregation.

Three scores per target block:

* ``p_benchmark`` - each candidate payment contributes its ETH value divided
  by its block distance; if the payers came back with follow-up transactions
  inside the target block, the whole sum is weighted by one plus the
  follow-ups' total value.
* ``p_a`` - every candidate's benchmark slice is re-weighted by its traced
  funding links: each link multiplies the slice by
  ``1 + (1 / gap) * value / (|value - traced_value| + epsilon)`` and the
  weighted slices are summed per candidate. Candidates with no traced links
  fall back to their plain slice.
* ``p_b`` - same as ``p_a`` but untraced candidates contribute nothing.

The constant ``c`` multiplies the final sum exactly once, so scaling ``c``
scales every score exactly. Summation order is pinned to
(candidate payment block, tx index, traced block, tx index), which makes
results bit-identical across runs and worker counts. Exact value matches
between a payment and its funding produce weights near ``value * 1e18 /
gap`` by construction; the CLI warns when one link dominates a day.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Sequence

from .analytics import ValueStats, describe_values
from .chain_model import date_of_timestamp
from .detection import BlockDetection
from .errors import NegativeBlockGap, UnknownBlock
from .ingestion import ChainStore
from .render import format_float
from .tracing import BlockTrace

_MODES = ("a", "b")


@dataclass(frozen=True, slots=True)
class ProxyParams:
    c: float = 1.0
    epsilon: float = 1e-18

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True, slots=True)
class BlockProxies:
    target_block: int
    p_benchmark: float
    p_a: float
    p_b: float


@dataclass(frozen=True, slots=True)
class DailyProxies:
    date: date
    benchmark: float
    a: float
    b: float
    block_count: int  # target blocks scanned on this day


def trace_link_weight(value_s: float, value_j: float, block_gap: int, epsilon: float) -> float:
    """Weight of one traced funding link.

    Strictly decreasing in the block gap and in the value mismatch: funding
    that arrived just before the payment, in a closely matching amount, is
    the strongest signal.
    """
    if block_gap <= 0:
        raise NegativeBlockGap(
            f"traced transaction does not precede its payment (gap {block_gap})"
        )
    return 1.0 + (1.0 / block_gap) * (value_s / (abs(value_s - value_j) + epsilon))


def _candidate_units(detection: BlockDetection) -> list[float]:
    """Per-candidate slice of the benchmark sum, before the c factor."""
    followup_weight = 1.0
    if detection.followups:
        total = 0.0
        for f in detection.followups:
            total += f.value_eth
        followup_weight = 1.0 + total
    return [c.value_eth / c.distance * followup_weight for c in detection.candidates]


def _block_totals(
    detection: BlockDetection, trace: BlockTrace | None, epsilon: float
) -> tuple[float, float, float, float]:
    """(benchmark, a, b, largest single link term), all before the c factor."""
    units = _candidate_units(detection)
    grouped = trace.grouped() if trace is not None else {}
    benchmark = 0.0
    a = 0.0
    b = 0.0
    peak = 0.0
    for cand, unit in zip(detection.candidates, units):
        benchmark += unit
        links = grouped.get((cand.payment_block, cand.tx_index))
        if not links:
            a += unit
            continue
        weighted = 0.0
        value_s = cand.value_eth
        payment_block = cand.payment_block
        for link in links:
            term = unit * trace_link_weight(
                value_s, link.traced_value_eth, payment_block - link.traced_block, epsilon
            )
            weighted += term
            if term > peak:
                peak = term
        a += weighted
        b += weighted
    return benchmark, a, b, peak


def proxy_benchmark(detection: BlockDetection, params: ProxyParams) -> float:
    """Distance-weighted payment total, follow-up weighted; zero if no candidates."""
    total = 0.0
    for unit in _candidate_units(detection):
        total += unit
    return params.c * total


def proxy_bribing(
    detection: BlockDetection, trace: BlockTrace, params: ProxyParams, mode: str
) -> float:
    """Trace-weighted score; ``mode`` picks the untraced-candidate treatment.

    Mode ``"a"`` lets candidates without any traced funding fall back to
    their benchmark slice; mode ``"b"`` drops them.
    """
    mode = mode.lower()
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    _, a, b, _ = _block_totals(detection, trace, params.epsilon)
    return params.c * (a if mode == "a" else b)


def compute_block_proxies(
    detection: BlockDetection, trace: BlockTrace, params: ProxyParams
) -> BlockProxies:
    proxies, _ = block_proxies_with_peak(detection, trace, params)
    return proxies


def block_proxies_with_peak(
    detection: BlockDetection, trace: BlockTrace | None, params: ProxyParams
) -> tuple[BlockProxies, float]:
    """All three scores plus the largest single link term (for spike warnings)."""
    benchmark, a, b, peak = _block_totals(detection, trace, params.epsilon)
    c = params.c
    return (
        BlockProxies(detection.target_block, c * benchmark, c * a, c * b),
        c * peak,
    )


def aggregate_daily(
    series: Iterable[BlockProxies],
    store: ChainStore,
    span: tuple[date, date] | None = None,
) -> list[DailyProxies]:
    """Sum block scores into one row per UTC day, zero-filling quiet days.

    ``series`` must be in block order (the order the scan emits); sums run in
    that order so daily values equal the exact float sum of their blocks.
    ``span`` widens the emitted calendar, e.g. to cover days the scan never
    touched; it is extended automatically to include every observed day.
    """
    sums: dict[date, list] = {}
    for p in series:
        if not store.has_block(p.target_block):
            raise UnknownBlock(f"block {p.target_block} not in store")
        day = date_of_timestamp(store.timestamp_of(p.target_block))
        acc = sums.get(day)
        if acc is None:
            sums[day] = acc = [0.0, 0.0, 0.0, 0]
        acc[0] += p.p_benchmark
        acc[1] += p.p_a
        acc[2] += p.p_b
        acc[3] += 1
    if span is None:
        if not sums:
            return []
        lo, hi = min(sums), max(sums)
    else:
        lo, hi = span
        if sums:
            lo = min(lo, min(sums))
            hi = max(hi, max(sums))
    out: list[DailyProxies] = []
    day = lo
    one = timedelta(days=1)
    while day <= hi:
        acc = sums.get(day)
        if acc is None:
            out.append(DailyProxies(day, 0.0, 0.0, 0.0, 0))
        else:
            out.append(DailyProxies(day, acc[0], acc[1], acc[2], acc[3]))
        day += one
    return out


@dataclass(frozen=True)
class ProxyStats:
    benchmark: ValueStats
    a: ValueStats
    b: ValueStats


@dataclass(frozen=True)
class ProxySummary:
    overall: ProxyStats
    before: ProxyStats | None
    after: ProxyStats | None


def _stats_for(rows: Sequence[DailyProxies]) -> ProxyStats | None:
    if not rows:
        return None
    return ProxyStats(
        describe_values([r.benchmark for r in rows]),
        describe_values([r.a for r in rows]),
        describe_values([r.b for r in rows]),
    )


def describe_proxies(daily: Sequence[DailyProxies], split_date: date | None = None) -> ProxySummary:
    """Mean/median/max/min/sample-std per score, overall and around a split date."""
    overall = _stats_for(daily)
    if overall is None:
        raise ValueError("no daily rows to describe")
    before = after = None
    if split_date is not None:
        before = _stats_for([r for r in daily if r.date < split_date])
        after = _stats_for([r for r in daily if r.date >= split_date])
    return ProxySummary(overall, before, after)


def write_per_block_csv(series: Iterable[BlockProxies], store: ChainStore, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("block_number,date,p_benchmark,p_a,p_b\n")
        for p in series:
            day = date_of_timestamp(store.timestamp_of(p.target_block))
            fh.write(
                f"{p.target_block},{day.isoformat()},{format_float(p.p_benchmark)},"
                f"{format_float(p.p_a)},{format_float(p.p_b)}\n"
            )


def write_daily_csv(daily: Iterable[DailyProxies], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,benchmark,a,b,block_count\n")
        for row in daily:
            fh.write(
                f"{row.date.isoformat()},{format_float(row.benchmark)},{format_float(row.a)},"
                f"{format_float(row.b)},{row.block_count}\n"
            )

"""One-step backward tracing of the funds behind each candidate payment.

For a candidate paid out of block ``p``, the trace collects every
transaction in blocks ``p - d .. p - 1`` whose recipient is the candidate's
sender: the money that flowed into the payer just before it paid the miner.
The window is anchored at the payment block, which keeps every block gap
strictly positive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .detection import BlockDetection, BribeCandidate
from .errors import InsufficientHistory
from .indexing import RecipientWindow, build_window
from .ingestion import ChainStore
from .render import format_float


@dataclass(frozen=True, slots=True)
class TraceParams:
    d: int = 6000

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be positive")


@dataclass(frozen=True, slots=True)
class TraceLink:
    """A prior transaction funding a candidate's sender."""

    candidate: BribeCandidate
    traced_block: int
    tx_index: int
    traced_value_eth: float
    funder: str


@dataclass(frozen=True, slots=True)
class BlockTrace:
    target_block: int
    links: tuple[TraceLink, ...]

    def grouped(self) -> dict[tuple[int, int], list[TraceLink]]:
        """Links bucketed by candidate payment reference (block, tx_index)."""
        out: dict[tuple[int, int], list[TraceLink]] = {}
        for link in self.links:
            key = (link.candidate.payment_block, link.candidate.tx_index)
            out.setdefault(key, []).append(link)
        return out


def links_from_window(
    window: RecipientWindow,
    detection: BlockDetection,
    d: int,
    first_block: int,
) -> BlockTrace:
    """Trace a detection against a window that already covers every look-back.

    The window may be wider than any single candidate's range; each
    candidate filters it down to the ``d`` blocks before its own payment.
    Self-funding (payer funding itself) and zero-value links are kept.
    """
    links: list[TraceLink] = []
    for c in detection.candidates:
        lo = c.payment_block - d
        if lo < first_block:
            raise InsufficientHistory(
                f"tracing the payment in block {c.payment_block} with d={d} needs history "
                f"from block {lo}, but the store starts at {first_block}"
            )
        hi = c.payment_block - 1
        for e in window.payments_to(c.sender, lo, hi):
            links.append(TraceLink(c, e.block_number, e.tx_index, e.value_eth, e.sender))
    return BlockTrace(detection.target_block, tuple(links))


def trace(store: ChainStore, detection: BlockDetection, params: TraceParams) -> BlockTrace:
    """Trace every candidate of one detection.

    Output is ordered by (candidate, traced block, tx index); candidates keep
    the (payment_block, tx_index) order they were detected in.
    """
    if not detection.candidates:
        return BlockTrace(detection.target_block, ())
    payments = [c.payment_block for c in detection.candidates]
    hi = max(payments) - 1
    lo = min(payments) - params.d
    window = build_window(store, hi - lo + 1, hi)
    return links_from_window(window, detection, params.d, store.first_block)


def write_traces_csv(traces: Iterable[BlockTrace], store: ChainStore, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["target_block", "candidate_tx_hash", "traced_tx_hash", "traced_block", "traced_value_eth", "funder"]
        )
        for tr in traces:
            for link in tr.links:
                c = link.candidate
                writer.writerow(
                    [
                        tr.target_block,
                        store.tx_hash_at(c.payment_block, c.tx_index),
                        store.tx_hash_at(link.traced_block, link.tx_index),
                        link.traced_block,
                        format_float(link.traced_value_eth),
                        link.funder,
                    ]
                )

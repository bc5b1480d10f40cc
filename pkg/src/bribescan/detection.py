"""Candidate detection: payments that land with a block's own miner.

For every target block ``i`` the scan collects transactions from the
``step`` blocks immediately before it (``i - step .. i - 1``) whose
recipient is the miner of block ``i``, then picks out the transactions
inside block ``i`` that those same payers initiated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import InsufficientHistory
from .indexing import RecipientWindow, SenderByBlock, build_window
from .ingestion import ChainStore
from .render import format_float


@dataclass(frozen=True, slots=True)
class DetectionParams:
    startblock: int
    endblock: int
    step: int = 1000
    min_value_eth: float = 0.0

    def __post_init__(self) -> None:
        if self.startblock > self.endblock:
            raise ValueError("startblock must not exceed endblock")
        if self.step < 1:
            raise ValueError("step must be positive")
        if self.min_value_eth < 0:
            raise ValueError("min_value_eth must be non-negative")


@dataclass(frozen=True, slots=True)
class BribeCandidate:
    """A payment to the miner of a nearby later block."""

    target_block: int
    miner: str
    payment_block: int
    tx_index: int
    sender: str
    value_eth: float
    distance: int  # target_block - payment_block, between 1 and step


@dataclass(frozen=True, slots=True)
class FollowupTx:
    """A transaction inside the target block sent by a candidate's payer."""

    target_block: int
    tx_index: int
    sender: str
    value_eth: float


@dataclass(frozen=True, slots=True)
class BlockDetection:
    target_block: int
    miner: str
    candidates: tuple[BribeCandidate, ...]
    followups: tuple[FollowupTx, ...]


def detect_block(
    store: ChainStore,
    window: RecipientWindow,
    sender_index: SenderByBlock,
    target_block: int,
    min_value_eth: float = 0.0,
    window_lo: int | None = None,
) -> BlockDetection:
    """Detect one target block against a window covering the step blocks before it.

    ``window_lo`` restricts a wider window down to the detection range, so
    the pipeline can share one window between detection and tracing.
    Follow-up matching is by sender equality alone; the follow-up's own
    recipient and value play no role, and follow-up values are never
    thresholded. Self-payments (miner paying itself) stay in, flagged later.
    """
    miner = store.miner_of(target_block)
    candidates = tuple(
        BribeCandidate(
            target_block,
            miner,
            e.block_number,
            e.tx_index,
            e.sender,
            e.value_eth,
            target_block - e.block_number,
        )
        for e in window.payments_to(miner, window_lo)
        if e.value_eth >= min_value_eth
    )
    followups: tuple[FollowupTx, ...] = ()
    if candidates:
        senders = {c.sender for c in candidates}
        grouped = sender_index.senders(target_block)
        rows: list[tuple[int, str, float]] = []
        for s in senders:
            for tx_index, _recipient, value_eth in grouped.get(s, ()):
                rows.append((tx_index, s, value_eth))
        rows.sort()
        followups = tuple(FollowupTx(target_block, idx, s, v) for idx, s, v in rows)
    return BlockDetection(target_block, miner, candidates, followups)


def check_history(store: ChainStore, params: DetectionParams) -> None:
    if params.startblock - params.step < store.first_block:
        raise InsufficientHistory(
            f"scanning block {params.startblock} with step {params.step} needs history "
            f"from block {params.startblock - params.step}, but the store starts at "
            f"{store.first_block}"
        )
    if params.endblock > store.last_block:
        raise InsufficientHistory(
            f"endblock {params.endblock} is beyond the store's last block {store.last_block}"
        )


def detect(store: ChainStore, params: DetectionParams) -> Iterator[BlockDetection]:
    """Stream one :class:`BlockDetection` per block in the requested range.

    Blocks with no matching payment yield an empty detection, keeping the
    output aligned with the block range. Results are identical to a fresh
    scan of the ``step`` preceding blocks for every target block.
    """
    check_history(store, params)
    window = build_window(store, params.step, params.startblock - 1)
    sender_index = SenderByBlock(store)
    for i in range(params.startblock, params.endblock + 1):
        yield detect_block(store, window, sender_index, i, params.min_value_eth)
        window.advance(i, store.block_txs(i))


def filter_min_value(detection: BlockDetection, threshold_eth: float) -> BlockDetection:
    """Drop candidates below ``threshold_eth`` and follow-ups they orphaned.

    Idempotent at a fixed threshold, and monotone: raising the threshold can
    only shrink the surviving sets.
    """
    if threshold_eth < 0:
        raise ValueError("threshold must be non-negative")
    candidates = tuple(c for c in detection.candidates if c.value_eth >= threshold_eth)
    senders = {c.sender for c in candidates}
    followups = tuple(f for f in detection.followups if f.sender in senders)
    return BlockDetection(detection.target_block, detection.miner, candidates, followups)


def self_payment_flags(detection: BlockDetection) -> list[bool]:
    """Per candidate: did the miner pay itself?"""
    return [c.sender == c.miner for c in detection.candidates]


def write_candidates_csv(detections: Iterable[BlockDetection], store: ChainStore, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["target_block", "miner", "payment_block", "tx_hash", "sender", "value_eth", "distance", "self_payment"]
        )
        for det in detections:
            for c in det.candidates:
                writer.writerow(
                    [
                        c.target_block,
                        c.miner,
                        c.payment_block,
                        store.tx_hash_at(c.payment_block, c.tx_index),
                        c.sender,
                        format_float(c.value_eth),
                        c.distance,
                        "true" if c.sender == c.miner else "false",
                    ]
                )

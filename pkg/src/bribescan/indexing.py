"""Sliding indices that turn repeated look-back scans into one pass.

A :class:`RecipientWindow` holds the transactions of the last ``window_len``
blocks keyed by recipient. Advancing it one block appends that block's
transactions and evicts the block that fell off the lower edge, so querying
"who paid address X recently" is O(result) per block instead of a rescan.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, NamedTuple

from .errors import NonContiguousAdvance
from .ingestion import ChainStore


class WindowEntry(NamedTuple):
    block_number: int
    tx_index: int
    sender: str
    value_eth: float


class RecipientWindow:
    """Rolling recipient index over the last ``window_len`` blocks.

    Covers the interval ``[hi - window_len + 1, hi]``; blocks before the
    store's first block simply contribute nothing. Zero-value and
    self-directed transfers are kept (downstream scoring decides what they
    are worth); contract creations have no recipient and are skipped.
    """

    __slots__ = ("window_len", "_hi", "_entries", "_log", "_count")

    def __init__(self, window_len: int, start_hi: int):
        if window_len < 1:
            raise ValueError("window_len must be positive")
        self.window_len = window_len
        self._hi = start_hi
        self._entries: dict[str, deque[WindowEntry]] = {}
        self._log: deque[tuple[int, list[str]]] = deque()
        self._count = 0

    @property
    def covered(self) -> tuple[int, int]:
        return (self._hi - self.window_len + 1, self._hi)

    @property
    def entry_count(self) -> int:
        return self._count

    def advance(
        self, block_number: int, txs: Iterable[tuple[int, str, str | None, float]]
    ) -> "RecipientWindow":
        """Slide the upper edge to ``block_number`` (must be ``hi + 1``)."""
        if block_number != self._hi + 1:
            raise NonContiguousAdvance(
                f"window at block {self._hi} cannot advance to {block_number}"
            )
        entries = self._entries
        recipients: list[str] = []
        for tx_index, sender, recipient, value_eth in txs:
            if recipient is None:
                continue
            dq = entries.get(recipient)
            if dq is None:
                entries[recipient] = dq = deque()
            dq.append(WindowEntry(block_number, tx_index, sender, value_eth))
            recipients.append(recipient)
        self._log.append((block_number, recipients))
        self._count += len(recipients)
        self._hi = block_number
        lo_cut = block_number - self.window_len
        log = self._log
        while log and log[0][0] <= lo_cut:
            _, old = log.popleft()
            for addr in old:
                dq = entries[addr]
                dq.popleft()
                if not dq:
                    del entries[addr]
            self._count -= len(old)
        return self

    def payments_to(
        self, addr: str, lo: int | None = None, hi: int | None = None
    ) -> list[WindowEntry]:
        """In-window transactions paying ``addr``, in (block, index) order.

        ``lo``/``hi`` narrow the result to a block sub-range, which lets one
        wide window serve look-backs of several depths.
        """
        dq = self._entries.get(addr)
        if not dq:
            return []
        if lo is None and hi is None:
            return list(dq)
        return [
            e for e in dq
            if (lo is None or e[0] >= lo) and (hi is None or e[0] <= hi)
        ]


def build_window(store: ChainStore, window_len: int, hi: int) -> RecipientWindow:
    """Fresh window over blocks ``[hi - window_len + 1, hi]``, clipped to the store."""
    lo = max(store.first_block, hi - window_len + 1)
    if hi < lo:
        return RecipientWindow(window_len, hi)
    window = RecipientWindow(window_len, lo - 1)
    for n in range(lo, hi + 1):
        window.advance(n, store.block_txs(n))
    return window


class SenderByBlock:
    """Lazy per-block grouping of a store's transactions by sender."""

    __slots__ = ("_store", "_cached_block", "_cached")

    def __init__(self, store: ChainStore):
        self._store = store
        self._cached_block: int | None = None
        self._cached: dict[str, list[tuple[int, str | None, float]]] = {}

    def senders(self, block_number: int) -> dict[str, list[tuple[int, str | None, float]]]:
        if block_number != self._cached_block:
            grouped: dict[str, list[tuple[int, str | None, float]]] = {}
            for tx_index, sender, recipient, value_eth in self._store.block_txs(block_number):
                grouped.setdefault(sender, []).append((tx_index, recipient, value_eth))
            self._cached = grouped
            self._cached_block = block_number
        return self._cached

    def txs_from(self, block_number: int, sender: str) -> list[tuple[int, str | None, float]]:
        return self.senders(block_number).get(sender, [])

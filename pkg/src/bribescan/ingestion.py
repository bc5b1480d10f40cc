"""Chain data ingestion: NDJSON flat files or a node RPC endpoint.

The store is column-oriented and immutable after construction. Scans pull
per-block slices through a block-number index, so nothing downstream ever
has to materialize the whole transaction sequence as row objects.

File formats (one JSON object per line):

    blocks: {"block_number": u64, "miner": "0x..40hex", "timestamp": u64,
             "tx_count": u32}
    txs:    {"block_number": u64, "tx_index": u32, "tx_hash": "0x..64hex",
             "from": "0x..40hex", "to": "0x..40hex" | null,
             "value_wei": "decimal string", "gas_used": u64,
             "gas_price_wei": "decimal string"}

Wei amounts travel as decimal strings so nothing is ever rounded or
overflowed on disk.
"""

from __future__ import annotations

import bisect
import json
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import requests

from .chain_model import (
    MAX_WEI,
    WEI_PER_ETH,
    BlockRecord,
    TxRecord,
    parse_address,
    parse_tx_hash,
    parse_wei,
)
from .errors import (
    MalformedLine,
    MalformedResponse,
    MissingBlock,
    NetworkError,
    SchemaMismatch,
    StoreValidationError,
)

_U32 = 2**32 - 1
_U64 = 2**64 - 1


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a structural check over a store."""

    ok: bool
    gaps: list[int]
    duplicates: int
    orphan_txs: int
    tx_count_mismatches: int

    def summary(self) -> str:
        return (
            f"gaps={len(self.gaps)} duplicates={self.duplicates} "
            f"orphan_txs={self.orphan_txs} tx_count_mismatches={self.tx_count_mismatches}"
        )


class ChainStore:
    """Read-only, column-oriented view of a block range and its transactions.

    Blocks are expected to be contiguous ascending and transactions sorted by
    ``(block_number, tx_index)``; :func:`validate_store` checks exactly that.
    Construct through :meth:`from_columns` or :meth:`from_records`.
    """

    __slots__ = (
        "block_numbers",
        "miners",
        "timestamps",
        "tx_counts",
        "tx_block_numbers",
        "tx_indices",
        "tx_hashes",
        "tx_senders",
        "tx_recipients",
        "tx_values_wei",
        "tx_values_eth",
        "tx_gas_used",
        "tx_gas_prices_wei",
        "_block_pos",
        "_tx_ranges",
    )

    def __init__(self, block_columns: dict, tx_columns: dict):
        self.block_numbers: list[int] = block_columns["numbers"]
        self.miners: list[str] = block_columns["miners"]
        self.timestamps: list[int] = block_columns["timestamps"]
        self.tx_counts: list[int] = block_columns["tx_counts"]
        self.tx_block_numbers: list[int] = tx_columns["block_numbers"]
        self.tx_indices: list[int] = tx_columns["indices"]
        self.tx_hashes: list[str] = tx_columns["hashes"]
        self.tx_senders: list[str] = tx_columns["senders"]
        self.tx_recipients: list[str | None] = tx_columns["recipients"]
        self.tx_values_wei: list[int] = tx_columns["values_wei"]
        self.tx_values_eth: list[float] = tx_columns["values_eth"]
        self.tx_gas_used: list[int] = tx_columns["gas_used"]
        self.tx_gas_prices_wei: list[int] = tx_columns["gas_prices_wei"]
        self._block_pos: dict[int, int] = {n: i for i, n in enumerate(self.block_numbers)}
        self._tx_ranges: dict[int, tuple[int, int]] = _block_runs(self.tx_block_numbers)

    # -- construction ----------------------------------------------------

    @classmethod
    def from_columns(
        cls,
        *,
        block_numbers: list[int],
        miners: list[str],
        timestamps: list[int],
        tx_counts: list[int],
        tx_block_numbers: list[int],
        tx_indices: list[int],
        tx_hashes: list[str],
        tx_senders: list[str],
        tx_recipients: list[str | None],
        tx_values_wei: list[int],
        tx_gas_used: list[int],
        tx_gas_prices_wei: list[int],
        sort: bool = True,
        validate: bool = True,
    ) -> "ChainStore":
        if sort:
            if not _is_sorted(block_numbers):
                order = sorted(range(len(block_numbers)), key=block_numbers.__getitem__)
                block_numbers = [block_numbers[i] for i in order]
                miners = [miners[i] for i in order]
                timestamps = [timestamps[i] for i in order]
                tx_counts = [tx_counts[i] for i in order]
            keys = list(zip(tx_block_numbers, tx_indices))
            if not _is_sorted(keys):
                order = sorted(range(len(keys)), key=keys.__getitem__)
                tx_block_numbers = [tx_block_numbers[i] for i in order]
                tx_indices = [tx_indices[i] for i in order]
                tx_hashes = [tx_hashes[i] for i in order]
                tx_senders = [tx_senders[i] for i in order]
                tx_recipients = [tx_recipients[i] for i in order]
                tx_values_wei = [tx_values_wei[i] for i in order]
                tx_gas_used = [tx_gas_used[i] for i in order]
                tx_gas_prices_wei = [tx_gas_prices_wei[i] for i in order]
        values_eth = [w / WEI_PER_ETH for w in tx_values_wei]
        store = cls(
            {
                "numbers": block_numbers,
                "miners": miners,
                "timestamps": timestamps,
                "tx_counts": tx_counts,
            },
            {
                "block_numbers": tx_block_numbers,
                "indices": tx_indices,
                "hashes": tx_hashes,
                "senders": tx_senders,
                "recipients": tx_recipients,
                "values_wei": tx_values_wei,
                "values_eth": values_eth,
                "gas_used": tx_gas_used,
                "gas_prices_wei": tx_gas_prices_wei,
            },
        )
        if validate:
            report = validate_store(store)
            if not report.ok:
                raise StoreValidationError(report)
        return store

    @classmethod
    def from_records(
        cls,
        blocks: Iterable[BlockRecord],
        txs: Iterable[TxRecord],
        *,
        validate: bool = True,
    ) -> "ChainStore":
        blocks = list(blocks)
        txs = list(txs)
        return cls.from_columns(
            block_numbers=[b.block_number for b in blocks],
            miners=[b.miner for b in blocks],
            timestamps=[b.timestamp for b in blocks],
            tx_counts=[b.tx_count for b in blocks],
            tx_block_numbers=[t.block_number for t in txs],
            tx_indices=[t.tx_index for t in txs],
            tx_hashes=[t.tx_hash for t in txs],
            tx_senders=[t.sender for t in txs],
            tx_recipients=[t.recipient for t in txs],
            tx_values_wei=[t.value_wei for t in txs],
            tx_gas_used=[t.gas_used for t in txs],
            tx_gas_prices_wei=[t.gas_price_wei for t in txs],
            validate=validate,
        )

    # -- shape -----------------------------------------------------------

    @property
    def n_blocks(self) -> int:
        return len(self.block_numbers)

    @property
    def n_txs(self) -> int:
        return len(self.tx_block_numbers)

    @property
    def first_block(self) -> int:
        return self.block_numbers[0]

    @property
    def last_block(self) -> int:
        return self.block_numbers[-1]

    @property
    def span(self) -> tuple[int, int]:
        return (self.first_block, self.last_block)

    def has_block(self, block_number: int) -> bool:
        return block_number in self._block_pos

    # -- access ----------------------------------------------------------

    def miner_of(self, block_number: int) -> str:
        return self.miners[self._block_pos[block_number]]

    def timestamp_of(self, block_number: int) -> int:
        return self.timestamps[self._block_pos[block_number]]

    def block_record(self, block_number: int) -> BlockRecord:
        i = self._block_pos[block_number]
        return BlockRecord(self.block_numbers[i], self.miners[i], self.timestamps[i], self.tx_counts[i])

    def block_txs(self, block_number: int) -> list[tuple[int, str, str | None, float]]:
        """One block's transactions as ``(tx_index, sender, recipient, value_eth)``."""
        rng = self._tx_ranges.get(block_number)
        if rng is None:
            return []
        lo, hi = rng
        return list(
            zip(
                self.tx_indices[lo:hi],
                self.tx_senders[lo:hi],
                self.tx_recipients[lo:hi],
                self.tx_values_eth[lo:hi],
            )
        )

    def _tx_row(self, block_number: int, tx_index: int) -> int:
        rng = self._tx_ranges.get(block_number)
        if rng is not None:
            lo, hi = rng
            row = bisect.bisect_left(self.tx_indices, tx_index, lo, hi)
            if row < hi and self.tx_indices[row] == tx_index:
                return row
        raise KeyError((block_number, tx_index))

    def tx_record(self, block_number: int, tx_index: int) -> TxRecord:
        row = self._tx_row(block_number, tx_index)
        return TxRecord(
            block_number,
            tx_index,
            self.tx_hashes[row],
            self.tx_senders[row],
            self.tx_recipients[row],
            self.tx_values_wei[row],
            self.tx_gas_used[row],
            self.tx_gas_prices_wei[row],
        )

    def tx_hash_at(self, block_number: int, tx_index: int) -> str:
        return self.tx_hashes[self._tx_row(block_number, tx_index)]

    def tx_fee_wei_at(self, block_number: int, tx_index: int) -> int:
        row = self._tx_row(block_number, tx_index)
        return self.tx_gas_used[row] * self.tx_gas_prices_wei[row]

    def iter_blocks(self) -> Iterator[BlockRecord]:
        for n, m, ts, c in zip(self.block_numbers, self.miners, self.timestamps, self.tx_counts):
            yield BlockRecord(n, m, ts, c)

    # -- export ----------------------------------------------------------

    def export_files(self, blocks_path, txs_path) -> None:
        """Write the canonical NDJSON pair; re-importing reproduces the store."""
        with open(blocks_path, "w", encoding="utf-8", newline="\n") as fh:
            for n, m, ts, c in zip(self.block_numbers, self.miners, self.timestamps, self.tx_counts):
                fh.write(
                    json.dumps(
                        {"block_number": n, "miner": m, "timestamp": ts, "tx_count": c},
                        separators=(",", ":"),
                    )
                    + "\n"
                )
        with open(txs_path, "w", encoding="utf-8", newline="\n") as fh:
            for row in range(self.n_txs):
                fh.write(
                    json.dumps(
                        {
                            "block_number": self.tx_block_numbers[row],
                            "tx_index": self.tx_indices[row],
                            "tx_hash": self.tx_hashes[row],
                            "from": self.tx_senders[row],
                            "to": self.tx_recipients[row],
                            "value_wei": str(self.tx_values_wei[row]),
                            "gas_used": self.tx_gas_used[row],
                            "gas_price_wei": str(self.tx_gas_prices_wei[row]),
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )


def _is_sorted(xs: Sequence) -> bool:
    return all(xs[i] <= xs[i + 1] for i in range(len(xs) - 1))


def _block_runs(sorted_blocks: Sequence[int]) -> dict[int, tuple[int, int]]:
    runs: dict[int, tuple[int, int]] = {}
    i, n = 0, len(sorted_blocks)
    while i < n:
        j = i + 1
        b = sorted_blocks[i]
        while j < n and sorted_blocks[j] == b:
            j += 1
        runs[b] = (i, j)
        i = j
    return runs


def validate_store(store: ChainStore) -> ValidationReport:
    """Check contiguity, uniqueness and referential integrity of a store.

    Problems are reported, never raised; the store itself is untouched.
    """
    gaps: list[int] = []
    duplicates = 0
    nums = store.block_numbers
    for i in range(len(nums) - 1):
        cur, nxt = nums[i], nums[i + 1]
        if nxt == cur:
            duplicates += 1
        elif nxt > cur + 1:
            gaps.extend(range(cur + 1, nxt))
    tb, ti = store.tx_block_numbers, store.tx_indices
    for i in range(len(tb) - 1):
        if tb[i] == tb[i + 1] and ti[i] == ti[i + 1]:
            duplicates += 1
    orphan_txs = sum(
        hi - lo for b, (lo, hi) in store._tx_ranges.items() if not store.has_block(b)
    )
    mismatches = 0
    for n, declared in zip(store.block_numbers, store.tx_counts):
        lo_hi = store._tx_ranges.get(n)
        actual = (lo_hi[1] - lo_hi[0]) if lo_hi else 0
        if actual != declared:
            mismatches += 1
    ok = not gaps and duplicates == 0 and orphan_txs == 0 and mismatches == 0
    return ValidationReport(ok, gaps, duplicates, orphan_txs, mismatches)


# -- NDJSON import --------------------------------------------------------


def _iter_ndjson(path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, str(exc)) from exc
            if not isinstance(obj, dict):
                raise MalformedLine(line_no, "expected a JSON object")
            yield line_no, obj


def _uint(obj: dict, key: str, bound: int, line_no: int) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0 or v > bound:
        raise SchemaMismatch(key, f"line {line_no}: expected unsigned integer <= {bound}, got {v!r}")
    return v


def _addr(obj: dict, key: str, line_no: int, optional: bool = False) -> str | None:
    v = obj.get(key)
    if v is None and optional:
        return None
    try:
        return parse_address(v)
    except ValueError as exc:
        raise SchemaMismatch(key, f"line {line_no}: {exc}") from exc


def import_files(blocks_path, txs_path) -> ChainStore:
    """Load a blocks/txs NDJSON pair into a validated store.

    Input lines may arrive in any order; the importer sorts. Gaps, duplicate
    rows and transactions pointing at unknown blocks are rejected loudly
    rather than repaired.
    """
    numbers: list[int] = []
    miners: list[str] = []
    timestamps: list[int] = []
    tx_counts: list[int] = []
    for line_no, obj in _iter_ndjson(blocks_path):
        numbers.append(_uint(obj, "block_number", _U64, line_no))
        miners.append(_addr(obj, "miner", line_no))
        timestamps.append(_uint(obj, "timestamp", _U64, line_no))
        tx_counts.append(_uint(obj, "tx_count", _U32, line_no))

    t_blocks: list[int] = []
    t_indices: list[int] = []
    t_hashes: list[str] = []
    t_senders: list[str] = []
    t_recipients: list[str | None] = []
    t_values: list[int] = []
    t_gas: list[int] = []
    t_gas_prices: list[int] = []
    for line_no, obj in _iter_ndjson(txs_path):
        t_blocks.append(_uint(obj, "block_number", _U64, line_no))
        t_indices.append(_uint(obj, "tx_index", _U32, line_no))
        try:
            t_hashes.append(parse_tx_hash(obj.get("tx_hash")))
        except ValueError as exc:
            raise SchemaMismatch("tx_hash", f"line {line_no}: {exc}") from exc
        t_senders.append(_addr(obj, "from", line_no))
        t_recipients.append(_addr(obj, "to", line_no, optional=True))
        for key, dest in (("value_wei", t_values), ("gas_price_wei", t_gas_prices)):
            try:
                dest.append(parse_wei(obj.get(key)))
            except ValueError as exc:
                raise SchemaMismatch(key, f"line {line_no}: {exc}") from exc
        t_gas.append(_uint(obj, "gas_used", _U64, line_no))

    return ChainStore.from_columns(
        block_numbers=numbers,
        miners=miners,
        timestamps=timestamps,
        tx_counts=tx_counts,
        tx_block_numbers=t_blocks,
        tx_indices=t_indices,
        tx_hashes=t_hashes,
        tx_senders=t_senders,
        tx_recipients=t_recipients,
        tx_values_wei=t_values,
        tx_gas_used=t_gas,
        tx_gas_prices_wei=t_gas_prices,
        sort=True,
        validate=True,
    )


# -- RPC fetch ------------------------------------------------------------


def _hex_quantity(obj: dict, key: str) -> int:
    v = obj.get(key)
    if not isinstance(v, str) or not v.startswith("0x"):
        raise MalformedResponse(f"field {key!r} is not a hex quantity: {v!r}")
    try:
        return int(v, 16)
    except ValueError as exc:
        raise MalformedResponse(f"field {key!r} is not a hex quantity: {v!r}") from exc


def _rpc_batch(session: requests.Session, endpoint: str, numbers: Sequence[int], timeout: float) -> dict[int, dict | None]:
    payload = [
        {"jsonrpc": "2.0", "id": n, "method": "eth_getBlockByNumber", "params": [hex(n), True]}
        for n in numbers
    ]
    try:
        resp = session.post(endpoint, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise NetworkError(f"endpoint unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise NetworkError(f"endpoint returned HTTP {resp.status_code}")
    try:
        body = resp.json()
    except ValueError as exc:
        raise MalformedResponse("response body is not JSON") from exc
    if not isinstance(body, list):
        raise MalformedResponse("expected a JSON-RPC batch response")
    results: dict[int, dict | None] = {}
    for item in body:
        if not isinstance(item, dict) or "id" not in item:
            raise MalformedResponse("batch item without an id")
        if "error" in item and item["error"] is not None:
            raise NetworkError(f"endpoint error for block {item['id']}: {item['error']}")
        results[item["id"]] = item.get("result")
    missing = [n for n in numbers if n not in results]
    if missing:
        raise MalformedResponse(f"no response for blocks {missing[:5]}")
    return results


def fetch_rpc(
    endpoint: str,
    start: int,
    end: int,
    batch: int = 100,
    *,
    attempts: int = 5,
    backoff: float = 0.5,
    timeout: float = 30.0,
) -> ChainStore:
    """Fetch blocks ``start..end`` with full transaction objects over JSON-RPC.

    Requests go out in batches of ``batch``; transient transport failures and
    null results are retried with exponential backoff (``attempts`` tries per
    batch). The resulting store is canonical: fetching and importing the same
    underlying data yield byte-identical exports.
    """
    if start > end:
        raise ValueError("start must not exceed end")
    if batch < 1 or attempts < 1:
        raise ValueError("batch and attempts must be positive")

    numbers: list[int] = []
    miners: list[str] = []
    timestamps: list[int] = []
    tx_counts: list[int] = []
    t_blocks: list[int] = []
    t_indices: list[int] = []
    t_hashes: list[str] = []
    t_senders: list[str] = []
    t_recipients: list[str | None] = []
    t_values: list[int] = []
    t_gas: list[int] = []
    t_gas_prices: list[int] = []

    session = requests.Session()
    todo = list(range(start, end + 1))
    for lo in range(0, len(todo), batch):
        chunk = todo[lo : lo + batch]
        last_error: Exception | None = None
        results: dict[int, dict | None] = {}
        for attempt in range(attempts):
            if attempt:
                time.sleep(backoff * (2 ** (attempt - 1)))
            try:
                results = _rpc_batch(session, endpoint, chunk, timeout)
            except NetworkError as exc:
                last_error = exc
                continue
            nulls = [n for n in chunk if results.get(n) is None]
            if not nulls:
                last_error = None
                break
            last_error = MissingBlock(nulls[0])
        if last_error is not None:
            raise last_error

        for n in chunk:
            block = results[n]
            got = _hex_quantity(block, "number")
            if got != n:
                raise MalformedResponse(f"asked for block {n}, endpoint sent {got}")
            try:
                miner = parse_address(block.get("miner"))
            except ValueError as exc:
                raise MalformedResponse(f"block {n}: {exc}") from exc
            txs = block.get("transactions")
            if not isinstance(txs, list):
                raise MalformedResponse(f"block {n}: transactions missing")
            numbers.append(n)
            miners.append(miner)
            timestamps.append(_hex_quantity(block, "timestamp"))
            tx_counts.append(len(txs))
            for tx in txs:
                if not isinstance(tx, dict):
                    raise MalformedResponse(f"block {n}: malformed transaction object")
                t_blocks.append(n)
                t_indices.append(_hex_quantity(tx, "transactionIndex"))
                try:
                    t_hashes.append(parse_tx_hash(tx.get("hash")))
                    t_senders.append(parse_address(tx.get("from")))
                    to = tx.get("to")
                    t_recipients.append(None if to is None else parse_address(to))
                except ValueError as exc:
                    raise MalformedResponse(f"block {n}: {exc}") from exc
                value = _hex_quantity(tx, "value")
                if value > MAX_WEI:
                    raise MalformedResponse(f"block {n}: value exceeds 256 bits")
                t_values.append(value)
                # Receipts are out of scope, so the tx object's gas limit is
                # the only gas figure available here.
                t_gas.append(_hex_quantity(tx, "gas") if "gas" in tx else 0)
                t_gas_prices.append(_hex_quantity(tx, "gasPrice") if "gasPrice" in tx else 0)

    return ChainStore.from_columns(
        block_numbers=numbers,
        miners=miners,
        timestamps=timestamps,
        tx_counts=tx_counts,
        tx_block_numbers=t_blocks,
        tx_indices=t_indices,
        tx_hashes=t_hashes,
        tx_senders=t_senders,
        tx_recipients=t_recipients,
        tx_values_wei=t_values,
        tx_gas_used=t_gas,
        tx_gas_prices_wei=t_gas_prices,
        sort=True,
        validate=True,
    )

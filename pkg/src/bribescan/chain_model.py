"""Core chain vocabulary: addresses, amounts, blocks and transactions.

Amounts are stored exactly as unsigned Wei integers; all downstream scoring
arithmetic happens in 64-bit floats on ETH-converted values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, timedelta

Address = str  # canonical form: "0x" followed by 40 lowercase hex digits
EthValue = float

WEI_PER_ETH = 10**18
MAX_WEI = 2**256 - 1

_EPOCH = date(1970, 1, 1)
_ADDRESS_RE = re.compile(r"0x[0-9a-fA-F]{40}\Z")
_TX_HASH_RE = re.compile(r"0x[0-9a-fA-F]{64}\Z")


def parse_address(text: str) -> Address:
    """Normalize a 20-byte hex address to canonical lowercase form.

    Input case is ignored; parsing a canonical address returns it unchanged.
    """
    if not isinstance(text, str) or _ADDRESS_RE.match(text) is None:
        raise ValueError(f"not a valid address: {text!r}")
    return text.lower()


def parse_tx_hash(text: str) -> str:
    """Normalize a 32-byte transaction hash to lowercase hex."""
    if not isinstance(text, str) or _TX_HASH_RE.match(text) is None:
        raise ValueError(f"not a valid transaction hash: {text!r}")
    return text.lower()


def parse_wei(text: str) -> int:
    """Parse a decimal Wei string into a non-negative integer below 2**256."""
    if not isinstance(text, str) or not text.isdigit():
        raise ValueError(f"not a decimal Wei string: {text!r}")
    value = int(text)
    if value > MAX_WEI:
        raise ValueError(f"Wei value exceeds 256 bits: {text}")
    return value


def wei_to_eth(wei: int) -> EthValue:
    """Convert Wei to ETH (1 ETH = 10**18 Wei) as a binary float.

    Monotone non-decreasing, and exact for whole-ETH amounts up to 2**53.
    """
    if wei < 0:
        raise ValueError("Wei amounts are non-negative")
    return wei / WEI_PER_ETH


def date_of_timestamp(timestamp: int) -> date:
    """UTC calendar day containing a Unix timestamp (integer arithmetic)."""
    if timestamp < 0:
        raise ValueError("timestamps are non-negative")
    try:
        return _EPOCH + timedelta(days=timestamp // 86400)
    except OverflowError as exc:
        raise ValueError(f"timestamp {timestamp} is beyond the calendar range") from exc


@dataclass(frozen=True, slots=True)
class BlockRecord:
    """One mined block: who appended it and when."""

    block_number: int
    miner: Address
    timestamp: int
    tx_count: int

    def __post_init__(self) -> None:
        if self.block_number < 0 or self.timestamp < 0 or self.tx_count < 0:
            raise ValueError("block fields are non-negative")


@dataclass(frozen=True, slots=True)
class TxRecord:
    """One top-level value transfer.

    ``recipient`` is ``None`` for contract creations; those can never match a
    miner and are skipped by detection, but they stay in the store for
    counting.
    """

    block_number: int
    tx_index: int
    tx_hash: str
    sender: Address
    recipient: Address | None
    value_wei: int
    gas_used: int
    gas_price_wei: int

    def __post_init__(self) -> None:
        if min(self.block_number, self.tx_index, self.value_wei, self.gas_used, self.gas_price_wei) < 0:
            raise ValueError("transaction fields are non-negative")
        if self.value_wei > MAX_WEI:
            raise ValueError("value exceeds 256 bits")

    @property
    def value_eth(self) -> EthValue:
        return wei_to_eth(self.value_wei)

    @property
    def fee_wei(self) -> int:
        return self.gas_used * self.gas_price_wei


def block_date(block: BlockRecord) -> date:
    """UTC calendar day on which a block was validated."""
    return date_of_timestamp(block.timestamp)

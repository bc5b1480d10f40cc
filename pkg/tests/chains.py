"""Synthetic chain builders shared across the test suite."""

from __future__ import annotations

import random

from bribescan.detection import BlockDetection, BribeCandidate, FollowupTx
from bribescan.ingestion import ChainStore
from bribescan.tracing import BlockTrace, TraceLink

ETH = 10**18
GAS_USED = 21_000
GAS_PRICE = 10**9

# 2021-01-01 00:00:00 UTC
TS_2021 = 1_609_459_200


def addr(i: int) -> str:
    return f"0x{i:040x}"


def tx_hash(block: int, idx: int) -> str:
    return f"0x{block * 100_000 + idx + 1:064x}"


# Reference fixture: blocks 1..100 all on 2021-01-01; block 100 is mined by
# MINER_M, everything else by MINER_Z. Three wired transfers plus one filler.
MINER_M = addr(0xAA)
MINER_Z = addr(0xBB)
BRIBER_A = addr(0xA1)
FUNDER_B = addr(0xB1)
TARGET_X = addr(0xC1)
FILLER_F = addr(0xD1)
FILLER_G = addr(0xD2)

T0 = (92, 0, FUNDER_B, BRIBER_A, 9 * ETH)   # funds the payer
T1 = (95, 0, BRIBER_A, MINER_M, 10 * ETH)   # payment to block 100's miner
T2 = (100, 0, BRIBER_A, TARGET_X, 3 * ETH)  # follow-up inside block 100
FILLER = (99, 0, FILLER_F, FILLER_G, 1 * ETH)


def f1_txs(include_t0: bool = True, include_t2: bool = True, extra=()) -> list[tuple]:
    txs = [T1, FILLER]
    if include_t0:
        txs.append(T0)
    if include_t2:
        txs.append(T2)
    txs.extend(extra)
    return sorted(txs)


def f1_store(include_t0: bool = True, include_t2: bool = True, extra=()) -> ChainStore:
    txs = f1_txs(include_t0, include_t2, extra)
    per_block: dict[int, int] = {}
    for t in txs:
        per_block[t[0]] = per_block.get(t[0], 0) + 1
    return ChainStore.from_columns(
        block_numbers=list(range(1, 101)),
        miners=[MINER_M if n == 100 else MINER_Z for n in range(1, 101)],
        timestamps=[TS_2021 + 12 * (n - 1) for n in range(1, 101)],
        tx_counts=[per_block.get(n, 0) for n in range(1, 101)],
        tx_block_numbers=[t[0] for t in txs],
        tx_indices=[t[1] for t in txs],
        tx_hashes=[tx_hash(t[0], t[1]) for t in txs],
        tx_senders=[t[2] for t in txs],
        tx_recipients=[t[3] for t in txs],
        tx_values_wei=[t[4] for t in txs],
        tx_gas_used=[GAS_USED] * len(txs),
        tx_gas_prices_wei=[GAS_PRICE] * len(txs),
        sort=True,
        validate=True,
    )


def write_store(store: ChainStore, directory) -> tuple[str, str]:
    blocks_path = str(directory / "blocks.ndjson")
    txs_path = str(directory / "txs.ndjson")
    store.export_files(blocks_path, txs_path)
    return blocks_path, txs_path


def random_store(
    rng: random.Random,
    n_blocks: int = 1000,
    *,
    n_addresses: int = 10,
    n_miners: int = 4,
    max_txs: int = 3,
    miner_pay_prob: float = 0.10,
    creation_prob: float = 0.05,
    zero_value_prob: float = 0.10,
    ts_start: int = TS_2021,
    ts_spacing: int = 5000,
) -> ChainStore:
    """Random chain with enough miner-directed payments to exercise every path."""
    pool = [addr(1000 + i) for i in range(n_addresses)]
    miner_pool = [addr(2000 + i) for i in range(n_miners)]
    sender_pool = pool + miner_pool  # miners send too: self-payments happen
    numbers, miners, timestamps, tx_counts = [], [], [], []
    t_blocks, t_indices, t_hashes, t_senders, t_recipients = [], [], [], [], []
    t_values, t_gas, t_gas_prices = [], [], []
    for n in range(1, n_blocks + 1):
        numbers.append(n)
        miners.append(rng.choice(miner_pool))
        timestamps.append(ts_start + ts_spacing * (n - 1))
        k = rng.randint(0, max_txs)
        tx_counts.append(k)
        for idx in range(k):
            roll = rng.random()
            if roll < creation_prob:
                recipient = None
            elif roll < creation_prob + miner_pay_prob:
                recipient = rng.choice(miner_pool)
            else:
                recipient = rng.choice(pool)
            value = 0 if rng.random() < zero_value_prob else int(rng.uniform(0.01, 30.0) * ETH)
            t_blocks.append(n)
            t_indices.append(idx)
            t_hashes.append(tx_hash(n, idx))
            t_senders.append(rng.choice(sender_pool))
            t_recipients.append(recipient)
            t_values.append(value)
            t_gas.append(GAS_USED)
            t_gas_prices.append(GAS_PRICE)
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
        sort=False,
        validate=True,
    )


def random_detection_and_trace(rng: random.Random) -> tuple[BlockDetection, BlockTrace]:
    """Consistent random detection/trace pair for formula-level properties."""
    target = rng.randint(200, 1_000_000)
    miner = addr(rng.randint(0, 5))
    keys = set()
    candidates = []
    for _ in range(rng.randint(0, 4)):
        payment_block = target - rng.randint(1, 50)
        idx = rng.randint(0, 5)
        if (payment_block, idx) in keys:
            continue
        keys.add((payment_block, idx))
        value = 0.0 if rng.random() < 0.15 else rng.uniform(0.0, 20.0)
        sender = addr(10 + rng.randint(0, 5))
        candidates.append(
            BribeCandidate(target, miner, payment_block, idx, sender, value, target - payment_block)
        )
    candidates.sort(key=lambda c: (c.payment_block, c.tx_index))
    followups: tuple[FollowupTx, ...] = ()
    if candidates and rng.random() < 0.6:
        senders = sorted({c.sender for c in candidates})
        followups = tuple(
            FollowupTx(target, i, rng.choice(senders), rng.uniform(0.0, 10.0))
            for i in range(rng.randint(1, 3))
        )
    detection = BlockDetection(target, miner, tuple(candidates), followups)
    links = []
    for c in candidates:
        for _ in range(rng.randint(0, 3)):
            traced_block = c.payment_block - rng.randint(1, 30)
            links.append(
                TraceLink(c, traced_block, rng.randint(0, 5), rng.uniform(0.0, 25.0),
                          addr(30 + rng.randint(0, 5)))
            )
    links.sort(key=lambda l: (l.candidate.payment_block, l.candidate.tx_index,
                              l.traced_block, l.tx_index))
    return detection, BlockTrace(target, tuple(links))


def perf_store(
    n_blocks: int = 100_000,
    txs_per_block: int = 20,
    seed: int = 7,
    *,
    n_addresses: int = 20_000,
    n_miners: int = 100,
    miner_pay_prob: float = 0.02,
) -> ChainStore:
    """Large columnar chain built directly, for throughput measurements."""
    import numpy as np

    rng = np.random.default_rng(seed)
    pool = [f"0x{i:040x}" for i in range(1, n_addresses + 1)]
    miner_pool = [f"0x{i:040x}" for i in range(n_addresses + 1, n_addresses + n_miners + 1)]
    n_tx = n_blocks * txs_per_block

    numbers = list(range(1, n_blocks + 1))
    miners = [miner_pool[i] for i in rng.integers(0, n_miners, n_blocks).tolist()]
    timestamps = (TS_2021 + 13 * np.arange(n_blocks, dtype=np.int64)).tolist()
    tx_counts = [txs_per_block] * n_blocks

    t_blocks = np.repeat(np.arange(1, n_blocks + 1, dtype=np.int64), txs_per_block).tolist()
    t_indices = np.tile(np.arange(txs_per_block, dtype=np.int64), n_blocks).tolist()
    senders = [pool[i] for i in rng.integers(0, n_addresses, n_tx).tolist()]
    to_miner = rng.random(n_tx) < miner_pay_prob
    pool_ids = rng.integers(0, n_addresses, n_tx).tolist()
    miner_ids = rng.integers(0, n_miners, n_tx).tolist()
    recipients = [
        miner_pool[m] if hit else pool[p]
        for hit, m, p in zip(to_miner.tolist(), miner_ids, pool_ids)
    ]
    values_wei = (rng.uniform(0.0, 15.0, n_tx) * 1e18).astype(np.uint64).tolist()
    hashes = [f"0x{i:064x}" for i in range(1, n_tx + 1)]

    return ChainStore.from_columns(
        block_numbers=numbers,
        miners=miners,
        timestamps=timestamps,
        tx_counts=tx_counts,
        tx_block_numbers=t_blocks,
        tx_indices=t_indices,
        tx_hashes=hashes,
        tx_senders=senders,
        tx_recipients=recipients,
        tx_values_wei=values_wei,
        tx_gas_used=[GAS_USED] * n_tx,
        tx_gas_prices_wei=[GAS_PRICE] * n_tx,
        sort=False,
        validate=True,
    )

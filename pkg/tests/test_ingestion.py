import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from bribescan.errors import (
    DataError,
    MalformedLine,
    MissingBlock,
    NetworkError,
    SchemaMismatch,
    StoreValidationError,
)
from bribescan.ingestion import ChainStore, fetch_rpc, import_files, validate_store
from chains import (
    ETH,
    GAS_PRICE,
    GAS_USED,
    MINER_M,
    MINER_Z,
    TS_2021,
    f1_store,
    f1_txs,
    tx_hash,
    write_store,
)


class TestImport:
    def test_f1_round(self, f1_files, f1):
        store = import_files(*f1_files)
        assert store.span == (1, 100)
        assert store.n_blocks == 100
        assert store.n_txs == 4
        assert validate_store(store).ok

    def test_empty_tx_file(self, tmp_path):
        blocks = tmp_path / "b.ndjson"
        txs = tmp_path / "t.ndjson"
        blocks.write_text(
            json.dumps({"block_number": 7, "miner": MINER_Z, "timestamp": 0, "tx_count": 0}) + "\n"
        )
        txs.write_text("")
        store = import_files(blocks, txs)
        assert store.span == (7, 7)
        assert store.n_txs == 0
        assert validate_store(store).ok

    def test_orphan_tx_rejected(self, tmp_path, f1):
        blocks_path, txs_path = write_store(f1, tmp_path)
        with open(txs_path, "a") as fh:
            fh.write(
                json.dumps(
                    {
                        "block_number": 999,
                        "tx_index": 0,
                        "tx_hash": tx_hash(999, 0),
                        "from": MINER_Z,
                        "to": MINER_M,
                        "value_wei": "1",
                        "gas_used": 21000,
                        "gas_price_wei": "1",
                    }
                )
                + "\n"
            )
        with pytest.raises(DataError):
            import_files(blocks_path, txs_path)

    def test_duplicate_tx_rejected(self, tmp_path, f1):
        blocks_path, txs_path = write_store(f1, tmp_path)
        lines = open(txs_path).readlines()
        with open(txs_path, "a") as fh:
            fh.write(lines[0])
        with pytest.raises(StoreValidationError):
            import_files(blocks_path, txs_path)

    def test_gap_rejected(self, tmp_path, f1):
        blocks_path, txs_path = write_store(f1, tmp_path)
        lines = [l for l in open(blocks_path) if '"block_number":50,' not in l]
        open(blocks_path, "w").writelines(lines)
        with pytest.raises(StoreValidationError):
            import_files(blocks_path, txs_path)

    def test_malformed_line(self, tmp_path, f1):
        blocks_path, txs_path = write_store(f1, tmp_path)
        with open(txs_path, "a") as fh:
            fh.write("{not json\n")
        with pytest.raises(MalformedLine) as excinfo:
            import_files(blocks_path, txs_path)
        assert excinfo.value.line_no == 5

    @pytest.mark.parametrize(
        "patch",
        [
            {"value_wei": 5},  # must be a decimal string
            {"from": "not-an-address"},
            {"tx_index": -1},
            {"gas_used": "21000"},
            {"tx_hash": "0x123"},
        ],
    )
    def test_schema_mismatch(self, tmp_path, f1, patch):
        blocks_path, txs_path = write_store(f1, tmp_path)
        lines = open(txs_path).readlines()
        row = json.loads(lines[0])
        row.update(patch)
        lines[0] = json.dumps(row) + "\n"
        open(txs_path, "w").writelines(lines)
        with pytest.raises(SchemaMismatch):
            import_files(blocks_path, txs_path)

    def test_unsorted_input_is_sorted(self, tmp_path, f1):
        blocks_path, txs_path = write_store(f1, tmp_path)
        for path in (blocks_path, txs_path):
            lines = open(path).readlines()
            open(path, "w").writelines(reversed(lines))
        store = import_files(blocks_path, txs_path)
        assert store.block_numbers == list(range(1, 101))
        assert store.tx_block_numbers == sorted(store.tx_block_numbers)

    def test_export_import_identity(self, tmp_path, f1):
        first = tmp_path / "first"
        second = tmp_path / "second"
        first.mkdir()
        second.mkdir()
        paths1 = write_store(f1, first)
        store2 = import_files(*paths1)
        paths2 = write_store(store2, second)
        assert open(paths1[0], "rb").read() == open(paths2[0], "rb").read()
        assert open(paths1[1], "rb").read() == open(paths2[1], "rb").read()

    def test_round_trip_with_creations_and_zero_values(self, tmp_path):
        import random

        from chains import random_store

        store = random_store(random.Random(99), 200)
        assert any(r is None for r in store.tx_recipients)  # contract creations present
        assert any(v == 0 for v in store.tx_values_wei)
        paths1 = write_store(store, tmp_path)
        again = import_files(*paths1)
        sub = tmp_path / "again"
        sub.mkdir()
        paths2 = write_store(again, sub)
        assert open(paths1[0], "rb").read() == open(paths2[0], "rb").read()
        assert open(paths1[1], "rb").read() == open(paths2[1], "rb").read()


class TestValidate:
    def _f1_without_block(self, n):
        store = f1_store()
        keep = [i for i, num in enumerate(store.block_numbers) if num != n]
        return ChainStore.from_columns(
            block_numbers=[store.block_numbers[i] for i in keep],
            miners=[store.miners[i] for i in keep],
            timestamps=[store.timestamps[i] for i in keep],
            tx_counts=[store.tx_counts[i] for i in keep],
            tx_block_numbers=store.tx_block_numbers,
            tx_indices=store.tx_indices,
            tx_hashes=store.tx_hashes,
            tx_senders=store.tx_senders,
            tx_recipients=store.tx_recipients,
            tx_values_wei=store.tx_values_wei,
            tx_gas_used=store.tx_gas_used,
            tx_gas_prices_wei=store.tx_gas_prices_wei,
            validate=False,
        )

    def test_f1_ok(self, f1):
        report = validate_store(f1)
        assert report.ok
        assert report.gaps == []
        assert report.duplicates == 0
        assert report.orphan_txs == 0

    def test_gap_reported(self):
        report = validate_store(self._f1_without_block(50))
        assert report.gaps == [50]
        assert not report.ok

    def test_orphan_reported(self):
        report = validate_store(self._f1_without_block(92))
        assert report.orphan_txs == 1  # T0 lives in block 92
        assert not report.ok

    def test_duplicate_reported(self):
        txs = f1_txs() + [(95, 0, MINER_Z, MINER_M, 1 * ETH)]
        txs.sort()
        store = ChainStore.from_columns(
            block_numbers=list(range(1, 101)),
            miners=[MINER_M if n == 100 else MINER_Z for n in range(1, 101)],
            timestamps=[TS_2021 + 12 * (n - 1) for n in range(1, 101)],
            tx_counts=[0] * 100,
            tx_block_numbers=[t[0] for t in txs],
            tx_indices=[t[1] for t in txs],
            tx_hashes=[tx_hash(t[0], t[1]) for t in txs],
            tx_senders=[t[2] for t in txs],
            tx_recipients=[t[3] for t in txs],
            tx_values_wei=[t[4] for t in txs],
            tx_gas_used=[GAS_USED] * len(txs),
            tx_gas_prices_wei=[GAS_PRICE] * len(txs),
            validate=False,
        )
        report = validate_store(store)
        assert report.duplicates == 1
        assert not report.ok

    def test_tx_count_mismatch_reported(self, f1):
        store = ChainStore.from_columns(
            block_numbers=list(f1.block_numbers),
            miners=list(f1.miners),
            timestamps=list(f1.timestamps),
            tx_counts=[0] * 100,  # lies about the four real transactions
            tx_block_numbers=f1.tx_block_numbers,
            tx_indices=f1.tx_indices,
            tx_hashes=f1.tx_hashes,
            tx_senders=f1.tx_senders,
            tx_recipients=f1.tx_recipients,
            tx_values_wei=f1.tx_values_wei,
            tx_gas_used=f1.tx_gas_used,
            tx_gas_prices_wei=f1.tx_gas_prices_wei,
            validate=False,
        )
        report = validate_store(store)
        assert report.tx_count_mismatches == 4
        assert not report.ok


# -- RPC ---------------------------------------------------------------------


def _block_payload(store, n):
    rec = store.block_record(n)
    txs = []
    for tx_index, _sender, _recipient, _value in store.block_txs(n):
        tx = store.tx_record(n, tx_index)
        txs.append(
            {
                "transactionIndex": hex(tx.tx_index),
                "hash": tx.tx_hash,
                "from": tx.sender,
                "to": tx.recipient,
                "value": hex(tx.value_wei),
                "gas": hex(tx.gas_used),
                "gasPrice": hex(tx.gas_price_wei),
            }
        )
    return {
        "number": hex(rec.block_number),
        "miner": rec.miner,
        "timestamp": hex(rec.timestamp),
        "transactions": txs,
    }


class _RpcHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        server = self.server
        if server.fail_budget > 0:
            server.fail_budget -= 1
            self.send_response(500)
            self.end_headers()
            return
        length = int(self.headers.get("Content-Length", 0))
        requests_ = json.loads(self.rfile.read(length))
        results = []
        for req in requests_:
            n = int(req["params"][0], 16)
            results.append({"jsonrpc": "2.0", "id": req["id"], "result": server.blocks.get(n)})
        body = json.dumps(results).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def rpc_server(f1):
    server = ThreadingHTTPServer(("127.0.0.1", 0), _RpcHandler)
    server.blocks = {n: _block_payload(f1, n) for n in range(1, 101)}
    server.fail_budget = 0
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server, f"http://127.0.0.1:{server.server_address[1]}/"
    finally:
        server.shutdown()
        thread.join()


class TestFetchRpc:
    def test_two_block_range(self, rpc_server):
        _, endpoint = rpc_server
        store = fetch_rpc(endpoint, 99, 100)
        assert store.n_blocks == 2
        assert store.n_txs == 2  # the block-99 filler and the block-100 follow-up
        assert store.miner_of(100) == MINER_M

    def test_single_block(self, rpc_server):
        _, endpoint = rpc_server
        store = fetch_rpc(endpoint, 100, 100)
        assert store.n_blocks == 1

    def test_matches_file_import(self, rpc_server, tmp_path, f1):
        _, endpoint = rpc_server
        rpc_store = fetch_rpc(endpoint, 1, 100, batch=17)
        rpc_dir = tmp_path / "rpc"
        file_dir = tmp_path / "file"
        rpc_dir.mkdir()
        file_dir.mkdir()
        rpc_paths = write_store(rpc_store, rpc_dir)
        file_paths = write_store(import_files(*write_store(f1, tmp_path)), file_dir)
        assert open(rpc_paths[0], "rb").read() == open(file_paths[0], "rb").read()
        assert open(rpc_paths[1], "rb").read() == open(file_paths[1], "rb").read()

    def test_missing_block(self, rpc_server):
        server, endpoint = rpc_server
        del server.blocks[100]
        with pytest.raises(MissingBlock) as excinfo:
            fetch_rpc(endpoint, 99, 100, attempts=2, backoff=0.01)
        assert excinfo.value.block_number == 100

    def test_transient_failure_retried(self, rpc_server):
        server, endpoint = rpc_server
        server.fail_budget = 1
        store = fetch_rpc(endpoint, 100, 100, attempts=3, backoff=0.01)
        assert store.n_blocks == 1

    def test_unreachable(self):
        with pytest.raises(NetworkError):
            fetch_rpc("http://127.0.0.1:9/", 1, 2, attempts=2, backoff=0.01, timeout=0.5)

    def test_start_after_end(self):
        with pytest.raises(ValueError):
            fetch_rpc("http://example.invalid/", 5, 4)

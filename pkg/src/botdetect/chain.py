"""Indexed in-memory store for exported chain data.

Input is three NDJSON exports (blocks, transactions, logs). Records outside
the requested block range are skipped silently; malformed records raise
InputError naming file, line and field. All addresses and hashes are held
as bare lowercase hex internally; the 0x prefix is re-added on output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import InputError

BlockInterval = tuple[int, int]  # inclusive [lo, hi]


def normalize_hex(value: str, nbytes: int, what: str = "hex value") -> str:
    """Lowercase, strip the 0x prefix and check the byte length."""
    if not isinstance(value, str):
        raise InputError(f"{what}: expected hex string, got {type(value).__name__}")
    s = value.lower()
    if s.startswith("0x"):
        s = s[2:]
    if len(s) != 2 * nbytes or any(c not in "0123456789abcdef" for c in s):
        raise InputError(f"{what}: expected {nbytes}-byte hex string, got {value!r}")
    return s


def normalize_address(value: str) -> str:
    return normalize_hex(value, 20, "address")


def parse_uint256(value, what: str = "value") -> int:
    """Accept decimal strings, 0x-hex strings, or plain ints."""
    if isinstance(value, int) and not isinstance(value, bool):
        n = value
    elif isinstance(value, str):
        try:
            n = int(value, 16) if value.lower().startswith("0x") else int(value, 10)
        except ValueError:
            raise InputError(f"{what}: not a decimal or hex integer: {value!r}") from None
    else:
        raise InputError(f"{what}: expected integer string, got {type(value).__name__}")
    if n < 0 or n >= 1 << 256:
        raise InputError(f"{what}: out of uint256 range: {n}")
    return n


def parse_hex_bytes(value: str, what: str = "bytes") -> bytes:
    if not isinstance(value, str):
        raise InputError(f"{what}: expected hex string")
    s = value.lower()
    if s.startswith("0x"):
        s = s[2:]
    if len(s) % 2:
        raise InputError(f"{what}: odd-length hex string")
    try:
        return bytes.fromhex(s)
    except ValueError:
        raise InputError(f"{what}: invalid hex string") from None


@dataclass(frozen=True, slots=True)
class Block:
    number: int
    timestamp: int
    tx_count: int


@dataclass(frozen=True, slots=True)
class Transaction:
    hash: str              # 64 hex chars
    block_number: int
    index: int
    sender: str            # 40 hex chars
    to: Optional[str]      # None for contract creation
    value: int
    gas_limit: int
    gas_price: int
    input: bytes
    tx_type: int
    status: int


@dataclass(frozen=True, slots=True)
class LogEvent:
    emitting_contract: str
    topics: tuple[bytes, ...]
    data: bytes
    block_number: int
    tx_hash: str
    log_index: int


@dataclass(slots=True)
class AccountHistory:
    """One address's transactions, sorted by (block, index), with timestamps."""
    address: str
    out_txs: list[Transaction] = field(default_factory=list)
    in_txs: list[Transaction] = field(default_factory=list)
    out_timestamps: list[int] = field(default_factory=list)
    in_timestamps: list[int] = field(default_factory=list)


class ChainData:
    """Immutable store of blocks, transactions and logs for a block range."""

    def __init__(self, blocks: list[Block], txs: list[Transaction],
                 logs: list[LogEvent], block_range: BlockInterval):
        self.block_range = block_range
        self.blocks = sorted(blocks, key=lambda b: b.number)
        self.txs = sorted(txs, key=lambda t: (t.block_number, t.index))
        self.logs = sorted(logs, key=lambda l: (l.block_number, l.log_index))
        self._by_number = {b.number: b for b in self.blocks}
        if len(self._by_number) != len(self.blocks):
            seen: set[int] = set()
            for blk in self.blocks:
                if blk.number in seen:
                    raise InputError(f"duplicate block number {blk.number}")
                seen.add(blk.number)
        self._from_index: dict[str, list[int]] = {}
        self._to_index: dict[str, list[int]] = {}
        for i, tx in enumerate(self.txs):
            self._from_index.setdefault(tx.sender, []).append(i)
            if tx.to is not None:
                self._to_index.setdefault(tx.to, []).append(i)
        prev_ts = None
        for b in self.blocks:
            if prev_ts is not None and b.timestamp < prev_ts:
                raise InputError(f"block {b.number}: timestamp decreases")
            prev_ts = b.timestamp

    @property
    def n_blocks(self) -> int:
        return self.block_range[1] - self.block_range[0] + 1

    def block(self, number: int) -> Block:
        try:
            return self._by_number[number]
        except KeyError:
            raise InputError(f"block {number} not loaded") from None

    def timestamp_of(self, block_number: int) -> int:
        return self.block(block_number).timestamp

    def senders_in_blocks(self, blocks: BlockInterval) -> set[str]:
        """Distinct from-addresses of transactions in the inclusive interval."""
        lo, hi = blocks
        if lo > hi:
            return set()
        if lo < self.block_range[0] or hi > self.block_range[1]:
            raise ValueError(f"interval {blocks} outside loaded range {self.block_range}")
        return {tx.sender for tx in self.txs if lo <= tx.block_number <= hi}

    def all_senders(self) -> set[str]:
        return set(self._from_index)

    def account_history(self, address: str) -> AccountHistory:
        h = AccountHistory(address=address)
        for i in self._from_index.get(address, ()):
            tx = self.txs[i]
            h.out_txs.append(tx)
            h.out_timestamps.append(self.timestamp_of(tx.block_number))
        for i in self._to_index.get(address, ()):
            tx = self.txs[i]
            h.in_txs.append(tx)
            h.in_timestamps.append(self.timestamp_of(tx.block_number))
        return h


def _iter_ndjson(path: str) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise InputError(f"{path}:{line_no}: expected a JSON object")
            yield line_no, obj


def _require(obj: dict, key: str, path: str, line_no: int):
    if key not in obj:
        raise InputError(f"{path}:{line_no}: missing field '{key}'")
    return obj[key]


def _require_int(obj: dict, key: str, path: str, line_no: int, minimum: int = 0) -> int:
    v = _require(obj, key, path, line_no)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise InputError(f"{path}:{line_no}: field '{key}' must be an integer >= {minimum}")
    return v


def load_chain_data(blocks_path: str, txs_path: str, logs_path: str,
                    block_range: BlockInterval) -> ChainData:
    """Load the three NDJSON exports, keeping records inside block_range."""
    lo, hi = block_range
    if lo > hi:
        raise InputError(f"empty block range {block_range}")

    blocks: list[Block] = []
    for line_no, obj in _iter_ndjson(blocks_path):
        number = _require_int(obj, "number", blocks_path, line_no)
        if not lo <= number <= hi:
            continue
        blocks.append(Block(
            number=number,
            timestamp=_require_int(obj, "timestamp", blocks_path, line_no),
            tx_count=_require_int(obj, "txCount", blocks_path, line_no),
        ))
    by_number = {b.number: b for b in blocks}

    txs: list[Transaction] = []
    for line_no, obj in _iter_ndjson(txs_path):
        number = _require_int(obj, "blockNumber", txs_path, line_no)
        if not lo <= number <= hi:
            continue
        try:
            to_raw = _require(obj, "to", txs_path, line_no)
            tx = Transaction(
                hash=normalize_hex(_require(obj, "hash", txs_path, line_no), 32, "hash"),
                block_number=number,
                index=_require_int(obj, "index", txs_path, line_no),
                sender=normalize_address(_require(obj, "from", txs_path, line_no)),
                to=None if to_raw is None else normalize_address(to_raw),
                value=parse_uint256(_require(obj, "value", txs_path, line_no), "value"),
                gas_limit=_require_int(obj, "gasLimit", txs_path, line_no),
                gas_price=parse_uint256(_require(obj, "gasPrice", txs_path, line_no), "gasPrice"),
                input=parse_hex_bytes(_require(obj, "input", txs_path, line_no), "input"),
                tx_type=_require_int(obj, "type", txs_path, line_no),
                status=_require_int(obj, "status", txs_path, line_no),
            )
        except InputError as exc:
            raise InputError(f"{txs_path}:{line_no}: {exc}") from None
        if tx.tx_type not in (0, 1, 2):
            raise InputError(f"{txs_path}:{line_no}: field 'type' must be 0, 1 or 2")
        if tx.status not in (0, 1):
            raise InputError(f"{txs_path}:{line_no}: field 'status' must be 0 or 1")
        block = by_number.get(number)
        if block is None:
            raise InputError(f"{txs_path}:{line_no}: blockNumber {number} not in blocks export")
        if tx.index >= block.tx_count:
            raise InputError(
                f"{txs_path}:{line_no}: index {tx.index} >= txCount {block.tx_count} of block {number}")
        txs.append(tx)

    logs: list[LogEvent] = []
    for line_no, obj in _iter_ndjson(logs_path):
        number = _require_int(obj, "blockNumber", logs_path, line_no)
        if not lo <= number <= hi:
            continue
        try:
            topics_raw = _require(obj, "topics", logs_path, line_no)
            if not isinstance(topics_raw, list) or not 1 <= len(topics_raw) <= 4:
                raise InputError("field 'topics' must be a list of 1 to 4 entries")
            topics = tuple(
                bytes.fromhex(normalize_hex(t, 32, "topic")) for t in topics_raw)
            data = parse_hex_bytes(_require(obj, "data", logs_path, line_no), "data")
            if len(data) % 32:
                raise InputError("field 'data' length must be a multiple of 32 bytes")
            log = LogEvent(
                emitting_contract=normalize_address(_require(obj, "address", logs_path, line_no)),
                topics=topics,
                data=data,
                block_number=number,
                tx_hash=normalize_hex(_require(obj, "txHash", logs_path, line_no), 32, "txHash"),
                log_index=_require_int(obj, "logIndex", logs_path, line_no),
            )
        except InputError as exc:
            msg = str(exc)
            raise InputError(msg if msg.startswith(logs_path) else f"{logs_path}:{line_no}: {exc}") from None
        logs.append(log)

    return ChainData(blocks, txs, logs, block_range)


def write_chain_data(data: ChainData, blocks_path: str, txs_path: str, logs_path: str) -> None:
    """Serialize the store back to canonical NDJSON (a load/write fixed point)."""
    with open(blocks_path, "w", encoding="utf-8") as fh:
        for b in data.blocks:
            fh.write(json.dumps(
                {"number": b.number, "timestamp": b.timestamp, "txCount": b.tx_count},
                separators=(",", ":")) + "\n")
    with open(txs_path, "w", encoding="utf-8") as fh:
        for t in data.txs:
            fh.write(json.dumps({
                "hash": "0x" + t.hash,
                "blockNumber": t.block_number,
                "index": t.index,
                "from": "0x" + t.sender,
                "to": None if t.to is None else "0x" + t.to,
                "value": str(t.value),
                "gasLimit": t.gas_limit,
                "gasPrice": str(t.gas_price),
                "input": "0x" + t.input.hex(),
                "type": t.tx_type,
                "status": t.status,
            }, separators=(",", ":")) + "\n")
    with open(logs_path, "w", encoding="utf-8") as fh:
        for l in data.logs:
            fh.write(json.dumps({
                "address": "0x" + l.emitting_contract,
                "topics": ["0x" + t.hex() for t in l.topics],
                "data": "0x" + l.data.hex(),
                "blockNumber": l.block_number,
                "txHash": "0x" + l.tx_hash,
                "logIndex": l.log_index,
            }, separators=(",", ":")) + "\n")

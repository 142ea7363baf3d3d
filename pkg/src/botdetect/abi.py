"""Decoding of the modeled DEX router calls and pool/token events.

The modeled signatures ship as a JSON resource (data/signatures.json). The
published table only prints the first 8 hex chars of each hash, so the full
selector/topic0 is recomputed from the canonical signature at load time and
the printed prefix acts as a checksum.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Union

from .chain import LogEvent, Transaction
from .keccak import keccak256

log = logging.getLogger("botdetect.abi")

WORD = 32


def selector_of(signature: str) -> bytes:
    """First 4 bytes of keccak-256 of a canonical ABI signature."""
    return keccak256(signature.encode("utf-8"))[:4]


def topic0_of(event_signature: str) -> bytes:
    """Full 32-byte keccak-256 of a canonical event signature."""
    return keccak256(event_signature.encode("utf-8"))


@dataclass(frozen=True, slots=True)
class FunctionSpec:
    name: str
    signature: str
    selector: bytes
    params: tuple[tuple[str, str], ...]   # (name, kind); kind: uint256 | address | address[]
    amount_param: int
    amount_role: str                      # "in" | "out", fixed by function identity
    path_param: int
    to_param: int


@dataclass(frozen=True, slots=True)
class EventSpec:
    name: str
    kind: str                             # transfer | swap_v2 | swap_v3
    signature: str
    topic0: bytes
    indexed_params: tuple[str, ...]
    data_words: tuple[str, ...]
    signed_words: frozenset[int]


@dataclass(frozen=True, slots=True)
class DecodedSwapCall:
    function_name: str
    selector: bytes
    sender: str
    amount: int
    amount_role: str
    to: str
    path: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class TransferEvent:
    sender: str                           # "from" in the event ABI
    to: str
    value: int


@dataclass(frozen=True, slots=True)
class SwapV2Event:
    sender: str
    to: str
    amount0_in: int
    amount1_in: int
    amount0_out: int
    amount1_out: int


@dataclass(frozen=True, slots=True)
class SwapV3Event:
    sender: str
    recipient: str
    amount0: int                          # signed
    amount1: int                          # signed


DecodedEvent = Union[TransferEvent, SwapV2Event, SwapV3Event]


class SignatureTableError(RuntimeError):
    """The shipped signature table is inconsistent with its checksums."""


def _load_table(raw: Optional[dict] = None,
                ) -> tuple[dict[bytes, FunctionSpec], dict[bytes, EventSpec], dict]:
    if raw is None:
        raw = json.loads(
            resources.files("botdetect.data").joinpath("signatures.json").read_text())
    functions: dict[bytes, FunctionSpec] = {}
    for row in raw["functions"]:
        sel = selector_of(row["signature"])
        if sel.hex() != row["selector_prefix"]:
            raise SignatureTableError(
                f"{row['signature']}: computed selector {sel.hex()} != "
                f"published prefix {row['selector_prefix']}")
        spec = FunctionSpec(
            name=row["name"],
            signature=row["signature"],
            selector=sel,
            params=tuple((n, k) for n, k in row["params"]),
            amount_param=row["amount_param"],
            amount_role=row["amount_role"],
            path_param=row["path_param"],
            to_param=row["to_param"],
        )
        functions[sel] = spec
    events: dict[bytes, EventSpec] = {}
    for row in raw["events"]:
        t0 = topic0_of(row["signature"])
        if t0.hex()[:8] != row["topic0_prefix"]:
            raise SignatureTableError(
                f"{row['signature']}: computed topic0 {t0.hex()[:8]} != "
                f"published prefix {row['topic0_prefix']}")
        events[t0] = EventSpec(
            name=row["name"],
            kind=row["kind"],
            signature=row["signature"],
            topic0=t0,
            indexed_params=tuple(row["indexed_params"]),
            data_words=tuple(row["data_words"]),
            signed_words=frozenset(row["signed_words"]),
        )
    return functions, events, raw


_FUNCTIONS, _EVENTS, _RAW_TABLE = _load_table()


def function_specs() -> list[FunctionSpec]:
    """Modeled router functions in table order."""
    return list(_FUNCTIONS.values())

def event_specs() -> list[EventSpec]:
    return list(_EVENTS.values())

def signature_table() -> dict:
    """The raw JSON resource, for audit output."""
    return _RAW_TABLE


def encode_swap_call(spec: FunctionSpec, values: list) -> bytes:
    """Build calldata for a modeled function (selector + ABI-encoded params).

    `values` follows spec.params order: ints for uint256, 40-hex strings
    for address, a sequence of 40-hex strings for address[].
    """
    if len(values) != len(spec.params):
        raise ValueError(f"{spec.name}: expected {len(spec.params)} values")
    head: list[bytes] = []
    tail: list[bytes] = []
    n_head = len(spec.params) * WORD
    for (pname, kind), v in zip(spec.params, values):
        if kind == "uint256":
            head.append(int(v).to_bytes(WORD, "big"))
        elif kind == "address":
            head.append(bytes(12) + bytes.fromhex(v))
        elif kind == "address[]":
            head.append((n_head + sum(len(t) for t in tail)).to_bytes(WORD, "big"))
            tail.append(len(v).to_bytes(WORD, "big")
                        + b"".join(bytes(12) + bytes.fromhex(a) for a in v))
        else:
            raise ValueError(f"unsupported param kind {kind}")
    return spec.selector + b"".join(head) + b"".join(tail)


class _DecodeError(ValueError):
    pass


def _word(body: bytes, i: int) -> bytes:
    start = i * WORD
    if start + WORD > len(body):
        raise _DecodeError(f"truncated word {i}")
    return body[start:start + WORD]


def _decode_params(body: bytes, spec: FunctionSpec) -> list:
    values = []
    for i, (pname, kind) in enumerate(spec.params):
        w = _word(body, i)
        if kind == "uint256":
            values.append(int.from_bytes(w, "big"))
        elif kind == "address":
            values.append(w[12:].hex())
        elif kind == "address[]":
            offset = int.from_bytes(w, "big")
            if offset % WORD or offset + WORD > len(body):
                raise _DecodeError(f"param {pname}: array offset {offset} out of bounds")
            base = offset // WORD
            length = int.from_bytes(_word(body, base), "big")
            if length > (len(body) - offset - WORD) // WORD:
                raise _DecodeError(f"param {pname}: array length {length} exceeds body")
            values.append(tuple(_word(body, base + 1 + j)[12:].hex() for j in range(length)))
        else:
            raise _DecodeError(f"unsupported param kind {kind}")
    return values


def decode_swap_call(tx: Transaction) -> Optional[DecodedSwapCall]:
    """Decode tx calldata if its selector matches a modeled router function.

    Non-matching selectors (including empty input) return None quietly; a
    matching selector with a malformed body logs a diagnostic and also
    returns None, so the transaction counts as a plain call.
    """
    if len(tx.input) < 4:
        return None
    spec = _FUNCTIONS.get(bytes(tx.input[:4]))
    if spec is None:
        return None
    body = tx.input[4:]
    try:
        values = _decode_params(body, spec)
        path = values[spec.path_param]
        if len(path) < 2:
            raise _DecodeError(f"path length {len(path)} < 2")
    except _DecodeError as exc:
        log.warning("tx 0x%s: %s calldata decode failed: %s", tx.hash, spec.name, exc)
        return None
    return DecodedSwapCall(
        function_name=spec.name,
        selector=spec.selector,
        sender=tx.sender,
        amount=values[spec.amount_param],
        amount_role=spec.amount_role,
        to=values[spec.to_param],
        path=path,
    )


def decode_log(event: LogEvent) -> Optional[DecodedEvent]:
    """Decode a raw log if topic0 matches one of the three modeled events."""
    spec = _EVENTS.get(bytes(event.topics[0]))
    if spec is None:
        return None
    if len(event.topics) != 1 + len(spec.indexed_params):
        log.warning("log %d @ block %d: %s expects %d topics, got %d",
                    event.log_index, event.block_number, spec.signature,
                    1 + len(spec.indexed_params), len(event.topics))
        return None
    addr = [t[12:].hex() for t in event.topics[1:]]
    n_needed = {"transfer": 1, "swap_v2": 4, "swap_v3": 2}[spec.kind]
    if len(event.data) < n_needed * WORD:
        log.warning("log %d @ block %d: %s data too short (%d bytes)",
                    event.log_index, event.block_number, spec.signature, len(event.data))
        return None
    words = [event.data[i * WORD:(i + 1) * WORD] for i in range(len(event.data) // WORD)]
    if spec.kind == "transfer":
        return TransferEvent(sender=addr[0], to=addr[1],
                             value=int.from_bytes(words[0], "big"))
    if spec.kind == "swap_v2":
        return SwapV2Event(
            sender=addr[0], to=addr[1],
            amount0_in=int.from_bytes(words[0], "big"),
            amount1_in=int.from_bytes(words[1], "big"),
            amount0_out=int.from_bytes(words[2], "big"),
            amount1_out=int.from_bytes(words[3], "big"),
        )
    return SwapV3Event(
        sender=addr[0], recipient=addr[1],
        amount0=int.from_bytes(words[0], "big", signed=True),
        amount1=int.from_bytes(words[1], "big", signed=True),
    )

"""Deterministic synthetic chain generator for end-to-end runs and tests.

Produces a small but complete scenario: periodic swap bots anchored to the
trailing evaluation blocks, bursty daytime retail accounts, unlabeled
background senders for the clustering split, and one funding account that
gives every labeled address an incoming transfer. All randomness flows
through a generator derived from the seed, so identical (seed, scale)
always yields byte-identical files.

Outputs (written into the target directory):
    blocks.ndjson, txs.ndjson, logs.ndjson  -- chain exports
    labels.csv, mev_labels.csv              -- account labels
    run.json                                -- ready-to-use run config
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import abi
from .chain import Block, ChainData, LogEvent, Transaction, write_chain_data
from .config import config_from_dict
from .dataset import MEV_CLASSES
from .keccak import keccak256
from .seeds import derived_rng

FIRST_BLOCK = 17_000_000
GENESIS_TIMESTAMP = 1_600_002_000     # multiple of 3600: hour of day tracks block index
BLOCK_TIME = 3600
BLOCKS_PER_DAY = 86_400 // BLOCK_TIME

N_BOTS = 22
N_HUMANS = 22
N_BACKGROUND = 36

_BENFORD_CDF = np.cumsum(np.log10(1.0 + 1.0 / np.arange(1, 10)))


def _benford_amount(rng: np.random.Generator) -> int:
    """18-digit wei amount with a Benford-distributed leading digit.

    The eighth significant digit is forced nonzero so the value never
    counts as round under the trade-value-clustering test.
    """
    first = 1 + int(np.searchsorted(_BENFORD_CDF, rng.random(), side="right"))
    digits = rng.integers(0, 10, size=17)
    digits[6] = rng.integers(1, 10)
    return int(str(first) + "".join(str(d) for d in digits))


def _round_value(rng: np.random.Generator) -> int:
    """A human-looking transfer amount with at most three significant digits."""
    if rng.random() < 0.2:
        return 10 ** 18
    return int(rng.integers(1, 1000)) * 10 ** 16


def _swap_values(spec: abi.FunctionSpec, amount: int, path: list[str],
                 recipient: str, deadline: int) -> list:
    """Parameter values for one modeled swap call, in declaration order."""
    values = []
    for idx, (pname, kind) in enumerate(spec.params):
        if kind == "address[]":
            values.append(path)
        elif kind == "address":
            values.append(recipient if idx == spec.to_param else path[-1])
        elif pname == "deadline":
            values.append(deadline)
        elif idx == spec.amount_param:
            values.append(amount)
        else:                          # the opposite-side bound; never decoded
            values.append(amount * 101 // 100)
    return values


def _topic(address: str) -> bytes:
    return bytes(12) + bytes.fromhex(address)


def _word(value: int, signed: bool = False) -> bytes:
    return value.to_bytes(32, "big", signed=signed)


class _Builder:
    """Accumulates txs/logs, then assigns per-block indices and hashes."""

    def __init__(self, first_block: int, last_block: int):
        self.first = first_block
        self.last = last_block
        self.pending: list[dict] = []

    def timestamp(self, number: int) -> int:
        return GENESIS_TIMESTAMP + (number - self.first) * BLOCK_TIME

    def add_tx(self, block: int, sender: str, to: str, value: int,
               gas_limit: int, gas_price: int, input_: bytes,
               tx_type: int, status: int, logs: list[tuple] = ()) -> None:
        assert self.first <= block <= self.last
        self.pending.append({
            "block": block, "sender": sender, "to": to, "value": value,
            "gas_limit": gas_limit, "gas_price": gas_price, "input": input_,
            "type": tx_type, "status": status, "logs": list(logs),
        })

    def finish(self) -> ChainData:
        self.pending.sort(key=lambda p: p["block"])   # stable: keeps insert order
        txs: list[Transaction] = []
        logs: list[LogEvent] = []
        tx_index: dict[int, int] = {}
        log_index: dict[int, int] = {}
        for p in self.pending:
            n = p["block"]
            idx = tx_index.get(n, 0)
            tx_index[n] = idx + 1
            h = keccak256(f"{n}:{idx}:{p['sender']}".encode()).hex()
            txs.append(Transaction(
                hash=h, block_number=n, index=idx, sender=p["sender"],
                to=p["to"], value=p["value"], gas_limit=p["gas_limit"],
                gas_price=p["gas_price"], input=p["input"],
                tx_type=p["type"], status=p["status"]))
            for emitting, topics, data in p["logs"]:
                li = log_index.get(n, 0)
                log_index[n] = li + 1
                logs.append(LogEvent(emitting_contract=emitting, topics=topics,
                                     data=data, block_number=n, tx_hash=h,
                                     log_index=li))
        blocks = [Block(number=n, timestamp=self.timestamp(n),
                        tx_count=tx_index.get(n, 0))
                  for n in range(self.first, self.last + 1)]
        return ChainData(blocks, txs, logs, (self.first, self.last))


def _swap_logs(fn_index: int, pool_v2: str, pool_v3: str, token: str,
               router: str, account: str, amount: int) -> list[tuple]:
    """A token Transfer plus a matching pool Swap credited to `account`."""
    specs = {e.kind: e for e in abi.event_specs()}
    out = [(token,
            (specs["transfer"].topic0, _topic(account), _topic(router)),
            _word(amount))]
    if fn_index % 2 == 0:
        ev = specs["swap_v2"]
        data = _word(amount) + _word(0) + _word(0) + _word(amount * 99 // 100)
        out.append((pool_v2, (ev.topic0, _topic(router), _topic(account)), data))
    else:
        ev = specs["swap_v3"]
        data = (_word(amount, signed=True)
                + _word(-(amount * 99 // 100), signed=True)
                + _word(2 ** 96) + _word(10 ** 18) + _word(-887, signed=True))
        out.append((pool_v3, (ev.topic0, _topic(router), _topic(account)), data))
    return out


def generate_fixture(out_dir: str, seed: int = 1, scale: int = 1) -> dict:
    """Write the full scenario into out_dir; returns a summary dict."""
    if scale < 1:
        raise ValueError("scale must be >= 1")
    rng = derived_rng(seed, 0)
    n_blocks = 240 * scale
    last = FIRST_BLOCK + n_blocks - 1
    test_blocks = (last - 1, last)
    n_days = n_blocks // BLOCKS_PER_DAY

    new_addr = lambda: rng.bytes(20).hex()
    router, pool_v2, pool_v3 = new_addr(), new_addr(), new_addr()
    tokens = [new_addr() for _ in range(6)]
    counterparties = [new_addr() for _ in range(5)]
    funder = new_addr()
    bots = [new_addr() for _ in range(N_BOTS)]
    humans = [new_addr() for _ in range(N_HUMANS)]
    background = [new_addr() for _ in range(N_BACKGROUND)]

    b = _Builder(FIRST_BLOCK, last)
    functions = abi.function_specs()

    # Funding: one incoming transfer per labeled account, well before the
    # evaluation window, so in-direction features are populated.
    for idx, addr in enumerate(bots + humans):
        b.add_tx(FIRST_BLOCK + 1 + idx % 3, funder, addr, 10 ** 18,
                 21_000, 30 * 10 ** 9, b"", 0, 1)

    def add_swap_tx(block: int, sender: str, fn_index: int, path_len: int,
                    gas_limit: int, gas_price: int) -> None:
        spec = functions[fn_index]
        amount = _benford_amount(rng)
        path = [tokens[(fn_index + j) % len(tokens)] for j in range(path_len)]
        calldata = abi.encode_swap_call(spec, _swap_values(
            spec, amount, path, sender, b.timestamp(block) + 1200))
        b.add_tx(block, sender, router, 0, gas_limit, gas_price, calldata, 2, 1,
                 _swap_logs(fn_index, pool_v2, pool_v3, path[0], router,
                            sender, amount))

    # Bots: strictly periodic, one tx every BLOCKS_PER_DAY blocks ending at an
    # anchor inside the test window, so every send lands on the same hour of
    # day and the outgoing hour-of-day entropy is exactly zero.
    for i, bot in enumerate(bots):
        anchor = test_blocks[i % 2]
        blocks_i = list(range(anchor, FIRST_BLOCK, -BLOCKS_PER_DAY))[::-1]
        for n in blocks_i:
            add_swap_tx(n, bot, i % 8, 2 + i % 3,
                        150_000 + 137 * i, (20 + i) * 10 ** 9)

    # Humans: a handful of daytime bursts with round transfer values and
    # varied gas, plus one guaranteed send inside the test window.
    def add_human_tx(block: int, who: str) -> None:
        gas_price = int(rng.integers(10, 81)) * 10 ** 9 + int(rng.integers(0, 1000)) * 10 ** 5
        gas_limit = 21_000 if rng.random() < 0.75 else 65_000
        tx_type = 2 if rng.random() < 0.7 else 0
        status = 1 if rng.random() >= 0.06 else 0
        to = counterparties[int(rng.integers(0, len(counterparties)))]
        b.add_tx(block, who, to, _round_value(rng), gas_limit, gas_price,
                 b"", tx_type, status)

    for j, human in enumerate(humans):
        n_sessions = 3 + j % 3
        days = sorted(rng.choice(n_days - 1, size=n_sessions, replace=False))
        for d in days:
            for _ in range(2 + int(rng.integers(0, 4))):
                hour = int(rng.integers(9, 22))
                offset = (hour - (GENESIS_TIMESTAMP // 3600) % 24) % 24
                add_human_tx(FIRST_BLOCK + int(d) * BLOCKS_PER_DAY + offset, human)
        add_human_tx(test_blocks[j % 2], human)

    # Background: unlabeled senders active only before the test window; they
    # form the clustering split. Half look periodic, half look bursty.
    for g, addr in enumerate(background):
        if g % 2 == 0:
            start = FIRST_BLOCK + 10 + g
            for n in range(start, last - 1, BLOCKS_PER_DAY):
                add_swap_tx(n, addr, (g // 2) % 8, 2 + g % 3,
                            140_000 + 271 * g, (12 + g) * 10 ** 9)
        else:
            blocks_g = rng.choice(np.arange(FIRST_BLOCK + 5, last - 2),
                                  size=5 + g % 4, replace=False)
            for n in sorted(int(x) for x in blocks_g):
                add_human_tx(n, addr)

    data = b.finish()
    os.makedirs(out_dir, exist_ok=True)
    write_chain_data(data,
                     os.path.join(out_dir, "blocks.ndjson"),
                     os.path.join(out_dir, "txs.ndjson"),
                     os.path.join(out_dir, "logs.ndjson"))

    mev_of = {bot: MEV_CLASSES[i % 3] for i, bot in enumerate(bots)}
    with open(os.path.join(out_dir, "labels.csv"), "w", encoding="utf-8") as fh:
        fh.write("address,binary_label,fine_label\n")
        for bot in bots:
            fh.write(f"{bot},Bot,{mev_of[bot]}\n")
        for human in humans:
            fh.write(f"{human},Human,Retail\n")
    with open(os.path.join(out_dir, "mev_labels.csv"), "w", encoding="utf-8") as fh:
        fh.write("address,mev_class\n")
        for bot in bots:
            fh.write(f"{bot},{mev_of[bot]}\n")

    run_doc = {
        "blocks": "blocks.ndjson", "txs": "txs.ndjson", "logs": "logs.ndjson",
        "labels": "labels.csv", "mev_labels": "mev_labels.csv",
        "out_dir": "out",
        "block_range": [FIRST_BLOCK, last],
        "test_block_count": 2,
        "seed": seed,
        "classify": {"datasets": ["binary", "multiclass"]},
    }
    config_from_dict(run_doc, out_dir)          # validates before writing
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(run_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {
        "out_dir": out_dir, "seed": seed, "scale": scale,
        "blocks": n_blocks, "block_range": [FIRST_BLOCK, last],
        "test_blocks": list(test_blocks),
        "txs": len(data.txs), "logs": len(data.logs),
        "bots": len(bots), "humans": len(humans),
        "background_senders": len(background) + 1,
        "labeled": len(bots) + len(humans),
    }

"""Feature registry and the per-address feature matrix builder.

The registry is the single source of truth for column names and order; it
is versioned by the package release and never reordered at runtime. A cell
is either a finite float or MISSING (None), serialized as an empty CSV
field.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .. import abi
from ..chain import AccountHistory, ChainData
from ..errors import InputError
from .aggregates import (
    MISSING,
    NUMERICAL_STAT_NAMES,
    FeatureValue,
    _entropy,
    benford_p_value,
    categorical_stats,
    gap_based_sleepiness,
    hour_of_day_entropy,
    numerical_stats,
    trade_value_clustering,
)

TX_TYPE_DOMAIN = (0, 1, 2)
TX_STATUS_DOMAIN = (0, 1)


@dataclass(frozen=True, slots=True)
class FeatureSpec:
    name: str
    group: str        # address | transaction | function_call | event
    definition: str


def _stat_specs(prefix: str, group: str, what: str) -> list[FeatureSpec]:
    return [FeatureSpec(f"{prefix}_{s}", group, f"{s} of {what}")
            for s in NUMERICAL_STAT_NAMES]


def _build_registry() -> tuple[FeatureSpec, ...]:
    specs: list[FeatureSpec] = [
        FeatureSpec("addr_n_leading_zeros", "address",
                    "count of leading '0' characters in the 40-char hex address"),
        FeatureSpec("addr_digit_entropy", "address",
                    "entropy of the hex-character distribution of the address"),
        FeatureSpec("tx_out_per_block", "transaction",
                    "outgoing transactions divided by blocks in range"),
    ]
    specs += _stat_specs("tx_per_active_block", "transaction",
                         "outgoing-transaction counts over blocks with at least one")
    specs += [
        FeatureSpec("sleepiness_in", "transaction",
                    "mean over two-day buckets of the largest incoming inter-arrival gap (s)"),
        FeatureSpec("sleepiness_out", "transaction",
                    "mean over two-day buckets of the largest outgoing inter-arrival gap (s)"),
        FeatureSpec("frequency_in", "transaction",
                    "incoming transactions per second of active span"),
        FeatureSpec("frequency_out", "transaction",
                    "outgoing transactions per second of active span"),
    ]
    specs += _stat_specs("time_diff_out", "transaction",
                         "consecutive outgoing-transaction time deltas (s)")
    specs += [
        FeatureSpec("entropy_time_in", "transaction",
                    "hour-of-day entropy of incoming transactions"),
        FeatureSpec("entropy_time_out", "transaction",
                    "hour-of-day entropy of outgoing transactions"),
        FeatureSpec("benford_value_out", "transaction",
                    "Benford chi-squared p-value of outgoing values (wei)"),
        FeatureSpec("tvc_value_out", "transaction",
                    "round-number fraction of outgoing values (wei)"),
        FeatureSpec("type_entropy", "transaction", "entropy of outgoing transaction types"),
        FeatureSpec("type_share_0", "transaction", "share of legacy (type 0) outgoing txs"),
        FeatureSpec("type_share_1", "transaction", "share of access-list (type 1) outgoing txs"),
        FeatureSpec("type_share_2", "transaction", "share of dynamic-fee (type 2) outgoing txs"),
        FeatureSpec("type_mode", "transaction", "most frequent outgoing transaction type"),
        FeatureSpec("status_entropy", "transaction", "entropy of outgoing receipt statuses"),
        FeatureSpec("status_share_0", "transaction", "share of failed outgoing txs"),
        FeatureSpec("status_share_1", "transaction", "share of successful outgoing txs"),
        FeatureSpec("status_mode", "transaction", "most frequent outgoing receipt status"),
    ]
    specs += _stat_specs("value", "transaction", "outgoing values (wei)")
    specs += _stat_specs("gas_limit", "transaction", "outgoing gas limits")
    specs += _stat_specs("gas_price", "transaction", "outgoing gas prices (wei)")
    specs += _stat_specs("index_relative", "transaction",
                         "outgoing intra-block positions (index / block tx count)")
    specs += [
        FeatureSpec("swap_benford", "function_call",
                    "Benford p-value of swap amounts, mean over modeled functions and swap events"),
        FeatureSpec("swap_tvc", "function_call",
                    "round-number fraction of swap amounts, mean over modeled functions and swap events"),
    ]
    specs += _stat_specs("swap_path", "function_call",
                         "token-path lengths, mean over modeled functions")
    specs += [
        FeatureSpec("swaps_per_block", "function_call",
                    "swap calls/events per block, mean over modeled sources"),
        FeatureSpec("transfer_benford", "event",
                    "Benford p-value of token transfer values sent by the address"),
        FeatureSpec("transfer_tvc", "event",
                    "round-number fraction of token transfer values sent by the address"),
        FeatureSpec("transfer_per_block", "event",
                    "token transfers sent by the address divided by blocks in range"),
    ]
    names = [s.name for s in specs]
    assert len(names) == len(set(names)), "duplicate feature names in registry"
    return tuple(specs)


_REGISTRY = _build_registry()


def feature_registry() -> tuple[FeatureSpec, ...]:
    """Ordered feature catalog; column order of every feature matrix."""
    return _REGISTRY


def address_features(address: str) -> dict[str, float]:
    """Features derived from the hex address itself; never MISSING."""
    counts = Counter(address)
    return {
        "addr_n_leading_zeros": float(len(address) - len(address.lstrip("0"))),
        "addr_digit_entropy": _entropy(list(counts.values())),
    }


def _spread(row: dict, prefix: str, stats: tuple) -> None:
    for suffix, value in zip(NUMERICAL_STAT_NAMES, stats):
        row[f"{prefix}_{suffix}"] = value


def transaction_features(h: AccountHistory, total_blocks: int,
                         tx_count_of: Callable[[int], int]) -> dict[str, FeatureValue]:
    """Standard-field features of one address history.

    `tx_count_of` maps a block number to its transaction count (used for
    the intra-block position of each outgoing transaction).
    """
    if total_blocks <= 0:
        raise ValueError("total_blocks must be positive")
    row: dict[str, FeatureValue] = {}
    out = h.out_txs
    row["tx_out_per_block"] = len(out) / total_blocks
    per_block = Counter(tx.block_number for tx in out)
    _spread(row, "tx_per_active_block", numerical_stats(list(per_block.values())))
    row["sleepiness_in"] = gap_based_sleepiness(h.in_timestamps)
    row["sleepiness_out"] = gap_based_sleepiness(h.out_timestamps)
    for direction, ts in (("in", h.in_timestamps), ("out", h.out_timestamps)):
        span = ts[-1] - ts[0] if len(ts) >= 2 else 0
        row[f"frequency_{direction}"] = len(ts) / span if span > 0 else MISSING
    deltas = [b - a for a, b in zip(h.out_timestamps, h.out_timestamps[1:])]
    _spread(row, "time_diff_out", numerical_stats(deltas))
    row["entropy_time_in"] = hour_of_day_entropy(h.in_timestamps)
    row["entropy_time_out"] = hour_of_day_entropy(h.out_timestamps)
    values = [tx.value for tx in out]
    row["benford_value_out"] = benford_p_value(values)
    row["tvc_value_out"] = trade_value_clustering(values)
    for name, value in categorical_stats([tx.tx_type for tx in out], TX_TYPE_DOMAIN).items():
        row[f"type_{name}"] = value
    for name, value in categorical_stats([tx.status for tx in out], TX_STATUS_DOMAIN).items():
        row[f"status_{name}"] = value
    _spread(row, "value", numerical_stats(values))
    _spread(row, "gas_limit", numerical_stats([tx.gas_limit for tx in out]))
    _spread(row, "gas_price", numerical_stats([tx.gas_price for tx in out]))
    _spread(row, "index_relative",
            numerical_stats([tx.index / tx_count_of(tx.block_number) for tx in out]))
    return row


def function_call_features(calls: Sequence[abi.DecodedSwapCall],
                           total_blocks: int) -> dict[str, dict[str, FeatureValue]]:
    """Per modeled router function: amount distributions and path lengths.

    Returns one feature map per function, keyed "fn_<selector>"; functions
    the address never called get MISSING everywhere except the per-block
    rate, which is 0.
    """
    by_selector: dict[bytes, list[abi.DecodedSwapCall]] = {}
    for call in calls:
        by_selector.setdefault(call.selector, []).append(call)
    sources: dict[str, dict[str, FeatureValue]] = {}
    for spec in abi.function_specs():
        group = by_selector.get(spec.selector, [])
        amounts = [c.amount for c in group]
        fmap: dict[str, FeatureValue] = {
            "benford": benford_p_value(amounts),
            "tvc": trade_value_clustering(amounts),
            "per_block": len(group) / total_blocks,
        }
        for suffix, value in zip(NUMERICAL_STAT_NAMES,
                                 numerical_stats([len(c.path) for c in group])):
            fmap[f"path_{suffix}"] = value
        sources[f"fn_{spec.selector.hex()}"] = fmap
    return sources


def event_features(events: Sequence[abi.DecodedEvent], address: str,
                   total_blocks: int) -> dict[str, dict[str, FeatureValue]]:
    """Per modeled event kind: features of the rows this address received.

    Swap rows are grouped by the swap recipient rather than the sender
    (router contracts emit with themselves as sender); transfers are
    grouped by the sending side. Returns maps keyed "ev_swap_v2",
    "ev_swap_v3" and "ev_transfer".
    """
    v2_amounts: list[int] = []
    v3_amounts: list[int] = []
    transfer_values: list[int] = []
    for ev in events:
        if isinstance(ev, abi.SwapV2Event):
            if ev.to == address:
                v2_amounts.append(ev.amount0_in + ev.amount1_in)
        elif isinstance(ev, abi.SwapV3Event):
            if ev.recipient == address:
                v3_amounts.append(max(ev.amount0, ev.amount1))
        elif isinstance(ev, abi.TransferEvent):
            if ev.sender == address:
                transfer_values.append(ev.value)
    def fmap(amounts: list[int]) -> dict[str, FeatureValue]:
        return {"benford": benford_p_value(amounts),
                "tvc": trade_value_clustering(amounts),
                "per_block": len(amounts) / total_blocks}
    return {"ev_swap_v2": fmap(v2_amounts),
            "ev_swap_v3": fmap(v3_amounts),
            "ev_transfer": fmap(transfer_values)}


def reduce_swap_features(per_source: dict[str, dict[str, FeatureValue]]
                         ) -> dict[str, FeatureValue]:
    """Average each swap feature over the sources where it is defined.

    Path-length statistics exist only for router functions ("fn_" sources)
    and are averaged over those; everything else averages over all given
    sources with a non-MISSING value. All-MISSING stays MISSING.
    """
    def mean_over(name: str, keys: Iterable[str]) -> FeatureValue:
        defined = [per_source[k][name] for k in keys
                   if name in per_source[k] and per_source[k][name] is not MISSING]
        return sum(defined) / len(defined) if defined else MISSING
    reduced: dict[str, FeatureValue] = {
        "swap_benford": mean_over("benford", per_source),
        "swap_tvc": mean_over("tvc", per_source),
        "swaps_per_block": mean_over("per_block", per_source),
    }
    fn_keys = [k for k in per_source if k.startswith("fn_")]
    for suffix in NUMERICAL_STAT_NAMES:
        reduced[f"swap_path_{suffix}"] = mean_over(f"path_{suffix}", fn_keys)
    return reduced


@dataclass(frozen=True)
class FeatureMatrix:
    addresses: tuple[str, ...]
    names: tuple[str, ...]
    values: tuple[tuple[FeatureValue, ...], ...]

    def __post_init__(self):
        assert all(len(r) == len(self.names) for r in self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.addresses), len(self.names)

    def column(self, name: str) -> tuple[FeatureValue, ...]:
        j = self.names.index(name)
        return tuple(row[j] for row in self.values)

    def subset(self, addresses: Sequence[str]) -> "FeatureMatrix":
        """Rows for `addresses`, in the given order."""
        index = {a: i for i, a in enumerate(self.addresses)}
        missing = [a for a in addresses if a not in index]
        if missing:
            raise InputError(f"addresses not in feature matrix: {', '.join(sorted(missing)[:5])}")
        return FeatureMatrix(tuple(addresses), self.names,
                             tuple(self.values[index[a]] for a in addresses))


def build_feature_matrix(data: ChainData, addresses: Sequence[str]) -> FeatureMatrix:
    """One feature row per address, columns in registry order."""
    if not addresses:
        raise ValueError("no addresses to featurize")
    registry = feature_registry()
    total_blocks = data.n_blocks
    decoded_events = [e for e in map(abi.decode_log, data.logs) if e is not None]
    tx_count_of = lambda number: data.block(number).tx_count
    rows = []
    for address in addresses:
        row: dict[str, FeatureValue] = {}
        row.update(address_features(address))
        h = data.account_history(address)
        row.update(transaction_features(h, total_blocks, tx_count_of))
        calls = [c for c in map(abi.decode_swap_call, h.out_txs) if c is not None]
        sources = function_call_features(calls, total_blocks)
        sources.update(event_features(decoded_events, address, total_blocks))
        transfer = sources.pop("ev_transfer")
        row.update(reduce_swap_features(sources))
        row["transfer_benford"] = transfer["benford"]
        row["transfer_tvc"] = transfer["tvc"]
        row["transfer_per_block"] = transfer["per_block"]
        rows.append(tuple(row[spec.name] for spec in registry))
    return FeatureMatrix(addresses=tuple(addresses),
                         names=tuple(s.name for s in registry),
                         values=tuple(rows))


def _format_cell(v: FeatureValue) -> str:
    return "" if v is MISSING else "%.17g" % v


def write_features_csv(matrix: FeatureMatrix, path: str,
                       comment: Optional[str] = None) -> None:
    """Serialize a matrix; floats keep 17 significant digits so a re-read
    reproduces every value bit for bit. MISSING becomes an empty field."""
    with open(path, "w", newline="") as f:
        if comment:
            f.write(f"# {comment}\n")
        writer = csv.writer(f)
        writer.writerow(("address",) + matrix.names)
        for address, row in zip(matrix.addresses, matrix.values):
            writer.writerow((address,) + tuple(_format_cell(v) for v in row))


def read_features_csv(path: str) -> FeatureMatrix:
    with open(path, newline="") as f:
        reader = csv.reader(line for line in f if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty features file") from None
        if not header or header[0] != "address":
            raise InputError(f"{path}: first column must be 'address'")
        names = tuple(header[1:])
        addresses, rows = [], []
        for i, rec in enumerate(reader, start=2):
            if len(rec) != len(names) + 1:
                raise InputError(f"{path}:{i}: expected {len(names) + 1} fields, got {len(rec)}")
            addresses.append(rec[0])
            try:
                rows.append(tuple(None if cell == "" else float(cell) for cell in rec[1:]))
            except ValueError as exc:
                raise InputError(f"{path}:{i}: {exc}") from None
    return FeatureMatrix(addresses=tuple(addresses), names=names, values=tuple(rows))

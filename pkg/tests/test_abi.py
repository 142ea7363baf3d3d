"""Calldata/log decoding cross-checked against the reference encoder."""

import copy
import logging
import random

import pytest

from abi_reference import encode_calldata, encode_log, make_transaction
from botdetect import abi
from botdetect.keccak import keccak256

rand = random.Random(0xAB1)


def _rand_address() -> str:
    return rand.randbytes(20).hex()


def _rand_uint(bits: int = 255) -> int:
    return rand.randint(0, (1 << bits) - 1)


def _function_args(spec: abi.FunctionSpec) -> list:
    args = []
    for idx, (pname, kind) in enumerate(spec.params):
        if kind == "uint256":
            args.append(_rand_uint())
        elif kind == "address":
            args.append(_rand_address())
        else:
            args.append([_rand_address() for _ in range(rand.randint(2, 5))])
    return args


# --------------------------------------------------------------- the table

def test_published_prefixes_match_computed():
    table = abi.signature_table()
    for row in table["functions"]:
        assert keccak256(row["signature"].encode())[:4].hex() == row["selector_prefix"]
    for row in table["events"]:
        assert keccak256(row["signature"].encode()).hex()[:8] == row["topic0_prefix"]
    assert len(table["functions"]) == 8 and len(table["events"]) == 3


def test_tampered_table_is_rejected():
    bad = copy.deepcopy(abi.signature_table())
    bad["functions"][0]["selector_prefix"] = "00000000"
    with pytest.raises(abi.SignatureTableError):
        abi._load_table(bad)
    bad = copy.deepcopy(abi.signature_table())
    bad["events"][0]["topic0_prefix"] = "00000000"
    with pytest.raises(abi.SignatureTableError):
        abi._load_table(bad)


def test_selector_keys_disambiguate_shared_names():
    names = [s.name for s in abi.function_specs()]
    assert len(set(names)) < len(names)          # two rows share a name
    selectors = [s.selector for s in abi.function_specs()]
    assert len(set(selectors)) == len(selectors)


# ------------------------------------------------------ calldata round trip

@pytest.mark.parametrize("spec", abi.function_specs(),
                         ids=lambda s: s.selector.hex())
def test_calldata_round_trip(spec):
    for _ in range(50):
        args = _function_args(spec)
        tx = make_transaction(encode_calldata(spec.signature, args))
        decoded = abi.decode_swap_call(tx)
        assert decoded is not None
        assert decoded.function_name == spec.name
        assert decoded.selector == spec.selector
        assert decoded.sender == tx.sender
        assert decoded.amount == args[spec.amount_param]
        assert decoded.amount_role == spec.amount_role
        assert decoded.to == args[spec.to_param]
        assert list(decoded.path) == args[spec.path_param]


@pytest.mark.parametrize("spec", abi.function_specs(),
                         ids=lambda s: s.selector.hex())
def test_own_encoder_matches_reference(spec):
    """The package's calldata builder emits byte-identical encodings."""
    for _ in range(10):
        args = _function_args(spec)
        assert abi.encode_swap_call(spec, args) == encode_calldata(spec.signature, args)


def test_short_or_foreign_calldata_is_quietly_skipped(caplog):
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_swap_call(make_transaction(b"")) is None
        assert abi.decode_swap_call(make_transaction(b"\x01\x02")) is None
        assert abi.decode_swap_call(make_transaction(b"\xff\xff\xff\xff" + b"\x00" * 64)) is None
    assert not caplog.records


def test_truncated_body_warns_and_skips(caplog):
    spec = abi.function_specs()[0]
    good = encode_calldata(spec.signature, _function_args(spec))
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_swap_call(make_transaction(good[:-40])) is None
    assert any("decode failed" in r.message for r in caplog.records)


def test_misaligned_offset_warns_and_skips(caplog):
    spec = abi.function_specs()[0]
    good = bytearray(encode_calldata(spec.signature, _function_args(spec)))
    # the path offset is head word 2 (params: amount, min, path, to, deadline)
    word = 4 + 2 * 32
    good[word:word + 32] = (5).to_bytes(32, "big")      # not a multiple of 32
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_swap_call(make_transaction(bytes(good))) is None
    assert any("decode failed" in r.message for r in caplog.records)


def test_single_hop_path_rejected(caplog):
    spec = abi.function_specs()[0]
    args = _function_args(spec)
    args[spec.path_param] = [_rand_address()]
    tx = make_transaction(encode_calldata(spec.signature, args))
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_swap_call(tx) is None
    assert any("path length" in r.message for r in caplog.records)


# ----------------------------------------------------------- log round trip

def _event_spec(kind: str) -> abi.EventSpec:
    return next(e for e in abi.event_specs() if e.kind == kind)


def test_transfer_round_trip():
    spec = _event_spec("transfer")
    for _ in range(50):
        sender, to, value = _rand_address(), _rand_address(), _rand_uint(256)
        decoded = abi.decode_log(encode_log(spec.signature, [0, 1],
                                            [sender, to, value]))
        assert decoded == abi.TransferEvent(sender=sender, to=to, value=value)


def test_swap_v2_round_trip():
    spec = _event_spec("swap_v2")
    for _ in range(50):
        sender, to = _rand_address(), _rand_address()
        amounts = [_rand_uint(256) for _ in range(4)]
        decoded = abi.decode_log(encode_log(spec.signature, [0, 5],
                                            [sender, *amounts, to]))
        assert decoded == abi.SwapV2Event(sender=sender, to=to,
                                          amount0_in=amounts[0],
                                          amount1_in=amounts[1],
                                          amount0_out=amounts[2],
                                          amount1_out=amounts[3])


def test_swap_v3_round_trip_signed():
    spec = _event_spec("swap_v3")
    for _ in range(50):
        sender, recipient = _rand_address(), _rand_address()
        amount0 = rand.randint(-(1 << 255), (1 << 255) - 1)
        amount1 = rand.randint(-(1 << 255), (1 << 255) - 1)
        sqrt_price = _rand_uint(160)
        liquidity = _rand_uint(128)
        tick = rand.randint(-(1 << 23), (1 << 23) - 1)
        decoded = abi.decode_log(encode_log(
            spec.signature, [0, 1],
            [sender, recipient, amount0, amount1, sqrt_price, liquidity, tick]))
        assert decoded == abi.SwapV3Event(sender=sender, recipient=recipient,
                                          amount0=amount0, amount1=amount1)


def test_unknown_topic0_quietly_skipped(caplog):
    spec = _event_spec("transfer")
    log_event = encode_log(spec.signature, [0, 1],
                           [_rand_address(), _rand_address(), 5])
    assert abi.decode_log(log_event) is not None
    foreign = encode_log("Deposit(address,uint256)", [0], [_rand_address(), 5])
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_log(foreign) is None
    assert not caplog.records


def test_wrong_topic_count_warns(caplog):
    spec = _event_spec("transfer")
    good = encode_log(spec.signature, [0, 1], [_rand_address(), _rand_address(), 7])
    bad = type(good)(emitting_contract=good.emitting_contract,
                     topics=good.topics[:2], data=good.data,
                     block_number=good.block_number, tx_hash=good.tx_hash,
                     log_index=good.log_index)
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_log(bad) is None
    assert any("topics" in r.message for r in caplog.records)


def test_short_data_warns(caplog):
    spec = _event_spec("swap_v2")
    good = encode_log(spec.signature, [0, 5],
                      [_rand_address(), 1, 2, 3, 4, _rand_address()])
    bad = type(good)(emitting_contract=good.emitting_contract,
                     topics=good.topics, data=good.data[:64],
                     block_number=good.block_number, tx_hash=good.tx_hash,
                     log_index=good.log_index)
    with caplog.at_level(logging.WARNING, logger="botdetect.abi"):
        assert abi.decode_log(bad) is None
    assert any("data too short" in r.message for r in caplog.records)

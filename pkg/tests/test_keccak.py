"""Keccak-256 against published constants (legacy padding, not SHA-3)."""

from botdetect.keccak import keccak256

# Widely published digests: the empty-input hash every Ethereum node stores,
# plus classic short-message vectors.
KNOWN = {
    b"": "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470",
    b"abc": "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45",
    b"The quick brown fox jumps over the lazy dog":
        "4d741b6f1eb29cb2a9b9911c82f56fa8d73b04959d3d9d222895df6c0b28aa15",
}

# Published 4-byte function selectors and 32-byte event topics.
SELECTORS = {
    b"transfer(address,uint256)": "a9059cbb",
    b"approve(address,uint256)": "095ea7b3",
    b"balanceOf(address)": "70a08231",
}
TOPICS = {
    b"Transfer(address,address,uint256)":
        "ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef",
    b"Swap(address,uint256,uint256,uint256,uint256,address)":
        "d78ad95fa46c994b6551d0da85fc275fe613ce37657fb8d5e3d130840159d822",
    b"Swap(address,address,int256,int256,uint160,uint128,int24)":
        "c42079f94a6350d7e6235f29174924f928cc2ac818eb64fed8004e115fbcca67",
}


def test_known_digests():
    for message, digest in KNOWN.items():
        assert keccak256(message).hex() == digest


def test_function_selectors():
    for signature, first4 in SELECTORS.items():
        assert keccak256(signature)[:4].hex() == first4


def test_event_topics():
    for signature, topic in TOPICS.items():
        assert keccak256(signature).hex() == topic


def test_output_shape_and_determinism():
    digest = keccak256(b"x" * 1000)            # several sponge blocks
    assert isinstance(digest, bytes) and len(digest) == 32
    assert digest == keccak256(b"x" * 1000)


def test_avalanche():
    a = keccak256(b"x" * 200)
    b = keccak256(b"x" * 199 + b"y")
    diff_bits = sum(bin(p ^ q).count("1") for p, q in zip(a, b))
    assert 64 <= diff_bits <= 192               # ~128 expected for 256 bits

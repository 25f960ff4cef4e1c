import math
import random
import struct

import pytest

from powerfair import (
    BidMessage,
    HelloMessage,
    PriceMessage,
    ProtocolError,
    StopMessage,
    decode,
    encode,
)


def test_encode_examples_byte_exact():
    assert encode(BidMessage(0, 3, 12.5)) == b'{"t":"bid","id":0,"n":3,"w":12.5}\n'
    assert encode(PriceMessage(3, 1.25)) == b'{"t":"price","n":3,"p":1.25}\n'
    assert encode(StopMessage(9, 1.0)) == b'{"t":"stop","n":9,"p":1}\n'
    assert encode(HelloMessage(4)) == b'{"t":"hello","id":4}\n'


def test_decode_examples():
    assert decode(b'{"t":"bid","id":0,"n":3,"w":12.5}\n') == BidMessage(0, 3, 12.5)
    assert decode('{"t":"price","n":1,"p":0.06}\n') == PriceMessage(1, 0.06)
    assert decode(b'{"t":"stop","n":9,"p":1.0}') == StopMessage(9, 1.0)
    assert decode(b'{"t":"hello","id":2}\n') == HelloMessage(2)


def test_decode_rejections():
    bad_lines = [
        b'{"t":"bid","id":0,"n":1,"w":"NaN"}',   # string where a real belongs
        b'{"t":"bid","id":0,"n":1,"w":NaN}',     # non-finite constant
        b'{"t":"bid","id":0,"n":1,"w":Infinity}',
        b'{"t":"bid","id":0,"n":1}',             # missing field
        b'{"t":"bid","id":-1,"n":1,"w":1.0}',    # negative id
        b'{"t":"nope","n":1,"p":1.0}',           # unknown type
        b'{"t":"price","n":1.5,"p":1.0}',        # non-integer round
        b"not json at all",
        b"[1,2,3]",
    ]
    for line in bad_lines:
        with pytest.raises(ProtocolError):
            decode(line)


def test_encode_rejects_non_finite():
    with pytest.raises(ProtocolError):
        encode(PriceMessage(1, math.inf))
    with pytest.raises(ProtocolError):
        encode(BidMessage(0, 1, math.nan))


def random_double(rng):
    # random bit patterns, filtered to finite doubles, cover the value space
    while True:
        bits = rng.getrandbits(64)
        value = struct.unpack("<d", struct.pack("<Q", bits))[0]
        if math.isfinite(value):
            return value


def test_round_trip_is_value_exact():
    rng = random.Random(2024)
    for _ in range(1000):
        kind = rng.randrange(3)
        n = rng.randrange(1, 10**6)
        if kind == 0:
            msg = BidMessage(rng.randrange(0, 64), n, abs(random_double(rng)))
        elif kind == 1:
            msg = PriceMessage(n, abs(random_double(rng)))
        else:
            msg = StopMessage(n, abs(random_double(rng)))
        assert decode(encode(msg)) == msg

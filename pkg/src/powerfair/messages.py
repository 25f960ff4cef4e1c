"""Wire messages of the bid/price protocol.

One message per line: UTF-8 JSON terminated by LF.  Reals are serialized with
17 significant digits, which round-trips every double exactly.

    {"t":"bid","id":0,"n":3,"w":12.5}
    {"t":"price","n":3,"p":1.25}
    {"t":"stop","n":9,"p":1.0}
    {"t":"hello","id":0}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "BidMessage",
    "PriceMessage",
    "StopMessage",
    "HelloMessage",
    "Message",
    "ProtocolError",
    "encode",
    "decode",
]


class ProtocolError(ValueError):
    """Malformed line, unknown message type, or non-finite numeric field."""


@dataclass(frozen=True)
class BidMessage:
    user_id: int
    n: int
    w: float


@dataclass(frozen=True)
class PriceMessage:
    n: int
    p: float


@dataclass(frozen=True)
class StopMessage:
    n: int
    p: float


@dataclass(frozen=True)
class HelloMessage:
    user_id: int


Message = Union[BidMessage, PriceMessage, StopMessage, HelloMessage]


def _real(x: float) -> str:
    if not math.isfinite(x):
        raise ProtocolError(f"non-finite real {x!r} cannot be serialized")
    return format(x, ".17g")


def encode(message: Message) -> bytes:
    """Serialize a message to one LF-terminated JSON line."""
    if isinstance(message, BidMessage):
        line = f'{{"t":"bid","id":{message.user_id},"n":{message.n},"w":{_real(message.w)}}}'
    elif isinstance(message, PriceMessage):
        line = f'{{"t":"price","n":{message.n},"p":{_real(message.p)}}}'
    elif isinstance(message, StopMessage):
        line = f'{{"t":"stop","n":{message.n},"p":{_real(message.p)}}}'
    elif isinstance(message, HelloMessage):
        line = f'{{"t":"hello","id":{message.user_id}}}'
    else:
        raise ProtocolError(f"unsupported message {message!r}")
    return (line + "\n").encode("utf-8")


def _reject_constant(name: str) -> float:
    raise ProtocolError(f"non-finite numeric constant {name!r}")


def _get(obj: dict, key: str, kinds: tuple[type, ...]) -> object:
    if key not in obj:
        raise ProtocolError(f"missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ProtocolError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def _get_real(obj: dict, key: str) -> float:
    value = float(_get(obj, key, (int, float)))  # type: ignore[arg-type]
    if not math.isfinite(value):
        raise ProtocolError(f"field {key!r} is not finite")
    return value


def _get_int(obj: dict, key: str) -> int:
    return int(_get(obj, key, (int,)))  # type: ignore[arg-type]


def decode(data: Union[bytes, str]) -> Message:
    """Parse one line back into a message; raises ProtocolError on bad input."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid UTF-8: {exc}") from exc
    try:
        obj = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON line: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    kind = obj.get("t")
    if kind == "bid":
        uid = _get_int(obj, "id")
        if uid < 0:
            raise ProtocolError("user id must be nonnegative")
        return BidMessage(user_id=uid, n=_get_int(obj, "n"), w=_get_real(obj, "w"))
    if kind == "price":
        return PriceMessage(n=_get_int(obj, "n"), p=_get_real(obj, "p"))
    if kind == "stop":
        return StopMessage(n=_get_int(obj, "n"), p=_get_real(obj, "p"))
    if kind == "hello":
        uid = _get_int(obj, "id")
        if uid < 0:
            raise ProtocolError("user id must be nonnegative")
        return HelloMessage(user_id=uid)
    raise ProtocolError(f"unknown message type {kind!r}")

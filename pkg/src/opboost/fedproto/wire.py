"""Binary framing for the two-party training protocol.

Every frame is little-endian::

    magic "OPB1" (4 bytes) | msg_type u8 | payload_len u32 | payload

Payloads:

* FEATURE      ``feature_id u32 | n u32 | n x rank u32``
* SPLIT_REQ    ``count u32 | count x (feature_id u32, ordinal u32)``
* SPLIT_REPLY  ``count u32 | count x (feature_id u32, ordinal u32, value i32)``
* HELLO        ``user_id u32 | phase u8`` (opens a TCP session)
* END          empty (closes a feature stream)
* ERROR        utf-8 message

Fixed-width integers are used everywhere; they over-approximate the
``ceil(log2 n)`` bits a rank actually needs by a constant factor.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolError

MAGIC = b"OPB1"
HEADER = struct.Struct("<4sBI")
HEADER_SIZE = HEADER.size  # 9
MAX_PAYLOAD = 1 << 31


class MsgType(enum.IntEnum):
    FEATURE = 1
    SPLIT_REQ = 2
    SPLIT_REPLY = 3
    HELLO = 4
    END = 5
    ERROR = 6


@dataclass(frozen=True)
class FeatureMessage:
    feature_id: int
    ranks: np.ndarray

    @property
    def n(self) -> int:
        return int(self.ranks.size)


@dataclass(frozen=True)
class SplitRequest:
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SplitReply:
    entries: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class Hello:
    user_id: int
    phase: int


def frame(msg_type: MsgType, payload: bytes = b"") -> bytes:
    return HEADER.pack(MAGIC, int(msg_type), len(payload)) + payload


def parse_header(buf: bytes) -> tuple[MsgType, int]:
    magic, t, length = HEADER.unpack(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    try:
        mt = MsgType(t)
    except ValueError:
        raise ProtocolError(f"unknown message type {t}") from None
    if length > MAX_PAYLOAD:
        raise ProtocolError("payload too large")
    return mt, length


def encode(msg) -> bytes:
    """Serialize a protocol message into one complete frame."""
    if isinstance(msg, FeatureMessage):
        ranks = np.asarray(msg.ranks, dtype="<u4")
        return frame(MsgType.FEATURE, struct.pack("<II", msg.feature_id, ranks.size) + ranks.tobytes())
    if isinstance(msg, SplitRequest):
        body = np.asarray(msg.pairs, dtype="<u4").reshape(-1, 2)
        return frame(MsgType.SPLIT_REQ, struct.pack("<I", len(msg.pairs)) + body.tobytes())
    if isinstance(msg, SplitReply):
        body = b"".join(struct.pack("<IIi", f, o, v) for f, o, v in msg.entries)
        return frame(MsgType.SPLIT_REPLY, struct.pack("<I", len(msg.entries)) + body)
    if isinstance(msg, Hello):
        return frame(MsgType.HELLO, struct.pack("<IB", msg.user_id, msg.phase))
    raise TypeError(f"cannot encode {type(msg).__name__}")


def _count(payload: bytes, width: int) -> int:
    if len(payload) < 4:
        raise ProtocolError("truncated payload")
    (count,) = struct.unpack_from("<I", payload)
    if len(payload) != 4 + count * width:
        raise ProtocolError("payload length does not match entry count")
    return count


def decode(msg_type: MsgType, payload: bytes):
    """Inverse of :func:`encode` for a frame's type and payload."""
    if msg_type is MsgType.FEATURE:
        if len(payload) < 8:
            raise ProtocolError("truncated feature message")
        fid, n = struct.unpack_from("<II", payload)
        if len(payload) != 8 + 4 * n:
            raise ProtocolError("feature message length mismatch")
        ranks = np.frombuffer(payload, dtype="<u4", offset=8).astype(np.int64)
        return FeatureMessage(fid, ranks)
    if msg_type is MsgType.SPLIT_REQ:
        count = _count(payload, 8)
        pairs = np.frombuffer(payload, dtype="<u4", offset=4).reshape(count, 2)
        return SplitRequest(tuple((int(f), int(o)) for f, o in pairs))
    if msg_type is MsgType.SPLIT_REPLY:
        count = _count(payload, 12)
        entries = tuple(struct.unpack_from("<IIi", payload, 4 + 12 * i) for i in range(count))
        return SplitReply(entries)
    if msg_type is MsgType.HELLO:
        if len(payload) != 5:
            raise ProtocolError("bad hello")
        return Hello(*struct.unpack("<IB", payload))
    if msg_type is MsgType.END:
        return None
    if msg_type is MsgType.ERROR:
        raise ProtocolError(f"peer error: {payload.decode('utf-8', 'replace')}")
    raise ProtocolError(f"unexpected message type {msg_type!r}")


def reply_size(count: int) -> int:
    return HEADER_SIZE + 4 + 12 * count


def request_size(count: int) -> int:
    return HEADER_SIZE + 4 + 8 * count


def feature_size(n: int) -> int:
    return HEADER_SIZE + 8 + 4 * n

"""CCSDS-style space packet codec.

The 6-byte primary header is packed big-endian as three 16-bit words:

    word 0: version(3, =0) | type(1) | sec_hdr_flag(1, =0) | apid(11)
    word 1: seq_flags(2, =0b11 unsegmented) | seq_count(14)
    word 2: payload_length - 1

Payloads are 1..65536 bytes; the length word stores length minus one, so a
zero-length payload is unrepresentable and rejected.  Secondary headers and
segmentation are out of scope: the flag bits are fixed.

All functions are pure; packets are immutable values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

HEADER_LEN = 6
MAX_APID = 0x7FF
MAX_SEQ_COUNT = 0x3FFF
MAX_PAYLOAD = 0x10000
SEQ_FLAGS_UNSEGMENTED = 0b11


class PacketError(Exception):
    """Base class for codec failures."""


class EmptyPayload(PacketError):
    pass


class FieldOverflow(PacketError):
    pass


class Truncated(PacketError):
    pass


class BadVersion(PacketError):
    pass


class LengthMismatch(PacketError):
    """Trailing bytes beyond the declared packet length."""


class UnsupportedFlags(PacketError):
    """Secondary-header or segmentation flags this codec does not carry."""


class PacketType(IntEnum):
    TELEMETRY = 0
    COMMAND = 1


@dataclass(frozen=True)
class SpacePacket:
    ptype: PacketType
    apid: int
    seq_count: int
    payload: bytes

    def validate(self) -> None:
        if not 0 <= self.apid <= MAX_APID:
            raise FieldOverflow(f"apid {self.apid:#x} exceeds 11 bits")
        if not 0 <= self.seq_count <= MAX_SEQ_COUNT:
            raise FieldOverflow(f"seq_count {self.seq_count} exceeds 14 bits")
        if len(self.payload) == 0:
            raise EmptyPayload("payload must be at least 1 byte")
        if len(self.payload) > MAX_PAYLOAD:
            raise FieldOverflow(f"payload of {len(self.payload)} bytes exceeds 65536")


def encode(p: SpacePacket) -> bytes:
    """Encode a packet; output is always 6 + len(payload) bytes."""
    p.validate()
    word0 = (int(p.ptype) << 12) | p.apid
    word1 = (SEQ_FLAGS_UNSEGMENTED << 14) | p.seq_count
    word2 = len(p.payload) - 1
    return struct.pack(">HHH", word0, word1, word2) + bytes(p.payload)


def decode(b: bytes) -> SpacePacket:
    """Decode bytes into a packet, or raise a typed PacketError."""
    if len(b) < HEADER_LEN + 1:
        raise Truncated(f"need at least 7 bytes, got {len(b)}")
    word0, word1, word2 = struct.unpack(">HHH", b[:HEADER_LEN])
    if word0 >> 13 != 0:
        raise BadVersion(f"version bits {word0 >> 13:#05b}")
    if (word0 >> 11) & 1:
        raise UnsupportedFlags("secondary-header flag set")
    if word1 >> 14 != SEQ_FLAGS_UNSEGMENTED:
        raise UnsupportedFlags(f"segmented seq_flags {word1 >> 14:#04b}")
    declared = word2 + 1
    body = b[HEADER_LEN:]
    if len(body) < declared:
        raise Truncated(f"declared {declared} payload bytes, got {len(body)}")
    if len(body) > declared:
        raise LengthMismatch(f"{len(body) - declared} trailing bytes")
    return SpacePacket(
        ptype=PacketType((word0 >> 12) & 1),
        apid=word0 & MAX_APID,
        seq_count=word1 & MAX_SEQ_COUNT,
        payload=bytes(body),
    )

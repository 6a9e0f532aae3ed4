"""Frame codec for the QUIC-subset transport.

Fixed-width big-endian fields; no varints.  Wire formats:

    PADDING          0x00
    PING             0x01
    ACK              0x02 largest:u64 ack_delay_us:u32 range_count:u8
                          first_range:u16 (gap:u16 range:u16)*
    CRYPTO           0x04 offset:u32 len:u16 data
    STREAM           0x06 stream_id:u32 offset:u64 len:u16 fin:u8 data
    DATAGRAM         0x07 len:u16 data
    CONNECTION_CLOSE 0x1c code:u16 reason_len:u16 reason

ACK ranges are descending and non-adjacent: the first block covers
[largest - first_range, largest]; after a block with smallest s, a (gap,
range) pair covers [next - range, next] with next = s - gap - 2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

FRAME_PADDING = 0x00
FRAME_PING = 0x01
FRAME_ACK = 0x02
FRAME_CRYPTO = 0x04
FRAME_STREAM = 0x06
FRAME_DATAGRAM = 0x07
FRAME_CONNECTION_CLOSE = 0x1C

ERR_UNKNOWN_FRAME = 0x07


class FrameError(Exception):
    pass


class UnknownFrameType(FrameError):
    def __init__(self, ftype: int):
        super().__init__(f"unknown frame type {ftype:#04x}")
        self.ftype = ftype
        self.error_code = ERR_UNKNOWN_FRAME


@dataclass(frozen=True)
class Padding:
    count: int = 1


@dataclass(frozen=True)
class Ping:
    pass


@dataclass(frozen=True)
class Ack:
    largest: int
    ack_delay_us: int
    # (high, low) inclusive pn blocks, descending, non-overlapping
    ranges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Crypto:
    offset: int
    data: bytes


@dataclass(frozen=True)
class Stream:
    stream_id: int
    offset: int
    data: bytes
    fin: bool = False


@dataclass(frozen=True)
class Datagram:
    data: bytes


@dataclass(frozen=True)
class ConnectionClose:
    code: int
    reason: bytes = b""


Frame = Padding | Ping | Ack | Crypto | Stream | Datagram | ConnectionClose

#: Frames that count toward bytes_in_flight and must be acknowledged.
ACK_ELICITING = (Ping, Crypto, Stream, Datagram)
#: Frame payloads re-queued when their carrier packet is declared lost.
RETRANSMITTABLE = (Crypto, Stream)


def ack_from_ranges(ranges: list[tuple[int, int]], ack_delay_us: int) -> Ack:
    """Build an Ack from descending (high, low) blocks."""
    if not ranges:
        raise FrameError("ack needs at least one range")
    return Ack(largest=ranges[0][0], ack_delay_us=ack_delay_us, ranges=tuple(ranges))


def encode_frames(frames: list[Frame]) -> bytes:
    out = bytearray()
    for f in frames:
        if isinstance(f, Padding):
            out.extend(b"\x00" * f.count)
        elif isinstance(f, Ping):
            out.append(FRAME_PING)
        elif isinstance(f, Ack):
            first_high, first_low = f.ranges[0]
            if first_high != f.largest:
                raise FrameError("largest must equal first range high")
            out.append(FRAME_ACK)
            out.extend(struct.pack(">QIB", f.largest, f.ack_delay_us, len(f.ranges) - 1))
            out.extend(struct.pack(">H", first_high - first_low))
            prev_low = first_low
            for high, low in f.ranges[1:]:
                gap = prev_low - high - 2
                if gap < 0:
                    raise FrameError("ack ranges must descend with gaps")
                out.extend(struct.pack(">HH", gap, high - low))
                prev_low = low
        elif isinstance(f, Crypto):
            out.append(FRAME_CRYPTO)
            out.extend(struct.pack(">IH", f.offset, len(f.data)))
            out.extend(f.data)
        elif isinstance(f, Stream):
            out.append(FRAME_STREAM)
            out.extend(
                struct.pack(">IQHB", f.stream_id, f.offset, len(f.data), 1 if f.fin else 0)
            )
            out.extend(f.data)
        elif isinstance(f, Datagram):
            out.append(FRAME_DATAGRAM)
            out.extend(struct.pack(">H", len(f.data)))
            out.extend(f.data)
        elif isinstance(f, ConnectionClose):
            out.append(FRAME_CONNECTION_CLOSE)
            out.extend(struct.pack(">HH", f.code, len(f.reason)))
            out.extend(f.reason)
        else:
            raise FrameError(f"cannot encode {type(f).__name__}")
    return bytes(out)


def frame_size(f: Frame) -> int:
    return len(encode_frames([f]))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise FrameError("truncated frame")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_frames(payload: bytes) -> list[Frame]:
    """Parse a packet plaintext into frames; PADDING runs are coalesced."""
    rd = _Reader(payload)
    frames: list[Frame] = []
    while rd.remaining():
        ftype = rd.take(1)[0]
        if ftype == FRAME_PADDING:
            count = 1
            while rd.remaining() and rd.data[rd.pos] == 0:
                rd.pos += 1
                count += 1
            frames.append(Padding(count))
        elif ftype == FRAME_PING:
            frames.append(Ping())
        elif ftype == FRAME_ACK:
            largest, delay, extra = rd.unpack(">QIB")
            (first_range,) = rd.unpack(">H")
            low = largest - first_range
            if low < 0:
                raise FrameError("ack range below zero")
            ranges = [(largest, low)]
            for _ in range(extra):
                gap, rng = rd.unpack(">HH")
                high = low - gap - 2
                low = high - rng
                if low < 0:
                    raise FrameError("ack range below zero")
                ranges.append((high, low))
            frames.append(Ack(largest, delay, tuple(ranges)))
        elif ftype == FRAME_CRYPTO:
            offset, length = rd.unpack(">IH")
            frames.append(Crypto(offset, rd.take(length)))
        elif ftype == FRAME_STREAM:
            stream_id, offset, length, fin = rd.unpack(">IQHB")
            frames.append(Stream(stream_id, offset, rd.take(length), bool(fin)))
        elif ftype == FRAME_DATAGRAM:
            (length,) = rd.unpack(">H")
            frames.append(Datagram(rd.take(length)))
        elif ftype == FRAME_CONNECTION_CLOSE:
            code, rlen = rd.unpack(">HH")
            frames.append(ConnectionClose(code, rd.take(rlen)))
        else:
            raise UnknownFrameType(ftype)
    return frames

#!/usr/bin/env python3
"""Space packets: the common payload unit both security layers carry.

A packet is a 6-byte big-endian header (type, APID, sequence count, length)
followed by 1..65536 payload bytes.  Encoding is bit-exact and decoding
rejects anything malformed with a typed error.
"""

from spacelink import packet
from spacelink.packet import PacketType, SpacePacket

print("== encode a command packet ==")
p = SpacePacket(PacketType.COMMAND, apid=0x042, seq_count=1, payload=bytes([0xAB]))
raw = packet.encode(p)
print(f"fields : {p}")
print(f"wire   : {raw.hex(' ')}   ({len(raw)} bytes = 6 header + 1 payload)")

print("\n== decode is the exact inverse ==")
back = packet.decode(raw)
print(f"decoded: {back}")
assert back == p

print("\n== malformed inputs raise typed errors ==")
for blob, label in [
    (raw[:6], "truncated to header only"),
    (bytes([0x30]) + raw[1:], "version bits set"),
    (raw + b"\x00", "trailing byte"),
]:
    try:
        packet.decode(blob)
    except packet.PacketError as exc:
        print(f"{label:28s} -> {type(exc).__name__}: {exc}")

print("\n== zero-length payloads are unrepresentable ==")
try:
    packet.encode(SpacePacket(PacketType.COMMAND, 1, 1, b""))
except packet.EmptyPayload as exc:
    print(f"empty payload -> EmptyPayload: {exc}")

"""Command, housekeeping and event payload schemas, and the APID map.

Command payload (inside a command space packet):

    fc:u8  [args]  checksum:u8

    fc 0 NOOP            no args
    fc 1 RESET_COUNTERS  no args
    fc 2 SET_PARAM       id:u8 value:u32
    fc 3 REQUEST_HK      no args

The checksum byte is the XOR of the whole payload with the checksum field
zeroed, i.e. a valid payload XORs to zero.

Housekeeping telemetry payload (32 bytes):

    cmd_accept_count:u32  cmd_reject_count:u32  param_table:4*u32  uptime_us:u64

Event telemetry payload (5 bytes), the command acknowledgement path:

    kind:u8 (0 accept, 1 reject)  fc:u8  cmd_seq:u16  reason:u8

Bulk-transfer payload for the stop-and-wait shim:

    kind:u8 (0 data, 1 ack)  seq:u32  [chunk]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

FC_NOOP = 0
FC_RESET_COUNTERS = 1
FC_SET_PARAM = 2
FC_REQUEST_HK = 3
FUNCTION_CODES = (FC_NOOP, FC_RESET_COUNTERS, FC_SET_PARAM, FC_REQUEST_HK)

PARAM_TABLE_SIZE = 4

EVT_ACCEPT = 0
EVT_REJECT = 1

REASON_NONE = 0
REASON_CHECKSUM = 1
REASON_UNKNOWN_FC = 2
REASON_BAD_PARAM = 3
REASON_MALFORMED = 4

# APID assignments (one flat namespace, two entries per app):
APID_CMD = 0x042  # command ingest
APID_HK = 0x010  # housekeeping telemetry
APID_EVT = 0x011  # command acceptance/rejection events
APID_BULK_DATA = 0x050  # bulk uplink chunks (stop-and-wait shim)
APID_BULK_ACK = 0x051  # bulk acknowledgements, downlink


def mid_for(apid: int, is_command: bool) -> int:
    """Static APID -> MessageId map, cFS-flavoured 16-bit ids."""
    return (0x1800 if is_command else 0x0800) | apid


MID_CMD = mid_for(APID_CMD, True)
MID_HK = mid_for(APID_HK, False)
MID_EVT = mid_for(APID_EVT, False)
MID_BULK_DATA = mid_for(APID_BULK_DATA, True)


class SchemaError(Exception):
    pass


class BadChecksum(SchemaError):
    pass


class UnknownFunctionCode(SchemaError):
    pass


@dataclass(frozen=True)
class Command:
    fc: int
    param_id: int = 0
    value: int = 0


def encode_command(cmd: Command) -> bytes:
    if cmd.fc == FC_SET_PARAM:
        body = struct.pack(">BBI", cmd.fc, cmd.param_id, cmd.value)
    elif cmd.fc in FUNCTION_CODES:
        body = struct.pack(">B", cmd.fc)
    else:
        raise UnknownFunctionCode(str(cmd.fc))
    checksum = 0
    for b in body:
        checksum ^= b
    return body + bytes([checksum])


def decode_command(payload: bytes) -> Command:
    if len(payload) < 2:
        raise SchemaError(f"command payload of {len(payload)} bytes")
    total = 0
    for b in payload:
        total ^= b
    if total != 0:
        raise BadChecksum(f"xor residue {total:#04x}")
    fc = payload[0]
    if fc == FC_SET_PARAM:
        if len(payload) != 7:
            raise SchemaError("SET_PARAM needs id and value")
        _, param_id, value = struct.unpack(">BBI", payload[:-1])
        return Command(fc, param_id, value)
    if fc in FUNCTION_CODES:
        if len(payload) != 2:
            raise SchemaError(f"fc {fc} takes no args")
        return Command(fc)
    raise UnknownFunctionCode(str(fc))


@dataclass(frozen=True)
class HkTelemetry:
    cmd_accept_count: int
    cmd_reject_count: int
    param_table: tuple[int, int, int, int]
    uptime_us: int


def encode_hk(hk: HkTelemetry) -> bytes:
    return struct.pack(
        ">II4IQ",
        hk.cmd_accept_count,
        hk.cmd_reject_count,
        *hk.param_table,
        hk.uptime_us,
    )


def decode_hk(payload: bytes) -> HkTelemetry:
    if len(payload) != 32:
        raise SchemaError(f"housekeeping payload of {len(payload)} bytes")
    fields = struct.unpack(">II4IQ", payload)
    return HkTelemetry(fields[0], fields[1], tuple(fields[2:6]), fields[6])


@dataclass(frozen=True)
class EventTelemetry:
    kind: int
    fc: int
    cmd_seq: int
    reason: int = REASON_NONE


def encode_event(evt: EventTelemetry) -> bytes:
    return struct.pack(">BBHB", evt.kind, evt.fc, evt.cmd_seq, evt.reason)


def decode_event(payload: bytes) -> EventTelemetry:
    if len(payload) != 5:
        raise SchemaError(f"event payload of {len(payload)} bytes")
    return EventTelemetry(*struct.unpack(">BBHB", payload))


BULK_DATA = 0
BULK_ACK = 1


def encode_bulk(kind: int, seq: int, chunk: bytes = b"") -> bytes:
    return struct.pack(">BI", kind, seq) + chunk


def decode_bulk(payload: bytes) -> tuple[int, int, bytes]:
    if len(payload) < 5:
        raise SchemaError("bulk payload too short")
    kind, seq = struct.unpack(">BI", payload[:5])
    return kind, seq, payload[5:]

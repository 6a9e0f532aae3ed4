"""Datagram-level packet forms for the QUIC-subset transport.

Two forms share a 64-bit connection id and a 4-byte wire packet number
(64-bit internally; wraparound is a connection error long before it could
happen at desk scale):

    long  (handshake/0-RTT):
        byte0 = 0xC0 | type   type 0 = initial, 1 = zero-rtt
        version:u32 = 0x53510001
        conn_id:8  pn:u32 (cleartext)  payload_len:u16  payload(ct||tag)

    short (1-RTT application):
        byte0 = 0x40
        conn_id:8  pn:u32 (masked)  ct||tag

AEAD nonce = iv XOR pad12(pn); the AAD is the full cleartext header (19 or
13 bytes).  Short-form headers additionally get header protection: with
sample = first 16 ciphertext bytes, mask = sha256(hp_key || sample)[0:4] is
XORed over the pn field.  Applying the mask twice restores the field, and
the ciphertext must therefore be at least 16 bytes (packets are padded with
PADDING frames before sealing to guarantee a sample).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from .. import aead as _aead
from .keys import DirectionKeys

VERSION = 0x53510001
CONN_ID_LEN = 8
MSS = 1200
LONG_HEADER_LEN = 1 + 4 + CONN_ID_LEN + 4 + 2
SHORT_HEADER_LEN = 1 + CONN_ID_LEN + 4
MIN_PLAINTEXT = 16  # guarantees a header-protection sample

LONG_INITIAL = 0
LONG_ZERO_RTT = 1


class WireError(Exception):
    pass


class Oversize(WireError):
    pass


class MalformedHeader(WireError):
    pass


@dataclass(frozen=True)
class ParsedHeader:
    form_long: bool
    long_type: int  # meaningful when form_long
    conn_id: bytes
    pn_offset: int  # byte offset of the pn field
    header_len: int
    payload_len: int  # long form only; short form runs to the end


def max_plaintext(form_long: bool) -> int:
    header = LONG_HEADER_LEN if form_long else SHORT_HEADER_LEN
    return MSS - header - _aead.TAG_LEN


def _nonce(iv: bytes, pn: int) -> bytes:
    return bytes(a ^ b for a, b in zip(iv, pn.to_bytes(12, "big")))


def _hp_mask(hp_key: bytes, sample: bytes) -> bytes:
    return hashlib.sha256(hp_key + sample).digest()[:4]


def seal_long(
    long_type: int, conn_id: bytes, pn: int, plaintext: bytes, keys: DirectionKeys, cipher
) -> bytes:
    if len(plaintext) > max_plaintext(True):
        raise Oversize(f"{len(plaintext)} plaintext bytes")
    header = struct.pack(
        ">BI8sIH",
        0xC0 | long_type,
        VERSION,
        conn_id,
        pn & 0xFFFFFFFF,
        len(plaintext) + _aead.TAG_LEN,
    )
    ct_tag = _aead.seal(cipher, _nonce(keys.iv, pn), plaintext, header)
    return header + ct_tag


def seal_short(
    conn_id: bytes, pn: int, plaintext: bytes, keys: DirectionKeys, cipher
) -> bytes:
    if len(plaintext) < MIN_PLAINTEXT:
        plaintext = plaintext + b"\x00" * (MIN_PLAINTEXT - len(plaintext))
    if len(plaintext) > max_plaintext(False):
        raise Oversize(f"{len(plaintext)} plaintext bytes")
    header = struct.pack(">B8sI", 0x40, conn_id, pn & 0xFFFFFFFF)
    ct_tag = _aead.seal(cipher, _nonce(keys.iv, pn), plaintext, header)
    mask = _hp_mask(keys.hp, ct_tag[:16])
    masked = bytes(a ^ b for a, b in zip(header[-4:], mask))
    return header[:-4] + masked + ct_tag


def parse_header(datagram: bytes) -> ParsedHeader:
    if not datagram:
        raise MalformedHeader("empty datagram")
    byte0 = datagram[0]
    if byte0 & 0x80:
        if len(datagram) < LONG_HEADER_LEN:
            raise MalformedHeader("long header truncated")
        version, conn_id, _pn, payload_len = struct.unpack(
            ">I8sIH", datagram[1:LONG_HEADER_LEN]
        )
        if version != VERSION:
            raise MalformedHeader(f"version {version:#010x}")
        if len(datagram) < LONG_HEADER_LEN + payload_len:
            raise MalformedHeader("long payload truncated")
        return ParsedHeader(
            form_long=True,
            long_type=byte0 & 0x3F,
            conn_id=conn_id,
            pn_offset=1 + 4 + CONN_ID_LEN,
            header_len=LONG_HEADER_LEN,
            payload_len=payload_len,
        )
    if byte0 != 0x40:
        raise MalformedHeader(f"unknown form byte {byte0:#04x}")
    if len(datagram) < SHORT_HEADER_LEN + MIN_PLAINTEXT + _aead.TAG_LEN:
        raise MalformedHeader("short packet below minimum size")
    return ParsedHeader(
        form_long=False,
        long_type=-1,
        conn_id=datagram[1 : 1 + CONN_ID_LEN],
        pn_offset=1 + CONN_ID_LEN,
        header_len=SHORT_HEADER_LEN,
        payload_len=len(datagram) - SHORT_HEADER_LEN,
    )


def open_long(datagram: bytes, hdr: ParsedHeader, keys: DirectionKeys, cipher):
    """Return (pn, plaintext) of a long-form packet."""
    pn = int.from_bytes(datagram[hdr.pn_offset : hdr.pn_offset + 4], "big")
    header = datagram[: hdr.header_len]
    ct_tag = datagram[hdr.header_len : hdr.header_len + hdr.payload_len]
    plaintext = _aead.open_(cipher, _nonce(keys.iv, pn), ct_tag, header)
    return pn, plaintext


def open_short(datagram: bytes, hdr: ParsedHeader, keys: DirectionKeys, cipher):
    """Unmask the pn, then open; returns (pn, plaintext)."""
    ct_tag = datagram[hdr.header_len :]
    mask = _hp_mask(keys.hp, ct_tag[:16])
    masked = datagram[hdr.pn_offset : hdr.pn_offset + 4]
    pn = int.from_bytes(bytes(a ^ b for a, b in zip(masked, mask)), "big")
    header = datagram[: hdr.pn_offset] + pn.to_bytes(4, "big")
    plaintext = _aead.open_(cipher, _nonce(keys.iv, pn), ct_tag, header)
    return pn, plaintext

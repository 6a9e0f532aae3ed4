"""Symmetric link security: AEAD framing of space packets under pre-shared
keys with anti-replay, the baseline the QUIC-subset transport is compared
against.

Wire layout of a secured frame:

    primary header (6, cleartext) || spi (2 BE) || seq (8 BE) ||
    ciphertext (= payload length) || tag (16)

The AEAD covers the payload only; the primary header and security header are
authenticated as associated data.  Nonce = iv_base(4) || seq(8 BE), so a
(key, seq) pair is never reused: the send counter increments on every apply
and exhaustion is an error rather than a wrap.

Replay protection is a 64-entry sliding bitmap over received sequence
numbers: a frame is accepted iff its seq has not been seen and is no older
than highest_received - 63.  The window only advances on frames that pass
authentication, so forgeries cannot poison it.

A SecurityAssociation is unidirectional; a node pair uses one SA per
direction, each with its own key.  State is bounded: the serialized size of
an SA is the constant  spi(2) + key(32) + iv_base(4) + send_seq(8) +
highest_recv_seq(8) + window(8) = 62 bytes, which is what
`state_footprint` reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import aead as _aead
from . import packet as _packet
from .aead import AuthFail

SEC_HEADER_LEN = 10
OVERHEAD = SEC_HEADER_LEN + _aead.TAG_LEN
REPLAY_WINDOW = 64
MAX_SEQ = 2**64 - 1
SA_FOOTPRINT = 2 + 32 + 4 + 8 + 8 + 8


class SdlsError(Exception):
    pass


class SeqExhausted(SdlsError):
    pass


class Replay(SdlsError):
    pass


class UnknownSpi(SdlsError):
    pass


class FrameTooShort(SdlsError):
    pass


@dataclass
class SecurityAssociation:
    spi: int
    key: bytes
    iv_base: bytes
    backend: str = "gcm"
    send_seq: int = 0
    highest_recv_seq: int = -1  # -1 = nothing received yet
    replay_window: int = 0  # bit i set = (highest_recv_seq - i) seen
    _cipher: object = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.key) != _aead.KEY_LEN:
            raise SdlsError(f"key must be {_aead.KEY_LEN} bytes")
        if len(self.iv_base) != 4:
            raise SdlsError("iv_base must be 4 bytes")
        if not 0 <= self.spi <= 0xFFFF:
            raise SdlsError("spi must fit in 16 bits")
        self._cipher = _aead.new_aead(self.backend, self.key)

    # -- replay window --------------------------------------------------

    def _replay_check(self, seq: int) -> None:
        if seq <= self.highest_recv_seq:
            offset = self.highest_recv_seq - seq
            if offset >= REPLAY_WINDOW:
                raise Replay(f"seq {seq} below window")
            if (self.replay_window >> offset) & 1:
                raise Replay(f"seq {seq} already accepted")

    def _replay_update(self, seq: int) -> None:
        if seq > self.highest_recv_seq:
            shift = seq - self.highest_recv_seq
            if shift >= REPLAY_WINDOW:
                self.replay_window = 1
            else:
                self.replay_window = ((self.replay_window << shift) | 1) & (
                    (1 << REPLAY_WINDOW) - 1
                )
            self.highest_recv_seq = seq
        else:
            self.replay_window |= 1 << (self.highest_recv_seq - seq)

    def state_footprint(self) -> int:
        """Serialized size of the live SA state, in bytes (constant)."""
        return SA_FOOTPRINT


def apply(sa: SecurityAssociation, p: _packet.SpacePacket) -> bytes:
    """Protect a packet, consuming the next send sequence number."""
    if sa.send_seq >= MAX_SEQ:
        raise SeqExhausted("send counter exhausted; rekey required")
    encoded = _packet.encode(p)
    header = encoded[:6]
    payload = encoded[6:]
    seq = sa.send_seq
    sec_header = sa.spi.to_bytes(2, "big") + seq.to_bytes(8, "big")
    nonce = sa.iv_base + seq.to_bytes(8, "big")
    ct_tag = _aead.seal(sa._cipher, nonce, payload, header + sec_header)
    sa.send_seq += 1
    return header + sec_header + ct_tag


def accept(sa_store, frame: bytes) -> _packet.SpacePacket:
    """Verify, decrypt and replay-check a secured frame.

    `sa_store` is either a single SecurityAssociation or a mapping
    spi -> SecurityAssociation.
    """
    if len(frame) < 6 + SEC_HEADER_LEN + _aead.TAG_LEN:
        raise FrameTooShort(f"{len(frame)} bytes")
    header = frame[:6]
    spi = int.from_bytes(frame[6:8], "big")
    seq = int.from_bytes(frame[8:16], "big")
    ct_tag = frame[16:]

    if isinstance(sa_store, SecurityAssociation):
        if sa_store.spi != spi:
            raise UnknownSpi(f"spi {spi:#06x}")
        sa = sa_store
    else:
        try:
            sa = sa_store[spi]
        except KeyError:
            raise UnknownSpi(f"spi {spi:#06x}") from None

    nonce = sa.iv_base + seq.to_bytes(8, "big")
    payload = _aead.open_(sa._cipher, nonce, ct_tag, frame[:16])
    # Authenticated; now enforce at-most-once.
    sa._replay_check(seq)
    sa._replay_update(seq)
    return _packet.decode(header + payload)


def load_key_store(path: str, backend: str = "gcm") -> dict[int, SecurityAssociation]:
    """Read `spi = keyhex[:ivhex]` lines into fresh SAs.

    Lines starting with '#' and blank lines are ignored.  The optional iv
    part defaults to the low 4 bytes of the SPI, which is fine for tests and
    demos where each SPI has a distinct key.
    """
    store: dict[int, SecurityAssociation] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            spi = int(name.strip(), 0)
            key_hex, _, iv_hex = value.strip().partition(":")
            iv = bytes.fromhex(iv_hex) if iv_hex else spi.to_bytes(4, "big")
            store[spi] = SecurityAssociation(
                spi=spi, key=bytes.fromhex(key_hex), iv_base=iv, backend=backend
            )
    return store

"""Key schedule for the QUIC-subset transport.

Extract-and-expand (RFC 5869 style, SHA-256 throughout) drives every secret:

    early_secret     = Extract(salt=0*32, ikm=psk or 0*32)
    handshake_secret = Extract(salt=Expand(early_secret, "derived", 32),
                               ikm=x25519 shared secret)
    app_secret[d]    = Expand(handshake_secret, d || transcript, 32)
                       for d in {"c ap", "s ap"}
    key / iv / hp    = Expand(app_secret[d], "key"/"iv"/"hp", 32/12/32)

Handshake packets are protected under *initial* keys derived solely from the
connection id (Extract(0*32, conn_id) then the same per-direction expand
with "c in"/"s in" labels).  Those keys are obfuscation, not secrecy:
anyone seeing the wire can derive them.

Early (0-RTT) data uses Expand(early_secret, "e ap" || sha256(ClientHello),
32); the resumption secret for a ticket is Expand(handshake_secret,
"res" || ticket, 32), so knowing the wire ticket alone does not give the
next connection's keys.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

HASH_LEN = 32
KEY_LEN = 32
IV_LEN = 12
HP_LEN = 32
ZEROS = b"\x00" * 32


def hkdf_extract(salt: bytes, ikm: bytes) -> bytes:
    return hmac.new(salt, ikm, hashlib.sha256).digest()


def hkdf_expand(prk: bytes, info: bytes, length: int) -> bytes:
    out = b""
    block = b""
    counter = 1
    while len(out) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hashlib.sha256).digest()
        out += block
        counter += 1
    return out[:length]


@dataclass(frozen=True)
class DirectionKeys:
    key: bytes
    iv: bytes
    hp: bytes

    def footprint(self) -> int:
        return len(self.key) + len(self.iv) + len(self.hp)


def _direction_keys(secret: bytes) -> DirectionKeys:
    return DirectionKeys(
        key=hkdf_expand(secret, b"key", KEY_LEN),
        iv=hkdf_expand(secret, b"iv", IV_LEN),
        hp=hkdf_expand(secret, b"hp", HP_LEN),
    )


def derive_secrets(
    psk: bytes | None, shared: bytes, transcript: bytes
) -> tuple[DirectionKeys, DirectionKeys, bytes]:
    """Application keys per direction: (client, server, handshake_secret)."""
    early = hkdf_extract(ZEROS, psk if psk is not None else ZEROS)
    handshake = hkdf_extract(hkdf_expand(early, b"derived", HASH_LEN), shared)
    client = _direction_keys(hkdf_expand(handshake, b"c ap" + transcript, HASH_LEN))
    server = _direction_keys(hkdf_expand(handshake, b"s ap" + transcript, HASH_LEN))
    return client, server, handshake


def initial_keys(conn_id: bytes) -> tuple[DirectionKeys, DirectionKeys]:
    """Obfuscation keys both peers derive from the connection id alone."""
    init = hkdf_extract(ZEROS, conn_id)
    client = _direction_keys(hkdf_expand(init, b"c in", HASH_LEN))
    server = _direction_keys(hkdf_expand(init, b"s in", HASH_LEN))
    return client, server


def early_data_keys(psk: bytes, ch_hash: bytes) -> DirectionKeys:
    """Client->server 0-RTT keys, derivable as soon as the hello exists."""
    early = hkdf_extract(ZEROS, psk)
    return _direction_keys(hkdf_expand(early, b"e ap" + ch_hash, HASH_LEN))


def resumption_psk(handshake_secret: bytes, ticket: bytes) -> bytes:
    return hkdf_expand(handshake_secret, b"res" + ticket, HASH_LEN)

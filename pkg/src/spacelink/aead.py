"""AEAD backend selection shared by the link-security layers.

Two interchangeable ciphers stand in for the dual crypto backends the stack
is meant to support: AES-256-GCM (default) and ChaCha20-Poly1305.  Both take
32-byte keys and 12-byte nonces and append a 16-byte tag, so frame layouts
are identical whichever backend a run selects.
"""

from __future__ import annotations

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305

KEY_LEN = 32
NONCE_LEN = 12
TAG_LEN = 16

BACKENDS = ("gcm", "chacha")


class AuthFail(Exception):
    """Tag verification failed; the frame or packet was altered."""


def new_aead(backend: str, key: bytes):
    if len(key) != KEY_LEN:
        raise ValueError(f"key must be {KEY_LEN} bytes, got {len(key)}")
    if backend == "gcm":
        return AESGCM(key)
    if backend == "chacha":
        return ChaCha20Poly1305(key)
    raise ValueError(f"unknown AEAD backend {backend!r}; have {BACKENDS}")


def seal(aead, nonce: bytes, plaintext: bytes, aad: bytes) -> bytes:
    return aead.encrypt(nonce, plaintext, aad)


def open_(aead, nonce: bytes, ct_and_tag: bytes, aad: bytes) -> bytes:
    try:
        return aead.decrypt(nonce, ct_and_tag, aad)
    except InvalidTag as exc:
        raise AuthFail("AEAD tag mismatch") from exc

"""Per-run security mode selection and the keyed material behind it.

Three modes share one node interface:

    none  - packets ride the link bare; zero security state
    sdls  - each direction has its own security association (key + counters)
    quic  - the QUIC-subset transport; commands ride a reliable stream,
            telemetry rides datagram frames

The mode also fixes the reliability story: quic retransmits stream data
itself; none/sdls are fire-and-forget, with the stop-and-wait shim layered
on top only for the reliable-transfer benchmarks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .. import sdls as _sdls

MODES = ("none", "sdls", "quic")

SPI_UPLINK = 1
SPI_DOWNLINK = 2

# Demo key material; real deployments load keys from the config file.
DEMO_KEY_UPLINK = bytes.fromhex("11" * 32)
DEMO_KEY_DOWNLINK = bytes.fromhex("22" * 32)
DEMO_IV_UPLINK = bytes.fromhex("000000a1")
DEMO_IV_DOWNLINK = bytes.fromhex("000000a2")
DEMO_SERVER_SECRET = bytes.fromhex("9d" * 32)


@dataclass
class LinkKeys:
    """Everything both ends need to key one link."""

    sdls_uplink_key: bytes = DEMO_KEY_UPLINK
    sdls_downlink_key: bytes = DEMO_KEY_DOWNLINK
    sdls_uplink_iv: bytes = DEMO_IV_UPLINK
    sdls_downlink_iv: bytes = DEMO_IV_DOWNLINK
    server_secret: bytes = DEMO_SERVER_SECRET
    server_public: bytes = field(default=b"")

    def __post_init__(self):
        identity = Ed25519PrivateKey.from_private_bytes(self.server_secret)
        derived = identity.public_key().public_bytes_raw()
        if not self.server_public:
            self.server_public = derived

    def identity(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.server_secret)

    def uplink_sa(self, backend: str) -> _sdls.SecurityAssociation:
        return _sdls.SecurityAssociation(
            spi=SPI_UPLINK,
            key=self.sdls_uplink_key,
            iv_base=self.sdls_uplink_iv,
            backend=backend,
        )

    def downlink_sa(self, backend: str) -> _sdls.SecurityAssociation:
        return _sdls.SecurityAssociation(
            spi=SPI_DOWNLINK,
            key=self.sdls_downlink_key,
            iv_base=self.sdls_downlink_iv,
            backend=backend,
        )


def keys_from_config(cfg: dict[str, str]) -> LinkKeys:
    """Build link keys from parsed `key = value` config entries."""

    def get_hex(name: str, default: bytes) -> bytes:
        return bytes.fromhex(cfg[name]) if name in cfg else default

    return LinkKeys(
        sdls_uplink_key=get_hex("sdls.key.uplink", DEMO_KEY_UPLINK),
        sdls_downlink_key=get_hex("sdls.key.downlink", DEMO_KEY_DOWNLINK),
        sdls_uplink_iv=get_hex("sdls.iv.uplink", DEMO_IV_UPLINK),
        sdls_downlink_iv=get_hex("sdls.iv.downlink", DEMO_IV_DOWNLINK),
        server_secret=get_hex("quic.server_secret", DEMO_SERVER_SECRET),
        server_public=get_hex("quic.server_public", b""),
    )


def parse_kv_file(path: str) -> dict[str, str]:
    """Plain `key = value` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            out[name.strip()] = value.strip()
    return out


def seeded_rand(seed: int):
    """Deterministic byte source for reproducible simulation runs."""
    rng = random.Random(seed)
    return rng.randbytes

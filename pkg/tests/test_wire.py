import hashlib
import random

import pytest

from spacelink.aead import AuthFail, new_aead
from spacelink.quiclite import frames as fr
from spacelink.quiclite import wire
from spacelink.quiclite.keys import DirectionKeys


def make_keys(seed=1):
    rnd = random.Random(seed)
    return DirectionKeys(rnd.randbytes(32), rnd.randbytes(12), rnd.randbytes(32))


def cipher_for(keys):
    return new_aead("gcm", keys.key)


def test_short_roundtrip():
    keys = make_keys()
    conn = b"\x01" * 8
    frames = [fr.Ping(), fr.Datagram(b"hello short form")]
    plaintext = fr.encode_frames(frames)
    datagram = wire.seal_short(conn, 42, plaintext, keys, cipher_for(keys))
    hdr = wire.parse_header(datagram)
    assert not hdr.form_long
    pn, got = wire.open_short(datagram, hdr, keys, cipher_for(keys))
    assert pn == 42
    assert got[: len(plaintext)] == plaintext


def test_long_roundtrip():
    keys = make_keys(2)
    conn = b"\x02" * 8
    plaintext = fr.encode_frames([fr.Crypto(0, b"client hello bytes")])
    datagram = wire.seal_long(wire.LONG_INITIAL, conn, 0, plaintext, keys, cipher_for(keys))
    hdr = wire.parse_header(datagram)
    assert hdr.form_long and hdr.long_type == wire.LONG_INITIAL
    pn, got = wire.open_long(datagram, hdr, keys, cipher_for(keys))
    assert (pn, got) == (0, plaintext)


def test_protected_packet_fixture(quic_packet_fx):
    fx = quic_packet_fx
    keys = DirectionKeys(
        bytes.fromhex(fx["key_hex"]),
        bytes.fromhex(fx["iv_hex"]),
        bytes.fromhex(fx["hp_hex"]),
    )
    frames_bytes = bytes.fromhex(fx["frames_hex"])
    datagram = wire.seal_short(
        bytes.fromhex(fx["conn_id_hex"]), fx["pn"], frames_bytes, keys, cipher_for(keys)
    )
    assert datagram.hex() == fx["datagram_hex"]
    hdr = wire.parse_header(datagram)
    pn, plaintext = wire.open_short(datagram, hdr, keys, cipher_for(keys))
    assert pn == fx["pn"]
    assert plaintext == frames_bytes


def test_header_protection_is_involution(quic_packet_fx):
    fx = quic_packet_fx
    hp = bytes.fromhex(fx["hp_hex"])
    sample = bytes.fromhex(fx["datagram_hex"])[13 : 13 + 16]
    mask = hashlib.sha256(hp + sample).digest()[:4]
    field = bytes.fromhex("0000002a")
    once = bytes(a ^ b for a, b in zip(field, mask))
    twice = bytes(a ^ b for a, b in zip(once, mask))
    assert once != field
    assert twice == field


def test_short_packets_padded_to_sample_size():
    keys = make_keys(3)
    datagram = wire.seal_short(b"\x03" * 8, 0, b"\x01", keys, cipher_for(keys))
    # 13 header + 16 minimum ciphertext + 16 tag
    assert len(datagram) == 13 + 16 + 16
    hdr = wire.parse_header(datagram)
    _, plaintext = wire.open_short(datagram, hdr, keys, cipher_for(keys))
    assert fr.decode_frames(plaintext) == [fr.Ping(), fr.Padding(15)]


def test_oversize():
    keys = make_keys(4)
    with pytest.raises(wire.Oversize):
        wire.seal_short(b"\x04" * 8, 0, bytes(wire.max_plaintext(False) + 1), keys, cipher_for(keys))
    assert wire.max_plaintext(False) == wire.MSS - 13 - 16
    assert wire.max_plaintext(True) == wire.MSS - 19 - 16


def test_tampered_ciphertext_fails():
    keys = make_keys(5)
    datagram = bytearray(
        wire.seal_short(b"\x05" * 8, 7, bytes(40), keys, cipher_for(keys))
    )
    datagram[20] ^= 0x40
    hdr = wire.parse_header(bytes(datagram))
    with pytest.raises(AuthFail):
        wire.open_short(bytes(datagram), hdr, keys, cipher_for(keys))


def test_parse_header_errors():
    with pytest.raises(wire.MalformedHeader):
        wire.parse_header(b"")
    with pytest.raises(wire.MalformedHeader):
        wire.parse_header(b"\x41" + bytes(50))  # unknown form byte
    with pytest.raises(wire.MalformedHeader):
        wire.parse_header(b"\xc0" + bytes(5))  # truncated long header
    # wrong version
    bad = b"\xc0" + (0xDEAD).to_bytes(4, "big") + bytes(14)
    with pytest.raises(wire.MalformedHeader):
        wire.parse_header(bad)


def test_wire_pn_field_is_masked(quic_packet_fx):
    fx = quic_packet_fx
    datagram = bytes.fromhex(fx["datagram_hex"])
    wire_pn = datagram[9:13]
    assert wire_pn != fx["pn"].to_bytes(4, "big")
    mask = bytes.fromhex(fx["mask_hex"])
    assert bytes(a ^ b for a, b in zip(wire_pn, mask)) == fx["pn"].to_bytes(4, "big")

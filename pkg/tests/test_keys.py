import hashlib
import random

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from spacelink.quiclite import keys as ks


def test_chain_no_psk_matches_fixture(key_schedule_fx):
    fx = key_schedule_fx
    shared = bytes.fromhex(fx["shared_hex"])
    transcript = bytes.fromhex(fx["transcript_hex"])
    client, server, hs = ks.derive_secrets(None, shared, transcript)
    want = fx["no_psk"]
    assert hs.hex() == want["handshake_secret_hex"]
    assert client.key.hex() == want["client"]["key_hex"]
    assert client.iv.hex() == want["client"]["iv_hex"]
    assert client.hp.hex() == want["client"]["hp_hex"]
    assert server.key.hex() == want["server"]["key_hex"]
    assert server.iv.hex() == want["server"]["iv_hex"]
    assert server.hp.hex() == want["server"]["hp_hex"]


def test_chain_with_psk_matches_fixture(key_schedule_fx):
    fx = key_schedule_fx
    client, server, hs = ks.derive_secrets(
        bytes.fromhex(fx["psk_hex"]),
        bytes.fromhex(fx["shared_hex"]),
        bytes.fromhex(fx["transcript_hex"]),
    )
    want = fx["with_psk"]
    assert hs.hex() == want["handshake_secret_hex"]
    assert client.key.hex() == want["client"]["key_hex"]
    assert server.hp.hex() == want["server"]["hp_hex"]


def test_fixture_ephemerals_reproduce_shared(key_schedule_fx):
    fx = key_schedule_fx
    priv_c = X25519PrivateKey.from_private_bytes(bytes.fromhex(fx["eph_client_priv_hex"]))
    assert priv_c.public_key().public_bytes_raw().hex() == fx["eph_client_pub_hex"]
    priv_s = X25519PrivateKey.from_private_bytes(bytes.fromhex(fx["eph_server_priv_hex"]))
    shared = priv_c.exchange(priv_s.public_key())
    assert shared.hex() == fx["shared_hex"]


def test_initial_keys_match_fixture(key_schedule_fx):
    fx = key_schedule_fx
    client, server = ks.initial_keys(bytes.fromhex(fx["conn_id_hex"]))
    assert client.key.hex() == fx["initial"]["client"]["key_hex"]
    assert client.iv.hex() == fx["initial"]["client"]["iv_hex"]
    assert server.hp.hex() == fx["initial"]["server"]["hp_hex"]


def test_early_data_keys_match_fixture(key_schedule_fx):
    fx = key_schedule_fx
    keys = ks.early_data_keys(
        bytes.fromhex(fx["psk_hex"]), bytes.fromhex(fx["ch_hash_hex"])
    )
    assert keys.key.hex() == fx["early_data"]["key_hex"]
    assert keys.iv.hex() == fx["early_data"]["iv_hex"]
    assert keys.hp.hex() == fx["early_data"]["hp_hex"]


def test_resumption_psk_matches_fixture(key_schedule_fx):
    fx = key_schedule_fx
    hs_with_psk = fx["with_psk"]["handshake_secret_hex"]
    psk = ks.resumption_psk(bytes.fromhex(hs_with_psk), bytes.fromhex(fx["ticket_hex"]))
    assert psk.hex() == fx["resumption_psk_hex"]


def test_psk_changes_app_secrets():
    shared = b"\x11" * 32
    transcript = hashlib.sha256(b"t").digest()
    no_psk = ks.derive_secrets(None, shared, transcript)
    with_psk = ks.derive_secrets(b"\x22" * 32, shared, transcript)
    assert no_psk[0].key != with_psk[0].key
    assert no_psk[1].key != with_psk[1].key


def test_dh_symmetry_randomized_1000():
    rnd = random.Random(555)
    for _ in range(1000):
        a = X25519PrivateKey.from_private_bytes(rnd.randbytes(32))
        b = X25519PrivateKey.from_private_bytes(rnd.randbytes(32))
        shared_a = a.exchange(b.public_key())
        shared_b = b.exchange(a.public_key())
        assert shared_a == shared_b
        transcript = rnd.randbytes(32)
        keys_a = ks.derive_secrets(None, shared_a, transcript)
        keys_b = ks.derive_secrets(None, shared_b, transcript)
        assert keys_a[0] == keys_b[0] and keys_a[1] == keys_b[1]


def test_directions_differ():
    client, server, _ = ks.derive_secrets(None, b"\x33" * 32, b"\x44" * 32)
    assert client != server

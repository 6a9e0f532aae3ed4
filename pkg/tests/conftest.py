import json
import os

import pytest

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture(name: str) -> dict:
    with open(os.path.join(FIXTURE_DIR, name)) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def packet_vectors():
    return load_fixture("space_packets.json")["vectors"]


@pytest.fixture(scope="session")
def sdls_kat():
    return load_fixture("sdls_kat.json")


@pytest.fixture(scope="session")
def key_schedule_fx():
    return load_fixture("key_schedule.json")


@pytest.fixture(scope="session")
def quic_packet_fx():
    return load_fixture("quic_packet.json")

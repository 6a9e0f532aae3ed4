#!/usr/bin/env python3
"""The QUIC-subset transport: a one-round-trip asymmetric handshake (zero
with a resumption ticket), AEAD-protected packets with header masking,
reliable streams with loss recovery, and fire-and-forget datagrams.
"""

import random

from spacelink.channel import loss_oracle
from spacelink.endpoints.modes import LinkKeys
from spacelink.quiclite import Role, ServerEndpoint, State, TransportSession

rand = random.Random(2024).randbytes
keys = LinkKeys()

print("== 1-RTT handshake ==")
client = TransportSession(Role.CLIENT, rand(8), pinned_server_key=keys.server_public, rand=rand)
server_ep = ServerEndpoint(keys.identity(), rand=rand)
ch = client.client_hello(now=0)
print(f"client hello  : {len(ch)} bytes (ephemeral key, no ticket)")
server = server_ep.handle_datagram(ch, now=1)
(sh,) = server.poll_transmit(now=1)
print(f"server hello  : {len(sh)} bytes (ephemeral, signature, fresh ticket)")
client.handle_datagram(sh, now=2)
print(f"states        : client={client.state.value}, server={server.state.value}")
assert client.state is State.ESTABLISHED

print("\n== reliable stream survives 30% loss ==")
blob = bytes(i & 0xFF for i in range(20_000))
client.send_stream(1, blob, fin=True)
drops = iter(loss_oracle(seed=99, n=5000, loss_rate=0.30))
received = bytearray()
now = 10
for _ in range(200):
    now += 50_000
    for d in client.poll_transmit(now):
        if not next(drops):
            server.handle_datagram(d, now)
    for d in server.poll_transmit(now):
        if not next(drops):
            client.handle_datagram(d, now)
    client.on_timer(now)
    server.on_timer(now)
    received.extend(server.read_stream(1))
    if len(received) == len(blob):
        break
print(f"delivered     : {len(received)}/{len(blob)} bytes, in order: {bytes(received) == blob}")
print(f"recovery      : {client.counters['packets_lost']} packets declared lost, "
      f"{client.counters['retransmitted_frames']} frames retransmitted")
print(f"congestion    : cwnd={client.cc.cwnd} bytes after {client.cc.loss_events} loss events")

print("\n== resume with the issued ticket: 0-RTT ==")
ticket = client.issued_ticket
client2 = TransportSession(
    Role.CLIENT, rand(8), pinned_server_key=keys.server_public, ticket=ticket, rand=rand
)
ch2 = client2.client_hello(now=0)
client2.send_datagram(b"early data, zero round trips of setup")
early_flight = client2.poll_transmit(now=0)
server2 = server_ep.handle_datagram(ch2, now=1)
for d in early_flight:
    server_ep.handle_datagram(d, now=1)
print(f"server got    : {server2.pop_datagrams()} before sending a single byte back")

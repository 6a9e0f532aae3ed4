#!/usr/bin/env python3
"""The full topology: a flight node (command ingest, executor with
housekeeping, telemetry output on the software bus) and a ground client,
linked by the simulated channel, with the security layer selected per run.

The same command script runs identically over all three modes.
"""

from spacelink.channel import Channel, config_from_profile
from spacelink.endpoints import FlightNode, GroundNode, SimHarness, schemas as sc, seeded_rand
from spacelink.endpoints.modes import LinkKeys

SCRIPT = [
    (2_000_000, sc.Command(sc.FC_NOOP)),
    (3_000_000, sc.Command(sc.FC_SET_PARAM, 2, 7)),
    (4_000_000, sc.Command(sc.FC_SET_PARAM, 9, 1)),  # invalid parameter id
    (5_000_000, sc.Command(sc.FC_REQUEST_HK)),
]

for mode in ("none", "sdls", "quic"):
    keys = LinkKeys()
    flight = FlightNode(mode, "gcm", keys=keys, rand=seeded_rand(8))
    ground = GroundNode(mode, "gcm", keys=keys, rtt_hint_us=70_000, rand=seeded_rand(9))
    harness = SimHarness(Channel(config_from_profile("leo", 0, seed=4)), flight, ground)

    ground.connect(0)
    harness.run_until(ground.connected, deadline_us=5_000_000)
    handles = []
    for at, cmd in SCRIPT:
        harness.run_until(lambda: harness.now >= at, deadline_us=at)
        handles.append(ground.send_command(cmd, harness.now))
    harness.run_for(7_000_000 - harness.now)

    hk = ground.received_hk[-1]
    outcomes = ", ".join(h.outcome.value for h in handles)
    print(f"[{mode:4s}] outcomes: {outcomes}")
    print(f"       hk: accepts={hk.cmd_accept_count} rejects={hk.cmd_reject_count} "
          f"params={list(hk.param_table)} uptime={hk.uptime_us/1e6:.1f}s "
          f"(periodic hk received: {len(ground.received_hk)})")
    print(f"       flight security state: {flight.security_footprint()} bytes")

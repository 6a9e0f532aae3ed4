"""spacelink: a desk-scale secure space-link stack.

A flight-software-style publish/subscribe bus whose command/telemetry link
runs over either a symmetric AEAD link-security layer or a QUIC-subset
secure transport, exercised over a deterministic simulated space link, with
a benchmark harness comparing state footprint, per-packet crypto cost, and
throughput under latency and loss.
"""

__version__ = "0.1.0"

from . import aead, bench, bus, channel, endpoints, packet, quiclite, sdls  # noqa: F401

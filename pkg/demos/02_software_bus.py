#!/usr/bin/env python3
"""The software bus: apps exchange packets only through publish/subscribe.

Each app owns a bounded pipe; publishing copies the message into every
subscribed pipe with room.  Full pipes drop the new message and count it,
so bursty producers cannot erase queued history.
"""

from spacelink import bus
from spacelink.packet import PacketType, SpacePacket

sb = bus.SoftwareBus()

print("== two subscribers, one publisher ==")
to_pipe = sb.create_pipe("TO", capacity=32)
logger_pipe = sb.create_pipe("LOGGER", capacity=2)
HK_MID = 0x0810
sb.subscribe(to_pipe, HK_MID)
sb.subscribe(logger_pipe, HK_MID)

msg = bus.BusMessage(HK_MID, SpacePacket(PacketType.TELEMETRY, 0x010, 0, b"hk-sample"), 0)
print(f"publish -> delivered to {sb.publish(msg)} pipes")

print("\n== FIFO per pipe ==")
for i in range(3):
    sb.publish(bus.BusMessage(HK_MID, SpacePacket(PacketType.TELEMETRY, 0x010, i + 1, b"x"), 0))
drained = []
while (m := sb.receive(to_pipe)) is not bus.EMPTY:
    drained.append(m.packet.seq_count)
print(f"TO pipe drained in publish order: {drained}")

print("\n== overflow drops the NEW message and counts it ==")
print(f"LOGGER pipe: capacity 2, {len(logger_pipe.queue)} queued, "
      f"overflow_count={logger_pipe.overflow_count}")

print("\n== publishing with no subscribers is counted bus-wide ==")
sb.publish(bus.BusMessage(0x9999, msg.packet, 0))
print(f"no_subscriber_count = {sb.no_subscriber_count}")

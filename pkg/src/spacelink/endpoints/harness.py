"""Cooperative simulation driver: one channel, one flight node, one ground
node, all on the channel's virtual timeline.

Each iteration advances virtual time to the next interesting instant (a
link delivery or a node timer), delivers due datagrams, steps both nodes,
and flushes their outboxes back into the channel.  Event order is fixed
(channel deliveries by schedule, then flight, then ground) so a given
(seed, config, script) triple always produces the same event stream.
"""

from __future__ import annotations

from ..channel import Channel, Direction
from .ground import GroundNode
from .node import FlightNode

IDLE_STEP_US = 1_000_000


class SimHarness:
    def __init__(self, channel: Channel, flight: FlightNode, ground: GroundNode):
        self.channel = channel
        self.flight = flight
        self.ground = ground
        self.on_event = None  # optional callback(now) after each iteration
        self.events_processed = 0

    @property
    def now(self) -> int:
        return self.channel.now

    def _flush_outboxes(self, now: int) -> None:
        for datagram in self.flight.drain_outbox():
            self.channel.send(datagram, Direction.DOWN, now)
        for datagram in self.ground.drain_outbox():
            self.channel.send(datagram, Direction.UP, now)

    def _next_instant(self) -> int | None:
        candidates = []
        for t in (
            self.channel.next_event_time(),
            self.flight.next_wakeup(),
            self.ground.next_wakeup(),
        ):
            if t is not None:
                candidates.append(t)
        if not candidates:
            return None
        return max(min(candidates), self.channel.now)

    def run_until(self, predicate, deadline_us: int, settle: bool = False) -> bool:
        """Drive the simulation until predicate() holds or virtual time runs
        out.  With settle=True, keep going while traffic is still in flight
        even after the predicate holds."""
        self._step_to(self.now)  # flush work queued since the last step
        while True:
            done = predicate()
            if done and not settle:
                return True
            if done and settle and self.channel.pending() == 0:
                return True
            t = self._next_instant()
            if t is None:
                if done:
                    return True
                return False
            if t > deadline_us:
                if deadline_us > self.now:
                    self.channel.advance(deadline_us)
                return predicate()
            self._step_to(t)

    def run_for(self, duration_us: int) -> None:
        end = self.now + duration_us
        self._step_to(self.now)
        while True:
            t = self._next_instant()
            if t is None or t > end:
                break
            self._step_to(t)
        self.channel.advance(end)
        self.flight.step(end)
        self.ground.step(end)
        self._flush_outboxes(end)

    def _step_to(self, t: int) -> None:
        for event in self.channel.advance(t):
            self.events_processed += 1
            if event.direction is Direction.UP:
                self.flight.ci_ingest(event.datagram, t)
            else:
                self.ground.on_wire(event.datagram, t)
        self.flight.step(t)
        self.ground.step(t)
        self._flush_outboxes(t)
        if self.on_event is not None:
            self.on_event(t)

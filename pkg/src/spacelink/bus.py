"""Flight-software-style publish/subscribe bus.

Applications own pipes (bounded FIFO queues) and subscribe them to message
ids; a publish copies the message into every subscribed pipe that has room.
A full pipe drops the new message and counts it, preserving queued history
for diagnosis.  Publishes to an id nobody subscribed to are counted bus-wide.

A single lock serializes routing-table mutation against publishes so the bus
can be shared between tasks in live-socket mode; under the simulated
timeline everything runs cooperatively anyway and observable behaviour is a
plain sequential interleaving.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

from .packet import SpacePacket


class BusError(Exception):
    pass


class DuplicatePipeName(BusError):
    pass


class UnknownPipe(BusError):
    pass


class BadCapacity(BusError):
    pass


@dataclass(frozen=True)
class BusMessage:
    mid: int  # 16-bit message id
    packet: SpacePacket
    publish_time_us: int = 0


#: Sentinel returned by receive() when nothing is queued.
EMPTY = object()


class Pipe:
    def __init__(self, owner: str, capacity: int):
        self.owner = owner
        self.capacity = capacity
        self.queue: deque[BusMessage] = deque()
        self.overflow_count = 0
        self.subscriptions: set[int] = set()
        self.closed = False


class SoftwareBus:
    def __init__(self):
        self._lock = threading.Lock()
        self._pipes: dict[str, Pipe] = {}
        self.no_subscriber_count = 0

    def create_pipe(self, owner: str, capacity: int) -> Pipe:
        if capacity < 1:
            raise BadCapacity(f"capacity {capacity} < 1")
        with self._lock:
            if owner in self._pipes and not self._pipes[owner].closed:
                raise DuplicatePipeName(owner)
            pipe = Pipe(owner, capacity)
            self._pipes[owner] = pipe
            return pipe

    def _live(self, pipe: Pipe) -> Pipe:
        if pipe.closed or self._pipes.get(pipe.owner) is not pipe:
            raise UnknownPipe(pipe.owner)
        return pipe

    def subscribe(self, pipe: Pipe, mid: int) -> None:
        with self._lock:
            self._live(pipe).subscriptions.add(mid)

    def unsubscribe(self, pipe: Pipe, mid: int) -> None:
        with self._lock:
            self._live(pipe).subscriptions.discard(mid)

    def publish(self, msg: BusMessage) -> int:
        """Deliver to all subscribed pipes with room; returns delivery count."""
        msg.packet.validate()
        delivered = 0
        with self._lock:
            takers = [
                p
                for p in self._pipes.values()
                if not p.closed and msg.mid in p.subscriptions
            ]
            if not takers:
                self.no_subscriber_count += 1
                return 0
            for pipe in takers:
                if len(pipe.queue) >= pipe.capacity:
                    pipe.overflow_count += 1
                else:
                    pipe.queue.append(msg)
                    delivered += 1
        return delivered

    def receive(self, pipe: Pipe, timeout_us: int = 0):
        """Pop the oldest message, or EMPTY.

        The timeout is accepted for interface parity with a blocking bus; in
        the cooperative virtual-time simulation nothing can arrive while the
        caller holds the timeline, so an empty queue returns EMPTY at once.
        """
        del timeout_us
        with self._lock:
            live = self._live(pipe)
            if live.queue:
                return live.queue.popleft()
            return EMPTY

    def close_pipe(self, pipe: Pipe) -> None:
        with self._lock:
            self._live(pipe).closed = True
            del self._pipes[pipe.owner]

    def subscriber_count(self, mid: int) -> int:
        with self._lock:
            return sum(
                1
                for p in self._pipes.values()
                if not p.closed and mid in p.subscriptions
            )

"""The ground client: sends commands up, tracks acknowledgement events and
telemetry coming down, and runs the reliable-transfer senders used by the
benchmarks (the transport stream under quic, the stop-and-wait shim under
none/sdls).

Command acknowledgement rides event telemetry rather than transport ACKs,
so acceptance semantics are identical across security modes: a command is
Accepted when a matching accept event arrives, Rejected on a reject event,
TimedOut after 4x the link RTT estimate.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

from .. import packet as _packet
from .. import sdls as _sdls
from ..quiclite import ResumptionTicket, Role, State, TransportSession
from . import schemas as sc
from .modes import MODES, LinkKeys
from .node import RecordParser, STREAM_BULK, STREAM_CMD, STREAM_TLM, pack_record

DEFAULT_DEADLINE_RTTS = 4
ARQ_TIMEOUT_RTTS = 2
ARQ_MAX_TRIES = 10
ARQ_CHUNK = 1100


class CommandOutcome(Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    TIMED_OUT = "timed_out"


class NotConnected(Exception):
    pass


class TransferFailed(Exception):
    pass


@dataclass
class CommandHandle:
    seq: int
    fc: int
    deadline: int
    outcome: CommandOutcome = CommandOutcome.PENDING
    reason: int = 0


@dataclass
class _ArqState:
    chunks: list[bytes]
    next_to_send: int = 0
    tries: int = 0
    timeout_at: int | None = None
    started_at: int = 0
    finished_at: int | None = None
    retransmissions: int = 0
    srtt_us: int | None = None
    sent_at: int | None = None
    failed: bool = False


class GroundNode:
    def __init__(
        self,
        mode: str = "none",
        backend: str = "gcm",
        keys: LinkKeys | None = None,
        rtt_hint_us: int = 100_000,
        rand=os.urandom,
        ticket: ResumptionTicket | None = None,
        conn_id: bytes | None = None,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.backend = backend
        self.keys = keys or LinkKeys()
        self.rtt_hint_us = rtt_hint_us
        self._rand = rand
        self.outbox: list[bytes] = []
        self._seq = 0
        self.pending: dict[int, CommandHandle] = {}
        self.received_hk: list[sc.HkTelemetry] = []
        self.received_events: list[sc.EventTelemetry] = []
        self.tlm_packets_received = 0
        self.rx_errors = 0
        self.session: TransportSession | None = None
        self._ticket = ticket
        self._conn_id = conn_id
        self._tlm_records = RecordParser()
        self.arq: _ArqState | None = None
        self.bulk_acked = -1

        if mode == "sdls":
            self.sa_tx = self.keys.uplink_sa(backend)
            self.sa_rx = self.keys.downlink_sa(backend)

    # ------------------------------------------------------------------
    # connection management

    def connect(self, now: int) -> None:
        """Open the link; under quic this emits the client hello."""
        if self.mode != "quic":
            return
        conn_id = self._conn_id or self._rand(8)
        self.session = TransportSession(
            Role.CLIENT,
            conn_id,
            backend=self.backend,
            pinned_server_key=self.keys.server_public,
            ticket=self._ticket,
            rand=self._rand,
        )
        self.outbox.append(self.session.client_hello(now))

    def connected(self) -> bool:
        if self.mode != "quic":
            return True
        return self.session is not None and self.session.state is State.ESTABLISHED

    def can_send_early(self) -> bool:
        return (
            self.session is not None
            and self.session.state is State.HANDSHAKING
            and self._ticket is not None
        )

    def rtt_estimate_us(self) -> int:
        if self.mode == "quic" and self.session and self.session.rtt.has_sample:
            return self.session.rtt.srtt_us
        return self.rtt_hint_us

    # ------------------------------------------------------------------
    # command path

    def send_command(
        self, cmd: sc.Command, now: int, deadline_us: int | None = None
    ) -> CommandHandle:
        if self.mode == "quic" and not (self.connected() or self.can_send_early()):
            raise NotConnected("no established session")
        payload = sc.encode_command(cmd)
        seq = self._seq
        self._seq = (self._seq + 1) & _packet.MAX_SEQ_COUNT
        pkt = _packet.SpacePacket(_packet.PacketType.COMMAND, sc.APID_CMD, seq, payload)
        self._uplink_packet(pkt)
        if deadline_us is None:
            deadline_us = DEFAULT_DEADLINE_RTTS * self.rtt_estimate_us()
        handle = CommandHandle(seq=seq, fc=cmd.fc, deadline=now + deadline_us)
        self.pending[seq] = handle
        return handle

    def _uplink_packet(self, pkt: _packet.SpacePacket) -> None:
        encoded = _packet.encode(pkt)
        if self.mode == "none":
            self.outbox.append(encoded)
        elif self.mode == "sdls":
            self.outbox.append(_sdls.apply(self.sa_tx, pkt))
        else:
            self.session.send_stream(STREAM_CMD, pack_record(encoded))

    # ------------------------------------------------------------------
    # downlink handling

    def on_wire(self, datagram: bytes, now: int) -> None:
        if self.mode == "quic":
            self.session.handle_datagram(datagram, now)
            for raw in self.session.pop_datagrams():
                self._ingest_tlm_bytes(raw, now)
            for record in self._tlm_records.feed(self.session.read_stream(STREAM_TLM)):
                self._ingest_tlm_bytes(record, now)
            return
        try:
            if self.mode == "sdls":
                pkt = _sdls.accept(self.sa_rx, datagram)
            else:
                pkt = _packet.decode(datagram)
        except (_sdls.SdlsError, _sdls.AuthFail, _packet.PacketError):
            self.rx_errors += 1
            return
        self._route_tlm(pkt, now)

    def _ingest_tlm_bytes(self, raw: bytes, now: int) -> None:
        try:
            pkt = _packet.decode(raw)
        except _packet.PacketError:
            self.rx_errors += 1
            return
        self._route_tlm(pkt, now)

    def _route_tlm(self, pkt: _packet.SpacePacket, now: int) -> None:
        self.tlm_packets_received += 1
        if pkt.apid == sc.APID_HK:
            try:
                self.received_hk.append(sc.decode_hk(pkt.payload))
            except sc.SchemaError:
                self.rx_errors += 1
        elif pkt.apid == sc.APID_EVT:
            try:
                evt = sc.decode_event(pkt.payload)
            except sc.SchemaError:
                self.rx_errors += 1
                return
            self.received_events.append(evt)
            handle = self.pending.get(evt.cmd_seq)
            if handle is not None and handle.outcome is CommandOutcome.PENDING:
                if evt.kind == sc.EVT_ACCEPT and evt.fc == handle.fc:
                    handle.outcome = CommandOutcome.ACCEPTED
                elif evt.kind == sc.EVT_REJECT:
                    handle.outcome = CommandOutcome.REJECTED
                    handle.reason = evt.reason
        elif pkt.apid == sc.APID_BULK_ACK:
            self._arq_on_ack(pkt, now)
        else:
            self.rx_errors += 1

    # ------------------------------------------------------------------
    # reliable transfer (benchmarks)

    def start_transfer(self, data: bytes, now: int) -> None:
        """Begin the reliable upload: stream under quic, ARQ otherwise."""
        if self.mode == "quic":
            self.session.send_stream(STREAM_BULK, bytes(data), fin=True)
            return
        chunks = [data[i : i + ARQ_CHUNK] for i in range(0, len(data), ARQ_CHUNK)]
        self.arq = _ArqState(chunks=chunks, started_at=now)
        self._arq_send_current(now)

    def transfer_done(self) -> bool:
        if self.mode == "quic":
            return False  # completion observed on the flight side
        return self.arq is not None and self.arq.finished_at is not None

    def _arq_send_current(self, now: int) -> None:
        arq = self.arq
        if arq.next_to_send >= len(arq.chunks):
            arq.finished_at = now
            arq.timeout_at = None
            return
        payload = sc.encode_bulk(sc.BULK_DATA, arq.next_to_send, arq.chunks[arq.next_to_send])
        pkt = _packet.SpacePacket(
            _packet.PacketType.COMMAND,
            sc.APID_BULK_DATA,
            arq.next_to_send & _packet.MAX_SEQ_COUNT,
            payload,
        )
        self._uplink_packet(pkt)
        arq.tries += 1
        arq.sent_at = now
        rtt = arq.srtt_us if arq.srtt_us is not None else self.rtt_hint_us
        arq.timeout_at = now + ARQ_TIMEOUT_RTTS * rtt

    def _arq_on_ack(self, pkt: _packet.SpacePacket, now: int) -> None:
        arq = self.arq
        if arq is None or arq.finished_at is not None:
            return
        try:
            kind, acked, _ = sc.decode_bulk(pkt.payload)
        except sc.SchemaError:
            self.rx_errors += 1
            return
        if kind != sc.BULK_ACK or acked != arq.next_to_send:
            return
        if arq.sent_at is not None:
            sample = now - arq.sent_at
            arq.srtt_us = (
                sample
                if arq.srtt_us is None
                else (7 * arq.srtt_us + sample) // 8
            )
        arq.next_to_send += 1
        arq.tries = 0
        self._arq_send_current(now)

    # ------------------------------------------------------------------
    # scheduling

    def step(self, now: int) -> None:
        for handle in self.pending.values():
            if handle.outcome is CommandOutcome.PENDING and now >= handle.deadline:
                handle.outcome = CommandOutcome.TIMED_OUT
        arq = self.arq
        if arq is not None and arq.timeout_at is not None and now >= arq.timeout_at:
            if arq.tries >= ARQ_MAX_TRIES:
                arq.failed = True
                arq.timeout_at = None
            else:
                arq.retransmissions += 1
                self._arq_send_current(now)
        if self.mode == "quic" and self.session is not None:
            self.session.on_timer(now)
            self.outbox.extend(self.session.poll_transmit(now))

    def next_wakeup(self) -> int | None:
        wakeups = []
        for handle in self.pending.values():
            if handle.outcome is CommandOutcome.PENDING:
                wakeups.append(handle.deadline)
        if self.arq is not None and self.arq.timeout_at is not None:
            wakeups.append(self.arq.timeout_at)
        if self.mode == "quic" and self.session is not None:
            timer = self.session.next_timer()
            if timer is not None:
                wakeups.append(timer)
        return min(wakeups) if wakeups else None

    def drain_outbox(self) -> list[bytes]:
        out = self.outbox
        self.outbox = []
        return out

    def security_footprint(self) -> int:
        if self.mode == "none":
            return 0
        if self.mode == "sdls":
            return self.sa_tx.state_footprint() + self.sa_rx.state_footprint()
        return self.session.state_footprint() if self.session else 0

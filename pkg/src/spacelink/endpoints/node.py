"""The flight node: command ingest, command execution with housekeeping,
and telemetry output, wired through the software bus.

Apps are cooperative tasks stepped on the simulation timeline (or from the
live-socket loop).  Command ingest unwraps the active security layer and
publishes valid commands onto the bus; the executor app drains its pipe,
mutates the parameter table and counters, and publishes acceptance events
and housekeeping telemetry; telemetry output drains its pipe and protects
packets back down the link.  Nothing here ever raises on arbitrary uplink
bytes: every failure becomes a counter plus a reject event.
"""

from __future__ import annotations

import os

from .. import bus as _bus
from .. import packet as _packet
from .. import sdls as _sdls
from ..quiclite import ServerEndpoint, State
from . import schemas as sc
from .modes import MODES, LinkKeys

CMD_PIPE_CAPACITY = 16
TO_PIPE_CAPACITY = 32
HK_PERIOD_US = 1_000_000
STREAM_CMD = 0  # ground -> flight command records
STREAM_TLM = 1  # flight -> ground oversize telemetry records
STREAM_BULK = 2  # ground -> flight bulk transfer (benchmarks)
RECORD_HEADER = 2  # u16 length prefix


def pack_record(data: bytes) -> bytes:
    return len(data).to_bytes(2, "big") + data


class RecordParser:
    """Incremental u16-length-prefixed record splitter."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        out = []
        while len(self._buf) >= RECORD_HEADER:
            need = int.from_bytes(self._buf[:2], "big")
            if len(self._buf) < RECORD_HEADER + need:
                break
            out.append(bytes(self._buf[2 : 2 + need]))
            del self._buf[: 2 + need]
        return out


class FlightNode:
    def __init__(
        self,
        mode: str = "none",
        backend: str = "gcm",
        keys: LinkKeys | None = None,
        rand=os.urandom,
        hk_period_us: int = HK_PERIOD_US,
        to_capacity: int = TO_PIPE_CAPACITY,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.backend = backend
        self.keys = keys or LinkKeys()
        self.bus = _bus.SoftwareBus()

        self.cmd_pipe = self.bus.create_pipe("EXEC", CMD_PIPE_CAPACITY)
        self.bus.subscribe(self.cmd_pipe, sc.MID_CMD)
        self.to_pipe = self.bus.create_pipe("TO", to_capacity)
        self.bus.subscribe(self.to_pipe, sc.MID_HK)
        self.bus.subscribe(self.to_pipe, sc.MID_EVT)

        self.cmd_accept_count = 0
        self.cmd_reject_count = 0
        self.param_table = [0] * sc.PARAM_TABLE_SIZE
        self._seq = {}  # downlink seq_count per apid
        self._hk_period = hk_period_us
        self._hk_next = hk_period_us if hk_period_us > 0 else None  # None = app off
        self.outbox: list[bytes] = []
        self.ingest_errors = 0

        self.bulk_chunks: dict[int, bytes] = {}
        self.bulk_next_seq = 0
        self.bulk_data = bytearray()
        self._bulk_record = RecordParser()

        if mode == "sdls":
            self.sa_rx = self.keys.uplink_sa(backend)
            self.sa_tx = self.keys.downlink_sa(backend)
        elif mode == "quic":
            self.server = ServerEndpoint(self.keys.identity(), backend=backend, rand=rand)
            self._cmd_records: dict[bytes, RecordParser] = {}

    # ------------------------------------------------------------------
    # uplink: command ingest

    def ci_ingest(self, raw: bytes, now: int) -> None:
        """Feed raw uplink bytes through the security layer into the bus."""
        if self.mode == "quic":
            session = self.server.handle_datagram(raw, now)
            if session is not None:
                self._drain_session(session, now)
            return
        try:
            if self.mode == "sdls":
                pkt = _sdls.accept(self.sa_rx, raw)
            else:
                pkt = _packet.decode(raw)
        except (_sdls.SdlsError, _sdls.AuthFail, _packet.PacketError):
            self.ingest_errors += 1
            self._reject(0, 0, sc.REASON_MALFORMED, now)
            return
        self._route_packet(pkt, now)

    def _drain_session(self, session, now: int) -> None:
        parser = self._cmd_records.setdefault(session.conn_id, RecordParser())
        for record in parser.feed(session.read_stream(STREAM_CMD)):
            self._ingest_packet_bytes(record, now)
        for dgram in session.pop_datagrams():
            self._ingest_packet_bytes(dgram, now)
        chunk = session.read_stream(STREAM_BULK)
        if chunk:
            self.bulk_data.extend(chunk)

    def _ingest_packet_bytes(self, raw: bytes, now: int) -> None:
        try:
            pkt = _packet.decode(raw)
        except _packet.PacketError:
            self.ingest_errors += 1
            self._reject(0, 0, sc.REASON_MALFORMED, now)
            return
        self._route_packet(pkt, now)

    def _route_packet(self, pkt: _packet.SpacePacket, now: int) -> None:
        if pkt.apid == sc.APID_CMD and pkt.ptype is _packet.PacketType.COMMAND:
            try:
                sc.decode_command(pkt.payload)
            except sc.BadChecksum:
                self._reject(0, pkt.seq_count, sc.REASON_CHECKSUM, now)
                return
            except sc.UnknownFunctionCode:
                self._reject(pkt.payload[0], pkt.seq_count, sc.REASON_UNKNOWN_FC, now)
                return
            except sc.SchemaError:
                self._reject(0, pkt.seq_count, sc.REASON_MALFORMED, now)
                return
            self.bus.publish(_bus.BusMessage(sc.MID_CMD, pkt, now))
        elif pkt.apid == sc.APID_BULK_DATA:
            self._bulk_ingest(pkt, now)
        else:
            self._reject(0, pkt.seq_count, sc.REASON_MALFORMED, now)

    def _reject(self, fc: int, cmd_seq: int, reason: int, now: int) -> None:
        self.cmd_reject_count += 1
        self._publish_event(sc.EVT_REJECT, fc, cmd_seq, reason, now)

    def _publish_event(self, kind: int, fc: int, cmd_seq: int, reason: int, now: int) -> None:
        payload = sc.encode_event(sc.EventTelemetry(kind, fc, cmd_seq, reason))
        pkt = self._tlm_packet(sc.APID_EVT, payload)
        self.bus.publish(_bus.BusMessage(sc.MID_EVT, pkt, now))

    def _tlm_packet(self, apid: int, payload: bytes) -> _packet.SpacePacket:
        seq = self._seq.get(apid, 0)
        self._seq[apid] = (seq + 1) & _packet.MAX_SEQ_COUNT
        return _packet.SpacePacket(_packet.PacketType.TELEMETRY, apid, seq, payload)

    # ------------------------------------------------------------------
    # command executor + housekeeping app

    def exec_step(self, now: int) -> None:
        while True:
            msg = self.bus.receive(self.cmd_pipe)
            if msg is _bus.EMPTY:
                break
            cmd = sc.decode_command(msg.packet.payload)  # validated at ingest
            seq = msg.packet.seq_count
            if cmd.fc == sc.FC_NOOP:
                self._accept(cmd, seq, now)
            elif cmd.fc == sc.FC_RESET_COUNTERS:
                self.cmd_accept_count = 0
                self.cmd_reject_count = 0
                self._accept(cmd, seq, now)
            elif cmd.fc == sc.FC_SET_PARAM:
                if cmd.param_id >= sc.PARAM_TABLE_SIZE:
                    self._reject(cmd.fc, seq, sc.REASON_BAD_PARAM, now)
                else:
                    self.param_table[cmd.param_id] = cmd.value
                    self._accept(cmd, seq, now)
            elif cmd.fc == sc.FC_REQUEST_HK:
                self._accept(cmd, seq, now)
                self._publish_hk(now)

    def _accept(self, cmd: sc.Command, seq: int, now: int) -> None:
        self.cmd_accept_count += 1
        self._publish_event(sc.EVT_ACCEPT, cmd.fc, seq, sc.REASON_NONE, now)

    def _publish_hk(self, now: int) -> None:
        hk = sc.HkTelemetry(
            self.cmd_accept_count,
            self.cmd_reject_count,
            tuple(self.param_table),
            now,
        )
        pkt = self._tlm_packet(sc.APID_HK, sc.encode_hk(hk))
        self.bus.publish(_bus.BusMessage(sc.MID_HK, pkt, now))

    def hk_step(self, now: int) -> None:
        while self._hk_next is not None and now >= self._hk_next:
            self._publish_hk(self._hk_next)
            self._hk_next += self._hk_period

    # ------------------------------------------------------------------
    # bulk receive (stop-and-wait shim, data uplink / ack downlink)

    def _bulk_ingest(self, pkt: _packet.SpacePacket, now: int) -> None:
        try:
            kind, seq, chunk = sc.decode_bulk(pkt.payload)
        except sc.SchemaError:
            self.ingest_errors += 1
            return
        if kind != sc.BULK_DATA:
            return
        if seq == self.bulk_next_seq:
            self.bulk_data.extend(chunk)
            self.bulk_next_seq += 1
        # Ack the highest contiguous chunk (re-ack duplicates so a lost ack
        # does not stall the sender); 0xFFFFFFFF = nothing received yet.
        ack = sc.encode_bulk(sc.BULK_ACK, (self.bulk_next_seq - 1) & 0xFFFFFFFF)
        self._downlink_packet(self._tlm_packet(sc.APID_BULK_ACK, ack), now)

    # ------------------------------------------------------------------
    # downlink: telemetry output

    def to_downlink(self, now: int) -> None:
        """Drain the TO pipe and hand protected datagrams to the channel."""
        while True:
            msg = self.bus.receive(self.to_pipe)
            if msg is _bus.EMPTY:
                break
            self._downlink_packet(msg.packet, now)

    def _downlink_packet(self, pkt: _packet.SpacePacket, now: int) -> None:
        encoded = _packet.encode(pkt)
        if self.mode == "none":
            self.outbox.append(encoded)
        elif self.mode == "sdls":
            self.outbox.append(_sdls.apply(self.sa_tx, pkt))
        else:
            session = self._established_session()
            if session is None:
                return  # no ground connection yet; telemetry is dropped
            # Command acknowledgement events ride the reliable stream so a
            # command accepted once is eventually observed accepted exactly
            # once; periodic/bulk telemetry stays fire-and-forget.
            if pkt.apid == sc.APID_EVT or len(encoded) > 1100:
                session.send_stream(STREAM_TLM, pack_record(encoded))
            else:
                session.send_datagram(encoded)

    def _established_session(self):
        for session in self.server.sessions.values():
            if session.state is State.ESTABLISHED:
                return session
        return None

    # ------------------------------------------------------------------
    # scheduling

    def step(self, now: int) -> None:
        self.hk_step(now)
        self.exec_step(now)
        self.to_downlink(now)
        if self.mode == "quic":
            self.server.on_timer(now)
            self.outbox.extend(self.server.poll_transmit(now))

    def next_wakeup(self) -> int | None:
        wakeups = [self._hk_next] if self._hk_next is not None else []
        if self.mode == "quic":
            timer = self.server.next_timer()
            if timer is not None:
                wakeups.append(timer)
        return min(wakeups) if wakeups else None

    def drain_outbox(self) -> list[bytes]:
        out = self.outbox
        self.outbox = []
        return out

    # ------------------------------------------------------------------
    # accounting

    def security_footprint(self) -> int:
        """Serialized size of live security-layer state, in bytes."""
        if self.mode == "none":
            return 0
        if self.mode == "sdls":
            return self.sa_rx.state_footprint() + self.sa_tx.state_footprint()
        return self.server.state_footprint()

    def hk_snapshot(self, now: int) -> sc.HkTelemetry:
        return sc.HkTelemetry(
            self.cmd_accept_count,
            self.cmd_reject_count,
            tuple(self.param_table),
            now,
        )

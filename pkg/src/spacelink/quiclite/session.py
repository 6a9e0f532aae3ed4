"""Connection state machine for the QUIC-subset transport.

One TransportSession is one side of one connection.  The handshake costs a
single round trip: the client sends a hello carrying a fresh X25519 public
key (and optionally a resumption ticket, unlocking 0-RTT data in the same
flight); the server answers with its own ephemeral, an Ed25519 signature
over the transcript by its static identity key, and a fresh ticket.  Both
sides then derive per-direction application keys from the shared secret and
the transcript hash.  Certificates are replaced by a pinned raw server
public key: the ground/flight trust relationship is 1:1 and pre-provisioned.

ClientHello payload (inside a CRYPTO frame, initial keys):

    client_random:32  eph_pub:32  ticket_len:u16  ticket

ServerHello payload:

    server_random:32  eph_pub:32  flags:u8 (bit0 = early data accepted)
    sig_len:u16  signature  ticket_len:u16  ticket

The signature covers sha256(client_hello || server_hello_without_signature);
the key-schedule transcript is sha256(client_hello || server_hello).  When
the client offered a ticket, the pre-shared secret enters the key schedule
only if the server accepted it, so both sides always agree on inputs.  An
unknown ticket downgrades to a plain 1-RTT handshake and the client replays
its early data under the fresh keys.

Everything is driven by explicit `now` timestamps (virtual microseconds in
simulation, wall time in live-socket mode); the session never sleeps or
consults a clock itself.  A session is owned by one task at a time.  Short
packets arriving before the handshake completes are dropped and counted,
never buffered.
"""

from __future__ import annotations

import hashlib
import os
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)

from .. import aead as _aead
from ..aead import AuthFail
from . import frames as fr
from . import keys as ks
from . import recovery as rec
from . import wire
from .recovery import MalformedAck, NewReno, RttEstimator, SentPacket
from .wire import MSS, MalformedHeader

MAX_DATAGRAM_DATA = 1100
ACK_EVERY = 2
ACK_DELAY_US = rec.MAX_ACK_DELAY_US
CLOSE_GENERIC = 0x01
CLOSE_HANDSHAKE = 0x02
TICKET_LEN = 32
STREAM_FRAME_HEADER = 16
DGRAM_FRAME_HEADER = 3


class SessionError(Exception):
    pass


class WrongState(SessionError):
    pass


class NotEstablished(SessionError):
    pass


class DatagramTooLarge(SessionError):
    pass


class StreamFinished(SessionError):
    pass


class MalformedHello(SessionError):
    pass


class UnknownConnId(SessionError):
    pass


class HandshakeFailure(SessionError):
    pass


class Role(Enum):
    CLIENT = "client"
    SERVER = "server"


class State(Enum):
    INITIAL = "initial"
    HANDSHAKING = "handshaking"
    ESTABLISHED = "established"
    CLOSED = "closed"


@dataclass(frozen=True)
class ResumptionTicket:
    ticket: bytes
    psk: bytes


@dataclass
class _SendStream:
    offset: int = 0  # next fresh byte offset
    pending: deque = field(default_factory=deque)  # (offset, bytes, fin)
    retrans: deque = field(default_factory=deque)
    fin_queued: bool = False

    def footprint(self) -> int:
        queued = sum(len(d) for _, d, _ in self.pending)
        queued += sum(len(d) for _, d, _ in self.retrans)
        return 13 + queued


@dataclass
class _RecvStream:
    segments: dict = field(default_factory=dict)  # offset -> bytes
    ready: bytearray = field(default_factory=bytearray)
    delivered: int = 0
    fin_offset: int | None = None
    fin_ready: bool = False

    def insert(self, offset: int, data: bytes, fin: bool) -> None:
        if fin:
            self.fin_offset = offset + len(data)
        if offset + len(data) > self.delivered:
            self.segments[offset] = data
        moved = True
        while moved:
            moved = False
            for off in sorted(self.segments):
                data = self.segments[off]
                if off + len(data) <= self.delivered:
                    del self.segments[off]
                    moved = True
                    break
                if off <= self.delivered:
                    chunk = data[self.delivered - off :]
                    self.ready.extend(chunk)
                    self.delivered += len(chunk)
                    del self.segments[off]
                    moved = True
                    break
        if self.fin_offset is not None and self.delivered >= self.fin_offset:
            self.fin_ready = True

    def footprint(self) -> int:
        return 13 + len(self.ready) + sum(len(d) for d in self.segments.values())


class TransportSession:
    def __init__(
        self,
        role: Role,
        conn_id: bytes,
        backend: str = "gcm",
        server_identity: Ed25519PrivateKey | None = None,
        pinned_server_key: bytes | None = None,
        ticket: ResumptionTicket | None = None,
        ticket_store: dict[bytes, bytes] | None = None,
        rand=os.urandom,
        now: int = 0,
    ):
        if len(conn_id) != wire.CONN_ID_LEN:
            raise SessionError("conn_id must be 8 bytes")
        if role is Role.SERVER and server_identity is None:
            raise SessionError("server needs an identity key")
        if role is Role.CLIENT and pinned_server_key is None:
            raise SessionError("client needs the pinned server key")
        self.role = role
        self.conn_id = conn_id
        self.backend = backend
        self.state = State.INITIAL
        self._rand = rand
        self._identity = server_identity
        self._pinned = pinned_server_key
        self.ticket = ticket
        self.issued_ticket: ResumptionTicket | None = None
        self._ticket_store = ticket_store if ticket_store is not None else {}

        init_c, init_s = ks.initial_keys(conn_id)
        if role is Role.CLIENT:
            self._init_send, self._init_recv = init_c, init_s
        else:
            self._init_send, self._init_recv = init_s, init_c
        self._send_keys: ks.DirectionKeys | None = None
        self._recv_keys: ks.DirectionKeys | None = None
        self._early_keys: ks.DirectionKeys | None = None
        self._ciphers: dict[bytes, object] = {}

        self._eph: X25519PrivateKey | None = None
        self._ch_bytes: bytes | None = None
        self._sh_datagram: bytes | None = None  # server resend cache
        self.early_data_accepted = False
        self._early_offered = False

        self.next_pn = 0
        self.largest_acked = -1
        self.sent_ledger: dict[int, SentPacket] = {}
        self.rtt = RttEstimator()
        self.cc = NewReno()

        self.streams_send: dict[int, _SendStream] = {}
        self.streams_recv: dict[int, _RecvStream] = {}
        self._dgram_q: deque[bytes] = deque()
        self.recv_datagrams: deque[bytes] = deque()
        self._retrans_crypto: deque[fr.Crypto] = deque()
        self._pending_out: list[bytes] = []
        self._probe_pings = 0
        self._resend_sh = False

        self._recv_ranges: list[list[int]] = []  # [high, low], descending
        self._ack_due = False
        self._unacked_eliciting = 0
        self._ack_deadline: int | None = None
        self._largest_recv = (-1, 0)  # (pn, recv time)
        self._pto_deadline: int | None = None
        self.close_code: int | None = None

        self.counters = {
            "duplicates": 0,
            "auth_failures": 0,
            "malformed": 0,
            "early_dropped": 0,
            "retransmitted_frames": 0,
            "packets_lost": 0,
            "probes_sent": 0,
            "unknown_frame": 0,
        }
        self.established_at: int | None = None

    # ------------------------------------------------------------------
    # crypto plumbing

    def _cipher(self, key: bytes):
        c = self._ciphers.get(key)
        if c is None:
            c = _aead.new_aead(self.backend, key)
            self._ciphers[key] = c
        return c

    # ------------------------------------------------------------------
    # handshake

    def client_hello(self, now: int) -> bytes:
        """Build and record the opening flight; returns the datagram."""
        if self.role is not Role.CLIENT:
            raise WrongState("only clients start a handshake")
        if self.state is not State.INITIAL:
            raise WrongState(f"hello already sent (state {self.state.value})")
        self._eph = X25519PrivateKey.from_private_bytes(self._rand(32))
        eph_pub = self._eph.public_key().public_bytes_raw()
        ticket = self.ticket.ticket if self.ticket else b""
        self._ch_bytes = (
            self._rand(32) + eph_pub + struct.pack(">H", len(ticket)) + ticket
        )
        if self.ticket:
            self._early_keys = ks.early_data_keys(
                self.ticket.psk, hashlib.sha256(self._ch_bytes).digest()
            )
            self._early_offered = True
        self.state = State.HANDSHAKING
        return self._send_packet(
            [fr.Crypto(0, self._ch_bytes)], now, form=wire.LONG_INITIAL
        )

    def server_respond(self, ch_payload: bytes, now: int) -> bytes:
        """Process a client hello; builds, queues and returns the response."""
        if self.role is not Role.SERVER:
            raise WrongState("only servers respond")
        if self.state is not State.INITIAL:
            raise WrongState(f"state {self.state.value}")
        ch = self._parse_hello(ch_payload)
        self._eph = X25519PrivateKey.from_private_bytes(self._rand(32))
        eph_pub = self._eph.public_key().public_bytes_raw()

        psk = self._ticket_store.get(ch["ticket"]) if ch["ticket"] else None
        accept_early = psk is not None
        new_ticket = self._rand(TICKET_LEN)
        flags = 0x01 if accept_early else 0x00
        prefix = (
            self._rand(32)
            + eph_pub
            + bytes([flags])
            + struct.pack(">H", len(new_ticket))
            + new_ticket
        )
        sig = self._identity.sign(hashlib.sha256(ch_payload + prefix).digest())
        sh_bytes = (
            prefix[:65]
            + struct.pack(">H", len(sig))
            + sig
            + struct.pack(">H", len(new_ticket))
            + new_ticket
        )

        shared = self._eph.exchange(X25519PublicKey.from_public_bytes(ch["eph_pub"]))
        transcript = hashlib.sha256(ch_payload + sh_bytes).digest()
        c_keys, s_keys, hs_secret = ks.derive_secrets(
            psk if accept_early else None, shared, transcript
        )
        self._send_keys, self._recv_keys = s_keys, c_keys
        if accept_early:
            self._early_keys = ks.early_data_keys(
                psk, hashlib.sha256(ch_payload).digest()
            )
        self.early_data_accepted = accept_early
        self._ticket_store[new_ticket] = ks.resumption_psk(hs_secret, new_ticket)
        self._eph = None
        self.state = State.ESTABLISHED
        self.established_at = now

        ack = self._build_ack_frame(now)
        frames_out: list[fr.Frame] = [ack] if ack else []
        frames_out.append(fr.Crypto(0, sh_bytes))
        self._sh_datagram = self._send_packet(frames_out, now, form=wire.LONG_INITIAL)
        self._clear_ack_state()
        self._pending_out.append(self._sh_datagram)
        return self._sh_datagram

    def _parse_hello(self, payload: bytes) -> dict:
        if len(payload) < 66:
            raise MalformedHello(f"hello of {len(payload)} bytes")
        ticket_len = struct.unpack(">H", payload[64:66])[0]
        if len(payload) != 66 + ticket_len:
            raise MalformedHello("ticket length mismatch")
        return {
            "random": payload[:32],
            "eph_pub": payload[32:64],
            "ticket": payload[66 : 66 + ticket_len],
        }

    def _process_server_hello(self, payload: bytes, now: int) -> None:
        if self.role is not Role.CLIENT or self.state is not State.HANDSHAKING:
            return  # duplicate or stray hello
        if len(payload) < 67:
            raise MalformedHello(f"server hello of {len(payload)} bytes")
        eph_pub = payload[32:64]
        flags = payload[64]
        sig_len = struct.unpack(">H", payload[65:67])[0]
        if len(payload) < 67 + sig_len + 2:
            raise MalformedHello("signature truncated")
        sig = payload[67 : 67 + sig_len]
        pos = 67 + sig_len
        ticket_len = struct.unpack(">H", payload[pos : pos + 2])[0]
        ticket = payload[pos + 2 : pos + 2 + ticket_len]
        if len(ticket) != ticket_len:
            raise MalformedHello("ticket truncated")

        prefix = payload[:65] + struct.pack(">H", ticket_len) + ticket
        try:
            Ed25519PublicKey.from_public_bytes(self._pinned).verify(
                sig, hashlib.sha256(self._ch_bytes + prefix).digest()
            )
        except InvalidSignature:
            self.close(CLOSE_HANDSHAKE, b"bad server signature", now)
            raise HandshakeFailure("server signature does not verify") from None

        accept_early = bool(flags & 0x01)
        shared = self._eph.exchange(X25519PublicKey.from_public_bytes(eph_pub))
        transcript = hashlib.sha256(self._ch_bytes + payload).digest()
        psk = self.ticket.psk if (self.ticket and accept_early) else None
        c_keys, s_keys, hs_secret = ks.derive_secrets(psk, shared, transcript)
        self._send_keys, self._recv_keys = c_keys, s_keys
        self.early_data_accepted = accept_early
        if ticket:
            self.issued_ticket = ResumptionTicket(
                ticket, ks.resumption_psk(hs_secret, ticket)
            )
        self._eph = None
        self._ch_bytes = None
        self.state = State.ESTABLISHED
        self.established_at = now
        if self._early_offered and not accept_early:
            self._replay_early_data()

    def _replay_early_data(self) -> None:
        # The 0-RTT flight was discarded by the server: forget those ledger
        # entries and queue the payloads again under the 1-RTT keys.
        for pn in sorted(self.sent_ledger):
            entry = self.sent_ledger[pn]
            early = [
                f for f in entry.frames if isinstance(f, (fr.Stream, fr.Datagram))
            ]
            if not early:
                continue
            del self.sent_ledger[pn]
            if entry.ack_eliciting:
                self.cc.bytes_in_flight = max(0, self.cc.bytes_in_flight - entry.size)
            for f in early:
                if isinstance(f, fr.Stream):
                    self.streams_send[f.stream_id].retrans.append(
                        (f.offset, f.data, f.fin)
                    )
                else:
                    self._dgram_q.append(f.data)
                self.counters["retransmitted_frames"] += 1

    # ------------------------------------------------------------------
    # application data

    def _writable(self) -> bool:
        if self.state is State.ESTABLISHED:
            return True
        return (
            self.role is Role.CLIENT
            and self.state is State.HANDSHAKING
            and self._early_keys is not None
        )

    def send_stream(self, stream_id: int, data: bytes, fin: bool = False) -> None:
        if not self._writable():
            raise NotEstablished("no application keys yet")
        st = self.streams_send.setdefault(stream_id, _SendStream())
        if st.fin_queued:
            raise StreamFinished(f"stream {stream_id} already finished")
        st.pending.append((st.offset, bytes(data), fin))
        st.offset += len(data)
        st.fin_queued = fin

    def send_datagram(self, data: bytes) -> None:
        if len(data) > MAX_DATAGRAM_DATA:
            raise DatagramTooLarge(f"{len(data)} > {MAX_DATAGRAM_DATA}")
        if not self._writable():
            raise NotEstablished("no application keys yet")
        self._dgram_q.append(bytes(data))

    def read_stream(self, stream_id: int) -> bytes:
        st = self.streams_recv.get(stream_id)
        if st is None:
            return b""
        out = bytes(st.ready)
        st.ready.clear()
        return out

    def stream_finished(self, stream_id: int) -> bool:
        st = self.streams_recv.get(stream_id)
        return bool(st and st.fin_ready and not st.ready)

    def pop_datagrams(self) -> list[bytes]:
        out = list(self.recv_datagrams)
        self.recv_datagrams.clear()
        return out

    def close(self, code: int = CLOSE_GENERIC, reason: bytes = b"", now: int = 0) -> None:
        if self.state is State.CLOSED:
            return
        frame = fr.ConnectionClose(code, reason)
        form = None if self.state is State.ESTABLISHED else wire.LONG_INITIAL
        try:
            self._pending_out.append(self._send_packet([frame], now, form=form))
        except SessionError:
            pass
        self.state = State.CLOSED
        self.close_code = code

    # ------------------------------------------------------------------
    # packetization

    def protect(self, frames_list: list[fr.Frame], now: int, track: bool = True) -> bytes:
        """Seal frames into one wire packet under the current send keys.

        With track=False the packet stays out of the loss ledger; the
        steady-state crypto benchmark uses that to time the pure wire path
        (frame encode, seal, header mask) without recovery bookkeeping.
        """
        if not self._writable():
            raise NotEstablished(f"state {self.state.value}")
        return self._send_packet(frames_list, now, track=track)

    def _send_form(self) -> tuple[int, ks.DirectionKeys]:
        if self.state is State.ESTABLISHED:
            return -1, self._send_keys  # short form
        if (
            self.role is Role.CLIENT
            and self.state is State.HANDSHAKING
            and self._early_keys is not None
        ):
            return wire.LONG_ZERO_RTT, self._early_keys
        raise NotEstablished("no send keys")

    def _send_packet(
        self,
        frames_list: list[fr.Frame],
        now: int,
        form: int | None = None,
        track: bool = True,
    ) -> bytes:
        if form is None:
            form, keys = self._send_form()
        elif form == wire.LONG_INITIAL:
            keys = self._init_send
        elif form == wire.LONG_ZERO_RTT:
            keys = self._early_keys
        else:
            keys = self._send_keys
        plaintext = fr.encode_frames(frames_list)
        pn = self.next_pn
        if pn > 0xFFFFFFFF:
            # 4-byte wire field; desk scale never gets here
            self.state = State.CLOSED
            self.close_code = CLOSE_GENERIC
            raise SessionError("packet number space exhausted")
        self.next_pn += 1
        cipher = self._cipher(keys.key)
        if form >= 0:
            datagram = wire.seal_long(form, self.conn_id, pn, plaintext, keys, cipher)
        else:
            datagram = wire.seal_short(self.conn_id, pn, plaintext, keys, cipher)
        if track and rec.is_ack_eliciting(frames_list):
            self.sent_ledger[pn] = SentPacket(
                pn, len(datagram), now, True, tuple(frames_list)
            )
            self.cc.on_sent(len(datagram), True)
            self._arm_pto(now)
        return datagram

    # ------------------------------------------------------------------
    # receive path

    def unprotect(self, datagram: bytes, now: int, track: bool = True):
        """Open one datagram; returns (pn, frames) or raises a typed error.

        Duplicate packet numbers and undecryptable early packets return
        (pn, None) and are counted rather than raised.
        """
        hdr = wire.parse_header(datagram)
        if hdr.conn_id != self.conn_id:
            raise UnknownConnId(hdr.conn_id.hex())
        if hdr.form_long:
            if hdr.long_type == wire.LONG_INITIAL:
                keys = self._init_recv
            elif hdr.long_type == wire.LONG_ZERO_RTT:
                if self.role is not Role.SERVER or self._early_keys is None:
                    self.counters["early_dropped"] += 1
                    return -1, None
                keys = self._early_keys
            else:
                raise MalformedHeader(f"long type {hdr.long_type}")
            pn, plaintext = wire.open_long(datagram, hdr, keys, self._cipher(keys.key))
        else:
            if self._recv_keys is None:
                # Short packet before the handshake finished: drop, count.
                self.counters["early_dropped"] += 1
                return -1, None
            keys = self._recv_keys
            pn, plaintext = wire.open_short(
                datagram, hdr, keys, self._cipher(keys.key)
            )
        frames_list = fr.decode_frames(plaintext)
        if track:
            if not self._record_recv_pn(pn):
                self.counters["duplicates"] += 1
                return pn, None
            if rec.is_ack_eliciting(frames_list):
                if pn > self._largest_recv[0]:
                    self._largest_recv = (pn, now)
                self._note_eliciting(now)
            elif pn > self._largest_recv[0]:
                self._largest_recv = (pn, now)
        return pn, frames_list

    def handle_datagram(self, datagram: bytes, now: int) -> None:
        """Robust ingest: wire garbage is counted, never raised."""
        try:
            pn, frames_list = self.unprotect(datagram, now)
        except fr.UnknownFrameType:
            self.counters["unknown_frame"] += 1
            self.close(fr.ERR_UNKNOWN_FRAME, b"unknown frame type", now)
            return
        except (MalformedHeader, fr.FrameError):
            self.counters["malformed"] += 1
            return
        except (AuthFail, UnknownConnId):
            self.counters["auth_failures"] += 1
            return
        if frames_list is None:
            return
        for f in frames_list:
            try:
                self._dispatch(f, now)
            except HandshakeFailure:
                raise
            except SessionError:
                self.counters["malformed"] += 1

    def _dispatch(self, f: fr.Frame, now: int) -> None:
        if isinstance(f, (fr.Padding, fr.Ping)):
            return
        if isinstance(f, fr.Ack):
            try:
                self.on_ack(f, now)
            except MalformedAck:
                self.counters["malformed"] += 1
            return
        if isinstance(f, fr.Crypto):
            if self.role is Role.SERVER:
                if self._sh_datagram is not None:
                    # Duplicate hello: our first answer was lost in transit.
                    self._resend_sh = True
                else:
                    self.server_respond(f.data, now)
            else:
                self._process_server_hello(f.data, now)
            return
        if isinstance(f, fr.Stream):
            st = self.streams_recv.setdefault(f.stream_id, _RecvStream())
            st.insert(f.offset, f.data, f.fin)
            return
        if isinstance(f, fr.Datagram):
            self.recv_datagrams.append(f.data)
            return
        if isinstance(f, fr.ConnectionClose):
            self.state = State.CLOSED
            self.close_code = f.code

    def _record_recv_pn(self, pn: int) -> bool:
        """Merge pn into the received ranges; False if already present."""
        ranges = self._recv_ranges
        for i, (high, low) in enumerate(ranges):
            if low <= pn <= high:
                return False
            if pn == high + 1:
                ranges[i][0] = pn
                if i > 0 and ranges[i - 1][1] == pn + 1:
                    ranges[i - 1][1] = ranges[i][1]
                    del ranges[i]
                return True
            if pn == low - 1:
                ranges[i][1] = pn
                if i + 1 < len(ranges) and ranges[i + 1][0] == pn - 1:
                    ranges[i][1] = ranges[i + 1][1]
                    del ranges[i + 1]
                return True
            if pn > high:
                ranges.insert(i, [pn, pn])
                return True
        ranges.append([pn, pn])
        return True

    def _note_eliciting(self, now: int) -> None:
        self._unacked_eliciting += 1
        if self._unacked_eliciting >= ACK_EVERY:
            self._ack_due = True
            self._ack_deadline = None
        elif self._ack_deadline is None:
            self._ack_deadline = now + ACK_DELAY_US

    # ------------------------------------------------------------------
    # acknowledgements and loss

    def on_ack(self, ack: fr.Ack, now: int):
        """Process a peer ACK; returns (newly_acked, lost) packet lists."""
        rec.validate_ack(ack, self.next_pn - 1)
        self.largest_acked = max(self.largest_acked, ack.largest)
        covered = rec.acked_pns(ack)
        newly = [
            self.sent_ledger.pop(pn) for pn in sorted(covered) if pn in self.sent_ledger
        ]
        if newly:
            largest_new = max(p.pn for p in newly)
            if largest_new == ack.largest:
                pkt = next(p for p in newly if p.pn == largest_new)
                self.rtt.on_sample(now - pkt.time_sent, ack.ack_delay_us)
            for pkt in newly:
                self.cc.on_acked(pkt)
        lost = rec.detect_losses(
            self.sent_ledger,
            self.largest_acked,
            now,
            self.rtt.srtt_us,
            self.rtt.latest_rtt_us,
        )
        for pkt in lost:
            del self.sent_ledger[pkt.pn]
            self.cc.on_lost(pkt, self.next_pn)
            self.counters["packets_lost"] += 1
            self._requeue_lost_frames(pkt)
        self._arm_pto(now)
        return newly, lost

    def _requeue_lost_frames(self, pkt: SentPacket) -> None:
        for f in pkt.frames:
            if isinstance(f, fr.Crypto):
                if self.state is State.ESTABLISHED:
                    continue  # handshake finished; hellos need no retransmit
                self._retrans_crypto.append(f)
                self.counters["retransmitted_frames"] += 1
            elif isinstance(f, fr.Stream):
                self.streams_send.setdefault(f.stream_id, _SendStream()).retrans.append(
                    (f.offset, f.data, f.fin)
                )
                self.counters["retransmitted_frames"] += 1
            # Ping/Datagram/Ack frames are never retransmitted.

    def _arm_pto(self, now: int) -> None:
        waiting = self.state is State.HANDSHAKING or any(
            e.ack_eliciting for e in self.sent_ledger.values()
        )
        if not waiting:
            self._pto_deadline = None
            return
        self._pto_deadline = now + (self.rtt.pto_interval_us() << self.cc.pto_count)

    # ------------------------------------------------------------------
    # timers and transmission

    def next_timer(self) -> int | None:
        deadlines = [
            d for d in (self._ack_deadline, self._pto_deadline) if d is not None
        ]
        return min(deadlines) if deadlines else None

    def on_timer(self, now: int) -> None:
        if self.state is State.CLOSED:
            self._ack_deadline = None
            self._pto_deadline = None
            return
        if self._ack_deadline is not None and now >= self._ack_deadline:
            self._ack_due = True
            self._ack_deadline = None
        if self._pto_deadline is not None and now >= self._pto_deadline:
            self.cc.on_pto_fired()
            self.counters["probes_sent"] += 1
            if self.state is State.HANDSHAKING and self.role is Role.CLIENT:
                # The hello (or its answer) went missing: send it again.
                self._pending_out.append(
                    self._send_packet(
                        [fr.Crypto(0, self._ch_bytes)], now, form=wire.LONG_INITIAL
                    )
                )
            elif self.role is Role.SERVER and self._sh_unacked():
                self._resend_sh = True
            else:
                self._probe_pings += 1
            self._arm_pto(now)

    def _sh_unacked(self) -> bool:
        return self._sh_datagram is not None and any(
            any(isinstance(f, fr.Crypto) for f in e.frames)
            for e in self.sent_ledger.values()
        )

    def poll_transmit(self, now: int) -> list[bytes]:
        """Assemble and seal everything currently allowed onto the wire."""
        out = list(self._pending_out)
        self._pending_out.clear()
        if self.state is State.CLOSED:
            return out
        if self._resend_sh:
            self._resend_sh = False
            if self._sh_datagram is not None:
                out.append(self._sh_datagram)
        while True:
            try:
                form, _ = self._send_form()
            except NotEstablished:
                break
            frames_list: list[fr.Frame] = []
            budget = wire.max_plaintext(form >= 0)
            if self._ack_due:
                ack = self._build_ack_frame(now)
                if ack is not None:
                    frames_list.append(ack)
                    budget -= fr.frame_size(ack)
            if self.cc.can_send(MSS):
                while self._retrans_crypto and budget >= fr.frame_size(
                    self._retrans_crypto[0]
                ):
                    f = self._retrans_crypto.popleft()
                    frames_list.append(f)
                    budget -= fr.frame_size(f)
                budget = self._pack_stream_frames(frames_list, budget)
                budget = self._pack_datagram_frames(frames_list, budget)
            while self._probe_pings > 0 and budget >= 1:
                # Probes bypass the congestion window.
                frames_list.append(fr.Ping())
                self._probe_pings -= 1
                budget -= 1
            if not frames_list:
                break
            if any(isinstance(f, fr.Ack) for f in frames_list):
                self._clear_ack_state()
            out.append(self._send_packet(frames_list, now))
        return out

    def _clear_ack_state(self) -> None:
        self._ack_due = False
        self._unacked_eliciting = 0
        self._ack_deadline = None

    def _pack_stream_frames(self, frames_list: list[fr.Frame], budget: int) -> int:
        for sid in sorted(self.streams_send):
            st = self.streams_send[sid]
            for queue in (st.retrans, st.pending):
                while queue and budget > STREAM_FRAME_HEADER:
                    offset, data, fin = queue.popleft()
                    room = budget - STREAM_FRAME_HEADER
                    if len(data) <= room:
                        frames_list.append(fr.Stream(sid, offset, data, fin))
                        budget -= STREAM_FRAME_HEADER + len(data)
                    else:
                        frames_list.append(fr.Stream(sid, offset, data[:room], False))
                        queue.appendleft((offset + room, data[room:], fin))
                        return budget - (STREAM_FRAME_HEADER + room)  # packet full
        return budget

    def _pack_datagram_frames(self, frames_list: list[fr.Frame], budget: int) -> int:
        while self._dgram_q and budget >= DGRAM_FRAME_HEADER + len(self._dgram_q[0]):
            data = self._dgram_q.popleft()
            frames_list.append(fr.Datagram(data))
            budget -= DGRAM_FRAME_HEADER + len(data)
        return budget

    def _build_ack_frame(self, now: int) -> fr.Ack | None:
        if not self._recv_ranges:
            return None
        blocks = [tuple(r) for r in self._recv_ranges[:8]]
        delay = max(0, now - self._largest_recv[1]) if self._largest_recv[0] >= 0 else 0
        return fr.ack_from_ranges(blocks, delay)

    # ------------------------------------------------------------------
    # accounting

    def state_footprint(self) -> int:
        """Deterministic serialized size of all live connection state."""
        total = wire.CONN_ID_LEN + 2  # conn id + role/state bytes
        total += 64 if self._eph is not None else 0
        total += 64 if self._identity is not None else 0
        total += len(self._pinned) if self._pinned else 0
        for dk in (
            self._init_send,
            self._init_recv,
            self._send_keys,
            self._recv_keys,
            self._early_keys,
        ):
            if dk is not None:
                total += dk.footprint()
        total += 16  # next_pn + largest_acked
        total += self.rtt.footprint() + self.cc.footprint()
        total += sum(e.footprint() for e in self.sent_ledger.values())
        total += sum(s.footprint() for s in self.streams_send.values())
        total += sum(s.footprint() for s in self.streams_recv.values())
        total += 16 * len(self._recv_ranges)
        total += sum(len(d) for d in self._dgram_q)
        total += sum(len(d) for d in self.recv_datagrams)
        for t in (self.ticket, self.issued_ticket):
            if t is not None:
                total += len(t.ticket) + len(t.psk)
        if self._ch_bytes is not None:
            total += len(self._ch_bytes)
        if self._sh_datagram is not None:
            total += len(self._sh_datagram)
        return total


class ServerEndpoint:
    """Demultiplexes datagrams to per-connection server sessions."""

    def __init__(
        self,
        identity: Ed25519PrivateKey,
        backend: str = "gcm",
        rand=os.urandom,
    ):
        self.identity = identity
        self.backend = backend
        self.rand = rand
        self.ticket_store: dict[bytes, bytes] = {}
        self.sessions: dict[bytes, TransportSession] = {}
        self.unknown_conn_count = 0

    def handle_datagram(self, datagram: bytes, now: int) -> TransportSession | None:
        try:
            hdr = wire.parse_header(datagram)
        except MalformedHeader:
            self.unknown_conn_count += 1
            return None
        session = self.sessions.get(hdr.conn_id)
        if session is None:
            if not (hdr.form_long and hdr.long_type == wire.LONG_INITIAL):
                self.unknown_conn_count += 1
                return None
            session = TransportSession(
                Role.SERVER,
                hdr.conn_id,
                backend=self.backend,
                server_identity=self.identity,
                ticket_store=self.ticket_store,
                rand=self.rand,
                now=now,
            )
            self.sessions[hdr.conn_id] = session
        session.handle_datagram(datagram, now)
        return session

    def poll_transmit(self, now: int) -> list[bytes]:
        out: list[bytes] = []
        for session in self.sessions.values():
            out.extend(session.poll_transmit(now))
        return out

    def next_timer(self) -> int | None:
        deadlines = [s.next_timer() for s in self.sessions.values()]
        deadlines = [d for d in deadlines if d is not None]
        return min(deadlines) if deadlines else None

    def on_timer(self, now: int) -> None:
        for session in self.sessions.values():
            session.on_timer(now)

    def state_footprint(self) -> int:
        total = 64  # identity keypair
        total += sum(len(t) + len(p) for t, p in self.ticket_store.items())
        total += sum(s.state_footprint() for s in self.sessions.values())
        return total

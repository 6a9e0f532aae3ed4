"""ACK processing, loss detection and NewReno congestion control.

Loss rule, applied to every unacknowledged packet whenever an ACK is
processed (after the RTT estimate is updated):

    lost(pn)  iff  largest_acked - pn >= 3
               or  now - time_sent(pn) >= (9/8) * max(srtt, latest_rtt)

RTT estimation is the classic EWMA pair (gain 1/8 for srtt, 1/4 for rttvar)
with the peer-reported ack delay subtracted from the sample.  Before the
first sample srtt defaults to 100 ms with rttvar at half that.

NewReno: slow start adds the acked bytes to cwnd below ssthresh; congestion
avoidance adds MSS*acked/cwnd.  A loss event halves cwnd at most once per
recovery epoch: packets sent before the epoch started (pn < recovery_start_pn)
cannot trigger another halving, and their acks do not grow the window.  The
probe timeout is srtt + 4*rttvar + max_ack_delay, doubled on each
consecutive fire; a probe elicits an ACK rather than collapsing cwnd.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frames import Ack, Frame, ACK_ELICITING
from .wire import MSS

PACKET_THRESHOLD = 3
TIME_THRESHOLD_NUM = 9
TIME_THRESHOLD_DEN = 8
INITIAL_RTT_US = 100_000
MAX_ACK_DELAY_US = 25_000
MIN_CWND = 2 * MSS
INITIAL_CWND = 10 * MSS


class MalformedAck(Exception):
    pass


@dataclass
class SentPacket:
    pn: int
    size: int
    time_sent: int
    ack_eliciting: bool
    frames: tuple[Frame, ...]

    def footprint(self) -> int:
        # pn + size + time + flag, plus the retained frame bytes
        from .frames import encode_frames

        return 8 + 4 + 8 + 1 + len(encode_frames(list(self.frames)))


@dataclass
class RttEstimator:
    srtt_us: int = INITIAL_RTT_US
    rttvar_us: int = INITIAL_RTT_US // 2
    min_rtt_us: int = 0
    latest_rtt_us: int = 0
    has_sample: bool = False

    def on_sample(self, rtt_us: int, ack_delay_us: int) -> None:
        rtt_us = max(1, rtt_us)
        self.latest_rtt_us = rtt_us
        if not self.has_sample:
            self.min_rtt_us = rtt_us
            self.srtt_us = max(1, rtt_us - ack_delay_us)
            self.rttvar_us = self.srtt_us // 2
            self.has_sample = True
            return
        self.min_rtt_us = min(self.min_rtt_us, rtt_us)
        # Never let the delay adjustment push the sample below min_rtt.
        adjusted = rtt_us - ack_delay_us
        if adjusted < self.min_rtt_us:
            adjusted = self.min_rtt_us
        self.rttvar_us = (3 * self.rttvar_us + abs(self.srtt_us - adjusted)) // 4
        self.srtt_us = (7 * self.srtt_us + adjusted) // 8

    def pto_interval_us(self) -> int:
        return self.srtt_us + 4 * self.rttvar_us + MAX_ACK_DELAY_US

    def footprint(self) -> int:
        return 4 * 8


@dataclass
class NewReno:
    cwnd: int = INITIAL_CWND
    ssthresh: int = 2**62
    bytes_in_flight: int = 0
    recovery_start_pn: int = 0
    pto_count: int = 0
    loss_events: int = 0

    def can_send(self, size: int) -> bool:
        return self.bytes_in_flight + size <= self.cwnd

    def on_sent(self, size: int, ack_eliciting: bool) -> None:
        if ack_eliciting:
            self.bytes_in_flight += size

    def on_acked(self, pkt: SentPacket) -> None:
        if pkt.ack_eliciting:
            self.bytes_in_flight = max(0, self.bytes_in_flight - pkt.size)
        self.pto_count = 0
        if pkt.pn < self.recovery_start_pn:
            return  # sent before the last halving; no growth
        if self.cwnd < self.ssthresh:
            self.cwnd += pkt.size
        else:
            self.cwnd += MSS * pkt.size // self.cwnd

    def on_lost(self, pkt: SentPacket, next_pn: int) -> None:
        if pkt.ack_eliciting:
            self.bytes_in_flight = max(0, self.bytes_in_flight - pkt.size)
        if pkt.pn >= self.recovery_start_pn:
            self.ssthresh = max(self.cwnd // 2, MIN_CWND)
            self.cwnd = self.ssthresh
            self.recovery_start_pn = next_pn
            self.loss_events += 1

    def on_pto_fired(self) -> None:
        self.pto_count += 1

    def footprint(self) -> int:
        return 4 * 8


def validate_ack(ack: Ack, max_sent_pn: int) -> None:
    if ack.largest > max_sent_pn:
        raise MalformedAck(f"largest {ack.largest} above max sent pn {max_sent_pn}")
    prev_low: int | None = None
    for high, low in ack.ranges:
        if low > high or low < 0:
            raise MalformedAck(f"bad range ({high}, {low})")
        if prev_low is not None and high >= prev_low - 1:
            raise MalformedAck("overlapping or adjacent ack ranges")
        prev_low = low


def acked_pns(ack: Ack) -> set[int]:
    out: set[int] = set()
    for high, low in ack.ranges:
        out.update(range(low, high + 1))
    return out


def detect_losses(
    ledger: dict[int, SentPacket],
    largest_acked: int,
    now: int,
    srtt_us: int,
    latest_rtt_us: int,
) -> list[SentPacket]:
    """Apply the two-threshold rule to the unacked ledger."""
    horizon = TIME_THRESHOLD_NUM * max(srtt_us, latest_rtt_us) // TIME_THRESHOLD_DEN
    lost = [
        pkt
        for pkt in ledger.values()
        if largest_acked - pkt.pn >= PACKET_THRESHOLD
        or now - pkt.time_sent >= horizon
    ]
    return sorted(lost, key=lambda p: p.pn)


def is_ack_eliciting(frames_list: list[Frame]) -> bool:
    return any(isinstance(f, ACK_ELICITING) for f in frames_list)

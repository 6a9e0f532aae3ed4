import random

import pytest

from spacelink.quiclite import frames as fr
from spacelink.quiclite import recovery as rec
from spacelink.quiclite.wire import MSS

from .oracles import loss_reference


def sent(pn, time_sent=0, size=1200):
    return rec.SentPacket(pn, size, time_sent, True, (fr.Ping(),))


# ---------------------------------------------------------------------------
# RTT estimator

def test_first_sample_initializes():
    rtt = rec.RttEstimator()
    rtt.on_sample(200_000, 0)
    assert rtt.srtt_us == 200_000
    assert rtt.rttvar_us == 100_000
    assert rtt.min_rtt_us == 200_000


def test_ewma_gains():
    rtt = rec.RttEstimator()
    rtt.on_sample(100_000, 0)
    rtt.on_sample(180_000, 0)
    # rttvar = 3/4*50000 + 1/4*|100000-180000| ; srtt = 7/8*100000 + 1/8*180000
    assert rtt.srtt_us == 110_000
    assert rtt.rttvar_us == 57_500


def test_ack_delay_subtracted_but_not_below_min():
    rtt = rec.RttEstimator()
    rtt.on_sample(100_000, 0)
    rtt.on_sample(100_000, 90_000)  # adjusted would be 10k < min_rtt
    assert rtt.srtt_us == 100_000  # clamped to min_rtt, no skew


def test_pto_interval():
    rtt = rec.RttEstimator()
    assert rtt.pto_interval_us() == 100_000 + 4 * 50_000 + 25_000


# ---------------------------------------------------------------------------
# NewReno

def test_loss_halves_cwnd():
    cc = rec.NewReno(cwnd=20 * MSS)
    cc.on_lost(sent(5), next_pn=10)
    assert cc.cwnd == 10 * MSS
    assert cc.ssthresh == 10 * MSS


def test_slow_start_growth():
    cc = rec.NewReno(cwnd=10 * MSS)
    cc.on_acked(sent(1, size=2 * MSS))
    assert cc.cwnd == 12 * MSS


def test_congestion_avoidance_growth():
    cc = rec.NewReno(cwnd=10 * MSS, ssthresh=5 * MSS)
    cc.on_acked(sent(1, size=10 * MSS))
    assert cc.cwnd == 10 * MSS + MSS  # MSS * acked/cwnd


def test_single_halving_per_epoch():
    cc = rec.NewReno(cwnd=40 * MSS)
    cc.on_lost(sent(3), next_pn=20)
    assert cc.cwnd == 20 * MSS
    assert cc.recovery_start_pn == 20
    cc.on_lost(sent(7), next_pn=21)  # sent before recovery started
    assert cc.cwnd == 20 * MSS
    cc.on_lost(sent(25), next_pn=30)  # new epoch
    assert cc.cwnd == 10 * MSS


def test_cwnd_floor():
    cc = rec.NewReno(cwnd=3 * MSS)
    cc.on_lost(sent(1), next_pn=2)
    assert cc.cwnd == 2 * MSS
    cc.on_lost(sent(3), next_pn=4)
    assert cc.cwnd == 2 * MSS


def test_no_growth_during_recovery():
    cc = rec.NewReno(cwnd=20 * MSS)
    cc.on_lost(sent(5), next_pn=10)
    cwnd_after = cc.cwnd
    cc.on_acked(sent(6))  # pn < recovery_start_pn
    assert cc.cwnd == cwnd_after
    cc.on_acked(sent(12, size=MSS))  # post-recovery packet grows again
    assert cc.cwnd > cwnd_after


def test_pto_never_collapses_cwnd():
    cc = rec.NewReno(cwnd=20 * MSS)
    for _ in range(5):
        cc.on_pto_fired()
    assert cc.cwnd == 20 * MSS
    assert cc.pto_count == 5
    cc.on_acked(sent(1))
    assert cc.pto_count == 0


def test_bytes_in_flight_accounting():
    cc = rec.NewReno()
    cc.on_sent(1200, True)
    cc.on_sent(1200, True)
    cc.on_sent(100, False)
    assert cc.bytes_in_flight == 2400
    cc.on_acked(sent(1))
    assert cc.bytes_in_flight == 1200
    cc.on_lost(sent(2), next_pn=3)
    assert cc.bytes_in_flight == 0


# ---------------------------------------------------------------------------
# ACK validation and loss detection

def test_validate_ack_rejects_future_pns():
    with pytest.raises(rec.MalformedAck):
        rec.validate_ack(fr.Ack(10, 0, ((10, 8),)), max_sent_pn=4)


def test_validate_ack_rejects_overlap():
    with pytest.raises(rec.MalformedAck):
        rec.validate_ack(fr.Ack(10, 0, ((10, 5), (6, 2))), max_sent_pn=10)
    with pytest.raises(rec.MalformedAck):
        rec.validate_ack(fr.Ack(10, 0, ((10, 5), (4, 2))), max_sent_pn=10)  # adjacent


def test_acked_pns_expansion():
    assert rec.acked_pns(fr.Ack(9, 0, ((9, 7), (4, 2)))) == {9, 8, 7, 4, 3, 2}


def test_spec_example_trace():
    # sent pn 1..4; ACK{largest=4, ranges cover 2..4} -> lost = {1}
    ledger = {pn: sent(pn, time_sent=0) for pn in (1, 2, 3, 4)}
    for pn in (2, 3, 4):
        del ledger[pn]
    lost = rec.detect_losses(ledger, largest_acked=4, now=0, srtt_us=100_000, latest_rtt_us=0)
    assert [p.pn for p in lost] == [1]


def test_time_threshold():
    ledger = {1: sent(1, time_sent=0)}
    horizon = 9 * 100_000 // 8
    assert not rec.detect_losses(ledger, 2, horizon - 1, 100_000, 100_000)
    assert [p.pn for p in rec.detect_losses(ledger, 2, horizon, 100_000, 100_000)] == [1]


def test_loss_detection_matches_bruteforce_1000_traces():
    rnd = random.Random(424242)
    for trial in range(1000):
        srtt = rnd.randrange(1_000, 500_000)
        latest = rnd.randrange(1_000, 500_000)
        n = rnd.randrange(1, 30)
        times = {pn: rnd.randrange(0, 1_000_000) for pn in range(n)}
        acked = set(rnd.sample(range(n), k=rnd.randrange(0, n)))
        ledger = {pn: sent(pn, t) for pn, t in times.items() if pn not in acked}
        largest_acked = max(acked) if acked else rnd.randrange(0, n)
        now = rnd.randrange(0, 2_000_000)
        got = [
            p.pn
            for p in rec.detect_losses(ledger, largest_acked, now, srtt, latest)
        ]
        want = loss_reference.lost_packets(
            {pn: t for pn, t in times.items() if pn not in acked},
            largest_acked,
            now,
            srtt,
            latest,
        )
        assert got == want, (trial, got, want)

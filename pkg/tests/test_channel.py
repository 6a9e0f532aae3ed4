import pytest

from spacelink import channel as ch
from spacelink.channel import Channel, ChannelConfig, Direction


def test_degenerate_config_exact_delivery():
    c = Channel(ChannelConfig(one_way_delay_us=10_000, seed=1))
    c.send(b"hello", Direction.UP, now=0)
    events = c.advance(10_000)
    assert len(events) == 1
    assert events[0].deliver_at == 10_000
    assert events[0].datagram == b"hello"


def test_total_loss_delivers_nothing():
    c = Channel(ChannelConfig(one_way_delay_us=1000, loss_rate=1.0, seed=2))
    for _ in range(100):
        c.send(b"x", Direction.UP, now=0)
    assert c.advance(10_000_000) == []
    assert c.dropped_count == 100


def test_fixed_seed_identical_schedule():
    def run():
        c = Channel(
            ChannelConfig(
                one_way_delay_us=5000,
                jitter_us=2000,
                loss_rate=0.3,
                duplicate_rate=0.1,
                corrupt_byte_rate=0.01,
                seed=99,
            )
        )
        for i in range(10_000):
            c.send(bytes([i & 0xFF] * 8), Direction.UP if i % 2 else Direction.DOWN, now=i)
        return [(e.deliver_at, e.datagram, e.direction) for e in c.advance(10_000_000)]

    assert run() == run()


def test_advance_returns_each_event_once():
    c = Channel(ChannelConfig(one_way_delay_us=100, seed=3))
    c.send(b"a", Direction.UP, now=0)
    assert len(c.advance(100)) == 1
    assert c.advance(100) == []
    assert c.advance(200) == []


def test_clock_regression():
    c = Channel(ChannelConfig(seed=4))
    c.advance(100)
    with pytest.raises(ch.ClockRegression):
        c.advance(99)


def test_ordering_ties_by_insertion():
    c = Channel(ChannelConfig(one_way_delay_us=100, seed=5))
    c.send(b"first", Direction.UP, now=0)
    c.send(b"second", Direction.UP, now=0)
    events = c.advance(100)
    assert [e.datagram for e in events] == [b"first", b"second"]


def test_loss_oracle_matches_channel():
    cfg = ChannelConfig(one_way_delay_us=10, loss_rate=0.25, seed=1717)
    c = Channel(cfg)
    predicted = ch.loss_oracle(1717, 500, 0.25)
    actual = []
    for i in range(500):
        before = c.dropped_count
        c.send(b"payload", Direction.UP, now=i)
        actual.append(c.dropped_count > before)
    assert actual == predicted


def test_loss_oracle_statistics():
    drops = ch.loss_oracle(seed=8, n=10_000, loss_rate=0.05)
    fraction = sum(drops) / len(drops)
    assert abs(fraction - 0.05) <= 0.01


def test_loss_oracle_zero_rate():
    assert not any(ch.loss_oracle(seed=9, n=1000, loss_rate=0.0))


def test_channel_loss_oracle_method():
    cfg = ChannelConfig(loss_rate=0.4, seed=55)
    assert Channel(cfg).loss_oracle(100) == ch.loss_oracle(55, 100, 0.4)


def test_conservation():
    cfg = ChannelConfig(
        one_way_delay_us=50, loss_rate=0.2, duplicate_rate=0.15, seed=31
    )
    c = Channel(cfg)
    for i in range(2000):
        c.send(b"data", Direction.DOWN, now=0)
    c.advance(1_000_000)
    assert c.delivered_count + c.dropped_count == c.sent_count + c.duplicated_count


def test_no_delivery_before_minimum_delay():
    cfg = ChannelConfig(one_way_delay_us=10_000, jitter_us=3000, seed=77)
    c = Channel(cfg)
    for i in range(500):
        c.send(b"x", Direction.UP, now=1000)
    for e in c.advance(10_000_000):
        assert e.deliver_at >= 1000 + (10_000 - 3000)


def test_corruption_flips_one_bit_per_affected_byte():
    cfg = ChannelConfig(corrupt_byte_rate=1.0, seed=12)
    c = Channel(cfg)
    original = bytes(range(100))
    c.send(original, Direction.UP, now=0)
    (event,) = c.advance(0)
    diff = [a ^ b for a, b in zip(original, event.datagram)]
    assert all(d != 0 and (d & (d - 1)) == 0 for d in diff)  # exactly one bit each


def test_bandwidth_serialization_queueing():
    # 8000 bits at 8000 bps = 1 s per 1000-byte datagram; second datagram
    # queues behind the first.
    cfg = ChannelConfig(one_way_delay_us=0, bandwidth_bps=8000, seed=13)
    c = Channel(cfg)
    c.send(bytes(1000), Direction.UP, now=0)
    c.send(bytes(1000), Direction.UP, now=0)
    events = c.advance(10_000_000)
    assert [e.deliver_at for e in events] == [1_000_000, 2_000_000]


def test_rate_validation():
    with pytest.raises(ch.ChannelError):
        Channel(ChannelConfig(loss_rate=1.5))
    with pytest.raises(ch.ChannelError):
        Channel(ChannelConfig(one_way_delay_us=-5))


def test_profiles():
    geo = ch.config_from_profile("geo", loss_pct=5, seed=3)
    assert geo.one_way_delay_us == 275_000
    assert geo.loss_rate == 0.05
    leo = ch.config_from_profile("leo")
    assert leo.one_way_delay_us == 10_000
    with pytest.raises(ch.ChannelError):
        ch.config_from_profile("meo")


def test_config_from_file(tmp_path):
    path = tmp_path / "link.conf"
    path.write_text(
        "# deep-space-ish test link\n"
        "profile = geo\n"
        "loss_rate = 0.05\n"
        "jitter_us = 1500\n"
        "seed = 99\n"
    )
    cfg = ch.config_from_file(str(path))
    assert cfg.one_way_delay_us == 275_000
    assert cfg.loss_rate == 0.05
    assert cfg.jitter_us == 1500
    assert cfg.seed == 99
    bad = tmp_path / "bad.conf"
    bad.write_text("warp_factor = 9\n")
    with pytest.raises(ch.ChannelError):
        ch.config_from_file(str(bad))


def test_duplicates_counted_and_delivered():
    cfg = ChannelConfig(one_way_delay_us=10, duplicate_rate=1.0, seed=21)
    c = Channel(cfg)
    c.send(b"dup", Direction.UP, now=0)
    events = c.advance(1000)
    assert len(events) == 2
    assert c.duplicated_count == 1

"""Deterministic simulated space link with virtual time.

The link model is driven entirely by a fixed PRNG so that a (config, seed,
send sequence) triple produces the identical event stream on every run and
platform.  The generator is normative: a SplitMix64 stream expands the seed
into four independent xoshiro256** generators, one per randomness purpose
(loss, duplication, jitter, corruption).  Keeping the purposes on separate
streams means the drop decision for the i-th send depends only on the seed
and i, which is what lets `loss_oracle` predict drops without replaying
payloads.

Virtual time is an integer microsecond counter owned by the channel; nothing
in this module ever consults the wall clock.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

MASK64 = (1 << 64) - 1


class ChannelError(Exception):
    pass


class ClockRegression(ChannelError):
    pass


class SplitMix64:
    """Seed expander (Steele et al.); one 64-bit output per step."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    """xoshiro256** 1.0 (Blackman/Vigna), seeded from SplitMix64."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self.s = [sm.next() for _ in range(4)]

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        return self.next_u64() % n


# Purpose-stream seeds derive from the master seed via SplitMix64 steps.
_PURPOSES = ("loss", "dup", "jitter", "corrupt")


def _purpose_seeds(seed: int) -> dict[str, int]:
    sm = SplitMix64(seed)
    return {name: sm.next() for name in _PURPOSES}


class Direction(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class ChannelConfig:
    one_way_delay_us: int = 0
    jitter_us: int = 0
    loss_rate: float = 0.0
    corrupt_byte_rate: float = 0.0
    duplicate_rate: float = 0.0
    bandwidth_bps: int = 0  # 0 = unlimited
    seed: int = 0

    def validate(self) -> None:
        for name in ("loss_rate", "corrupt_byte_rate", "duplicate_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ChannelError(f"{name}={rate} outside [0, 1]")
        if self.one_way_delay_us < 0:
            raise ChannelError("delay must be non-negative")


# Artifact preset profiles; loss is orthogonal and set separately.
PROFILES = {
    "leo": {"one_way_delay_us": 10_000},
    "geo": {"one_way_delay_us": 275_000},
}
LOSS_PRESETS_PCT = (0, 1, 5, 10)


@dataclass(order=True)
class LinkEvent:
    deliver_at: int
    _seq: int  # insertion tiebreak
    datagram: bytes = field(compare=False)
    direction: Direction = field(compare=False)


class Channel:
    """Bidirectional lossy link with a single virtual timeline."""

    def __init__(self, config: ChannelConfig):
        config.validate()
        self.config = config
        seeds = _purpose_seeds(config.seed)
        self._loss_rng = Xoshiro256StarStar(seeds["loss"])
        self._dup_rng = Xoshiro256StarStar(seeds["dup"])
        self._jitter_rng = Xoshiro256StarStar(seeds["jitter"])
        self._corrupt_rng = Xoshiro256StarStar(seeds["corrupt"])
        self.now = 0
        self._queue: list[LinkEvent] = []
        self._insert_seq = 0
        self._link_free_at = {Direction.UP: 0, Direction.DOWN: 0}
        self.sent_count = 0
        self.dropped_count = 0
        self.duplicated_count = 0
        self.delivered_count = 0

    # -- sending ------------------------------------------------------------

    def send(self, datagram: bytes, direction: Direction, now: int | None = None) -> None:
        if now is None:
            now = self.now
        cfg = self.config
        self.sent_count += 1
        if self._loss_rng.uniform() < cfg.loss_rate:
            self.dropped_count += 1
            return
        self._schedule(datagram, direction, now)
        if cfg.duplicate_rate > 0.0 and self._dup_rng.uniform() < cfg.duplicate_rate:
            self.duplicated_count += 1
            self._schedule(datagram, direction, now)

    def _schedule(self, datagram: bytes, direction: Direction, now: int) -> None:
        cfg = self.config
        if cfg.bandwidth_bps > 0:
            start = max(now, self._link_free_at[direction])
            ser_us = (len(datagram) * 8 * 1_000_000) // cfg.bandwidth_bps
            self._link_free_at[direction] = start + ser_us
        else:
            start = now
            ser_us = 0
        jitter = 0
        if cfg.jitter_us > 0:
            jitter = self._jitter_rng.below(2 * cfg.jitter_us + 1) - cfg.jitter_us
        deliver_at = max(now, start + ser_us + cfg.one_way_delay_us + jitter)
        payload = datagram
        if cfg.corrupt_byte_rate > 0.0:
            payload = self._corrupt(datagram)
        heapq.heappush(
            self._queue,
            LinkEvent(deliver_at, self._insert_seq, payload, direction),
        )
        self._insert_seq += 1

    def _corrupt(self, datagram: bytes) -> bytes:
        # Each affected byte gets exactly one random bit flipped.
        rate = self.config.corrupt_byte_rate
        out = bytearray(datagram)
        for i in range(len(out)):
            if self._corrupt_rng.uniform() < rate:
                out[i] ^= 1 << self._corrupt_rng.below(8)
        return bytes(out)

    # -- time ---------------------------------------------------------------

    def advance(self, until: int) -> list[LinkEvent]:
        """Move the clock and return events due at or before `until`, in order."""
        if until < self.now:
            raise ClockRegression(f"advance to {until} before current {self.now}")
        due: list[LinkEvent] = []
        while self._queue and self._queue[0].deliver_at <= until:
            due.append(heapq.heappop(self._queue))
        self.now = until
        self.delivered_count += len(due)
        return due

    def next_event_time(self) -> int | None:
        return self._queue[0].deliver_at if self._queue else None

    def pending(self) -> int:
        return len(self._queue)

    def loss_oracle(self, n: int) -> list[bool]:
        """Drop decisions this channel's seed implies for its first n sends."""
        return loss_oracle(self.config.seed, n, self.config.loss_rate)


def loss_oracle(seed: int, n: int, loss_rate: float) -> list[bool]:
    """Predict the drop decision for the first n sends under this seed.

    True means the datagram is dropped.  Exactly mirrors the loss stream a
    Channel built with the same seed consumes, one draw per send().
    """
    rng = Xoshiro256StarStar(_purpose_seeds(seed)["loss"])
    return [rng.uniform() < loss_rate for _ in range(n)]


def config_from_profile(
    profile: str,
    loss_pct: float = 0.0,
    seed: int = 0,
    jitter_us: int = 0,
    corrupt_byte_rate: float = 0.0,
    duplicate_rate: float = 0.0,
    bandwidth_bps: int = 0,
) -> ChannelConfig:
    if profile not in PROFILES:
        raise ChannelError(f"unknown profile {profile!r}; have {sorted(PROFILES)}")
    return ChannelConfig(
        one_way_delay_us=PROFILES[profile]["one_way_delay_us"],
        jitter_us=jitter_us,
        loss_rate=loss_pct / 100.0,
        corrupt_byte_rate=corrupt_byte_rate,
        duplicate_rate=duplicate_rate,
        bandwidth_bps=bandwidth_bps,
        seed=seed,
    )


def config_from_file(path: str) -> ChannelConfig:
    """Build a config from a plain `key = value` file.

    Recognized keys: `profile` (leo/geo preset for the delay), plus any
    ChannelConfig field name; explicit fields override the profile.  Rates
    are plain fractions in [0, 1].
    """
    entries: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, _, value = line.partition("=")
            entries[name.strip()] = value.strip()
    fields = {}
    if "profile" in entries:
        profile = entries.pop("profile")
        if profile not in PROFILES:
            raise ChannelError(f"unknown profile {profile!r}; have {sorted(PROFILES)}")
        fields.update(PROFILES[profile])
    ints = ("one_way_delay_us", "jitter_us", "bandwidth_bps", "seed")
    floats = ("loss_rate", "corrupt_byte_rate", "duplicate_rate")
    for name, value in entries.items():
        if name in ints:
            fields[name] = int(value, 0)
        elif name in floats:
            fields[name] = float(value)
        else:
            raise ChannelError(f"unknown channel config key {name!r}")
    return ChannelConfig(**fields)

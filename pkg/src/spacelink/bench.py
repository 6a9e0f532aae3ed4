"""Benchmark harness: state-footprint comparison, steady-state per-packet
crypto cost, and reliable-transfer throughput under latency and loss.

Absolute timings are hardware-relative; every report carries that caveat
and echoes its full configuration (profile, seed, loss) so a run can be
reproduced.  Non-timing metrics (footprints, virtual-time goodput,
retransmission counts) are bit-reproducible for a fixed seed: they derive
only from the deterministic simulation.

The memory metric is the portable state footprint: the summed serialized
size of all live security/transport objects and their buffers on the
flight side, sampled after every protocol event.  It deliberately replaces
process heap/RSS numbers, which depend on the allocator and runtime; the
actionable comparison is the ordering and the rough magnitude gap between
modes, which the footprint preserves.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from . import packet as _packet
from . import sdls as _sdls
from .channel import Channel, config_from_profile
from .endpoints import FlightNode, GroundNode, SimHarness, TransferFailed, schemas as sc
from .endpoints.modes import LinkKeys, seeded_rand
from .quiclite import Role, ServerEndpoint, State, TransportSession
from .quiclite import frames as fr

HW_NOTE = "timings are hardware-relative; compare ratios and orderings only"
CSV_COLUMNS = ("scenario", "mode", "metric", "value", "unit", "seed", "profile", "loss")

CRYPTO_SIZES = (64, 256, 1024)
CRYPTO_WARMUP = 1_000
FOOTPRINT_COMMANDS = 100
FOOTPRINT_HK = 100
TRANSFER_PAYLOAD = 1 << 20


class BenchError(Exception):
    pass


class IoError(BenchError):
    pass


@dataclass
class MetricRow:
    metric: str
    value: float | int
    unit: str


@dataclass
class BenchReport:
    scenario: str
    mode: str
    rows: list[MetricRow] = field(default_factory=list)
    seed: int = 0
    profile: str = "-"
    loss_pct: float = 0.0
    note: str = HW_NOTE

    def add(self, metric: str, value, unit: str) -> None:
        self.rows.append(MetricRow(metric, value, unit))

    def value(self, metric: str):
        for row in self.rows:
            if row.metric == metric:
                return row.value
        raise KeyError(metric)


def emit_csv(reports, path: str) -> None:
    """Write reports as `scenario,mode,metric,value,unit,seed,profile,loss`."""
    if isinstance(reports, BenchReport):
        reports = [reports]
    lines = [",".join(CSV_COLUMNS)]
    for rep in reports:
        for row in rep.rows:
            lines.append(
                ",".join(
                    (
                        rep.scenario,
                        rep.mode,
                        row.metric,
                        str(row.value),
                        row.unit,
                        str(rep.seed),
                        rep.profile,
                        str(rep.loss_pct),
                    )
                )
            )
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


# ---------------------------------------------------------------------------
# crypto cost (steady state, handshake excluded)

def establish_pair(backend: str = "gcm", seed: int = 7):
    """In-memory handshake; returns (client session, server session)."""
    rand = seeded_rand(seed)
    keys = LinkKeys()
    client = TransportSession(
        Role.CLIENT,
        rand(8),
        backend=backend,
        pinned_server_key=keys.server_public,
        rand=rand,
    )
    server_ep = ServerEndpoint(keys.identity(), backend=backend, rand=rand)
    ch = client.client_hello(0)
    server = server_ep.handle_datagram(ch, 0)
    for datagram in server.poll_transmit(0):
        client.handle_datagram(datagram, 0)
    if client.state is not State.ESTABLISHED or server.state is not State.ESTABLISHED:
        raise BenchError("handshake failed")
    return client, server


def _percentile(samples: list[int], fraction: float) -> int:
    ordered = sorted(samples)
    index = min(len(ordered) - 1, int(len(ordered) * fraction))
    return ordered[index]


def bench_crypto(
    sizes=CRYPTO_SIZES,
    iters: int = 10_000,
    backend: str = "gcm",
    warmup: int = CRYPTO_WARMUP,
    seed: int = 7,
) -> BenchReport:
    """Median/p95 per-packet protect+unprotect cost, both security layers.

    The transport path times frame encode + seal + header mask (and the
    reverse); the symmetric path times packet encode + seal (and verify +
    replay update + decode).  Loss-recovery bookkeeping is excluded so the
    numbers isolate the wire-crypto cost the layers disagree on.
    """
    report = BenchReport(scenario="crypto", mode=f"quic-vs-sdls/{backend}", seed=seed)
    if iters <= 0:
        return report
    client, server = establish_pair(backend, seed)
    keys = LinkKeys()
    sa_tx = keys.uplink_sa(backend)
    sa_rx = keys.uplink_sa(backend)
    clock = time.perf_counter_ns

    for size in sizes:
        payload = bytes((i * 131 + size) & 0xFF for i in range(size))
        quic_frames = [fr.Datagram(payload)]
        pkt = _packet.SpacePacket(_packet.PacketType.COMMAND, 0x042, 0, payload)
        q_protect, q_unprotect, s_apply, s_accept = [], [], [], []
        for i in range(warmup + iters):
            t0 = clock()
            datagram = client.protect(quic_frames, 0, track=False)
            t1 = clock()
            server.unprotect(datagram, 0, track=False)
            t2 = clock()
            frame = _sdls.apply(sa_tx, pkt)
            t3 = clock()
            _sdls.accept(sa_rx, frame)
            t4 = clock()
            if i >= warmup:
                q_protect.append(t1 - t0)
                q_unprotect.append(t2 - t1)
                s_apply.append(t3 - t2)
                s_accept.append(t4 - t3)
        quic_total = statistics.median(q_protect) + statistics.median(q_unprotect)
        sdls_total = statistics.median(s_apply) + statistics.median(s_accept)
        report.add(f"quic_protect_median_{size}B", statistics.median(q_protect), "ns")
        report.add(f"quic_unprotect_median_{size}B", statistics.median(q_unprotect), "ns")
        report.add(f"quic_protect_p95_{size}B", _percentile(q_protect, 0.95), "ns")
        report.add(f"quic_unprotect_p95_{size}B", _percentile(q_unprotect, 0.95), "ns")
        report.add(f"sdls_apply_median_{size}B", statistics.median(s_apply), "ns")
        report.add(f"sdls_accept_median_{size}B", statistics.median(s_accept), "ns")
        report.add(f"sdls_apply_p95_{size}B", _percentile(s_apply, 0.95), "ns")
        report.add(f"sdls_accept_p95_{size}B", _percentile(s_accept, 0.95), "ns")
        report.add(f"quic_over_sdls_ratio_{size}B", round(quic_total / sdls_total, 4), "ratio")
    return report


# ---------------------------------------------------------------------------
# state footprint (standard 100-command + 100-HK lossless script)

FOOTPRINT_MODES = (
    ("none", "gcm"),
    ("sdls", "gcm"),
    ("quic", "gcm"),
    ("quic", "chacha"),
)


def _mode_label(mode: str, backend: str) -> str:
    return mode if mode != "quic" else f"quic-{backend}"


def run_footprint_script(
    mode: str, backend: str, seed: int = 11, profile: str = "leo"
) -> tuple[int, int, FlightNode]:
    """Run the standard script; returns (fresh, peak) footprints in bytes."""
    config = config_from_profile(profile, 0.0, seed)
    keys = LinkKeys()
    flight = FlightNode(mode, backend, keys=keys, rand=seeded_rand(seed + 1))
    ground = GroundNode(
        mode,
        backend,
        keys=keys,
        rtt_hint_us=2 * config.one_way_delay_us + 50_000,
        rand=seeded_rand(seed + 2),
    )
    harness = SimHarness(Channel(config), flight, ground)
    fresh = flight.security_footprint()
    peak = fresh

    def sample(_now: int) -> None:
        nonlocal peak
        peak = max(peak, flight.security_footprint())

    harness.on_event = sample
    ground.connect(0)
    harness.run_until(ground.connected, deadline_us=5_000_000)
    if not ground.connected():
        raise BenchError(f"{mode} link never came up")
    for k in range(FOOTPRINT_COMMANDS):
        at = 500_000 + k * 1_000_000
        harness.run_until(lambda: harness.now >= at, deadline_us=at)
        ground.send_command(sc.Command(sc.FC_NOOP), harness.now)
    end = (FOOTPRINT_HK + 2) * 1_000_000
    harness.run_for(end - harness.now)
    sample(harness.now)
    return fresh, peak, flight


def bench_footprint(seed: int = 11, profile: str = "leo") -> list[BenchReport]:
    reports = []
    for mode, backend in FOOTPRINT_MODES:
        fresh, peak, flight = run_footprint_script(mode, backend, seed, profile)
        report = BenchReport(
            scenario="footprint",
            mode=_mode_label(mode, backend),
            seed=seed,
            profile=profile,
        )
        report.add("fresh_state", fresh, "bytes")
        report.add("peak_state", peak, "bytes")
        report.add("commands_accepted", flight.cmd_accept_count, "count")
        report.add("hk_published", FOOTPRINT_HK, "count")
        overflow = flight.cmd_pipe.overflow_count + flight.to_pipe.overflow_count
        report.add("bus_overflow_drops", overflow, "count")
        report.add("bus_no_subscriber", flight.bus.no_subscriber_count, "count")
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# throughput under latency and loss (reliable 1 MiB transfer)

def run_transfer(
    mode: str,
    profile: str,
    loss_pct: float,
    seed: int,
    payload_len: int = TRANSFER_PAYLOAD,
    backend: str = "gcm",
    deadline_s: int = 20_000,
) -> BenchReport:
    """One reliable upload; quic rides its stream, sdls rides stop-and-wait."""
    config = config_from_profile(profile, loss_pct, seed)
    keys = LinkKeys()
    flight = FlightNode(mode, backend, keys=keys, rand=seeded_rand(seed + 1), hk_period_us=0)
    ground = GroundNode(
        mode,
        backend,
        keys=keys,
        rtt_hint_us=2 * config.one_way_delay_us + 50_000,
        rand=seeded_rand(seed + 2),
    )
    harness = SimHarness(Channel(config), flight, ground)
    payload = bytes((i * 31 + 7) & 0xFF for i in range(payload_len))

    setup_us = 0
    ground.connect(0)
    harness.run_until(ground.connected, deadline_us=60_000_000)
    if not ground.connected():
        raise BenchError(f"{mode} link never came up (loss {loss_pct}%)")
    if mode == "quic":
        setup_us = ground.session.established_at

    start = harness.now
    ground.start_transfer(payload, start)

    def done() -> bool:
        if ground.arq is not None and ground.arq.failed:
            raise TransferFailed("stop-and-wait gave up after max tries")
        return len(flight.bulk_data) >= payload_len

    finished = harness.run_until(done, deadline_us=deadline_s * 1_000_000)
    if not finished:
        raise BenchError(
            f"{mode} transfer incomplete: {len(flight.bulk_data)}/{payload_len}"
        )
    elapsed_us = max(1, harness.now - start)

    report = BenchReport(
        scenario=f"throughput/{profile}",
        mode=_mode_label(mode, backend),
        seed=seed,
        profile=profile,
        loss_pct=loss_pct,
    )
    goodput = payload_len / (elapsed_us / 1_000_000)
    report.add("payload", payload_len, "bytes")
    report.add("transfer_time", elapsed_us, "us_virtual")
    report.add("goodput", round(goodput, 2), "bytes_per_vsec")
    report.add("handshake_setup", setup_us, "us_virtual")
    report.add("delivered_intact", int(bytes(flight.bulk_data) == payload), "bool")
    if mode == "quic":
        session = ground.session
        report.add("retransmitted_frames", session.counters["retransmitted_frames"], "count")
        report.add("packets_lost", session.counters["packets_lost"], "count")
    else:
        report.add("retransmitted_frames", ground.arq.retransmissions, "count")
        report.add("packets_lost", harness.channel.dropped_count, "count")
    return report


def bench_throughput(
    profile: str = "geo",
    loss_pct: float = 5.0,
    payload_len: int = TRANSFER_PAYLOAD,
    seed: int = 13,
) -> list[BenchReport]:
    return [
        run_transfer("quic", profile, loss_pct, seed, payload_len),
        run_transfer("sdls", profile, loss_pct, seed, payload_len),
    ]

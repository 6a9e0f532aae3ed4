"""Command-line entry points.

    flight --mode {none,sdls,quic} [--backend {gcm,chacha}] [--config FILE]
           [--listen HOST:PORT]
        Run the flight node over live UDP datagrams (localhost lab mode).

    ground --mode {none,sdls,quic} [--backend ...] [--profile leo|geo]
           [--loss PCT] [--seed N] [--config FILE] [--interactive]
           [--live HOST:PORT] [command ...]
        Execute commands against a flight node.  By default both ends run
        in-process over the simulated channel; --live sends real datagrams
        to a running `flight` instead.

    bench {crypto,footprint,throughput} [--profile leo|geo] [--loss N]
          [--seed N] [--iters N] [--out FILE.csv]
        Reproduce the comparison measurements and emit CSV.

Commands are spelled `noop`, `reset`, `set:<id>:<value>`, `hk`.
"""

from __future__ import annotations

import argparse
import socket
import sys
import time

from . import bench as _bench
from .channel import Channel, config_from_profile
from .endpoints import (
    FlightNode,
    GroundNode,
    SimHarness,
    keys_from_config,
    parse_kv_file,
    schemas as sc,
    seeded_rand,
)
from .endpoints.ground import CommandOutcome
from .endpoints.modes import LinkKeys


def _load_keys(path: str | None) -> LinkKeys:
    if path is None:
        return LinkKeys()
    return keys_from_config(parse_kv_file(path))


def parse_command(text: str) -> sc.Command:
    parts = text.strip().lower().split(":")
    name = parts[0]
    if name == "noop":
        return sc.Command(sc.FC_NOOP)
    if name == "reset":
        return sc.Command(sc.FC_RESET_COUNTERS)
    if name == "hk":
        return sc.Command(sc.FC_REQUEST_HK)
    if name == "set" and len(parts) == 3:
        return sc.Command(sc.FC_SET_PARAM, int(parts[1]), int(parts[2]))
    raise ValueError(f"cannot parse command {text!r}")


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


# ---------------------------------------------------------------------------
# flight

def flight_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="flight", description="run the flight node over UDP")
    ap.add_argument("--mode", choices=("none", "sdls", "quic"), required=True)
    ap.add_argument("--backend", choices=("gcm", "chacha"), default="gcm")
    ap.add_argument("--config", help="key-value config file with link keys")
    ap.add_argument("--listen", default="127.0.0.1:47800", help="host:port to bind")
    ap.add_argument(
        "--max-seconds", type=float, default=0.0, help="exit after N seconds (0 = run forever)"
    )
    args = ap.parse_args(argv)

    node = FlightNode(args.mode, args.backend, keys=_load_keys(args.config))
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(_addr(args.listen))
    sock.settimeout(0.05)
    print(f"flight: mode={args.mode} backend={args.backend} listening on {args.listen}")

    started = time.monotonic()
    peer = None
    while True:
        now_us = int((time.monotonic() - started) * 1_000_000)
        try:
            datagram, peer = sock.recvfrom(65536)
            node.ci_ingest(datagram, now_us)
        except socket.timeout:
            pass
        node.step(now_us)
        if peer is not None:
            for out in node.drain_outbox():
                sock.sendto(out, peer)
        if args.max_seconds and time.monotonic() - started > args.max_seconds:
            break
    sock.close()
    return 0


# ---------------------------------------------------------------------------
# ground

def ground_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ground", description="send commands to the flight node")
    ap.add_argument("--mode", choices=("none", "sdls", "quic"), required=True)
    ap.add_argument("--backend", choices=("gcm", "chacha"), default="gcm")
    ap.add_argument("--config", help="key-value config file with link keys")
    ap.add_argument("--profile", choices=("leo", "geo"), default="leo")
    ap.add_argument("--loss", type=float, default=0.0, help="loss percentage")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--interactive", action="store_true", help="read commands from stdin")
    ap.add_argument("--live", metavar="HOST:PORT", help="talk to a live flight over UDP")
    ap.add_argument("commands", nargs="*", help="noop | reset | hk | set:<id>:<value>")
    args = ap.parse_args(argv)

    try:
        cmds = [parse_command(c) for c in args.commands]
    except ValueError as exc:
        ap.error(str(exc))
    if args.interactive:
        cmds.extend(parse_command(line) for line in sys.stdin if line.strip())
    if not cmds:
        ap.error("no commands given (try: ground --mode none noop)")

    keys = _load_keys(args.config)
    if args.live:
        return _ground_live(args, cmds, keys)
    return _ground_sim(args, cmds, keys)


def _print_outcome(cmd: sc.Command, handle) -> None:
    label = {0: "NOOP", 1: "RESET_COUNTERS", 2: "SET_PARAM", 3: "REQUEST_HK"}[cmd.fc]
    print(f"  {label}: {handle.outcome.value}")


def _ground_sim(args, cmds, keys) -> int:
    config = config_from_profile(args.profile, args.loss, args.seed)
    flight = FlightNode(args.mode, args.backend, keys=keys, rand=seeded_rand(args.seed + 1))
    ground = GroundNode(
        args.mode,
        args.backend,
        keys=keys,
        rtt_hint_us=2 * config.one_way_delay_us + 50_000,
        rand=seeded_rand(args.seed + 2),
    )
    harness = SimHarness(Channel(config), flight, ground)
    print(
        f"ground(sim): mode={args.mode} profile={args.profile} "
        f"loss={args.loss}% seed={args.seed}"
    )
    ground.connect(0)
    harness.run_until(ground.connected, deadline_us=30_000_000)
    if not ground.connected():
        print("  link never came up", file=sys.stderr)
        return 1
    failures = 0
    for cmd in cmds:
        handle = ground.send_command(cmd, harness.now)
        harness.run_until(
            lambda: handle.outcome is not CommandOutcome.PENDING,
            deadline_us=harness.now + 60_000_000,
        )
        _print_outcome(cmd, handle)
        if handle.outcome is not CommandOutcome.ACCEPTED:
            failures += 1
    if ground.received_hk:
        hk = ground.received_hk[-1]
        print(
            f"  last hk: accepts={hk.cmd_accept_count} rejects={hk.cmd_reject_count} "
            f"params={list(hk.param_table)} uptime={hk.uptime_us}us"
        )
    return 1 if failures else 0


def _ground_live(args, cmds, keys) -> int:
    ground = GroundNode(args.mode, args.backend, keys=keys, rtt_hint_us=200_000)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.settimeout(0.05)
    target = _addr(args.live)
    started = time.monotonic()

    def now_us() -> int:
        return int((time.monotonic() - started) * 1_000_000)

    def pump(deadline_s: float, predicate) -> None:
        while time.monotonic() - started < deadline_s and not predicate():
            for out in ground.drain_outbox():
                sock.sendto(out, target)
            try:
                datagram, _ = sock.recvfrom(65536)
                ground.on_wire(datagram, now_us())
            except socket.timeout:
                pass
            ground.step(now_us())

    print(f"ground(live): mode={args.mode} target={args.live}")
    ground.connect(now_us())
    pump(5.0, ground.connected)
    if not ground.connected():
        print("  no answer from flight", file=sys.stderr)
        sock.close()
        return 1
    failures = 0
    for cmd in cmds:
        handle = ground.send_command(cmd, now_us(), deadline_us=5_000_000)
        pump(10.0, lambda: handle.outcome is not CommandOutcome.PENDING)
        _print_outcome(cmd, handle)
        if handle.outcome is not CommandOutcome.ACCEPTED:
            failures += 1
    sock.close()
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# bench

def bench_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bench", description="comparison benchmarks")
    ap.add_argument("what", choices=("crypto", "footprint", "throughput"))
    ap.add_argument("--profile", choices=("leo", "geo"), default="geo")
    ap.add_argument("--loss", type=float, default=5.0, help="loss percentage")
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--iters", type=int, default=10_000, help="crypto iterations")
    ap.add_argument("--payload", type=int, default=_bench.TRANSFER_PAYLOAD)
    ap.add_argument("--out", help="CSV output path")
    args = ap.parse_args(argv)

    if args.what == "crypto":
        reports = [_bench.bench_crypto(iters=args.iters, seed=args.seed)]
    elif args.what == "footprint":
        reports = _bench.bench_footprint(seed=args.seed)
    else:
        reports = _bench.bench_throughput(
            profile=args.profile,
            loss_pct=args.loss,
            payload_len=args.payload,
            seed=args.seed,
        )
    for rep in reports:
        print(f"[{rep.scenario}] mode={rep.mode} (seed={rep.seed}, {rep.note})")
        for row in rep.rows:
            print(f"  {row.metric:<34} {row.value:>16} {row.unit}")
    if args.out:
        _bench.emit_csv(reports, args.out)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(bench_main())

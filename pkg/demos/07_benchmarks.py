#!/usr/bin/env python3
"""The three comparison benchmarks at demo scale, with CSV output.

Full-size runs are available from the `bench` command-line tool:

    bench crypto --iters 100000
    bench footprint
    bench throughput --profile geo --loss 5 --out results.csv
"""

from spacelink import bench

print("== per-packet crypto cost (steady state, wall clock) ==")
rep = bench.bench_crypto(sizes=(64, 1024), iters=2000, warmup=500)
for row in rep.rows:
    if "median" in row.metric or "ratio" in row.metric:
        print(f"  {row.metric:32s} {row.value:>12} {row.unit}")
print(f"  note: {rep.note}")

print("\n== state footprint, 100 commands + 100 housekeeping packets ==")
for mode, backend in bench.FOOTPRINT_MODES:
    fresh, peak, _ = bench.run_footprint_script(mode, backend)
    label = mode if mode != "quic" else f"quic-{backend}"
    print(f"  {label:12s} fresh={fresh:5d} B   peak={peak:5d} B")

print("\n== reliable 256 KiB upload, GEO profile ==")
for loss in (0.0, 5.0):
    for mode in ("quic", "sdls"):
        rep = bench.run_transfer(mode, "geo", loss, seed=13, payload_len=256 * 1024)
        print(
            f"  {mode:4s} loss={loss:3.0f}%  goodput={rep.value('goodput'):>9.0f} B/vs  "
            f"time={rep.value('transfer_time')/1e6:7.1f} vs  "
            f"retrans={rep.value('retransmitted_frames'):>4}  "
            f"intact={bool(rep.value('delivered_intact'))}"
        )

path = "/tmp/spacelink_demo_bench.csv"
bench.emit_csv(bench.bench_throughput("geo", 5.0, 128 * 1024, seed=13), path)
print(f"\nCSV written to {path}")
with open(path) as fh:
    for line in list(fh)[:4]:
        print("  " + line.rstrip())

"""Wall-clock timing of the three cryptographic phases.

One cell times request construction, a single reply, and announcement
verification for a (threshold, ring size) pair, averaged over repeats
with fresh identities each time.  The output CSV is the input for the
simulator's modeled crypto constants and for trend checks: request and
reply shrink as the threshold grows (fewer forgeries), verification
cost tracks the ring size and ignores the threshold.
"""

from __future__ import annotations

import csv
import gc
import io
import random
import statistics
import time
from dataclasses import dataclass

from . import ring
from .cpk import MasterKeyMaterial, derive_private, random_plate


@dataclass(frozen=True)
class BenchCell:
    threshold: int
    ring_size: int
    reps: int
    request_mean_s: float
    request_std_s: float
    request_min_s: float
    reply_mean_s: float
    reply_std_s: float
    reply_min_s: float
    verify_mean_s: float
    verify_std_s: float
    verify_min_s: float


BENCH_COLUMNS = [
    "threshold", "ring_size", "reps",
    "request_mean_s", "request_std_s", "request_min_s",
    "reply_mean_s", "reply_std_s", "reply_min_s",
    "verify_mean_s", "verify_std_s", "verify_min_s",
]


def _timed(fn):
    start = time.perf_counter()
    result = fn()
    return time.perf_counter() - start, result


def run_bench(material: MasterKeyMaterial, thresholds, ring_sizes, reps: int,
              seed=0) -> list:
    params = material.params
    rng = random.Random(f"echoring-bench/{seed}")
    cells = []
    gc_was_enabled = gc.isenabled()
    gc.disable()  # collector pauses would smear the phase timings
    try:
        for r in ring_sizes:
            for t in thresholds:
                if r - t < ring.THRESHOLD_GAP_MIN:
                    continue
                cells.append(_bench_cell(params, material, t, r, reps, rng))
                gc.collect()
    finally:
        if gc_was_enabled:
            gc.enable()
    return cells


def _bench_cell(params, material, t, r, reps, rng) -> BenchCell:
    req_times, rep_times, ver_times = [], [], []
    for rep in range(reps + 1):
        timed = rep > 0  # first round warms caches, untimed
        msg = rng.getrandbits(256).to_bytes(32, "big")
        own = derive_private(material, random_plate(rng))
        repliers = [derive_private(material, random_plate(rng))
                    for _ in range(t - 1)]
        dt, request = _timed(lambda: ring.build_request(
            params, msg, t, r, rng, exclude_ids=(own.identity,)))
        if timed:
            req_times.append(dt)
        fractions = []
        for i, key in enumerate(repliers):
            dt, fraction = _timed(lambda: ring.build_reply(
                params, request, key, rng))
            if timed and i == 0:
                rep_times.append(dt)
            fractions.append(fraction)
        if timed and not repliers:  # t = 1: the initiator is the only signer
            rep_times.append(0.0)
        announcement = ring.assemble(params, request, own, fractions, rng)
        dt, verdict = _timed(lambda: ring.verify_ring(params, announcement, rng))
        if timed:
            ver_times.append(dt)
        if not verdict:
            raise RuntimeError(f"benchmark round failed verification: {verdict.reason}")
    return BenchCell(
        threshold=t,
        ring_size=r,
        reps=reps,
        request_mean_s=statistics.fmean(req_times),
        request_std_s=statistics.pstdev(req_times),
        request_min_s=min(req_times),
        reply_mean_s=statistics.fmean(rep_times),
        reply_std_s=statistics.pstdev(rep_times),
        reply_min_s=min(rep_times),
        verify_mean_s=statistics.fmean(ver_times),
        verify_std_s=statistics.pstdev(ver_times),
        verify_min_s=min(ver_times),
    )


def bench_to_csv(cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for c in cells:
        writer.writerow([getattr(c, col) for col in BENCH_COLUMNS])
    return buf.getvalue()

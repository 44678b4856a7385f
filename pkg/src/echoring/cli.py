"""Batch command line: key ceremony, round trips, benchmarks, simulation.

Every command is deterministic given its seed, writes data to files or
stdout, keeps diagnostics on stderr, and exits 0 only on success.
Commands that write files also drop a ``<out>.manifest.json`` recording
the full resolved configuration, so any output is reproducible from its
manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time

from . import __version__, bench, protocol, ring, sim
from .cpk import (
    decode_master,
    decode_params,
    derive_private,
    derive_private_v2,
    encode_master,
    encode_params,
    random_plate,
    setup,
)

SCENARIO_ENV = "ECHORING_SCENARIO"


class CliError(Exception):
    """User-facing failure; printed to stderr, exit code 1."""


def _write_file(path: str, data: bytes, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise CliError(f"refusing to overwrite {path} (use --force)")
    with open(path, "wb") as fh:
        fh.write(data)


def _write_manifest(out_path: str, command: str, config: dict, outputs) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "outputs": list(outputs),
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_params(path: str):
    try:
        with open(path, "rb") as fh:
            return decode_params(fh.read())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load parameters from {path}: {exc}") from exc


def _load_material(params, path: str):
    try:
        with open(path, "rb") as fh:
            return decode_master(fh.read(), params)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load master key from {path}: {exc}") from exc


def _material_for(args):
    """Master key material from --params/--master files or a fresh ceremony."""
    if args.params:
        if not getattr(args, "master", None):
            raise CliError("--params also needs --master (private vector) here")
        params = _load_params(args.params)
        return _load_material(params, args.master)
    material, _ = setup(256, args.seed)
    return material


# -- subcommands -----------------------------------------------------------

def cmd_keygen(args) -> int:
    try:
        material, params = setup(args.n, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _write_file(args.out, encode_params(params), args.force)
    outputs = [args.out]
    if args.export_private:
        sk_path = args.out + ".sk"
        _write_file(sk_path, encode_master(material), args.force)
        outputs.append(sk_path)
    _write_manifest(args.out, "keygen",
                    {"n": args.n, "seed": args.seed,
                     "export_private": args.export_private},
                    outputs)
    print(f"wrote {' and '.join(outputs)}")
    return 0


def cmd_roundtrip(args) -> int:
    material = _material_for(args)
    params = material.params
    rng = random.Random(f"roundtrip/{args.seed}")
    msg = args.msg.encode("utf-8")
    derive = derive_private
    if args.variant_cpk:
        def derive(mat, identity):
            return derive_private_v2(mat, identity, rng.getrandbits(64))
    own = derive(material, random_plate(rng))
    repliers = [derive(material, random_plate(rng)) for _ in range(args.repliers)]

    timings = {}
    start = time.perf_counter()
    ephemeral_secret = ephemeral_pk = None
    if args.encrypt_replies:
        ephemeral_secret = params.curve.random_scalar(rng)
        ephemeral_pk = params.curve.mul(ephemeral_secret, params.curve.generator)
    try:
        request = ring.build_request(
            params, msg, args.t, args.r, rng,
            variant_cpk=args.variant_cpk,
            ephemeral_pk=ephemeral_pk,
            exclude_ids=[own.identity] + [k.identity for k in repliers],
        )
    except ring.ProtocolError as exc:
        raise CliError(f"request failed: {exc}") from exc
    timings["request_s"] = time.perf_counter() - start

    start = time.perf_counter()
    fractions = [ring.build_reply(params, request, key, rng) for key in repliers]
    timings["replies_s"] = time.perf_counter() - start

    start = time.perf_counter()
    try:
        announcement = ring.assemble(params, request, own, fractions, rng)
    except ring.ProtocolError as exc:
        raise CliError(f"assembly failed: {exc}") from exc
    timings["assemble_s"] = time.perf_counter() - start

    start = time.perf_counter()
    verdict = ring.verify_ring(params, announcement, rng)
    timings["verify_s"] = time.perf_counter() - start

    for phase, seconds in timings.items():
        print(f"{phase[:-2]:>10}: {seconds * 1000:8.2f} ms", file=sys.stderr)
    if args.out:
        _write_file(args.out, ring.encode_announcement(params, announcement), args.force)
        _write_manifest(args.out, "roundtrip", {
            "seed": args.seed, "t": args.t, "r": args.r,
            "repliers": args.repliers, "msg": args.msg,
            "variant_cpk": args.variant_cpk,
            "encrypt_replies": args.encrypt_replies,
            "params": args.params,
        }, [args.out])
    print("accept" if verdict else f"reject ({verdict.reason})")
    return 0 if verdict else 1


def cmd_verify(args) -> int:
    params = _load_params(args.params)
    try:
        with open(args.announcement, "rb") as fh:
            announcement = ring.decode_announcement(params, fh.read())
    except (OSError, ring.DecodeError) as exc:
        raise CliError(f"cannot read announcement: {exc}") from exc
    verdict = ring.verify_ring(params, announcement, random.Random(args.seed))
    if verdict and args.now is not None:
        packet = protocol.AggregationPacket(announcement)
        outcome = protocol.verify_announcement(params, packet, args.now,
                                               args.replay_window)
        if not outcome:
            print(f"reject ({outcome.reason})")
            return 1
    print("accept" if verdict else f"reject ({verdict.reason})")
    return 0 if verdict else 1


def _parse_grid(raw: str) -> list:
    values = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise CliError("empty value grid")
    return values


def cmd_bench(args) -> int:
    material = _material_for(args)
    cells = bench.run_bench(material, _parse_grid(args.t), _parse_grid(args.r),
                            args.reps, args.seed)
    csv_text = bench.bench_to_csv(cells)
    if args.out:
        _write_file(args.out, csv_text.encode(), args.force)
        _write_manifest(args.out, "bench", {
            "seed": args.seed, "t": args.t, "r": args.r, "reps": args.reps,
            "params": args.params,
        }, [args.out])
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_simulate(args) -> int:
    scenario_path = args.scenario or os.environ.get(SCENARIO_ENV)
    if not scenario_path:
        raise CliError(f"no scenario file given (argument or ${SCENARIO_ENV})")
    try:
        scenario, spec = sim.load_scenario(scenario_path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load scenario: {exc}") from exc
    if args.seed is not None:
        scenario.seed = args.seed
    if args.crypto_mode:
        scenario.crypto_mode = args.crypto_mode
        scenario.validate()
    rows = sim.sweep(
        scenario,
        vehicle_counts=spec.vehicle_counts,
        thresholds=spec.thresholds,
        ring_sizes=spec.ring_sizes,
        runs=spec.runs,
    )
    text = sim.rows_to_jsonl(rows) if args.format == "jsonl" else sim.rows_to_csv(rows)
    if args.out:
        _write_file(args.out, text.encode(), args.force)
        _write_manifest(args.out, "simulate", {
            "scenario": scenario_path,
            "resolved": {f: getattr(scenario, f) for f in (
                "area_m", "vehicle_count", "mean_speed_kmh", "comm_range_m",
                "duration_s", "ring_size", "threshold", "seed", "crypto_mode",
                "detection_radius_m", "session_timeout_s", "base_latency_s",
                "bitrate_bps", "jitter_s", "loss_rate", "deliberation_s",
                "honest_fraction", "grid_blocks")},
            "sweep": {"vehicle_counts": spec.vehicle_counts,
                      "thresholds": spec.thresholds,
                      "ring_sizes": spec.ring_sizes,
                      "runs": spec.runs},
            "format": args.format,
        }, [args.out])
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_anonymity(args) -> int:
    if args.j is not None:
        js = [args.j]
    else:
        js = list(range(1, args.t + 1))
    print("threshold,ring_size,found_at_least,probability")
    for j in js:
        try:
            p = sim.anonymity_prob(args.t, args.r, j)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        print(f"{args.t},{args.r},{j},{float(p)!r}")
    return 0


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoring",
        description="Threshold-ring announcement aggregation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="authority key ceremony")
    p.add_argument("--n", type=int, default=256, help="master vector length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="params.bin")
    p.add_argument("--export-private", action="store_true",
                   help="also write the secret vector next to the params")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("roundtrip", help="full request/reply/assemble/verify run")
    p.add_argument("--params", help="parameter file (with --master)")
    p.add_argument("--master", help="private vector file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--repliers", type=int, default=5)
    p.add_argument("--msg", default="roundtrip self-test")
    p.add_argument("--variant-cpk", action="store_true",
                   help="use blinded (collusion-resistant) keys")
    p.add_argument("--encrypt-replies", action="store_true",
                   help="bind an ephemeral key and exercise encrypted replies")
    p.add_argument("--out", help="write the announcement here")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_roundtrip)

    p = sub.add_parser("verify", help="re-verify a stored announcement")
    p.add_argument("--params", required=True)
    p.add_argument("announcement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--now", type=float, help="also enforce the replay window")
    p.add_argument("--replay-window", type=float,
                   default=protocol.DEFAULT_REPLAY_WINDOW)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="time the cryptographic phases")
    p.add_argument("--params")
    p.add_argument("--master")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", default="2..10", help="threshold grid, e.g. 2,4,6 or 2..10")
    p.add_argument("--r", default="20", help="ring size grid")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", nargs="?",
                   help=f"scenario file (default: ${SCENARIO_ENV})")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--crypto-mode", choices=("modeled", "real"))
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("anonymity", help="adversary success probability table")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--j", type=int, help="report only this many found signers")
    p.set_defaults(fn=cmd_anonymity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

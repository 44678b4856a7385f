"""Deterministic discrete-event simulation of the aggregation protocol.

Vehicles move on a Manhattan grid inside a square area; one road event
is injected per run at a random road position and time.  The nearest
honest vehicle that detects it initiates an aggregation session over a
unit-disk broadcast radio; witnesses within the detection radius reply
after a uniform deliberation delay.  The run records whether an
announcement was produced before the session timeout and how long the
aggregation took.

Simulated time spent on cryptography always comes from the calibrated
timing model below, even in ``crypto_mode = "real"`` (where the actual
signatures are computed and verified and can fail a run): wall-clock
measurements would break the rule that a scenario plus its seed fully
determines the metrics.

Everything is driven by one seeded RNG and a single-threaded event
queue with sequence-number tie-breaking, so identical scenarios give
byte-identical outputs.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import json
import math
import random
from dataclasses import dataclass, fields as dc_fields, replace
from fractions import Fraction

from . import protocol
from .cpk import MasterKeyMaterial, derive_private, random_plate, setup
from .protocol import Direction, EventDescription, EventType


@dataclass(frozen=True)
class CryptoTimingModel:
    """Phase costs in seconds, fitted once against this repo's benchmark.

    Request and reply scale with the forged-member count (r - t); the
    reply and verify phases carry the quadratic interpolation term.
    """

    request_base_s: float = 5.0e-4
    request_per_fake_s: float = 1.9e-3
    reply_base_s: float = 1.0e-3
    reply_per_fake_s: float = 1.7e-3
    reply_interp_s: float = 3.8e-5
    assemble_base_s: float = 2.0e-3
    assemble_per_fraction_s: float = 4.0e-3
    verify_base_s: float = 5.0e-4
    verify_per_entry_s: float = 1.8e-3
    verify_parity_s: float = 6.5e-6

    def request_time(self, t: int, r: int) -> float:
        return self.request_base_s + self.request_per_fake_s * (r - t)

    def reply_time(self, t: int, r: int) -> float:
        k = r - t
        return self.reply_base_s + self.reply_per_fake_s * k + self.reply_interp_s * k * k

    def assemble_time(self, t: int, r: int) -> float:
        return self.assemble_base_s + self.assemble_per_fraction_s * t

    def verify_time(self, t: int, r: int) -> float:
        # flat in t: every ring member costs the same to the verifier
        return self.verify_base_s + self.verify_per_entry_s * r + self.verify_parity_s * r * r


DEFAULT_CRYPTO_MODEL = CryptoTimingModel()


@dataclass
class SimScenario:
    """One simulation cell; all fields participate in seeding."""

    area_m: float = 2400.0
    vehicle_count: int = 150
    mean_speed_kmh: float = 60.0
    comm_range_m: float = 300.0
    duration_s: float = 200.0
    ring_size: int = 20
    threshold: int = 3
    seed: int = 0
    crypto_mode: str = "modeled"  # "modeled" | "real"
    detection_radius_m: float = 200.0
    session_timeout_s: float = 30.0
    base_latency_s: float = 0.001
    bitrate_bps: float = 6e6
    jitter_s: float = 0.002
    loss_rate: float = 0.0
    deliberation_s: float = 1.0  # max uniform witness think time
    honest_fraction: float = 1.0
    grid_blocks: int = 6

    def validate(self) -> None:
        if self.area_m <= 0 or self.duration_s <= 0 or self.vehicle_count <= 0:
            raise ValueError("area, duration and vehicle count must be positive")
        if not 0 < self.comm_range_m < self.area_m:
            raise ValueError("communication range must be positive and below the area side")
        if self.threshold < 1 or self.ring_size - self.threshold < 6:
            raise ValueError("ring size minus threshold must be higher than five")
        if self.crypto_mode not in ("modeled", "real"):
            raise ValueError(f"unknown crypto mode {self.crypto_mode!r}")
        if not 0 <= self.loss_rate < 1 or not 0 <= self.honest_fraction <= 1:
            raise ValueError("rates must lie in [0, 1)")
        if self.grid_blocks < 1 or self.mean_speed_kmh <= 0:
            raise ValueError("grid and speed must be positive")

    @property
    def density_per_km2(self) -> float:
        return self.vehicle_count / (self.area_m / 1000.0) ** 2


@dataclass
class SimMetrics:
    """Outcome of one simulated aggregation attempt."""

    success: bool
    timed_out: bool
    initiator_found: bool
    aggregation_delay_s: float | None
    crypto_time_s: float | None
    non_crypto_delay_s: float | None
    request_build_s: float | None
    replies_received: int
    willing_in_range: int
    vehicle_count: int
    density_per_km2: float
    threshold: int
    ring_size: int
    seed: int
    event_time_s: float | None


class EventQueue:
    """Time-ordered queue; ties resolved by insertion sequence number."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0.0

    def push(self, when: float, kind: str, payload=None) -> None:
        if when < self.now:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (when, self._seq, kind, payload))
        self._seq += 1

    def pop(self):
        when, _, kind, payload = heapq.heappop(self._heap)
        self.now = when
        return when, kind, payload

    def __bool__(self) -> bool:
        return bool(self._heap)


class _Vehicle:
    __slots__ = ("index", "identity", "axis", "line", "along", "direction",
                 "speed", "anchor_t", "honest", "key")

    def __init__(self, index, identity, axis, line, along, direction, speed, honest):
        self.index = index
        self.identity = identity
        self.axis = axis  # 0: moving along x on a horizontal road; 1: along y
        self.line = line  # grid line index of the fixed coordinate
        self.along = along
        self.direction = direction
        self.speed = speed
        self.anchor_t = 0.0
        self.honest = honest
        self.key = None

    def position(self, t: float, spacing: float):
        along = self.along + self.direction * self.speed * (t - self.anchor_t)
        fixed = self.line * spacing
        return (along, fixed) if self.axis == 0 else (fixed, along)


def _distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class _Run:
    """State of a single scenario execution."""

    def __init__(self, scenario: SimScenario, model: CryptoTimingModel,
                 authority: MasterKeyMaterial | None):
        scenario.validate()
        self.sc = scenario
        self.model = model
        self.rng = random.Random(f"echoring-sim/{scenario.seed}")
        self.queue = EventQueue()
        self.spacing = scenario.area_m / scenario.grid_blocks
        self.horizon = scenario.duration_s + scenario.session_timeout_s
        self.real = scenario.crypto_mode == "real"
        self.authority = authority
        self.params = authority.params if authority is not None else None
        self.vehicles = []
        self.done = False
        # protocol state
        self.event = None
        self.event_pos = None
        self.witnesses = set()
        self.initiator = None
        self.request_sent_at = None
        self.session = None
        self.request_packet = None
        self.replier_states = {}
        self.replies_received = 0
        self.willing_in_range = 0
        self.announced_at = None
        self.success = False
        self.timed_out = False

    # -- setup ----------------------------------------------------------
    def _spawn_vehicles(self):
        sc, rng = self.sc, self.rng
        speed_ms = sc.mean_speed_kmh / 3.6
        seen = set()
        for i in range(sc.vehicle_count):
            while True:
                identity = random_plate(rng)
                if identity not in seen:
                    seen.add(identity)
                    break
            axis = rng.randrange(2)
            line = rng.randrange(sc.grid_blocks + 1)
            along = rng.uniform(0.0, sc.area_m)
            direction = rng.choice((-1, 1))
            speed = speed_ms * rng.uniform(0.8, 1.2)
            honest = rng.random() < sc.honest_fraction
            v = _Vehicle(i, identity, axis, line, along, direction, speed, honest)
            if self.real:
                v.key = derive_private(self.authority, identity)
            self.vehicles.append(v)
            self._schedule_turn(v)

    def _schedule_turn(self, v: _Vehicle):
        sc = self.sc
        if v.direction > 0:
            k = math.floor(v.along / self.spacing) + 1
            target = min(k * self.spacing, sc.area_m)
        else:
            k = math.ceil(v.along / self.spacing) - 1
            target = max(k * self.spacing, 0.0)
        # target == along only when spawned exactly on the boundary heading
        # out; the immediate turn then picks a valid inward direction.
        dt = max(target - v.along, v.along - target) / v.speed
        when = self.queue.now + dt
        if when <= self.horizon:
            self.queue.push(when, "turn", v.index)

    def _turn(self, v: _Vehicle):
        sc = self.sc
        now = self.queue.now
        v.along += v.direction * v.speed * (now - v.anchor_t)
        v.anchor_t = now
        # Snap to the grid to kill float drift.
        v.along = min(max(v.along, 0.0), sc.area_m)
        gi = round(v.along / self.spacing)
        v.along = gi * self.spacing
        # Intersection grid coordinates.
        if v.axis == 0:
            gx, gy = gi, v.line
        else:
            gx, gy = v.line, gi
        options = []
        for axis, direction in ((0, 1), (0, -1), (1, 1), (1, -1)):
            coord = gx if axis == 0 else gy
            if direction > 0 and coord >= sc.grid_blocks:
                continue
            if direction < 0 and coord <= 0:
                continue
            if axis == v.axis and direction == -v.direction:
                continue  # no U-turns unless cornered
            options.append((axis, direction))
        if not options:
            options = [(v.axis, -v.direction)]
        axis, direction = self.rng.choice(options)
        if axis != v.axis:
            v.line = gy if axis == 0 else gx
            v.along = (gx if axis == 0 else gy) * self.spacing
        v.axis = axis
        v.direction = direction
        self._schedule_turn(v)

    # -- radio ------------------------------------------------------------
    def _tx_latency(self, size_bytes: int) -> float:
        sc = self.sc
        return sc.base_latency_s + size_bytes * 8 / sc.bitrate_bps + self.rng.uniform(0.0, sc.jitter_s)

    def _lost(self) -> bool:
        return self.sc.loss_rate > 0 and self.rng.random() < self.sc.loss_rate

    # -- protocol events ----------------------------------------------------
    def _inject_event(self):
        sc, rng = self.sc, self.rng
        now = self.queue.now
        axis = rng.randrange(2)
        line = rng.randrange(sc.grid_blocks + 1)
        along = rng.uniform(0.0, sc.area_m)
        fixed = line * self.spacing
        self.event_pos = (along, fixed) if axis == 0 else (fixed, along)
        road = f"{'H' if axis == 0 else 'V'}{line}"
        self.event = EventDescription(
            x=self.event_pos[0],
            y=self.event_pos[1],
            event_type=rng.choice(list(EventType)),
            direction=Direction.NONE,
            road_name=road,
            event_time=now,
        )
        detectors = [
            v for v in self.vehicles
            if v.honest
            and _distance(v.position(now, self.spacing), self.event_pos) <= sc.detection_radius_m
        ]
        if not detectors:
            self.done = True
            return
        self.initiator = min(
            detectors,
            key=lambda v: (_distance(v.position(now, self.spacing), self.event_pos), v.index),
        )
        self.witnesses = {
            v.index for v in detectors if v.index != self.initiator.index
        }
        build = self.model.request_time(sc.threshold, sc.ring_size)
        if self.real:
            self.session, self.request_packet = protocol.initiate(
                self.params,
                self.event,
                sc.threshold,
                sc.ring_size,
                now + build,
                self.rng,
                timeout=sc.session_timeout_s,
                exclude_ids=(self.initiator.identity,),
            )
        self.queue.push(now + build, "broadcast-request", None)

    def _broadcast_request(self):
        sc = self.sc
        now = self.queue.now
        self.request_sent_at = now
        self.queue.push(now + sc.session_timeout_s, "timeout", None)
        origin = self.initiator.position(now, self.spacing)
        size = protocol.request_packet_size(sc.threshold, sc.ring_size)
        reply_build = self.model.reply_time(sc.threshold, sc.ring_size)
        for v in self.vehicles:
            if v.index == self.initiator.index or v.index not in self.witnesses:
                continue
            if not v.honest:
                continue
            if _distance(v.position(now, self.spacing), origin) > sc.comm_range_m:
                continue
            state = self.replier_states.setdefault(v.index, protocol.ReplierState())
            key = self.event.key()
            if sc.threshold <= state.threshold_for(key):
                continue
            state.last_threshold[key] = sc.threshold
            self.willing_in_range += 1
            if self._lost():
                continue
            recv_at = now + self._tx_latency(size)
            deliberate = self.rng.uniform(0.0, sc.deliberation_s)
            send_at = recv_at + deliberate + reply_build
            self.queue.push(send_at, "send-reply", v.index)

    def _send_reply(self, v: _Vehicle):
        sc = self.sc
        now = self.queue.now
        if self.done:
            return
        origin = self.initiator.position(now, self.spacing)
        if _distance(v.position(now, self.spacing), origin) > sc.comm_range_m:
            return  # drifted out of range while deliberating
        if self._lost():
            return
        payload = None
        if self.real:
            try:
                payload = protocol.build_reply_packet(
                    self.params, self.request_packet, v.key, self.rng
                )
            except protocol.ProtocolError:
                return
        size = protocol.reply_packet_size()
        self.queue.push(now + self._tx_latency(size), "recv-reply", payload)

    def _recv_reply(self, payload):
        sc = self.sc
        now = self.queue.now
        if self.done or self.announced_at is not None:
            return
        if now > self.request_sent_at + sc.session_timeout_s:
            return
        if self.real:
            if protocol.handle_reply(self.session, payload, now) != "accepted":
                return
            accepted = len(self.session.accepted)
        else:
            self.replies_received += 1
            accepted = self.replies_received
        if self.real:
            self.replies_received = accepted
        if accepted >= sc.threshold - 1:
            done_at = now + self.model.assemble_time(sc.threshold, sc.ring_size)
            self.queue.push(done_at, "announce", None)
            self.announced_at = done_at

    def _announce(self):
        now = self.queue.now
        if self.done:
            return
        ok = True
        if self.real:
            try:
                packet = protocol.finalize(self.session, self.initiator.key, self.rng)
            except protocol.AssemblyFailed:
                ok = False
            else:
                ok = bool(protocol.verify_announcement(
                    self.params, packet, now,
                    replay_window=protocol.DEFAULT_REPLAY_WINDOW,
                ))
        self.success = ok
        self.done = True

    def _timeout(self):
        if self.done or self.announced_at is not None:
            return
        self.timed_out = True
        self.done = True

    # -- main loop -----------------------------------------------------------
    def run(self) -> SimMetrics:
        sc = self.sc
        self._spawn_vehicles()
        event_at = self.rng.uniform(0.1 * sc.duration_s, 0.5 * sc.duration_s)
        self.queue.push(event_at, "inject", None)
        handlers = {
            "turn": lambda p: self._turn(self.vehicles[p]),
            "inject": lambda p: self._inject_event(),
            "broadcast-request": lambda p: self._broadcast_request(),
            "send-reply": lambda p: self._send_reply(self.vehicles[p]),
            "recv-reply": self._recv_reply,
            "announce": lambda p: self._announce(),
            "timeout": lambda p: self._timeout(),
        }
        while self.queue and not self.done:
            _, kind, payload = self.queue.pop()
            handlers[kind](payload)
        delay = crypto = non_crypto = None
        if self.success:
            delay = self.announced_at - self.request_sent_at
            crypto = (
                self.model.reply_time(sc.threshold, sc.ring_size)
                + self.model.assemble_time(sc.threshold, sc.ring_size)
            )
            non_crypto = delay - crypto
        return SimMetrics(
            success=self.success,
            timed_out=self.timed_out,
            initiator_found=self.initiator is not None,
            aggregation_delay_s=delay,
            crypto_time_s=crypto,
            non_crypto_delay_s=non_crypto,
            request_build_s=(
                self.model.request_time(sc.threshold, sc.ring_size)
                if self.initiator is not None
                else None
            ),
            replies_received=self.replies_received,
            willing_in_range=self.willing_in_range,
            vehicle_count=sc.vehicle_count,
            density_per_km2=sc.density_per_km2,
            threshold=sc.threshold,
            ring_size=sc.ring_size,
            seed=sc.seed,
            event_time_s=self.event.event_time if self.event is not None else None,
        )


def run_scenario(
    scenario: SimScenario,
    model: CryptoTimingModel = DEFAULT_CRYPTO_MODEL,
    authority: MasterKeyMaterial | None = None,
) -> SimMetrics:
    """Execute one run; pure function of (scenario, model, authority keys)."""
    if scenario.crypto_mode == "real" and authority is None:
        authority, _ = setup(256, derive_seed(scenario.seed, "authority"))
    return _Run(scenario, model, authority).run()


def derive_seed(*parts) -> int:
    """Stable sub-seed from arbitrary labels (no reliance on hash())."""
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


# -- parameter sweeps -------------------------------------------------------

def sweep(
    base: SimScenario,
    vehicle_counts=None,
    thresholds=None,
    ring_sizes=None,
    runs: int = 100,
    model: CryptoTimingModel = DEFAULT_CRYPTO_MODEL,
    authority: MasterKeyMaterial | None = None,
) -> list:
    """Grid of scenario cells, each aggregated over seeded repeat runs."""
    vehicle_counts = list(vehicle_counts or [base.vehicle_count])
    thresholds = list(thresholds or [base.threshold])
    ring_sizes = list(ring_sizes or [base.ring_size])
    rows = []
    for count in vehicle_counts:
        for r in ring_sizes:
            for t in thresholds:
                cell_metrics = []
                for i in range(runs):
                    seed = derive_seed(base.seed, count, r, t, i)
                    sc = replace(base, vehicle_count=count, ring_size=r,
                                 threshold=t, seed=seed)
                    cell_metrics.append(run_scenario(sc, model, authority))
                rows.append(_aggregate(cell_metrics, count, r, t, runs))
    return rows


def _mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else None


def _std(xs):
    xs = list(xs)
    if len(xs) < 2:
        return 0.0 if xs else None
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def _aggregate(metrics, count, r, t, runs) -> dict:
    successes = [m for m in metrics if m.success]
    non_crypto = [m.non_crypto_delay_s for m in successes]
    return {
        "vehicle_count": count,
        "density_per_km2": metrics[0].density_per_km2,
        "ring_size": r,
        "threshold": t,
        "runs": runs,
        "successes": len(successes),
        "validation_probability": len(successes) / runs,
        "mean_aggregation_delay_s": _mean(m.aggregation_delay_s for m in successes),
        "mean_crypto_time_s": _mean(m.crypto_time_s for m in successes),
        "mean_non_crypto_delay_s": _mean(non_crypto),
        "std_non_crypto_delay_s": _std(non_crypto),
        "mean_replies": _mean(m.replies_received for m in metrics),
        "timeouts": sum(1 for m in metrics if m.timed_out),
    }


SWEEP_COLUMNS = [
    "vehicle_count", "density_per_km2", "ring_size", "threshold", "runs",
    "successes", "validation_probability", "mean_aggregation_delay_s",
    "mean_crypto_time_s", "mean_non_crypto_delay_s", "std_non_crypto_delay_s",
    "mean_replies", "timeouts",
]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row[k] is None else row[k]) for k in SWEEP_COLUMNS})
    return buf.getvalue()


def rows_to_jsonl(rows) -> str:
    return "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)


# -- anonymity --------------------------------------------------------------

def anonymity_prob(t: int, r: int, j: int) -> Fraction:
    """Chance that t uniform guesses out of r members hit >= j real signers.

    Hypergeometric tail: the adversary names t of the r ring members;
    exactly t of them are real signers.
    """
    if not 1 <= j <= t <= r:
        raise ValueError("need 1 <= j <= t <= r")
    total = math.comb(r, t)
    hits = sum(math.comb(t, i) * math.comb(r - t, t - i) for i in range(j, t + 1))
    return Fraction(hits, total)


# -- scenario files (key = value) --------------------------------------------

@dataclass
class SweepSpec:
    vehicle_counts: list | None = None
    thresholds: list | None = None
    ring_sizes: list | None = None
    runs: int = 100


_SWEEP_KEYS = {
    "vehicle_counts": int,
    "thresholds": int,
    "ring_sizes": int,
    "runs_per_cell": int,
}


def _parse_list(raw: str, cast):
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [cast(part.strip()) for part in raw.split(",") if part.strip()]


def parse_scenario(text: str) -> tuple:
    """Parse a key = value scenario file into (SimScenario, SweepSpec)."""
    field_types = {f.name: f.type for f in dc_fields(SimScenario)}
    casts = {"area_m": float, "vehicle_count": int, "mean_speed_kmh": float,
             "comm_range_m": float, "duration_s": float, "ring_size": int,
             "threshold": int, "seed": int, "crypto_mode": str,
             "detection_radius_m": float, "session_timeout_s": float,
             "base_latency_s": float, "bitrate_bps": float, "jitter_s": float,
             "loss_rate": float, "deliberation_s": float,
             "honest_fraction": float, "grid_blocks": int}
    assert set(casts) == set(field_types)
    scenario_kwargs = {}
    spec = SweepSpec()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in casts:
            try:
                scenario_kwargs[key] = casts[key](raw)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
        elif key in _SWEEP_KEYS:
            if key == "runs_per_cell":
                spec.runs = int(raw)
            else:
                setattr(spec, key, _parse_list(raw, _SWEEP_KEYS[key]))
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    scenario = SimScenario(**scenario_kwargs)
    scenario.validate()
    return scenario, spec


def load_scenario(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())

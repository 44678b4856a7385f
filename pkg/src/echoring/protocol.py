"""Three-packet announcement protocol: request, reply, aggregation.

Roles: the initiator opens an aggregation session and broadcasts a
request; willing repliers answer with signature fractions (encrypted
to a per-session ephemeral key in the eavesdropping-resistant
variant); verifiers check the assembled announcement plus a replay
window on the embedded event time.

A replier facing several requests for the same event applies the
last-reply threshold policy: requests are handled in arrival order and
answered only when they ask for a strictly higher threshold than the
last one answered, so an attacker cannot milk multiple fractions of
equal weight out of one witness.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field as dc_field
from enum import IntEnum

from . import elgamal, ring
from .cpk import SystemParams, IdentityKey, random_plate
from .primitives import DecryptionError, ecies_decrypt, ecies_encrypt
from .ring import (
    ByteReader,
    DecodeError,
    ProtocolError,
    RingAnnouncement,
    SignFraction,
    SignRequest,
)

DEFAULT_SESSION_TIMEOUT = 120.0  # seconds of protocol time, configurable
DEFAULT_REPLAY_WINDOW = 300.0

EVENT_GRID_M = 50.0  # coordinate bucket defining "the same event"
EVENT_TIME_BUCKET_S = 60.0

PACKET_REQUEST = 0x01
PACKET_REPLY = 0x02
PACKET_AGGREGATION = 0x03

WIRE_VERSION = 1
_FLAG_DPOINT = 0x01
_FLAG_ENCRYPTED = 0x02
_FLAG_EPHEMERAL = 0x04


class MalformedPacket(DecodeError):
    """Bytes do not decode to a well-formed packet."""


class AssemblyFailed(ProtocolError):
    """Session could not assemble an announcement from its fractions."""


class EventType(IntEnum):
    TRAFFIC_JAM = 1
    ACCIDENT = 2
    ROAD_WORKS = 3
    HAZARD = 4


class Direction(IntEnum):
    NONE = 0
    NORTHBOUND = 1
    SOUTHBOUND = 2
    EASTBOUND = 3
    WESTBOUND = 4


@dataclass(frozen=True)
class EventDescription:
    x: float
    y: float
    event_type: EventType
    direction: Direction
    road_name: str
    event_time: float

    def encode(self) -> bytes:
        road = self.road_name.encode("utf-8")
        return (
            struct.pack(">ddBBd", self.x, self.y, self.event_type, self.direction,
                        self.event_time)
            + len(road).to_bytes(2, "big")
            + road
        )

    @classmethod
    def decode(cls, data: bytes) -> "EventDescription":
        reader = ByteReader(data)
        ev = cls._read(reader)
        reader.expect_end()
        return ev

    @classmethod
    def _read(cls, reader: ByteReader) -> "EventDescription":
        x, y, etype, direction, when = struct.unpack(">ddBBd", reader.take(26))
        road = reader.string()
        try:
            return cls(x, y, EventType(etype), Direction(direction), road, when)
        except ValueError as exc:
            raise DecodeError(f"bad event field: {exc}") from exc

    def key(self) -> tuple:
        """Event identity for the reply policy: space and time buckets."""
        return (
            math.floor(self.x / EVENT_GRID_M),
            math.floor(self.y / EVENT_GRID_M),
            int(self.event_type),
            math.floor(self.event_time / EVENT_TIME_BUCKET_S),
        )


@dataclass(frozen=True)
class RequestPacket:
    event: EventDescription
    request: SignRequest

    @property
    def threshold(self) -> int:
        return self.request.threshold

    @property
    def ring_size(self) -> int:
        return self.request.ring_size


@dataclass(frozen=True)
class ReplyPacket:
    fraction: SignFraction | None = None
    ciphertext: bytes | None = None

    @property
    def encrypted(self) -> bool:
        return self.ciphertext is not None


@dataclass(frozen=True)
class AggregationPacket:
    announcement: RingAnnouncement


# -- initiator sessions --------------------------------------------------

@dataclass
class Session:
    params: SystemParams
    event: EventDescription
    request: SignRequest
    opened_at: float
    deadline: float
    ephemeral_secret: int | None = None
    accepted: list = dc_field(default_factory=list)
    drops: dict = dc_field(default_factory=dict)
    finalized: bool = False
    _ctx: ring._RequestContext | None = None

    @property
    def ready(self) -> bool:
        return len(self.accepted) >= self.request.threshold - 1

    def expired(self, now: float) -> bool:
        return now > self.deadline

    def _drop(self, reason: str) -> str:
        self.drops[reason] = self.drops.get(reason, 0) + 1
        return reason


def initiate(
    params: SystemParams,
    event: EventDescription,
    threshold: int,
    ring_size: int,
    now: float,
    rng: random.Random,
    variant_cpk: bool = False,
    encrypt_replies: bool = False,
    timeout: float = DEFAULT_SESSION_TIMEOUT,
    id_generator=random_plate,
    exclude_ids=(),
) -> tuple[Session, RequestPacket]:
    """Open an aggregation session and produce its request packet."""
    ephemeral_secret = None
    ephemeral_pk = None
    if encrypt_replies:
        ephemeral_secret = params.curve.random_scalar(rng)
        ephemeral_pk = params.curve.mul(ephemeral_secret, params.curve.generator)
    request = ring.build_request(
        params,
        event.encode(),
        threshold,
        ring_size,
        rng,
        id_generator=id_generator,
        variant_cpk=variant_cpk,
        ephemeral_pk=ephemeral_pk,
        exclude_ids=exclude_ids,
    )
    session = Session(
        params=params,
        event=event,
        request=request,
        opened_at=now,
        deadline=now + timeout,
        ephemeral_secret=ephemeral_secret,
    )
    return session, RequestPacket(event, request)


def handle_reply(session: Session, packet: ReplyPacket, now: float) -> str:
    """Feed one reply into a session; returns the disposition."""
    if session.finalized:
        return session._drop("finalized")
    if session.expired(now):
        return session._drop("expired")
    fraction = packet.fraction
    if packet.encrypted:
        if session.ephemeral_secret is None:
            return session._drop("unexpected-ciphertext")
        try:
            raw = ecies_decrypt(session.params.curve, session.ephemeral_secret,
                                packet.ciphertext)
            fraction = _decode_fraction(session.params, ByteReader(raw), final=True)
        except (DecryptionError, DecodeError):
            return session._drop("undecryptable")
    if fraction is None:
        return session._drop("empty")
    if session._ctx is None:
        session._ctx = ring._RequestContext(session.params, session.request)
    if any(f.replier_id == fraction.replier_id for f in session.accepted):
        return session._drop("duplicate")
    if fraction.gamma in {f.gamma for f in session.accepted}:
        return session._drop("gamma-collision")
    if not ring.validate_fraction(session.params, session.request, fraction, session._ctx):
        return session._drop("invalid")
    session.accepted.append(fraction)
    return "accepted"


def finalize(session: Session, own_key: IdentityKey, rng: random.Random) -> AggregationPacket:
    """Assemble and self-check the announcement; closes the session."""
    try:
        announcement = ring.assemble(
            session.params, session.request, own_key, session.accepted, rng
        )
    except ProtocolError as exc:
        raise AssemblyFailed(str(exc)) from exc
    verdict = ring.verify_ring(session.params, announcement, rng)
    if not verdict:
        raise AssemblyFailed(f"self-check failed: {verdict.reason}")
    session.finalized = True
    return AggregationPacket(announcement)


# -- replier side ---------------------------------------------------------

@dataclass
class ReplierState:
    """Per-event record of the last threshold this replier answered."""

    last_threshold: dict = dc_field(default_factory=dict)

    def threshold_for(self, key) -> float:
        return self.last_threshold.get(key, -math.inf)


def reply_policy(state: ReplierState, pending) -> list:
    """Arrival-ordered reply/ignore decisions for same-event requests.

    ``pending`` holds (arrival_time, RequestPacket) pairs, all about
    one event.  Returns (packet, decision) pairs in arrival order and
    updates the replier's last-reply threshold as it goes.
    """
    items = sorted(pending, key=lambda item: item[0])
    keys = {pkt.event.key() for _, pkt in items}
    if len(keys) > 1:
        raise ValueError("pending requests must concern a single event")
    decisions = []
    for _, pkt in items:
        key = pkt.event.key()
        if pkt.threshold > state.threshold_for(key):
            state.last_threshold[key] = pkt.threshold
            decisions.append((pkt, True))
        else:
            decisions.append((pkt, False))
    return decisions


def build_reply_packet(
    params: SystemParams,
    packet: RequestPacket,
    key: IdentityKey,
    rng: random.Random,
) -> ReplyPacket:
    """Validated fraction for a request, encrypted when the request asks."""
    fraction = ring.build_reply(params, packet.request, key, rng)
    if packet.request.ephemeral_pk is None:
        return ReplyPacket(fraction=fraction)
    out = bytearray()
    _write_fraction(params, out, fraction)
    ciphertext = ecies_encrypt(params.curve, packet.request.ephemeral_pk, bytes(out), rng)
    return ReplyPacket(ciphertext=ciphertext)


# -- verifier --------------------------------------------------------------

@dataclass(frozen=True)
class AnnouncementVerdict:
    ok: bool
    reason: str | None = None  # 'crypto' | 'replay'

    def __bool__(self) -> bool:
        return self.ok


def verify_announcement(
    params: SystemParams,
    packet: AggregationPacket,
    now: float,
    replay_window: float = DEFAULT_REPLAY_WINDOW,
) -> AnnouncementVerdict:
    """Ring verification plus freshness of the embedded event time."""
    try:
        event = EventDescription.decode(packet.announcement.msg)
    except DecodeError:
        return AnnouncementVerdict(False, "crypto")
    if abs(now - event.event_time) > replay_window:
        return AnnouncementVerdict(False, "replay")
    if not ring.verify_ring(params, packet.announcement):
        return AnnouncementVerdict(False, "crypto")
    return AnnouncementVerdict(True)


# -- wire format ------------------------------------------------------------

def encode_packet(params: SystemParams, packet) -> bytes:
    out = bytearray()
    if isinstance(packet, RequestPacket):
        out.append(PACKET_REQUEST)
        out.append(WIRE_VERSION)
        req = packet.request
        flags = (_FLAG_DPOINT if req.fake_d_points is not None else 0) | (
            _FLAG_EPHEMERAL if req.ephemeral_pk is not None else 0
        )
        out.append(flags)
        event_bytes = packet.event.encode()
        if req.msg != event_bytes:
            raise ValueError("request msg does not match its event description")
        out += len(event_bytes).to_bytes(4, "big")
        out += event_bytes
        out += req.threshold.to_bytes(4, "big")
        out += req.ring_size.to_bytes(4, "big")
        if req.ephemeral_pk is not None:
            out += params.curve.encode_point(req.ephemeral_pk)
        with_d = req.fake_d_points is not None
        for i in range(len(req.fake_ids)):
            d = req.fake_d_points[i] if with_d else None
            ring._write_entry(
                params, out, req.fake_ids[i], req.fake_gammas[i], req.forgeries[i], d, with_d
            )
    elif isinstance(packet, ReplyPacket):
        out.append(PACKET_REPLY)
        out.append(WIRE_VERSION)
        if packet.encrypted:
            out.append(_FLAG_ENCRYPTED)
            out += len(packet.ciphertext).to_bytes(4, "big")
            out += packet.ciphertext
        else:
            out.append(_FLAG_DPOINT if packet.fraction.d_point is not None else 0)
            _write_fraction(params, out, packet.fraction)
    elif isinstance(packet, AggregationPacket):
        out.append(PACKET_AGGREGATION)
        out.append(WIRE_VERSION)
        out += ring.encode_announcement(params, packet.announcement)
    else:
        raise TypeError(f"not a protocol packet: {type(packet).__name__}")
    return bytes(out)


def decode_packet(params: SystemParams, data: bytes):
    reader = ByteReader(data)
    try:
        tag = reader.u8()
        if tag == PACKET_REQUEST:
            return _decode_request(params, reader)
        if tag == PACKET_REPLY:
            return _decode_reply(params, reader)
        if tag == PACKET_AGGREGATION:
            if reader.u8() != WIRE_VERSION:
                raise MalformedPacket("unsupported packet version")
            announcement = ring.decode_announcement(params, reader.data[reader.pos:])
            return AggregationPacket(announcement)
        raise MalformedPacket(f"unknown packet tag {tag:#x}")
    except MalformedPacket:
        raise
    except (DecodeError, ValueError, OverflowError, struct.error) as exc:
        raise MalformedPacket(str(exc)) from exc


def _decode_request(params: SystemParams, reader: ByteReader) -> RequestPacket:
    if reader.u8() != WIRE_VERSION:
        raise MalformedPacket("unsupported packet version")
    flags = reader.u8()
    if flags & ~(_FLAG_DPOINT | _FLAG_EPHEMERAL):
        raise MalformedPacket("unknown request flags")
    event_bytes = reader.take(reader.u32())
    event = EventDescription.decode(event_bytes)
    threshold = reader.u32()
    ring_size = reader.u32()
    fakes = ring_size - threshold
    if not 0 < fakes <= 10_000 or threshold < 1:
        raise MalformedPacket("implausible threshold/ring size")
    ephemeral_pk = reader.point(params.curve) if flags & _FLAG_EPHEMERAL else None
    with_d = bool(flags & _FLAG_DPOINT)
    ids, gammas, forgeries, d_points = [], [], [], []
    for _ in range(fakes):
        identity, gamma, triple, d_point = ring._read_entry(params, reader, with_d)
        ids.append(identity)
        gammas.append(gamma)
        forgeries.append(triple)
        d_points.append(d_point)
    reader.expect_end()
    request = SignRequest(
        msg=event_bytes,
        threshold=threshold,
        ring_size=ring_size,
        fake_ids=tuple(ids),
        fake_gammas=tuple(gammas),
        forgeries=tuple(forgeries),
        fake_d_points=tuple(d_points) if with_d else None,
        ephemeral_pk=ephemeral_pk,
    )
    return RequestPacket(event, request)


def _decode_reply(params: SystemParams, reader: ByteReader) -> ReplyPacket:
    if reader.u8() != WIRE_VERSION:
        raise MalformedPacket("unsupported packet version")
    flags = reader.u8()
    if flags & ~(_FLAG_DPOINT | _FLAG_ENCRYPTED):
        raise MalformedPacket("unknown reply flags")
    if flags & _FLAG_ENCRYPTED:
        ciphertext = reader.take(reader.u32())
        reader.expect_end()
        return ReplyPacket(ciphertext=ciphertext)
    fraction = _decode_fraction(params, reader, with_d=bool(flags & _FLAG_DPOINT),
                                final=True)
    return ReplyPacket(fraction=fraction)


def _write_fraction(params: SystemParams, out: bytearray, fraction: SignFraction) -> None:
    ring._write_entry(
        params, out, fraction.replier_id, fraction.gamma, fraction.triple,
        fraction.d_point, fraction.d_point is not None,
    )


def _decode_fraction(params: SystemParams, reader: ByteReader, with_d=None,
                     final=False) -> SignFraction:
    identity = reader.string()
    try:
        gamma = params.field.decode(reader.take(params.field.num_bytes))
        triple = elgamal.decode_triple(params, reader.take(elgamal.triple_size(params)))
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    if with_d is None:
        # Layout inside encrypted replies is self-describing: the
        # fraction is the whole buffer, D present iff bytes remain.
        with_d = reader.pos < len(reader.data)
    d_point = reader.point(params.curve) if with_d else None
    if final:
        reader.expect_end()
    return SignFraction(identity, gamma, triple, d_point)


# -- exact wire sizes (feed the simulator's transmission-delay model) -----
# Defaults are the production widths: 256-bit field, P-256 points.

_FIELD_BYTES = 32
_POINT_BYTES = 33
_SCALAR_BYTES = 32
_ID_LEN = 8  # plate-shaped identities
_ROAD_LEN = 4


def entry_wire_size(with_d: bool = False, field_bytes: int = _FIELD_BYTES,
                    point_bytes: int = _POINT_BYTES,
                    scalar_bytes: int = _SCALAR_BYTES, id_len: int = _ID_LEN) -> int:
    size = 2 + id_len + 2 * field_bytes + point_bytes + scalar_bytes
    if with_d:
        size += point_bytes
    return size


def event_wire_size(road_len: int = _ROAD_LEN) -> int:
    return 26 + 2 + road_len


def request_packet_size(threshold: int, ring_size: int, with_d: bool = False,
                        with_ephemeral: bool = False, **widths) -> int:
    size = 3 + 4 + event_wire_size() + 8
    if with_ephemeral:
        size += widths.get("point_bytes", _POINT_BYTES)
    size += (ring_size - threshold) * entry_wire_size(with_d, **widths)
    return size


def reply_packet_size(with_d: bool = False, encrypted: bool = False, **widths) -> int:
    body = entry_wire_size(with_d, **widths)
    if encrypted:
        body += widths.get("point_bytes", _POINT_BYTES) + 32 + 4  # share + MAC + length
    return 3 + body


def aggregation_packet_size(threshold: int, ring_size: int, with_d: bool = False,
                            with_ephemeral: bool = False, **widths) -> int:
    size = 2 + 4 + 2 + 4 + event_wire_size() + 8
    if with_ephemeral:
        size += widths.get("point_bytes", _POINT_BYTES)
    size += ring_size * entry_wire_size(with_d, **widths)
    return size

"""Interactive threshold ring signature: request, reply, assemble, verify.

Flow (one communication round):

* The initiator builds a request carrying r-t forged ring members:
  fake identities, distinct nonzero index points gamma_i, and keyless
  forgeries whose message values m_i nobody chose.
* Each willing replier checks the request, derives the verification
  polynomial f of degree r-t fixed by f(0) = anchor(t, r) and
  f(gamma_i) = E_k(m_i) under k = H(msg), picks a fresh gamma, decrypts
  m = E_k^-1(f(gamma)) and signs that m with its real key.  The result
  is one signature fraction.
* The initiator validates fractions, adds its own, and assembles an
  announcement of exactly r entries sorted by gamma so position leaks
  nothing.
* Verification re-derives every entry's public key from its identity,
  checks every signature equation, rebuilds f from r-t entries plus
  the anchor, and requires the remaining t entries to sit on f.

Real and forged entries are byte-for-byte the same shape; only holders
of at least t real keys can put t entries on the polynomial, because
forged message values cannot be aimed at f.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import elgamal
from .cpk import SystemParams, IdentityKey, derive_public, random_plate
from .elgamal import ElgamalTriple
from .gf2 import poly_degree

THRESHOLD_GAP_MIN = 6  # r - t must exceed five


class ProtocolError(Exception):
    """Base for protocol-rule violations."""


class ThresholdTooClose(ProtocolError):
    """Ring size minus threshold is not above the hard floor of five."""


class InvalidRequest(ProtocolError):
    """Request fails its structural or cryptographic self-consistency."""


class IdCollision(ProtocolError):
    """A real participant's identity appears among the forged members."""


class InsufficientFractions(ProtocolError):
    """Fewer than t-1 usable fractions after validation."""


class DuplicateReplier(ProtocolError):
    """The same identity contributed more than one needed fraction."""


class GammaCollision(ProtocolError):
    """Index collisions left fewer than t-1 usable fractions."""


class DecodeError(ValueError):
    """Byte string is not a well-formed protocol artifact."""


@dataclass(frozen=True)
class SignRequest:
    msg: bytes
    threshold: int
    ring_size: int
    fake_ids: tuple
    fake_gammas: tuple
    forgeries: tuple  # ElgamalTriple per fake id
    fake_d_points: tuple | None = None  # variant 1 blinding points
    ephemeral_pk: tuple | None = None  # variant 2 reply-encryption key


@dataclass(frozen=True)
class SignFraction:
    replier_id: str
    gamma: int
    triple: ElgamalTriple
    d_point: tuple | None = None


@dataclass(frozen=True)
class RingEntry:
    identity: str
    gamma: int
    triple: ElgamalTriple
    d_point: tuple | None = None


@dataclass(frozen=True)
class RingAnnouncement:
    msg: bytes
    threshold: int
    entries: tuple
    ephemeral_pk: tuple | None = None

    @property
    def ring_size(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    reason: str | None = None  # 'structure' | 'signature' | 'polynomial'

    def __bool__(self) -> bool:
        return self.ok


def build_request(
    params: SystemParams,
    msg: bytes,
    threshold: int,
    ring_size: int,
    rng: random.Random,
    id_generator=random_plate,
    variant_cpk: bool = False,
    ephemeral_pk=None,
    exclude_ids=(),
) -> SignRequest:
    """Forge the r-t fake ring members for an announcement request."""
    if threshold < 1:
        raise ThresholdTooClose("threshold must be at least 1")
    fakes = ring_size - threshold
    if fakes < THRESHOLD_GAP_MIN:
        raise ThresholdTooClose(
            f"ring size minus threshold must be higher than five, got {fakes}"
        )
    curve = params.curve
    fake_ids = []
    seen = set(exclude_ids)
    while len(fake_ids) < fakes:
        identity = id_generator(rng)
        if identity in seen:
            continue
        seen.add(identity)
        if derive_public(params, identity) is None:
            continue  # the zero key cannot be forged against
        fake_ids.append(identity)
    gammas = []
    used = {0}
    while len(gammas) < fakes:
        g = params.field.random_nonzero(rng)
        if g not in used:
            used.add(g)
            gammas.append(g)
    forgeries = []
    d_points = [] if variant_cpk else None
    for identity in fake_ids:
        pk = derive_public(params, identity)
        if variant_cpk:
            nu = curve.random_scalar(rng)
            d = curve.mul(nu, curve.generator)
            d_points.append(d)
            pk = curve.add(pk, d)
        forgeries.append(elgamal.forge(params, pk, rng))
    return SignRequest(
        msg=bytes(msg),
        threshold=threshold,
        ring_size=ring_size,
        fake_ids=tuple(fake_ids),
        fake_gammas=tuple(gammas),
        forgeries=tuple(forgeries),
        fake_d_points=tuple(d_points) if d_points is not None else None,
        ephemeral_pk=ephemeral_pk,
    )


def validate_request(params: SystemParams, request: SignRequest) -> None:
    """Replier-side sanity check; raises InvalidRequest on any failure."""
    fakes = request.ring_size - request.threshold
    if request.threshold < 1 or fakes < THRESHOLD_GAP_MIN:
        raise InvalidRequest("threshold gap below the hard floor")
    if not (len(request.fake_ids) == len(request.fake_gammas) == len(request.forgeries) == fakes):
        raise InvalidRequest("fake member list lengths disagree")
    if request.fake_d_points is not None and len(request.fake_d_points) != fakes:
        raise InvalidRequest("blinding point list length disagrees")
    if len(set(request.fake_ids)) != fakes:
        raise InvalidRequest("repeated fake identity")
    if len(set(request.fake_gammas)) != fakes or 0 in request.fake_gammas:
        raise InvalidRequest("fake indices must be distinct and nonzero")
    for g in request.fake_gammas:
        if not 0 <= g < params.field.order:
            raise InvalidRequest("fake index out of field range")
    for i, identity in enumerate(request.fake_ids):
        d = request.fake_d_points[i] if request.fake_d_points is not None else None
        pk = derive_public(params, identity)
        if not elgamal.verify(params, pk, request.forgeries[i], d):
            raise InvalidRequest(f"forgery {i} fails verification")


class _RequestContext:
    """Per-request polynomial and cipher, shared across fraction checks."""

    def __init__(self, params: SystemParams, request: SignRequest):
        key_bits = params.suite.message_key(request.msg, params.l)
        self.cipher = params.cipher_for_key(key_bits)
        extra = (
            params.curve.encode_point(request.ephemeral_pk)
            if request.ephemeral_pk is not None
            else b""
        )
        anchor = params.suite.threshold_anchor(
            request.threshold, request.ring_size, params.l, extra
        )
        points = [(0, anchor)]
        for g, triple in zip(request.fake_gammas, request.forgeries):
            points.append((g, self.cipher.encrypt(triple.message)))
        self.poly = params.field.interpolate(points)


def _make_fraction(
    params: SystemParams,
    request: SignRequest,
    ctx: _RequestContext,
    key: IdentityKey,
    rng: random.Random,
    exclude_gammas=frozenset(),
) -> SignFraction:
    used = set(request.fake_gammas) | set(exclude_gammas) | {0}
    while True:
        gamma = params.field.random_nonzero(rng)
        if gamma not in used:
            break
    value = params.field.poly_eval(ctx.poly, gamma)
    message = ctx.cipher.decrypt(value)
    sig = elgamal.sign(params, key.secret, message, rng)
    return SignFraction(key.identity, gamma, sig, key.variant_point)


def build_reply(
    params: SystemParams,
    request: SignRequest,
    key: IdentityKey,
    rng: random.Random,
) -> SignFraction:
    """One replier's signature fraction for a validated request."""
    validate_request(params, request)
    if key.identity in request.fake_ids:
        raise IdCollision(f"identity {key.identity!r} appears among the fakes")
    return _make_fraction(params, request, _RequestContext(params, request), key, rng)


def validate_fraction(
    params: SystemParams,
    request: SignRequest,
    fraction: SignFraction,
    _ctx: _RequestContext | None = None,
) -> bool:
    """Initiator-side filter: accept only fractions that can assemble."""
    if fraction.gamma == 0 or not 0 < fraction.gamma < params.field.order:
        return False
    if fraction.gamma in request.fake_gammas:
        return False
    if fraction.replier_id in request.fake_ids:
        return False
    pk = derive_public(params, fraction.replier_id)
    if not elgamal.verify(params, pk, fraction.triple, fraction.d_point):
        return False
    ctx = _ctx if _ctx is not None else _RequestContext(params, request)
    expected = params.field.poly_eval(ctx.poly, fraction.gamma)
    return ctx.cipher.encrypt(fraction.triple.message) == expected


def assemble(
    params: SystemParams,
    request: SignRequest,
    own_key: IdentityKey,
    fractions,
    rng: random.Random,
) -> RingAnnouncement:
    """Combine the forgeries, t-1 replier fractions and the initiator's own.

    Unusable fractions (duplicates, index collisions, validation
    failures) are discarded; spares beyond t-1 fill the gaps.  Raises
    when fewer than t-1 usable fractions remain, typed by the binding
    cause.
    """
    validate_request(params, request)
    if own_key.identity in request.fake_ids:
        raise IdCollision(f"initiator identity {own_key.identity!r} collides with a fake")
    ctx = _RequestContext(params, request)
    needed = request.threshold - 1
    chosen = []
    seen_ids = {own_key.identity} | set(request.fake_ids)
    used_gammas = set(request.fake_gammas)
    dup_drops = gamma_drops = 0
    for fraction in fractions:
        if len(chosen) == needed:
            break  # spares kept in reserve were not needed
        if fraction.replier_id in seen_ids:
            dup_drops += 1
            continue
        if fraction.gamma in used_gammas:
            gamma_drops += 1
            continue
        if not validate_fraction(params, request, fraction, ctx):
            continue
        chosen.append(fraction)
        seen_ids.add(fraction.replier_id)
        used_gammas.add(fraction.gamma)
    if len(chosen) < needed:
        short = f"{len(chosen)} usable fractions, need {needed}"
        if gamma_drops and len(chosen) + gamma_drops >= needed:
            raise GammaCollision(short)
        if dup_drops and len(chosen) + dup_drops >= needed:
            raise DuplicateReplier(short)
        raise InsufficientFractions(short)
    own = _make_fraction(params, request, ctx, own_key, rng, exclude_gammas=used_gammas)
    entries = [
        RingEntry(identity, gamma, triple, d)
        for identity, gamma, triple, d in zip(
            request.fake_ids,
            request.fake_gammas,
            request.forgeries,
            request.fake_d_points or (None,) * len(request.fake_ids),
        )
    ]
    entries.extend(
        RingEntry(f.replier_id, f.gamma, f.triple, f.d_point) for f in chosen + [own]
    )
    entries.sort(key=lambda e: e.gamma)  # canonical order: position leaks nothing
    return RingAnnouncement(
        msg=request.msg,
        threshold=request.threshold,
        entries=tuple(entries),
        ephemeral_pk=request.ephemeral_pk,
    )


def verify_ring(
    params: SystemParams,
    announcement: RingAnnouncement,
    rng: random.Random | None = None,
    subset=None,
) -> VerifyResult:
    """Full announcement verification from public data only.

    The polynomial condition (all r entry points plus the anchor sit on
    one polynomial of degree exactly r-t) is checked by default through
    its parity-check form: with M(X) the product of (X + x_i) over all
    points, the weights w_i = y_i / M'(x_i) must satisfy
    sum(w_i * x_i^e) = 0 for e < t and != 0 at e = t.  That costs the
    same regardless of how t splits the ring.

    ``subset``, when given, fixes which r-t entries rebuild the
    polynomial explicitly instead (reconstruct + degree check + spot
    checks); the outcome is independent of the choice, and the test
    suite holds the two routes against each other exhaustively on
    small rings.  ``rng`` only feeds the legacy subset draw.
    """
    entries = announcement.entries
    r = len(entries)
    t = announcement.threshold
    if t < 1 or r - t < THRESHOLD_GAP_MIN:
        return VerifyResult(False, "structure")
    if len({e.identity for e in entries}) != r:
        return VerifyResult(False, "structure")
    gammas = [e.gamma for e in entries]
    if len(set(gammas)) != r or 0 in gammas:
        return VerifyResult(False, "structure")
    if not all(0 <= g < params.field.order for g in gammas):
        return VerifyResult(False, "structure")

    for entry in entries:
        pk = derive_public(params, entry.identity)
        if not elgamal.verify(params, pk, entry.triple, entry.d_point):
            return VerifyResult(False, "signature")

    key_bits = params.suite.message_key(announcement.msg, params.l)
    cipher = params.cipher_for_key(key_bits)
    extra = (
        params.curve.encode_point(announcement.ephemeral_pk)
        if announcement.ephemeral_pk is not None
        else b""
    )
    anchor = params.suite.threshold_anchor(t, r, params.l, extra)
    values = [cipher.encrypt(e.triple.message) for e in entries]
    points = [(0, anchor)] + list(zip(gammas, values))
    if subset is None:
        ok = _on_one_polynomial(params.field, points, r - t)
    else:
        subset = set(subset)
        if len(subset) != r - t or not all(0 <= i < r for i in subset):
            raise ValueError("subset must select exactly r-t entry positions")
        chosen = [(0, anchor)] + [(gammas[i], values[i]) for i in sorted(subset)]
        poly = params.field.interpolate(chosen)
        ok = poly_degree(poly) == r - t and all(
            params.field.poly_eval(poly, gammas[i]) == values[i]
            for i in range(r)
            if i not in subset
        )
    if not ok:
        return VerifyResult(False, "polynomial")
    return VerifyResult(True)


def _on_one_polynomial(field, points, degree: int) -> bool:
    """Do all points sit on one polynomial of exactly this degree?

    Parity-check form: n points are consistent with some polynomial of
    degree <= d iff the weights w_i = y_i / M'(x_i) annihilate the
    monomials x^e for e <= n-d-2, where M(X) = prod(X + x_i); the next
    sum equals the interpolant's degree-d coefficient, so exactness
    means it must be nonzero.
    """
    n = len(points)
    checks = n - degree - 1  # e = 0..checks-1 must vanish, e = checks must not
    if checks < 1:
        return True  # fewer points than degree + 2 constrain nothing
    xs = [x for x, _ in points]
    master = [1]
    for x in xs:
        mul_by_x = field.fixed_mul(x)
        nxt = [0] * (len(master) + 1)
        for i, c in enumerate(master):
            nxt[i + 1] ^= c
            nxt[i] ^= mul_by_x(c)
        master = nxt
    # In characteristic 2 only the odd-degree terms of M survive d/dX,
    # so M'(X) is a polynomial in X^2.
    deriv_even = [master[j] for j in range(1, n + 1, 2)]
    derivs = []
    for x, _ in points:
        sq = field.sqr(x)
        mul_by_sq = field.fixed_mul(sq) if len(deriv_even) >= 8 else (
            lambda c, _s=sq: field.mul(c, _s))
        acc = 0
        for c in reversed(deriv_even):
            acc = mul_by_sq(acc) ^ c
        derivs.append(acc)
    weights = field.batch_inv(derivs)
    syndromes = [0] * (checks + 1)
    for (x, y), inv_d in zip(points, weights):
        w = field.mul(y, inv_d)
        mul_by_x = field.fixed_mul(x) if checks >= 8 else (
            lambda c, _x=x: field.mul(c, _x))
        syndromes[0] ^= w
        for e in range(1, checks + 1):
            w = mul_by_x(w)
            syndromes[e] ^= w
    return all(s == 0 for s in syndromes[:checks]) and syndromes[checks] != 0


# -- canonical binary encoding ------------------------------------------

ANNOUNCEMENT_MAGIC = b"RGAN"
WIRE_VERSION = 1
FLAG_DPOINTS = 0x01
FLAG_EPHEMERAL = 0x02


class ByteReader:
    """Cursor over immutable bytes; underflow raises DecodeError."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        if k < 0 or self.pos + k > len(self.data):
            raise DecodeError("truncated input")
        chunk = self.data[self.pos:self.pos + k]
        self.pos += k
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("identity is not valid UTF-8") from exc

    def point(self, curve):
        try:
            return curve.decode_point(self.take(curve.point_bytes))
        except ValueError as exc:
            raise DecodeError(f"bad point encoding: {exc}") from exc

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes")


def _write_string(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("identity string too long")
    out += len(raw).to_bytes(2, "big")
    out += raw


def _write_entry(params, out, identity, gamma, triple, d_point, with_d):
    _write_string(out, identity)
    out += params.field.encode(gamma)
    out += elgamal.encode_triple(params, triple)
    if with_d:
        out += params.curve.encode_point(d_point)


def _read_entry(params, reader, with_d):
    identity = reader.string()
    try:
        gamma = params.field.decode(reader.take(params.field.num_bytes))
        triple = elgamal.decode_triple(params, reader.take(elgamal.triple_size(params)))
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    d_point = reader.point(params.curve) if with_d else None
    return identity, gamma, triple, d_point


def encode_announcement(params: SystemParams, announcement: RingAnnouncement) -> bytes:
    entries = announcement.entries
    with_d = any(e.d_point is not None for e in entries)
    flags = (FLAG_DPOINTS if with_d else 0) | (
        FLAG_EPHEMERAL if announcement.ephemeral_pk is not None else 0
    )
    out = bytearray()
    out += ANNOUNCEMENT_MAGIC
    out.append(WIRE_VERSION)
    out.append(flags)
    out += len(announcement.msg).to_bytes(4, "big")
    out += announcement.msg
    out += announcement.threshold.to_bytes(4, "big")
    out += len(entries).to_bytes(4, "big")
    if announcement.ephemeral_pk is not None:
        out += params.curve.encode_point(announcement.ephemeral_pk)
    for e in entries:
        _write_entry(params, out, e.identity, e.gamma, e.triple, e.d_point, with_d)
    return bytes(out)


def decode_announcement(params: SystemParams, data: bytes) -> RingAnnouncement:
    reader = ByteReader(data)
    if reader.take(4) != ANNOUNCEMENT_MAGIC:
        raise DecodeError("bad announcement magic")
    if reader.u8() != WIRE_VERSION:
        raise DecodeError("unsupported announcement version")
    flags = reader.u8()
    if flags & ~(FLAG_DPOINTS | FLAG_EPHEMERAL):
        raise DecodeError("unknown flag bits")
    msg = reader.take(reader.u32())
    threshold = reader.u32()
    r = reader.u32()
    if r > 10_000:
        raise DecodeError("implausible ring size")
    ephemeral_pk = reader.point(params.curve) if flags & FLAG_EPHEMERAL else None
    with_d = bool(flags & FLAG_DPOINTS)
    entries = []
    for _ in range(r):
        identity, gamma, triple, d_point = _read_entry(params, reader, with_d)
        entries.append(RingEntry(identity, gamma, triple, d_point))
    reader.expect_end()
    return RingAnnouncement(msg, threshold, tuple(entries), ephemeral_pk)

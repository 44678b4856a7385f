"""Combined-public-key identity key material.

The authority keeps a vector X of n secret scalars; the public vector
Y holds the matching curve points.  A vehicle's key pair is the subset
sum selected by the bits of its identity digest:

    sk_id = sum(h_i * x_i) mod q        (authority side)
    PK_id = sum(h_i * Y_i)              (anyone, from public data)

so sk_id * P = PK_id by linearity.  The collusion-resistant variant
blinds each private key with a fresh scalar mu and hands the vehicle
D = mu * P alongside; verification then targets PK_id + D.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .curve import Curve, curve_by_name
from .gf2 import field_for_width
from .primitives import HashSuite, make_cipher

PARAMS_MAGIC = b"CPKP"
MASTER_MAGIC = b"CPKS"
WIRE_VERSION = 1

_PLATE_LETTERS = "ABCDEFGHJKLMNPRSTUVWXYZ"  # no I/O/Q, like real plates


def random_plate(rng: random.Random) -> str:
    """Plate-shaped identity string; same generator for real and fake ids."""
    letters = "".join(rng.choice(_PLATE_LETTERS) for _ in range(3))
    return f"{letters}-{rng.randrange(10000):04d}"


@dataclass(frozen=True)
class IdentityKey:
    identity: str
    secret: int
    variant_point: tuple | None = None  # D = mu*P in the blinded variant


@dataclass
class SystemParams:
    """Public system parameters; immutable after setup."""

    curve: Curve
    n: int
    l: int
    hash_suite: str
    cipher: str
    public_vector: list
    _pk_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.public_vector) != self.n:
            raise ValueError("public vector length must equal n")
        self.suite = HashSuite(self.hash_suite)
        self.field = field_for_width(self.l)

    def cipher_for_key(self, key_bits: int):
        return make_cipher(self.cipher, self.field.encode(key_bits), self.l)

    def identity_bit_indices(self, identity: str) -> list:
        """Indices i with h_i = 1, where bit 1 is the digest MSB."""
        digest = self.suite.identity_bits(identity, self.n)
        return [i for i in range(self.n) if (digest >> (self.n - 1 - i)) & 1]

    def public_key(self, identity: str):
        """Identity public key PK = sum of selected Y entries (memoized)."""
        pk = self._pk_cache.get(identity)
        if pk is None and identity not in self._pk_cache:
            pts = [self.public_vector[i] for i in self.identity_bit_indices(identity)]
            pk = self.curve.sum_points(pts)
            self._pk_cache[identity] = pk
        return pk


@dataclass
class MasterKeyMaterial:
    """Authority state: the secret vector plus the published parameters."""

    params: SystemParams
    secret_vector: list

    def __post_init__(self):
        if len(self.secret_vector) != self.params.n:
            raise ValueError("secret vector length must equal n")


def setup(
    n: int,
    seed,
    curve: Curve | str = "p256",
    l: int = 256,
    hash_suite: str = "sha256",
    cipher: str = "feistel-aes4",
) -> tuple[MasterKeyMaterial, SystemParams]:
    """Generate master key material; deterministic per seed."""
    if isinstance(curve, str):
        curve = curve_by_name(curve)
    suite = HashSuite(hash_suite)
    if suite.native_identity_bits is not None and n != suite.native_identity_bits:
        raise ValueError(
            f"n must equal the identity digest width "
            f"({suite.native_identity_bits} for suite {hash_suite!r}); got {n}"
        )
    rng = random.Random(seed)
    xs = [curve.random_scalar(rng) for _ in range(n)]
    ys = [curve.mul(x, curve.generator) for x in xs]
    params = SystemParams(curve, n, l, hash_suite, cipher, ys)
    return MasterKeyMaterial(params, xs), params


def derive_private(material: MasterKeyMaterial, identity: str) -> IdentityKey:
    """Authority-side key issue: subset sum of the secret vector."""
    params = material.params
    sk = sum(material.secret_vector[i] for i in params.identity_bit_indices(identity))
    return IdentityKey(identity, sk % params.curve.q)


def derive_public(params: SystemParams, identity: str):
    """Anyone can compute the identity public key from public data."""
    return params.public_key(identity)


def derive_private_v2(material: MasterKeyMaterial, identity: str, seed) -> IdentityKey:
    """Collusion-resistant issue: private key blinded by fresh mu."""
    rng = random.Random(seed)
    mu = material.params.curve.random_scalar(rng)
    return _derive_with_randomizer(material, identity, mu)


def _derive_with_randomizer(material: MasterKeyMaterial, identity: str, mu: int) -> IdentityKey:
    params = material.params
    base = derive_private(material, identity)
    sk = (base.secret + mu) % params.curve.q
    d_point = params.curve.mul(mu, params.curve.generator)
    return IdentityKey(identity, sk, d_point)


# -- parameter file format (versioned, binary) --------------------------

def encode_params(params: SystemParams) -> bytes:
    curve_id = params.curve.name.encode("ascii")
    suite_id = params.hash_suite.encode("ascii")
    cipher_id = params.cipher.encode("ascii")
    out = bytearray()
    out += PARAMS_MAGIC
    out.append(WIRE_VERSION)
    out.append(len(curve_id))
    out += curve_id
    out.append(len(suite_id))
    out += suite_id
    out.append(len(cipher_id))
    out += cipher_id
    out += params.n.to_bytes(4, "big")
    out += params.l.to_bytes(4, "big")
    for pt in params.public_vector:
        out += params.curve.encode_point(pt)
    return bytes(out)


def decode_params(data: bytes) -> SystemParams:
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > len(data):
            raise ValueError("truncated parameter file")
        chunk = data[pos:pos + k]
        pos += k
        return chunk

    def take_str():
        return take(take(1)[0]).decode("ascii")

    if take(4) != PARAMS_MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version = take(1)[0]
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    curve = curve_by_name(take_str())
    suite_id = take_str()
    cipher_id = take_str()
    n = int.from_bytes(take(4), "big")
    l = int.from_bytes(take(4), "big")
    ys = [curve.decode_point(take(curve.point_bytes)) for _ in range(n)]
    if pos != len(data):
        raise ValueError("trailing bytes in parameter file")
    return SystemParams(curve, n, l, suite_id, cipher_id, ys)


def encode_master(material: MasterKeyMaterial) -> bytes:
    """Secret vector export; written only when explicitly requested."""
    params = material.params
    out = bytearray()
    out += MASTER_MAGIC
    out.append(WIRE_VERSION)
    curve_id = params.curve.name.encode("ascii")
    out.append(len(curve_id))
    out += curve_id
    out += params.n.to_bytes(4, "big")
    for x in material.secret_vector:
        out += x.to_bytes(params.curve.scalar_bytes, "big")
    return bytes(out)


def decode_master(data: bytes, params: SystemParams) -> MasterKeyMaterial:
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > len(data):
            raise ValueError("truncated master key file")
        chunk = data[pos:pos + k]
        pos += k
        return chunk

    if take(4) != MASTER_MAGIC:
        raise ValueError("not a master key file (bad magic)")
    version = take(1)[0]
    if version != WIRE_VERSION:
        raise ValueError(f"unsupported master key file version {version}")
    curve_name = take(take(1)[0]).decode("ascii")
    if curve_name != params.curve.name:
        raise ValueError("master key curve does not match parameters")
    n = int.from_bytes(take(4), "big")
    if n != params.n:
        raise ValueError("master key length does not match parameters")
    xs = [int.from_bytes(take(params.curve.scalar_bytes), "big") for _ in range(n)]
    if pos != len(data):
        raise ValueError("trailing bytes in master key file")
    return MasterKeyMaterial(params, xs)

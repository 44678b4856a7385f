"""Hash suites, the keyed block permutation, and ephemeral-key encryption.

The scheme needs four hash roles with fixed output domains:

* identity digest  -> n bits   (selects master-key vector slots)
* point digest     -> Z_q      (signature equation coefficient)
* message key      -> l bits   (symmetric key binding the polynomial to msg)
* threshold anchor -> l bits   (polynomial value at zero, binds t and r)

All are realized as SHA-256 with one-byte domain tags, truncated to the
requested width.  Suite "sha256" pins the identity digest at the full
256 bits; "sha256-trunc" allows shorter n for small test parameter
sets; "zero-id" zeroes the identity digest only (degenerate-key tests).
"""

from __future__ import annotations

import hashlib
import hmac

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


class DecryptionError(ValueError):
    """Ciphertext failed authentication or is structurally invalid."""


_TAG_IDENTITY = b"\x00"
_TAG_POINT = b"\x01"
_TAG_MSGKEY = b"\x02"
_TAG_ANCHOR = b"\x03"

SUITE_NAMES = ("sha256", "sha256-trunc", "zero-id")


def _digest_bits(tag: bytes, data: bytes, bits: int) -> int:
    if not 0 < bits <= 256:
        raise ValueError("digest width must be in 1..256 bits")
    d = int.from_bytes(hashlib.sha256(tag + data).digest(), "big")
    return d >> (256 - bits)


class HashSuite:
    """Domain-separated hash roles; see module docstring for the map."""

    def __init__(self, name: str):
        if name not in SUITE_NAMES:
            raise ValueError(f"unknown hash suite {name!r} (have {SUITE_NAMES})")
        self.name = name
        # Width the identity digest is pinned to (None = caller's choice).
        self.native_identity_bits = 256 if name == "sha256" else None

    def identity_bits(self, identity: str, n: int) -> int:
        """n-bit identity digest; bit 1 (paper order) is the MSB."""
        if self.native_identity_bits is not None and n != self.native_identity_bits:
            raise ValueError(
                f"suite {self.name!r} produces {self.native_identity_bits}-bit "
                f"identity digests, not {n}"
            )
        if self.name == "zero-id":
            return 0
        return _digest_bits(_TAG_IDENTITY, identity.encode("utf-8"), n)

    def point_scalar(self, point_bytes: bytes, q: int) -> int:
        return _digest_bits(_TAG_POINT, point_bytes, 256) % q

    def message_key(self, msg: bytes, l: int) -> int:
        return _digest_bits(_TAG_MSGKEY, msg, l)

    def threshold_anchor(self, t: int, r: int, l: int, extra: bytes = b"") -> int:
        payload = t.to_bytes(4, "big") + r.to_bytes(4, "big") + extra
        return _digest_bits(_TAG_ANCHOR, payload, l)


CIPHER_NAMES = ("feistel-aes4",)


class FeistelPermutation:
    """Keyed permutation of l-bit blocks (l even, l <= 256).

    Four-round balanced Feistel over two l/2-bit halves; the round
    function is one AES-256 block encryption of the right half XORed
    with a per-round constant, truncated to the half width.  Encrypt
    and decrypt are exact inverses by construction.
    """

    _ROUNDS = 4
    _RC = [hashlib.sha256(b"feistel-rc" + bytes([i])).digest()[:16] for i in range(_ROUNDS)]

    def __init__(self, key: bytes, width: int):
        if width % 16 != 0 or not 0 < width <= 256:
            raise ValueError("block width must be a multiple of 16 bits, <= 256")
        self.width = width
        self._half = width // 2
        self._half_bytes = self._half // 8
        self._mask = (1 << self._half) - 1
        aes = algorithms.AES(hashlib.sha256(key).digest())
        self._enc = Cipher(aes, modes.ECB()).encryptor()

    def _round(self, i: int, half: int) -> int:
        block = bytearray(self._RC[i])
        hb = half.to_bytes(self._half_bytes, "big")
        for j in range(self._half_bytes):
            block[16 - self._half_bytes + j] ^= hb[j]
        out = self._enc.update(bytes(block))
        return int.from_bytes(out[-self._half_bytes:], "big")

    def encrypt(self, x: int) -> int:
        if not 0 <= x < (1 << self.width):
            raise ValueError("plaintext out of block range")
        left, right = x >> self._half, x & self._mask
        for i in range(self._ROUNDS):
            left, right = right, left ^ self._round(i, right)
        return (left << self._half) | right

    def decrypt(self, y: int) -> int:
        if not 0 <= y < (1 << self.width):
            raise ValueError("ciphertext out of block range")
        left, right = y >> self._half, y & self._mask
        for i in range(self._ROUNDS - 1, -1, -1):
            left, right = right ^ self._round(i, left), left
        return (left << self._half) | right


def make_cipher(name: str, key: bytes, width: int) -> FeistelPermutation:
    if name not in CIPHER_NAMES:
        raise ValueError(f"unknown cipher {name!r} (have {CIPHER_NAMES})")
    return FeistelPermutation(key, width)


# -- ephemeral-key reply encryption (ECDH + permutation stream + MAC) ---

_MAC_BYTES = 32


def _stream_xor(key: bytes, data: bytes) -> bytes:
    perm = FeistelPermutation(key, 256)
    out = bytearray(len(data))
    for i in range(0, len(data), 32):
        block = perm.encrypt(i // 32).to_bytes(32, "big")
        chunk = data[i:i + 32]
        for j, byte in enumerate(chunk):
            out[i + j] = byte ^ block[j]
    return bytes(out)


def ecies_encrypt(curve, recipient_pk, plaintext: bytes, rng) -> bytes:
    """Encrypt to a curve public key with a fresh ephemeral ECDH share."""
    if recipient_pk is None:
        raise ValueError("cannot encrypt to the point at infinity")
    while True:
        eph = curve.random_scalar(rng)
        share = curve.mul(eph, curve.generator)
        secret = curve.mul(eph, recipient_pk)
        if secret is not None:
            break
    share_bytes = curve.encode_point(share)
    seed = share_bytes + curve.encode_point(secret)
    enc_key = hashlib.sha256(b"ecies-enc" + seed).digest()
    mac_key = hashlib.sha256(b"ecies-mac" + seed).digest()
    body = _stream_xor(enc_key, plaintext)
    tag = hmac.new(mac_key, share_bytes + body, hashlib.sha256).digest()
    return share_bytes + body + tag


def ecies_decrypt(curve, recipient_sk: int, data: bytes) -> bytes:
    if len(data) < curve.point_bytes + _MAC_BYTES:
        raise DecryptionError("ciphertext too short")
    share_bytes = data[:curve.point_bytes]
    body = data[curve.point_bytes:-_MAC_BYTES]
    tag = data[-_MAC_BYTES:]
    try:
        share = curve.decode_point(share_bytes)
    except ValueError as exc:
        raise DecryptionError(f"bad ephemeral share: {exc}") from exc
    secret = curve.mul(recipient_sk, share)
    if secret is None:
        raise DecryptionError("degenerate shared secret")
    seed = share_bytes + curve.encode_point(secret)
    enc_key = hashlib.sha256(b"ecies-enc" + seed).digest()
    mac_key = hashlib.sha256(b"ecies-mac" + seed).digest()
    expect = hmac.new(mac_key, share_bytes + body, hashlib.sha256).digest()
    if not hmac.compare_digest(tag, expect):
        raise DecryptionError("authentication failed")
    return _stream_xor(enc_key, body)

"""Short Weierstrass elliptic curve groups over prime fields.

Points at the API boundary are affine ``(x, y)`` tuples of ints, with
``None`` for the point at infinity.  Internally scalar multiplication
runs in Jacobian coordinates with a 4-bit window and a shared doubling
chain, so multi-scalar combinations (the signature verification shape
``m*P - h*PK - beta*alpha``) cost little more than a single multiply.

Two groups are provided: NIST P-256 as the production group, and a toy
prime-order curve over F_97 that is small enough for brute-force test
oracles.

Coordinates are held as gmpy2 mpz when gmpy2 is installed (roughly 2x
faster modular arithmetic); plain ints otherwise.
"""

from __future__ import annotations

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover - exercised only without gmpy2
    def mpz(x):
        return x


class PointDecodeError(ValueError):
    """Byte string is not a valid compressed point on this curve."""


def sqrt_mod(a: int, p: int):
    """A square root of a modulo prime p, or None if a is a non-residue."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    # Tonelli-Shanks for p = 1 (mod 4).
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t = t * c % p
        r = r * b % p
    return r


class Curve:
    """y^2 = x^3 + a*x + b over F_p, with a prime-order generator."""

    def __init__(self, name: str, p: int, a: int, b: int, gx: int, gy: int, q: int):
        self.name = name
        self.p = p
        self.a = a % p
        self.b = b % p
        self.generator = (gx, gy)
        self.q = q  # group order, prime
        self.coord_bytes = (p.bit_length() + 7) // 8
        self.scalar_bytes = (q.bit_length() + 7) // 8
        self.point_bytes = 1 + self.coord_bytes
        self._p = mpz(p)
        self._a = mpz(self.a)

    def __repr__(self):
        return f"Curve({self.name})"

    def is_on_curve(self, pt) -> bool:
        if pt is None:
            return True
        x, y = pt
        p = self.p
        return (y * y - (x * x * x + self.a * x + self.b)) % p == 0

    def neg(self, pt):
        if pt is None:
            return None
        x, y = pt
        return (x, (-y) % self.p)

    # -- Jacobian internals --------------------------------------------
    def _to_jac(self, pt):
        if pt is None:
            return None
        return (mpz(pt[0]), mpz(pt[1]), mpz(1))

    def _to_affine(self, jac):
        if jac is None or not jac[2]:
            return None
        x, y, z = jac
        zi = pow(z, -1, self._p)
        zi2 = zi * zi % self._p
        return (int(x * zi2 % self._p), int(y * zi2 * zi % self._p))

    def _jdouble(self, pt):
        if pt is None or not pt[1]:
            return None
        p = self._p
        x1, y1, z1 = pt
        xx = x1 * x1 % p
        yy = y1 * y1 % p
        yyyy = yy * yy % p
        zz = z1 * z1 % p
        s = 2 * ((x1 + yy) ** 2 - xx - yyyy) % p
        m = (3 * xx + self._a * zz % p * zz) % p
        x3 = (m * m - 2 * s) % p
        y3 = (m * (s - x3) - 8 * yyyy) % p
        z3 = ((y1 + z1) ** 2 - yy - zz) % p
        return (x3, y3, z3)

    def _jadd(self, pt1, pt2):
        if pt1 is None:
            return pt2
        if pt2 is None:
            return pt1
        p = self._p
        x1, y1, z1 = pt1
        x2, y2, z2 = pt2
        z1z1 = z1 * z1 % p
        z2z2 = z2 * z2 % p
        u1 = x1 * z2z2 % p
        u2 = x2 * z1z1 % p
        s1 = y1 * z2 % p * z2z2 % p
        s2 = y2 * z1 % p * z1z1 % p
        if u1 == u2:
            if s1 != s2:
                return None
            return self._jdouble(pt1)
        h = (u2 - u1) % p
        i = 4 * h * h % p
        j = h * i % p
        r = 2 * (s2 - s1) % p
        v = u1 * i % p
        x3 = (r * r - j - 2 * v) % p
        y3 = (r * (v - x3) - 2 * s1 * j) % p
        z3 = ((z1 + z2) ** 2 - z1z1 - z2z2) % p * h % p
        return (x3, y3, z3)

    # -- public group operations ---------------------------------------
    def add(self, pt1, pt2):
        return self._to_affine(self._jadd(self._to_jac(pt1), self._to_jac(pt2)))

    def multi_mul(self, pairs):
        """Sum of k_i * P_i over (scalar, point) pairs, affine result.

        Windowed (4-bit) left-to-right evaluation with one shared
        doubling chain across all terms.
        """
        tables = []
        top = 0
        for k, pt in pairs:
            k %= self.q
            if k == 0 or pt is None:
                continue
            jac = self._to_jac(pt)
            tab = [None] * 16
            for d in range(1, 16):
                tab[d] = self._jadd(tab[d - 1], jac)
            tables.append((k, tab))
            top = max(top, k.bit_length())
        acc = None
        nwin = (top + 3) // 4
        for w in range(nwin - 1, -1, -1):
            if acc is not None:
                acc = self._jdouble(acc)
                acc = self._jdouble(acc)
                acc = self._jdouble(acc)
                acc = self._jdouble(acc)
            for k, tab in tables:
                d = (k >> (4 * w)) & 15
                if d:
                    acc = self._jadd(acc, tab[d])
        return self._to_affine(acc)

    def mul(self, k: int, pt):
        return self.multi_mul([(k, pt)])

    def sum_points(self, pts):
        """Sum of a sequence of affine points (no scalars)."""
        acc = None
        for pt in pts:
            acc = self._jadd(acc, self._to_jac(pt))
        return self._to_affine(acc)

    # -- canonical encoding: SEC1 compressed; infinity is all zeros ----
    def encode_point(self, pt) -> bytes:
        if pt is None:
            return bytes(self.point_bytes)
        x, y = pt
        tag = 3 if y & 1 else 2
        return bytes([tag]) + x.to_bytes(self.coord_bytes, "big")

    def decode_point(self, data: bytes):
        if len(data) != self.point_bytes:
            raise PointDecodeError(f"expected {self.point_bytes} bytes, got {len(data)}")
        tag = data[0]
        if tag == 0:
            if any(data[1:]):
                raise PointDecodeError("nonzero payload with infinity tag")
            return None
        if tag not in (2, 3):
            raise PointDecodeError(f"bad point tag {tag:#x}")
        x = int.from_bytes(data[1:], "big")
        if x >= self.p:
            raise PointDecodeError("x coordinate out of range")
        rhs = (x * x * x + self.a * x + self.b) % self.p
        y = sqrt_mod(rhs, self.p)
        if y is None:
            raise PointDecodeError("x coordinate not on curve")
        if (y & 1) != (tag & 1):
            y = self.p - y
        return (x, y)

    def random_scalar(self, rng) -> int:
        """Uniform element of Z_q^*."""
        return rng.randrange(1, self.q)


P256 = Curve(
    "p256",
    p=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF,
    a=-3,
    b=0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B,
    gx=0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
    gy=0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5,
    q=0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
)

# Prime-order toy group: y^2 = x^3 + 2x + 14 over F_97, |G| = 101.
TOY97 = Curve("toy97", p=97, a=2, b=14, gx=3, gy=12, q=101)

CURVES = {c.name: c for c in (P256, TOY97)}


def curve_by_name(name: str) -> Curve:
    try:
        return CURVES[name]
    except KeyError:
        raise ValueError(f"unknown curve {name!r} (have {sorted(CURVES)})") from None

"""Binary field arithmetic GF(2^l) and exact Lagrange interpolation.

Field elements are plain Python ints: bit i of the integer is the
coefficient of x^i in the residue polynomial over GF(2).  Addition is
XOR; multiplication is carry-less polynomial multiplication reduced by
a fixed sparse irreducible modulus.

Polynomials *over* the field (used for the announcement verification
polynomial) are lists of field elements, lowest degree first, with
trailing zeros trimmed.

Two field widths are supported:

* l = 256, modulus x^256 + x^10 + x^5 + x^2 + 1, the production field
  (wide enough to carry 256-bit curve scalars losslessly);
* l = 16, modulus x^16 + x^5 + x^3 + x + 1, a small field where
  exhaustive test oracles are feasible.

Both moduli are checked for irreducibility in the test suite via
``is_irreducible`` before anything relies on them.
"""

from __future__ import annotations


class ZeroInverse(ZeroDivisionError):
    """Multiplicative inverse of zero requested."""


class DuplicateAbscissa(ValueError):
    """Two interpolation points share an x coordinate."""


MODULUS_256 = (1 << 256) | (1 << 10) | (1 << 5) | (1 << 2) | 1
MODULUS_16 = (1 << 16) | (1 << 5) | (1 << 3) | (1 << 1) | 1


def _spread_byte(b: int) -> int:
    out = 0
    for i in range(8):
        if (b >> i) & 1:
            out |= 1 << (2 * i)
    return out


_SPREAD = [_spread_byte(b) for b in range(256)]


def poly_trim(coeffs):
    """Drop trailing zero coefficients (canonical polynomial form)."""
    end = len(coeffs)
    while end > 1 and coeffs[end - 1] == 0:
        end -= 1
    return list(coeffs[:end])


def poly_degree(coeffs):
    """Degree of a trimmed coefficient list (constant 0 has degree 0)."""
    return len(poly_trim(coeffs)) - 1


class BinaryField:
    """GF(2^degree) with a fixed irreducible modulus."""

    def __init__(self, degree: int, modulus: int):
        if modulus.bit_length() != degree + 1:
            raise ValueError("modulus degree mismatch")
        if degree % 8 != 0:
            raise ValueError("field width must be a whole number of bytes")
        self.degree = degree
        self.modulus = modulus
        self.order = 1 << degree
        self.num_bytes = degree // 8
        self._mask = self.order - 1
        # Bit positions of the reduction taps, i.e. modulus - x^degree.
        self._taps = [i for i in range(degree) if (modulus >> i) & 1]

    def __repr__(self):
        return f"BinaryField(2^{self.degree})"

    def check(self, a: int) -> int:
        if not 0 <= a < self.order:
            raise ValueError(f"value out of field range: {a:#x}")
        return a

    def add(self, a: int, b: int) -> int:
        return a ^ b

    # Subtraction equals addition in characteristic 2.
    sub = add

    def _reduce(self, v: int) -> int:
        while v >> self.degree:
            high = v >> self.degree
            v &= self._mask
            for t in self._taps:
                v ^= high << t
        return v

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        # Carry-less multiply with a 4-bit window on `a`.
        table = [0] * 16
        for i in range(1, 16):
            table[i] = (table[i >> 1] << 1) ^ (b if i & 1 else 0)
        acc = 0
        shift = 0
        while a:
            acc ^= table[a & 15] << shift
            a >>= 4
            shift += 4
        return self._reduce(acc)

    def fixed_mul(self, b: int):
        """Multiplier by a fixed element, amortizing an 8-bit window table.

        Pays off after roughly eight products by the same operand;
        interpolation and evaluation are full of exactly that pattern.
        """
        if b == 0:
            return lambda a: 0
        table = [0] * 256
        for i in range(1, 256):
            table[i] = (table[i >> 1] << 1) ^ (b if i & 1 else 0)
        reduce = self._reduce

        def mul_by(a: int, _table=table, _reduce=reduce) -> int:
            acc = 0
            shift = 0
            while a:
                acc ^= _table[a & 255] << shift
                a >>= 8
                shift += 8
            return _reduce(acc)

        return mul_by

    def sqr(self, a: int) -> int:
        # Squaring only spreads the bits apart in characteristic 2.
        acc = 0
        shift = 0
        while a:
            acc |= _SPREAD[a & 0xFF] << shift
            a >>= 8
            shift += 16
        return self._reduce(acc)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        # Extended Euclid over GF(2)[x]; gcd(a, modulus) = 1 since the
        # modulus is irreducible.
        u, v = a, self.modulus
        g1, g2 = 1, 0
        while u != 1:
            j = u.bit_length() - v.bit_length()
            if j < 0:
                u, v = v, u
                g1, g2 = g2, g1
                j = -j
            u ^= v << j
            g1 ^= g2 << j
        return self._reduce(g1)

    def batch_inv(self, values) -> list:
        """Inverses of all values for the price of one (Montgomery trick)."""
        values = list(values)
        prefix = []
        acc = 1
        for v in values:
            if v == 0:
                raise ZeroInverse("0 has no multiplicative inverse")
            acc = self.mul(acc, v)
            prefix.append(acc)
        inv_acc = self.inv(acc)
        out = [0] * len(values)
        for i in range(len(values) - 1, 0, -1):
            out[i] = self.mul(inv_acc, prefix[i - 1])
            inv_acc = self.mul(inv_acc, values[i])
        if values:
            out[0] = inv_acc
        return out

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def random_element(self, rng) -> int:
        return rng.getrandbits(self.degree)

    def random_nonzero(self, rng) -> int:
        while True:
            a = rng.getrandbits(self.degree)
            if a:
                return a

    # -- canonical byte encoding: big-endian, so bit 0 of the polynomial
    #    is the least significant bit of the last byte.
    def encode(self, a: int) -> bytes:
        return self.check(a).to_bytes(self.num_bytes, "big")

    def decode(self, data: bytes) -> int:
        if len(data) != self.num_bytes:
            raise ValueError(f"expected {self.num_bytes} bytes, got {len(data)}")
        return int.from_bytes(data, "big")

    # -- polynomials over the field ------------------------------------
    def poly_eval(self, coeffs, x: int) -> int:
        if len(coeffs) >= 8:
            mul_by_x = self.fixed_mul(x)
            acc = 0
            for c in reversed(coeffs):
                acc = mul_by_x(acc) ^ c
            return acc
        acc = 0
        for c in reversed(coeffs):
            acc = self.mul(acc, x) ^ c
        return acc

    def interpolate(self, points) -> list:
        """Unique polynomial of degree <= len(points)-1 through all points.

        Direct Lagrange basis construction, O(k^2) field multiplies.
        Raises DuplicateAbscissa when two x coordinates coincide.
        """
        points = list(points)
        if not points:
            raise ValueError("need at least one point")
        xs = [x for x, _ in points]
        if len(set(xs)) != len(xs):
            raise DuplicateAbscissa("repeated x coordinate")
        k = len(points)
        big = k >= 8  # amortized fixed-operand tables win on larger systems
        # Master numerator M(X) = prod over points of (X + x_i).
        master = [1]
        for x in xs:
            mul_by_x = self.fixed_mul(x) if big else (lambda c, _x=x: self.mul(c, _x))
            nxt = [0] * (len(master) + 1)
            for i, c in enumerate(master):
                nxt[i + 1] ^= c
                nxt[i] ^= mul_by_x(c)
            master = nxt
        acc = [0] * k
        for xi, yi in points:
            mul_by_xi = self.fixed_mul(xi) if big else (lambda c, _x=xi: self.mul(c, _x))
            # Exact synthetic division: q = M / (X + xi), and the basis
            # denominator Q(x_i) by Horner along the way.
            q = [0] * k
            carry = master[k]
            denom = 0
            for j in range(k - 1, -1, -1):
                q[j] = carry
                denom = mul_by_xi(denom) ^ carry
                carry = master[j] ^ mul_by_xi(carry)
            scale = self.mul(yi, self.inv(denom))
            mul_by_scale = self.fixed_mul(scale) if big else None
            for j in range(k):
                acc[j] ^= mul_by_scale(q[j]) if big else self.mul(scale, q[j])
        return poly_trim(acc)


def is_irreducible(modulus: int) -> bool:
    """Rabin irreducibility test for a GF(2)[x] polynomial given as an int."""
    d = modulus.bit_length() - 1
    if d < 1:
        return False

    def pmod(a, m):
        dm = m.bit_length() - 1
        while a and a.bit_length() - 1 >= dm:
            a ^= m << (a.bit_length() - 1 - dm)
        return a

    def pgcd(a, b):
        while b:
            a, b = b, pmod(a, b)
        return a

    def sqr_mod(a):
        # Squaring over GF(2) spreads the bits apart.
        r = 0
        i = 0
        while a:
            if a & 1:
                r |= 1 << (2 * i)
            a >>= 1
            i += 1
        return pmod(r, modulus)

    def x_pow_2k(k):
        v = pmod(2, modulus)
        for _ in range(k):
            v = sqr_mod(v)
        return v

    if x_pow_2k(d) != pmod(2, modulus):
        return False
    n, prime_factors = d, []
    f = 2
    while f * f <= n:
        if n % f == 0:
            prime_factors.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        prime_factors.append(n)
    for q in prime_factors:
        if pgcd(x_pow_2k(d // q) ^ 2, modulus) != 1:
            return False
    return True


FIELD_256 = BinaryField(256, MODULUS_256)
FIELD_16 = BinaryField(16, MODULUS_16)

_FIELDS = {256: FIELD_256, 16: FIELD_16}


def field_for_width(l: int) -> BinaryField:
    try:
        return _FIELDS[l]
    except KeyError:
        raise ValueError(f"unsupported field width {l} (have {sorted(_FIELDS)})") from None

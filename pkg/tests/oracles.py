"""Independent reference implementations the tests check against.

Everything here is deliberately written the slow, obvious way and
shares no code paths with the package: schoolbook polynomial algebra
over GF(2), Vandermonde interpolation by Gaussian elimination, naive
affine curve arithmetic with repeated-addition scalar multiplication,
and brute-force enumeration for the anonymity probability.
"""

import itertools
from fractions import Fraction


# -- GF(2)[x] the schoolbook way -----------------------------------------

def gf2_mul_schoolbook(a: int, b: int, modulus: int) -> int:
    """Shift-and-xor product followed by long division by the modulus."""
    product = 0
    shift = 0
    while b:
        if b & 1:
            product ^= a << shift
        b >>= 1
        shift += 1
    return gf2_mod_longdiv(product, modulus)


def gf2_mod_longdiv(value: int, modulus: int) -> int:
    deg_m = modulus.bit_length() - 1
    while value.bit_length() - 1 >= deg_m and value:
        value ^= modulus << (value.bit_length() - 1 - deg_m)
    return value


def gf2_inv_exhaustive(a: int, field) -> int:
    """Scan the whole (small) field for the inverse."""
    for candidate in range(1, field.order):
        if gf2_mul_schoolbook(a, candidate, field.modulus) == 1:
            return candidate
    raise AssertionError(f"no inverse found for {a}")


def interpolate_vandermonde(points, field):
    """Solve V c = y by Gaussian elimination over the field."""
    k = len(points)
    rows = []
    for x, y in points:
        row = [1]
        for _ in range(k - 1):
            row.append(field.mul(row[-1], x))
        row.append(y)
        rows.append(row)
    # forward elimination with pivoting
    for col in range(k):
        pivot = next(r for r in range(col, k) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        inv = field.inv(rows[col][col])
        rows[col] = [field.mul(inv, v) for v in rows[col]]
        for r in range(k):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [rows[r][i] ^ field.mul(factor, rows[col][i])
                           for i in range(k + 1)]
    coeffs = [rows[i][k] for i in range(k)]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


# -- naive affine curve arithmetic ----------------------------------------

def naive_add(curve, p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    p = curve.p
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2 and (y1 + y2) % p == 0:
        return None
    if p1 == p2:
        lam = (3 * x1 * x1 + curve.a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    y3 = (lam * (x1 - x3) - y1) % p
    return (x3, y3)


def naive_mul(curve, k, pt):
    """Scalar multiplication by literal repeated addition."""
    k %= curve.q
    acc = None
    for _ in range(k):
        acc = naive_add(curve, acc, pt)
    return acc


# -- anonymity probability by enumeration ----------------------------------

def anonymity_enumeration(t: int, r: int, j: int) -> Fraction:
    """Try every possible guess set of size t against a fixed signer set."""
    actual = set(range(t))
    hits = sum(
        1
        for guess in itertools.combinations(range(r), t)
        if len(actual.intersection(guess)) >= j
    )
    import math

    return Fraction(hits, math.comb(r, t))

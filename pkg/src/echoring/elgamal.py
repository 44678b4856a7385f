"""EC-Elgamal signatures and the keyless forgery construction.

A triple (m, alpha, beta) is valid for public key PK when

    (m mod q) * P  ==  h(alpha) * PK  +  beta * alpha

Signing picks c in Z_q^*, sets alpha = c*P and solves for beta.  A
forgery runs the equation backwards: pick a, b in Z_q^*, set
alpha = a*P + b*PK and beta = -h(alpha)/b, which forces
m = a*beta.  The forged triple verifies, but its message value falls
out of the construction rather than being chosen, which is exactly
what keeps forged ring members off the verification polynomial.

m is carried as the full l-bit value and only reduced mod q inside
the curve equation, because the polynomial layer encrypts the exact
l-bit string.  Note the residual bias: forged m values are always
below q while honestly decrypted ones range over all l bits; with a
256-bit q the statistical gap is ~2^-32 and is documented, not fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cpk import SystemParams


@dataclass(frozen=True)
class ElgamalTriple:
    message: int  # l-bit carrier
    alpha: tuple | None
    beta: int


def _point_hash(params: SystemParams, point) -> int:
    return params.suite.point_scalar(params.curve.encode_point(point), params.curve.q)


def sign(params: SystemParams, secret: int, message: int, rng) -> ElgamalTriple:
    """Signature of an l-bit message under a private scalar."""
    curve = params.curve
    params.field.check(message)
    while True:
        c = curve.random_scalar(rng)
        alpha = curve.mul(c, curve.generator)
        h = _point_hash(params, alpha)
        if alpha is not None and h != 0:
            break
    beta = (message - secret * h) * pow(c, -1, curve.q) % curve.q
    return ElgamalTriple(message, alpha, beta)


def verify(params: SystemParams, public_key, sig: ElgamalTriple, d_point=None) -> bool:
    """Public check of the signature equation; no secrets involved.

    d_point, when given, is the per-key blinding point of the
    collusion-resistant variant: the equation targets PK + D.
    """
    curve = params.curve
    if sig.alpha is None:
        return False
    if not 0 <= sig.message < params.field.order or not 0 <= sig.beta < curve.q:
        return False
    pk = public_key if d_point is None else curve.add(public_key, d_point)
    h = _point_hash(params, sig.alpha)
    residue = curve.multi_mul([
        (sig.message % curve.q, curve.generator),
        (-h % curve.q, pk),
        (-sig.beta % curve.q, sig.alpha),
    ])
    return residue is None


def forge(params: SystemParams, public_key, rng) -> ElgamalTriple:
    """Verifying triple for a key nobody holds; m is forced, not chosen."""
    if public_key is None:
        raise ValueError("cannot forge against the point at infinity")
    curve = params.curve
    while True:
        a = curve.random_scalar(rng)
        b = curve.random_scalar(rng)
        alpha = curve.multi_mul([(a, curve.generator), (b, public_key)])
        if alpha is None:
            continue
        h = _point_hash(params, alpha)
        if h != 0:
            break
    beta = -pow(b, -1, curve.q) * h % curve.q
    message = a * beta % curve.q
    return ElgamalTriple(message, alpha, beta)


def encode_triple(params: SystemParams, sig: ElgamalTriple) -> bytes:
    """m (l/8 bytes) || alpha (compressed point) || beta (scalar width)."""
    curve = params.curve
    return (
        params.field.encode(sig.message)
        + curve.encode_point(sig.alpha)
        + sig.beta.to_bytes(curve.scalar_bytes, "big")
    )


def triple_size(params: SystemParams) -> int:
    return params.field.num_bytes + params.curve.point_bytes + params.curve.scalar_bytes


def decode_triple(params: SystemParams, data: bytes) -> ElgamalTriple:
    if len(data) != triple_size(params):
        raise ValueError("bad triple length")
    curve = params.curve
    fb = params.field.num_bytes
    message = params.field.decode(data[:fb])
    alpha = curve.decode_point(data[fb:fb + curve.point_bytes])
    beta = int.from_bytes(data[fb + curve.point_bytes:], "big")
    if beta >= curve.q:
        raise ValueError("beta out of range")
    return ElgamalTriple(message, alpha, beta)

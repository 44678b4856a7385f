import random
from dataclasses import replace

import pytest

from echoring.elgamal import (
    ElgamalTriple,
    decode_triple,
    encode_triple,
    forge,
    sign,
    triple_size,
    verify,
)
from echoring.cpk import derive_private, derive_public
from oracles import naive_mul, naive_add


class QueuedRng:
    """Feeds predetermined values to randrange, then falls back."""

    def __init__(self, queued, fallback_seed=0):
        self._queued = list(queued)
        self._fallback = random.Random(fallback_seed)

    def randrange(self, *args):
        if self._queued:
            return self._queued.pop(0)
        return self._fallback.randrange(*args)

    def getrandbits(self, n):
        return self._fallback.getrandbits(n)


def test_sign_verify_roundtrip_toy(toy_params, toy_material, rng):
    for i in range(30):
        key = derive_private(toy_material, f"SGN-{i:04d}")
        m = rng.getrandbits(16)
        sig = sign(toy_params, key.secret, m, rng)
        assert verify(toy_params, derive_public(toy_params, key.identity), sig)


def test_sign_verify_roundtrip_production(prod_params, prod_material, rng):
    g = prod_params.curve.generator
    for i in range(10):
        sk = prod_params.curve.random_scalar(rng)
        m = rng.getrandbits(256)
        sig = sign(prod_params, sk, m, rng)
        assert verify(prod_params, prod_params.curve.mul(sk, g), sig)


def test_full_width_message_carrier(prod_params, rng):
    # m beyond the group order must survive signing verbatim; only the
    # curve equation reduces it.
    sk = prod_params.curve.random_scalar(rng)
    pk = prod_params.curve.mul(sk, prod_params.curve.generator)
    m = prod_params.field.order - 2  # far above q
    sig = sign(prod_params, sk, m, rng)
    assert sig.message == m
    assert verify(prod_params, pk, sig)


def test_sign_verify_thousand_randomized_trials(toy_params, rng):
    curve = toy_params.curve
    for _ in range(1000):
        sk = curve.random_scalar(rng)
        pk = curve.mul(sk, curve.generator)
        sig = sign(toy_params, sk, rng.getrandbits(16), rng)
        assert verify(toy_params, pk, sig)


def test_same_message_fresh_nonce(toy_params, toy_material, rng):
    key = derive_private(toy_material, "SGN-9999")
    sigs = {sign(toy_params, key.secret, 0x1234, rng).alpha for _ in range(8)}
    assert len(sigs) > 1


def test_tampering_any_field_rejects(toy_params, toy_material, rng):
    field = toy_params.field
    q = toy_params.curve.q
    for i in range(25):
        key = derive_private(toy_material, f"TMP-{i:04d}")
        pk = derive_public(toy_params, key.identity)
        sig = sign(toy_params, key.secret, rng.getrandbits(16), rng)
        bad_m = replace(sig, message=sig.message ^ (1 << rng.randrange(16)))
        assert not verify(toy_params, pk, bad_m)
        bad_beta = replace(sig, beta=(sig.beta + 1 + rng.randrange(q - 2)) % q)
        assert not verify(toy_params, pk, bad_beta)
        other = toy_params.curve.mul(1 + rng.randrange(q - 1), toy_params.curve.generator)
        if other != sig.alpha:
            assert not verify(toy_params, pk, replace(sig, alpha=other))


def test_verify_rejects_infinity_alpha(toy_params, rng):
    pk = toy_params.curve.mul(7, toy_params.curve.generator)
    assert not verify(toy_params, pk, ElgamalTriple(5, None, 3))


def test_verify_rejects_out_of_range_fields(toy_params, toy_material, rng):
    key = derive_private(toy_material, "RNG-0001")
    pk = derive_public(toy_params, key.identity)
    sig = sign(toy_params, key.secret, 7, rng)
    assert not verify(toy_params, pk, replace(sig, beta=toy_params.curve.q))
    assert not verify(toy_params, pk, replace(sig, message=toy_params.field.order))


def test_sign_matches_handcomputed_toy_oracle(toy_params, toy_material):
    # alpha = c*P and beta = (m - sk*h(alpha)) / c, all recomputed here
    # with brute-force repeated addition.
    key = derive_private(toy_material, "ORC-0001")
    curve = toy_params.curve
    m, c = 0x0BEE, 29
    sig = sign(toy_params, key.secret, m, QueuedRng([c]))
    alpha = naive_mul(curve, c, curve.generator)
    assert sig.alpha == alpha
    h = toy_params.suite.point_scalar(curve.encode_point(alpha), curve.q)
    beta = (m - key.secret * h) * pow(c, -1, curve.q) % curve.q
    assert sig.beta == beta
    assert sig.message == m
    # the verification identity, by brute force on both sides
    lhs = naive_mul(curve, m % curve.q, curve.generator)
    rhs = naive_add(curve, naive_mul(curve, h, derive_public(toy_params, key.identity)),
                    naive_mul(curve, beta, alpha))
    assert lhs == rhs


def test_forge_matches_handexpanded_toy_oracle(toy_params, toy_material):
    # a = 3, b = 5: alpha = 3P + 5PK, beta = -h(alpha)/5, m = 3*beta.
    curve = toy_params.curve
    pk = derive_public(toy_params, "FRG-0001")
    triple = forge(toy_params, pk, QueuedRng([3, 5]))
    alpha = naive_add(curve, naive_mul(curve, 3, curve.generator), naive_mul(curve, 5, pk))
    assert triple.alpha == alpha
    h = toy_params.suite.point_scalar(curve.encode_point(alpha), curve.q)
    beta = -pow(5, -1, curve.q) * h % curve.q
    assert triple.beta == beta
    assert triple.message == 3 * beta % curve.q
    assert verify(toy_params, pk, triple)


def test_forgeries_always_verify(toy_params, prod_params, rng):
    for params, count in ((toy_params, 40), (prod_params, 6)):
        for i in range(count):
            pk = derive_public(params, f"FRG-{i:04d}")
            assert verify(params, pk, forge(params, pk, rng))


def test_forged_messages_are_uncontrolled(prod_params, rng):
    pk = derive_public(prod_params, "FRG-9999")
    msgs = {forge(prod_params, pk, rng).message for _ in range(8)}
    assert len(msgs) == 8


def test_forge_rejects_infinity_key(toy_params, rng):
    with pytest.raises(ValueError):
        forge(toy_params, None, rng)


def test_variant_blinded_verification(toy_params, toy_material, rng):
    # Key blinded by mu: the signature verifies against PK + D only.
    from echoring.cpk import derive_private_v2

    key = derive_private_v2(toy_material, "VAR-1000", 7)
    pk = derive_public(toy_params, key.identity)
    sig = sign(toy_params, key.secret, 0x7777, rng)
    assert verify(toy_params, pk, sig, d_point=key.variant_point)
    assert not verify(toy_params, pk, sig)


def test_triple_codec_roundtrip(toy_params, prod_params, rng):
    for params in (toy_params, prod_params):
        sk = params.curve.random_scalar(rng)
        sig = sign(params, sk, rng.getrandbits(params.l), rng)
        blob = encode_triple(params, sig)
        assert len(blob) == triple_size(params)
        assert decode_triple(params, blob) == sig
    with pytest.raises(ValueError):
        decode_triple(toy_params, blob)  # production-sized blob, toy widths


def test_triple_codec_validates_beta_range(toy_params, rng):
    sig = sign(toy_params, 5, 0x1111, rng)
    blob = bytearray(encode_triple(toy_params, sig))
    blob[-1] = 0xFF  # beta = 255 > q = 101
    with pytest.raises(ValueError):
        decode_triple(toy_params, bytes(blob))

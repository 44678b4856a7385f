import random

import pytest

from echoring.cpk import (
    MasterKeyMaterial,
    SystemParams,
    _derive_with_randomizer,
    decode_master,
    decode_params,
    derive_private,
    derive_private_v2,
    derive_public,
    encode_master,
    encode_params,
    random_plate,
    setup,
)
from echoring.curve import TOY97


def test_setup_shapes_and_consistency(toy_material):
    params = toy_material.params
    assert len(toy_material.secret_vector) == params.n == len(params.public_vector)
    for x, y in zip(toy_material.secret_vector, params.public_vector):
        assert 1 <= x < params.curve.q
        assert params.curve.mul(x, params.curve.generator) == y


def test_setup_is_deterministic_per_seed():
    m1, _ = setup(16, 77, curve="toy97", l=16, hash_suite="sha256-trunc")
    m2, _ = setup(16, 77, curve="toy97", l=16, hash_suite="sha256-trunc")
    m3, _ = setup(16, 78, curve="toy97", l=16, hash_suite="sha256-trunc")
    assert m1.secret_vector == m2.secret_vector
    assert m1.params.public_vector == m2.params.public_vector
    assert m1.secret_vector != m3.secret_vector


def test_setup_rejects_mismatched_n():
    with pytest.raises(ValueError):
        setup(128, 1)  # sha256 suite pins the identity digest at 256 bits


def test_cpk_linearity_toy(toy_material):
    params = toy_material.params
    g = params.curve.generator
    for i in range(20):
        identity = f"CAR-{i:04d}"
        key = derive_private(toy_material, identity)
        assert params.curve.mul(key.secret, g) == derive_public(params, identity)


def test_cpk_linearity_production(prod_material):
    params = prod_material.params
    g = params.curve.generator
    for i in range(3):
        identity = f"PROD-{i}"
        key = derive_private(prod_material, identity)
        assert params.curve.mul(key.secret, g) == derive_public(params, identity)


def test_zero_identity_hash_gives_zero_key():
    material, params = setup(16, 5, curve="toy97", l=16, hash_suite="zero-id")
    key = derive_private(material, "WHATEVER")
    assert key.secret == 0
    assert derive_public(params, "WHATEVER") is None  # point at infinity


def test_derive_private_against_straightline_oracle(prod_material):
    identity = "TEST-001"
    params = prod_material.params
    digest = params.suite.identity_bits(identity, params.n)
    acc = 0  # plain big-int accumulation, one final reduction
    for i in range(params.n):
        bit = (digest >> (params.n - 1 - i)) & 1
        acc += bit * prod_material.secret_vector[i]
    assert derive_private(prod_material, identity).secret == acc % params.curve.q


def test_derive_public_against_pointwise_oracle(toy_material):
    params = toy_material.params
    identity = "ORACLE-7"
    digest = params.suite.identity_bits(identity, params.n)
    acc = None
    for i in range(params.n):
        if (digest >> (params.n - 1 - i)) & 1:
            acc = params.curve.add(acc, params.public_vector[i])
    assert derive_public(params, identity) == acc


def test_derive_public_needs_no_secret_data(toy_material):
    # Round-tripping through the parameter file drops the secret vector
    # entirely; derivation must agree with the authority's view.
    params = toy_material.params
    public_only = decode_params(encode_params(params))
    for i in range(5):
        identity = random_plate(random.Random(i))
        assert derive_public(public_only, identity) == derive_public(params, identity)


def test_public_keys_collision_free_over_many_ids(prod_params):
    rng = random.Random(2024)
    seen = set()
    for _ in range(1000):
        pk = derive_public(prod_params, random_plate(rng))
        assert pk is not None
        seen.add(pk)
    assert len(seen) == 1000


def test_variant_key_verification_identity(toy_material):
    params = toy_material.params
    g = params.curve.generator
    for seed in range(5):
        key = derive_private_v2(toy_material, "VAR-0001", seed)
        assert key.variant_point is not None
        expected = params.curve.add(derive_public(params, "VAR-0001"), key.variant_point)
        assert params.curve.mul(key.secret, g) == expected


def test_variant_zero_randomizer_degenerates_to_basic(toy_material):
    base = derive_private(toy_material, "VAR-0002")
    degenerate = _derive_with_randomizer(toy_material, "VAR-0002", 0)
    assert degenerate.secret == base.secret
    assert degenerate.variant_point is None  # 0 * P is the point at infinity


def test_variant_keys_differ_across_seeds(toy_material):
    k1 = derive_private_v2(toy_material, "VAR-0003", 1)
    k2 = derive_private_v2(toy_material, "VAR-0003", 2)
    assert k1.secret != k2.secret
    assert k1.variant_point != k2.variant_point


def test_params_roundtrip(toy_params, prod_params):
    for params in (toy_params, prod_params):
        blob = encode_params(params)
        back = decode_params(blob)
        assert back.curve is params.curve
        assert back.n == params.n
        assert back.l == params.l
        assert back.hash_suite == params.hash_suite
        assert back.cipher == params.cipher
        assert back.public_vector == params.public_vector


def test_params_decode_rejects_corruption(toy_params):
    blob = encode_params(toy_params)
    with pytest.raises(ValueError):
        decode_params(blob[:-1])
    with pytest.raises(ValueError):
        decode_params(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        decode_params(blob[:4] + b"\x09" + blob[5:])
    with pytest.raises(ValueError):
        decode_params(blob + b"\x00")


def test_master_roundtrip(toy_material):
    blob = encode_master(toy_material)
    back = decode_master(blob, toy_material.params)
    assert back.secret_vector == toy_material.secret_vector
    with pytest.raises(ValueError):
        decode_master(blob[:-1], toy_material.params)
    with pytest.raises(ValueError):
        decode_master(b"YYYY" + blob[4:], toy_material.params)


def test_vector_length_validation(toy_params):
    with pytest.raises(ValueError):
        SystemParams(TOY97, 4, 16, "sha256-trunc", "feistel-aes4", [None] * 3)
    with pytest.raises(ValueError):
        MasterKeyMaterial(toy_params, [1, 2, 3])


def test_random_plate_shape():
    rng = random.Random(1)
    for _ in range(50):
        plate = random_plate(rng)
        letters, digits = plate.split("-")
        assert len(letters) == 3 and letters.isalpha() and letters.isupper()
        assert len(digits) == 4 and digits.isdigit()

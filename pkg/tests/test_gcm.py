import random

from findmy_verif.concrete import ConcreteProvider, ctr_apply, gcm_open, gcm_seal

# NIST SP 800-38D example vectors for AES-128-GCM, published long before this
# code existed.
NIST_KEY = bytes(16)
NIST_IV = bytes(12)
NIST_TC1_TAG = "58e2fccefa7e3061367f1d57a4e7455a"  # empty plaintext, no aad
NIST_TC2_PT = bytes(16)
NIST_TC2_CT = "0388dace60b6a392f328c2b971b2fe78"
NIST_TC2_TAG = "ab6e47d42cec13bdf53a67b21257bddf"


def test_nist_empty_plaintext():
    out = gcm_seal(NIST_KEY, NIST_IV, b"", b"")
    assert out.hex() == NIST_TC1_TAG


def test_nist_single_block():
    out = gcm_seal(NIST_KEY, NIST_IV, NIST_TC2_PT, b"")
    assert out.hex() == NIST_TC2_CT + NIST_TC2_TAG
    assert gcm_open(NIST_KEY, NIST_IV, out, b"") == NIST_TC2_PT


def test_round_trip_random_payload():
    rng = random.Random(11)
    key, iv = rng.randbytes(16), rng.randbytes(16)
    pt = rng.randbytes(64)
    prov = ConcreteProvider(seed=0)
    ct = prov.aead_seal(key, pt, iv)
    assert prov.aead_open(key, ct, iv) == pt


def test_tag_flip_fails():
    prov = ConcreteProvider(seed=0)
    key, iv = bytes(16), bytes(16)
    ct = bytearray(prov.aead_seal(key, b"payload", iv))
    ct[-1] ^= 0x01
    assert prov.aead_open(key, bytes(ct), iv) is None


def test_ciphertext_flip_fails():
    prov = ConcreteProvider(seed=0)
    key, iv = bytes(16), bytes(16)
    ct = bytearray(prov.aead_seal(key, b"payload", iv))
    ct[0] ^= 0x80
    assert prov.aead_open(key, bytes(ct), iv) is None


def test_associated_data_mismatch_fails():
    prov = ConcreteProvider(seed=0)
    key = bytes(16)
    iv = bytes(15) + b"\x01"
    other_iv = bytes(15) + b"\x02"
    ct = prov.aead_seal(key, b"payload", iv)
    assert prov.aead_open(key, ct, other_iv) is None


def test_iv_is_bound_as_associated_data():
    # same first 12 bytes (the GCM nonce), different tail: only the
    # associated-data binding can catch the difference
    prov = ConcreteProvider(seed=0)
    key = bytes(16)
    iv_a = bytes(12) + b"\x00\x00\x00\x01"
    iv_b = bytes(12) + b"\x00\x00\x00\x02"
    ct = prov.aead_seal(key, b"payload", iv_a)
    assert prov.aead_open(key, ct, iv_b) is None
    assert prov.aead_open(key, ct, iv_a) == b"payload"


def test_inner_layer_inverts():
    key = bytes(range(16))
    data = b"location-plaintext"
    assert ctr_apply(key, ctr_apply(key, data)) == data

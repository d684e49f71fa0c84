"""Byte-exact crypto backend: P-224, X9.63-SHA256, AES-GCM.

The AEAD plaintext is the inner location ciphertext and the sighting
timestamp, length-prefixed so the owner can split them back apart.  GCM takes
a 12-byte nonce, so the first 12 bytes of the 16-byte IV serve as the nonce
while the full IV is bound as associated data.  The inner layer (the
symmetric encryption nested inside the AEAD) is AES-128-CTR with a zero
counter block; its key is fresh per report and the outer AEAD carries all
integrity.
"""

from __future__ import annotations

import random
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import kdf, p224
from .providers import CryptoProvider

TIMESTAMP_BYTES = 8
PAYLOAD_BYTES = 16


def gcm_seal(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes) -> bytes:
    """Ciphertext with the 16-byte tag appended."""
    return AESGCM(key).encrypt(nonce, plaintext, aad)


def gcm_open(key: bytes, nonce: bytes, ciphertext: bytes, aad: bytes) -> Optional[bytes]:
    try:
        return AESGCM(key).decrypt(nonce, ciphertext, aad)
    except InvalidTag:
        return None


def ctr_apply(key: bytes, data: bytes) -> bytes:
    # Zero counter block; safe because each key encrypts exactly one message.
    cipher = Cipher(algorithms.AES(key), modes.CTR(b"\x00" * 16))
    enc = cipher.encryptor()
    return enc.update(data) + enc.finalize()


class ConcreteProvider(CryptoProvider):
    """All randomness comes from the seeded generator, so a fixed seed fixes
    the whole transcript."""

    def __init__(self, rng: random.Random | None = None, seed: int | None = None):
        if rng is None:
            rng = random.Random(seed)
        self.rng = rng

    def checkpoint(self):
        return self.rng.getstate()

    def restore(self, token) -> None:
        self.rng.setstate(token)

    def fresh_secret(self, label: str) -> int:
        return self.rng.randrange(1, p224.N)

    def fresh_symkey(self, label: str) -> bytes:
        return self.rng.randbytes(kdf.SK_BYTES)

    def fresh_payload(self, label: str) -> bytes:
        return self.rng.randbytes(PAYLOAD_BYTES)

    def fresh_timestamp(self) -> bytes:
        return self.rng.randrange(0, 2**32).to_bytes(TIMESTAMP_BYTES, "big")

    def pub_of(self, secret: int) -> bytes:
        return p224.public_key(secret)

    def sk_next(self, sk_prev: bytes) -> bytes:
        return kdf.sk_next_bytes(sk_prev)

    def d_next(self, d0: int, sk_i: bytes) -> int:
        return kdf.d_next_scalar(d0, sk_i)

    def ecdh(self, secret: int, peer: bytes) -> bytes:
        return p224.ecdh(secret, peer)

    def key_of(self, shared: bytes, beacon_pub: bytes) -> bytes:
        return kdf.key_iv_split(shared, beacon_pub)[0]

    def iv_of(self, shared: bytes, beacon_pub: bytes) -> bytes:
        return kdf.key_iv_split(shared, beacon_pub)[1]

    def aead_seal(self, key: bytes, plain: bytes, iv: bytes) -> bytes:
        return gcm_seal(key, iv[:12], plain, iv)

    def aead_open(self, key: bytes, cipher: bytes, iv: bytes) -> Optional[bytes]:
        return gcm_open(key, iv[:12], cipher, iv)

    def sym_seal(self, plain: bytes, key: bytes) -> bytes:
        return ctr_apply(key, plain)

    def sym_open(self, cipher: bytes, key: bytes) -> Optional[bytes]:
        return ctr_apply(key, cipher)

    def digest(self, beacon_pub: bytes) -> bytes:
        return kdf.report_id(beacon_pub)

    def wrap_payload(self, inner: bytes, timestamp: bytes) -> bytes:
        if len(timestamp) != TIMESTAMP_BYTES:
            raise ValueError(f"timestamp must be {TIMESTAMP_BYTES} bytes")
        return len(inner).to_bytes(4, "big") + inner + timestamp

    def unwrap_payload(self, plain: bytes) -> Optional[tuple[bytes, bytes]]:
        if len(plain) < 4:
            return None
        inner_len = int.from_bytes(plain[:4], "big")
        if len(plain) != 4 + inner_len + TIMESTAMP_BYTES:
            return None
        return plain[4 : 4 + inner_len], plain[4 + inner_len :]

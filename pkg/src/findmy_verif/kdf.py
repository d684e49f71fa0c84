"""ANSI X9.63 key derivation with SHA-256, and the rolling key schedule.

One KDF, two modes: "update" advances the 32-byte symmetric key each epoch,
"diversify" expands the new symmetric key into two 36-byte anti-tracking
scalars u and v, from which the epoch's private key is d_i = d0*u_i + v_i
over the curve order.
"""

from __future__ import annotations

import hashlib

from .p224 import N, check_scalar

SK_BYTES = 32
DIVERSIFY_BYTES = 72  # 36 for u plus 36 for v


def x963_kdf(secret: bytes, shared_info: bytes, out_len: int) -> bytes:
    """SHA-256(secret || counter_32be || shared_info) blocks, counter from 1,
    truncated to out_len."""
    if out_len < 1:
        raise ValueError("out_len must be at least 1")
    out = b""
    counter = 1
    while len(out) < out_len:
        out += hashlib.sha256(
            secret + counter.to_bytes(4, "big") + shared_info
        ).digest()
        counter += 1
    return out[:out_len]


def sk_next_bytes(sk_prev: bytes) -> bytes:
    if len(sk_prev) != SK_BYTES:
        raise ValueError(f"symmetric key must be {SK_BYTES} bytes")
    return x963_kdf(sk_prev, b"update", SK_BYTES)


def diversify_scalars(sk_i: bytes) -> tuple[int, int]:
    """(u_i, v_i) from the diversify expansion, reduced into the scalar
    range.  u_i is forced nonzero so d0's contribution never vanishes."""
    raw = x963_kdf(sk_i, b"diversify", DIVERSIFY_BYTES)
    u = int.from_bytes(raw[:36], "big") % (N - 1) + 1
    v = int.from_bytes(raw[36:], "big") % N
    return u, v


def d_next_scalar(d0: int, sk_i: bytes) -> int:
    check_scalar(d0)
    sk = sk_i
    while True:
        u, v = diversify_scalars(sk)
        d = (d0 * u + v) % N
        if d != 0:
            return d
        # d == 0 happens with probability ~2^-224; re-roll deterministically
        # from the next key in the update chain rather than aborting.
        sk = sk_next_bytes(sk)


def key_iv_split(shared: bytes, beacon_pub: bytes) -> tuple[bytes, bytes]:
    """First 16 bytes of the expansion are the AEAD key, next 16 the IV."""
    if not shared or not beacon_pub:
        raise ValueError("shared secret and beacon encoding must be non-empty")
    okm = x963_kdf(shared, beacon_pub, 32)
    return okm[:16], okm[16:]


def report_id(beacon_pub: bytes) -> bytes:
    """SHA-256 of the exact beacon payload encoding."""
    return hashlib.sha256(beacon_pub).digest()

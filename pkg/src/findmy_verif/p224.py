"""NIST P-224 arithmetic over affine coordinates.

Plain big-integer implementation, written for auditability rather than speed
and making no constant-time claims.  Points are (x, y) tuples; None is the
point at infinity.  Public keys travel as uncompressed encodings
(0x04 || X || Y, 57 bytes), which is also the canonical beacon payload fed to
the report hash and the KDF shared info.
"""

from __future__ import annotations

# FIPS 186-3 domain parameters, a = -3 mod p.
P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFF000000000000000000000001
A = P - 3
B = 0xB4050A850C04B3ABF54132565044B0B7D7BFD8BA270B39432355FFB4
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFF16A2E0B8F03E13DD29455C5C2A3D
GX = 0xB70E0CBD6BB4BF7F321390B94A03C1D356C21122343280D6115C1D21
GY = 0xBD376388B5F723FB4C22DFE6CD4375A05A07476444D5819985007E34
G = (GX, GY)

COORD_BYTES = 28
POINT_BYTES = 1 + 2 * COORD_BYTES

Point = tuple[int, int] | None


class InvalidPointError(ValueError):
    """Encoded point is off-curve, malformed, or the point at infinity."""


class InvalidScalarError(ValueError):
    """Scalar outside [1, n-1]."""


def is_on_curve(point: Point) -> bool:
    if point is None:
        return True
    x, y = point
    if not (0 <= x < P and 0 <= y < P):
        return False
    return (y * y - (x * x * x + A * x + B)) % P == 0


def point_add(p1: Point, p2: Point) -> Point:
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % P == 0:
            return None
        lam = (3 * x1 * x1 + A) * pow(2 * y1, -1, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    y3 = (lam * (x1 - x3) - y1) % P
    return (x3, y3)


def scalar_mult(k: int, point: Point) -> Point:
    if point is None:
        return None
    k %= N
    result: Point = None
    addend = point
    while k:
        if k & 1:
            result = point_add(result, addend)
        addend = point_add(addend, addend)
        k >>= 1
    return result


def check_scalar(d: int) -> int:
    if not isinstance(d, int) or not 1 <= d <= N - 1:
        raise InvalidScalarError("scalar out of range [1, n-1]")
    return d


def encode_point(point: Point) -> bytes:
    if point is None:
        raise InvalidPointError("cannot encode the point at infinity")
    x, y = point
    return b"\x04" + x.to_bytes(COORD_BYTES, "big") + y.to_bytes(COORD_BYTES, "big")


def decode_point(data: bytes) -> tuple[int, int]:
    if len(data) != POINT_BYTES or data[0] != 0x04:
        raise InvalidPointError("expected 57-byte uncompressed point")
    x = int.from_bytes(data[1 : 1 + COORD_BYTES], "big")
    y = int.from_bytes(data[1 + COORD_BYTES :], "big")
    point = (x, y)
    if not is_on_curve(point):
        raise InvalidPointError("point is not on the curve")
    return point


def public_key(d: int) -> bytes:
    return encode_point(scalar_mult(check_scalar(d), G))


def ecdh(secret: int, peer_encoded: bytes) -> bytes:
    """x-coordinate of secret * peer, fixed width 28 bytes."""
    check_scalar(secret)
    peer = decode_point(peer_encoded)
    shared = scalar_mult(secret, peer)
    if shared is None:
        raise InvalidPointError("shared point is the point at infinity")
    return shared[0].to_bytes(COORD_BYTES, "big")

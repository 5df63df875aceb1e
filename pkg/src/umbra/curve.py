"""secp256k1 group arithmetic.

Pure-Python Jacobian-coordinate implementation shared by the signing and
attribute-encryption layers. Points are affine (x, y) int tuples at the
API boundary; None is the point at infinity.
"""

from __future__ import annotations

from .errors import InvalidKey

# Field prime, group order, and base point of secp256k1.
P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8
G = (GX, GY)

Point = "tuple[int, int] | None"


def is_on_curve(point: tuple[int, int] | None) -> bool:
    if point is None:
        return True
    x, y = point
    if not (0 <= x < P and 0 <= y < P):
        return False
    return (y * y - x * x * x - 7) % P == 0


# Jacobian coordinates (X, Y, Z) represent affine (X/Z^2, Y/Z^3).
# Infinity is Z == 0.

def _to_jacobian(point):
    if point is None:
        return (0, 1, 0)
    return (point[0], point[1], 1)


def _from_jacobian(jp):
    x, y, z = jp
    if z == 0:
        return None
    zinv = pow(z, P - 2, P)
    zinv2 = zinv * zinv % P
    return (x * zinv2 % P, y * zinv2 * zinv % P)


def _jdouble(jp):
    x, y, z = jp
    if z == 0 or y == 0:
        return (0, 1, 0)
    s = 4 * x * y * y % P
    m = 3 * x * x % P  # curve a == 0
    x3 = (m * m - 2 * s) % P
    y3 = (m * (s - x3) - 8 * pow(y, 4, P)) % P
    z3 = 2 * y * z % P
    return (x3, y3, z3)


def _jadd(jp, jq):
    if jp[2] == 0:
        return jq
    if jq[2] == 0:
        return jp
    x1, y1, z1 = jp
    x2, y2, z2 = jq
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2z2 * z2 % P
    s2 = y2 * z1z1 * z1 % P
    if u1 == u2:
        if s1 != s2:
            return (0, 1, 0)
        return _jdouble(jp)
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    h2 = h * h % P
    h3 = h2 * h % P
    x3 = (r * r - h3 - 2 * u1 * h2) % P
    y3 = (r * (u1 * h2 - x3) - s1 * h3) % P
    z3 = h * z1 * z2 % P
    return (x3, y3, z3)


def point_add(p1, p2):
    """Add two affine points (or None for infinity)."""
    return _from_jacobian(_jadd(_to_jacobian(p1), _to_jacobian(p2)))


def scalar_mult(k: int, point: tuple[int, int] | None = None):
    """Return k * point in affine form; point defaults to the generator."""
    if point is None:
        point = G
    k %= N
    if k == 0 or point is None:
        return None
    acc = (0, 1, 0)
    jp = _to_jacobian(point)
    while k:
        if k & 1:
            acc = _jadd(acc, jp)
        jp = _jdouble(jp)
        k >>= 1
    return _from_jacobian(acc)


def encode_point(point: tuple[int, int], compressed: bool = True) -> bytes:
    """Serialize an affine point; 33-byte SEC1 compressed or raw 64-byte x||y."""
    if point is None:
        raise InvalidKey("cannot encode the point at infinity")
    x, y = point
    if compressed:
        return bytes([2 + (y & 1)]) + x.to_bytes(32, "big")
    return x.to_bytes(32, "big") + y.to_bytes(32, "big")


def decode_point(data: bytes) -> tuple[int, int]:
    """Parse a 33-byte compressed or 64-byte raw point; validates curve membership."""
    if len(data) == 33 and data[0] in (2, 3):
        x = int.from_bytes(data[1:], "big")
        if x >= P:
            raise InvalidKey("point x coordinate out of range")
        y2 = (pow(x, 3, P) + 7) % P
        y = pow(y2, (P + 1) // 4, P)
        if y * y % P != y2:
            raise InvalidKey("point not on curve")
        if (y & 1) != (data[0] & 1):
            y = P - y
        return (x, y)
    if len(data) == 64:
        point = (int.from_bytes(data[:32], "big"), int.from_bytes(data[32:], "big"))
        if not is_on_curve(point) or point[1] == 0:
            raise InvalidKey("point not on curve")
        return point
    raise InvalidKey(f"cannot decode point from {len(data)} bytes")

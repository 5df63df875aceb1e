"""Threshold secret sharing over prime fields.

Single field elements are shared with classic polynomial splitting. 256-bit
key material does not fit one 64-bit field element, so it is encoded as five
base-(2^64 - 59) digits (each digit < modulus by construction) and every
digit is shared independently at the same evaluation index.

Share file layout (fixed, little-endian): index as u16, modulus id as u8,
then the value as consecutive 8-byte limbs (one limb per shared digit).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from random import Random
from typing import Iterable, Sequence

from .crypto import rand_bytes
from .errors import (
    DuplicateShare,
    InsufficientShares,
    InvalidThreshold,
    MismatchedShares,
    OutOfRange,
)

PRIME_64 = 2**64 - 59
MASTER_DIGITS = 5  # ceil(256 bits / log2(PRIME_64)) with headroom

# Registry backing the share-file modulus id byte.
MODULUS_IDS = {1: PRIME_64, 2: 257}
_MODULUS_TO_ID = {m: i for i, m in MODULUS_IDS.items()}

MAX_SHARES = 0xFFFF  # index is a u16


@dataclass(frozen=True)
class SecretShare:
    """One evaluation point of the sharing polynomial(s).

    ``values`` holds one field element per shared digit; plain
    single-element sharings use a 1-tuple.
    """

    index: int
    values: tuple[int, ...]
    modulus: int
    threshold: int
    total: int

    @property
    def value(self) -> int:
        return self.values[0]


def _check_params(total: int, threshold: int) -> None:
    if total < 1 or total > MAX_SHARES:
        raise InvalidThreshold(f"share count {total} outside [1, {MAX_SHARES}]")
    if threshold < 1 or threshold > total:
        raise InvalidThreshold(f"threshold {threshold} outside [1, {total}]")


def _rand_element(rng: Random | None, modulus: int) -> int:
    # 16 extra bytes of draw keep the modular bias negligible
    width = (modulus.bit_length() + 7) // 8 + 16
    return int.from_bytes(rand_bytes(rng, width), "big") % modulus


def _eval_poly(coeffs: Sequence[int], x: int, modulus: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % modulus
    return acc


def split_secret(
    secret: int,
    total: int,
    threshold: int,
    modulus: int = PRIME_64,
    *,
    rng: Random | None = None,
    coefficients: Sequence[int] | None = None,
) -> list[SecretShare]:
    """Split one field element into ``total`` shares, any ``threshold`` of
    which reconstruct it.

    ``coefficients`` fixes the threshold-1 non-constant polynomial
    coefficients for reproducible vectors; normally they are drawn fresh.
    """
    _check_params(total, threshold)
    if not (0 <= secret < modulus):
        raise OutOfRange(f"secret not in [0, {modulus})")
    if coefficients is None:
        coefficients = [_rand_element(rng, modulus) for _ in range(threshold - 1)]
    else:
        coefficients = list(coefficients)
        if len(coefficients) != threshold - 1:
            raise InvalidThreshold("need exactly threshold-1 coefficients")
        for c in coefficients:
            if not (0 <= c < modulus):
                raise OutOfRange("coefficient outside the field")
    poly = [secret, *coefficients]
    return [
        SecretShare(x, (_eval_poly(poly, x, modulus),), modulus, threshold, total)
        for x in range(1, total + 1)
    ]


def interpolate_at_zero(points: Sequence[tuple[int, int]], modulus: int) -> int:
    """Lagrange interpolation of the constant term from (x, y) points."""
    acc = 0
    for i, (xi, yi) in enumerate(points):
        num, den = 1, 1
        for j, (xj, _) in enumerate(points):
            if i == j:
                continue
            num = num * (-xj) % modulus
            den = den * (xi - xj) % modulus
        acc = (acc + yi * num * pow(den, -1, modulus)) % modulus
    return acc


def _validate_group(shares: Sequence[SecretShare]) -> None:
    if not shares:
        raise InsufficientShares("no shares supplied")
    first = shares[0]
    for s in shares[1:]:
        if (
            s.modulus != first.modulus
            or s.threshold != first.threshold
            or s.total != first.total
            or len(s.values) != len(first.values)
        ):
            raise MismatchedShares("shares disagree on sharing metadata")
    seen = set()
    for s in shares:
        if s.index in seen:
            raise DuplicateShare(f"index {s.index} supplied twice")
        seen.add(s.index)
    if len(shares) < first.threshold:
        raise InsufficientShares(
            f"{len(shares)} shares < threshold {first.threshold}"
        )


def reconstruct_secret(shares: Sequence[SecretShare]) -> int:
    """Recover a single-element secret from at least ``threshold`` shares."""
    _validate_group(shares)
    chosen = sorted(shares, key=lambda s: s.index)[: shares[0].threshold]
    return interpolate_at_zero([(s.index, s.value) for s in chosen], shares[0].modulus)


# --- 256-bit key material ---

def _encode_digits(material: bytes) -> list[int]:
    value = int.from_bytes(material, "big")
    digits = []
    for _ in range(MASTER_DIGITS):
        value, digit = divmod(value, PRIME_64)
        digits.append(digit)
    if value:
        raise OutOfRange("key material exceeds the digit encoding range")
    return digits


def _decode_digits(digits: Sequence[int]) -> bytes:
    value = 0
    for digit in reversed(digits):
        value = value * PRIME_64 + digit
    return value.to_bytes(32, "big")


def split_key_material(
    material: bytes,
    total: int,
    threshold: int,
    *,
    rng: Random | None = None,
) -> list[SecretShare]:
    """Split 32 bytes of key material into multi-digit shares."""
    if len(material) != 32:
        raise OutOfRange("key material must be 32 bytes")
    _check_params(total, threshold)
    per_digit = [
        split_secret(d, total, threshold, PRIME_64, rng=rng)
        for d in _encode_digits(material)
    ]
    return [
        SecretShare(
            x,
            tuple(per_digit[d][x - 1].value for d in range(MASTER_DIGITS)),
            PRIME_64,
            threshold,
            total,
        )
        for x in range(1, total + 1)
    ]


def recombine_key_material(shares: Sequence[SecretShare]) -> bytes:
    """Inverse of split_key_material, given at least ``threshold`` shares."""
    _validate_group(shares)
    if len(shares[0].values) != MASTER_DIGITS:
        raise MismatchedShares(
            f"expected {MASTER_DIGITS}-digit shares, got {len(shares[0].values)}"
        )
    chosen = sorted(shares, key=lambda s: s.index)[: shares[0].threshold]
    digits = [
        interpolate_at_zero([(s.index, s.values[d]) for s in chosen], PRIME_64)
        for d in range(MASTER_DIGITS)
    ]
    return _decode_digits(digits)


# --- share file wire format ---

def share_to_bytes(share: SecretShare) -> bytes:
    """Serialize to the fixed share-file layout."""
    mod_id = _MODULUS_TO_ID.get(share.modulus)
    if mod_id is None:
        raise OutOfRange(f"modulus {share.modulus} has no registered file id")
    body = struct.pack("<HB", share.index, mod_id)
    for v in share.values:
        body += v.to_bytes(8, "little")
    return body


def share_from_bytes(data: bytes, threshold: int, total: int) -> SecretShare:
    """Parse a share file; threshold/total come from the caller's context
    (the file carries only index, modulus id, and the limbs)."""
    if len(data) < 3 or (len(data) - 3) % 8 != 0 or len(data) == 3:
        raise OutOfRange(f"share file has invalid length {len(data)}")
    index, mod_id = struct.unpack_from("<HB", data)
    modulus = MODULUS_IDS.get(mod_id)
    if modulus is None:
        raise OutOfRange(f"unknown modulus id {mod_id}")
    if index < 1:
        raise OutOfRange("share index must be positive")
    values = []
    for off in range(3, len(data), 8):
        v = int.from_bytes(data[off : off + 8], "little")
        if v >= modulus:
            raise OutOfRange("share limb not reduced modulo the field prime")
        values.append(v)
    _check_params(total, threshold)
    return SecretShare(index, tuple(values), modulus, threshold, total)


def shares_for_indices(shares: Iterable[SecretShare], indices: Iterable[int]) -> list[SecretShare]:
    """Convenience selector used by reconstruction flows and tests."""
    wanted = set(indices)
    return [s for s in shares if s.index in wanted]

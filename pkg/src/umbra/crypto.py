"""Core cryptographic operations: key pairs, deterministic ECDSA signatures,
digests, the payload key derivation, and authenticated encryption.

Randomized operations accept an optional ``rng`` (a seeded ``random.Random``)
for reproducible test runs; when omitted they draw from the OS entropy
source. Seeded mode is for simulation and tests only, it is not a CSPRNG.

Signing is deterministic (derived-nonce ECDSA over secp256k1), which keeps
chain logs byte-identical across replays of the same seeded run.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass
from random import Random

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCMSIV
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from . import curve
from .errors import IntegrityError, InvalidKey, InvalidSeed, InvalidSignature

DIGEST_NAME = "sha3-256"
DIGEST_SIZE = 32
WALLET_SIZE = 20
KEY_SIZE = 32
KDF_NONCE_SIZE = 16
AEAD_NONCE_SIZE = 12
DEFAULT_KDF_COST = 15  # scrypt work factor exponent

_AEAD_OVERHEAD = AEAD_NONCE_SIZE + 16  # nonce plus tag


def rand_bytes(rng: Random | None, n: int) -> bytes:
    """n bytes from the seeded rng, or from the OS when rng is None."""
    if rng is None:
        return os.urandom(n)
    return rng.randbytes(n)


def rand_scalar(rng: Random | None, order: int) -> int:
    """Uniform-enough scalar in [1, order-1] for simulation purposes."""
    return int.from_bytes(rand_bytes(rng, 32), "big") % (order - 1) + 1


def hash_bytes(data: bytes) -> bytes:
    """The deployment digest (32 bytes)."""
    return hashlib.sha3_256(data).digest()


@dataclass(frozen=True)
class KeyPair:
    """An account key pair: signing scalar, public point, wallet address.

    The wallet address is the trailing 20 bytes of the digest of the raw
    64-byte public key encoding.
    """

    secret_key: bytes
    public_key: bytes
    wallet_address: bytes

    @classmethod
    def from_secret(cls, secret_key: bytes) -> "KeyPair":
        if len(secret_key) != KEY_SIZE:
            raise InvalidKey("secret key must be 32 bytes")
        scalar = int.from_bytes(secret_key, "big")
        if not (1 <= scalar < curve.N):
            raise InvalidKey("secret scalar out of range")
        public = curve.encode_point(curve.scalar_mult(scalar), compressed=False)
        return cls(secret_key, public, wallet_address(public))

    @property
    def wallet_hex(self) -> str:
        return self.wallet_address.hex()


def keygen(seed: bytes | None = None, *, rng: Random | None = None) -> KeyPair:
    """Derive a key pair from a 32-byte seed, or draw one from rng/OS.

    The same seed always yields the same pair. Raises InvalidSeed for a
    seed of the wrong length.
    """
    if seed is None:
        seed = rand_bytes(rng, KEY_SIZE)
    if len(seed) != KEY_SIZE:
        raise InvalidSeed(f"seed must be {KEY_SIZE} bytes, got {len(seed)}")
    scalar = int.from_bytes(seed, "big") % (curve.N - 1) + 1
    return KeyPair.from_secret(scalar.to_bytes(KEY_SIZE, "big"))


def wallet_address(public_key: bytes) -> bytes:
    """Trailing 20 bytes of the digest of the 64-byte public key encoding."""
    point = curve.decode_point(public_key)
    if len(public_key) != 64:
        public_key = curve.encode_point(point, compressed=False)
    return hash_bytes(public_key)[-WALLET_SIZE:]


def _bits2int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def _derive_nonce(secret_scalar: int, digest: bytes) -> int:
    """Deterministic per-message signing nonce (HMAC drbg construction)."""
    x = secret_scalar.to_bytes(32, "big")
    h = digest
    v = b"\x01" * 32
    k = b"\x00" * 32
    mac = lambda key, msg: hmac.new(key, msg, hashlib.sha3_256).digest()
    k = mac(k, v + b"\x00" + x + h)
    v = mac(k, v)
    k = mac(k, v + b"\x01" + x + h)
    v = mac(k, v)
    while True:
        v = mac(k, v)
        candidate = _bits2int(v)
        if 1 <= candidate < curve.N:
            return candidate
        k = mac(k, v + b"\x00")
        v = mac(k, v)


def sign(secret_key: bytes, message: bytes) -> bytes:
    """Sign a message; returns the 64-byte r||s encoding (low-s form)."""
    if len(secret_key) != KEY_SIZE:
        raise InvalidKey("secret key must be 32 bytes")
    d = int.from_bytes(secret_key, "big")
    if not (1 <= d < curve.N):
        raise InvalidKey("secret scalar out of range")
    digest = hash_bytes(message)
    z = _bits2int(digest) % curve.N
    extra = b""
    while True:
        k = _derive_nonce(d, digest + extra)
        point = curve.scalar_mult(k)
        r = point[0] % curve.N
        if r == 0:
            extra += b"\x00"
            continue
        s = pow(k, -1, curve.N) * (z + r * d) % curve.N
        if s == 0:
            extra += b"\x00"
            continue
        if s > curve.N // 2:
            s = curve.N - s
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """Check a 64-byte signature; False for any mismatch.

    Raises InvalidSignature only when the signature is structurally
    malformed (wrong length), never for a merely incorrect one.
    """
    if len(signature) != 64:
        raise InvalidSignature(f"signature must be 64 bytes, got {len(signature)}")
    point = curve.decode_point(public_key)
    r = int.from_bytes(signature[:32], "big")
    s = int.from_bytes(signature[32:], "big")
    if not (1 <= r < curve.N and 1 <= s < curve.N):
        return False
    z = _bits2int(hash_bytes(message)) % curve.N
    sinv = pow(s, -1, curve.N)
    u1 = z * sinv % curve.N
    u2 = r * sinv % curve.N
    candidate = curve.point_add(curve.scalar_mult(u1), curve.scalar_mult(u2, point))
    if candidate is None:
        return False
    return candidate[0] % curve.N == r


def kdf(secret_key: bytes, nonce: bytes, *, cost: int = DEFAULT_KDF_COST) -> bytes:
    """Derive the 32-byte payload key from a secret key and a 16-byte nonce.

    Memory-hard password-hashing derivation; the input keying material is
    the concatenation of the secret and the nonce, the nonce doubles as
    the salt. ``cost`` is the work-factor exponent.
    """
    if len(secret_key) != KEY_SIZE:
        raise InvalidKey("secret key must be 32 bytes")
    if len(nonce) != KDF_NONCE_SIZE:
        raise InvalidKey("kdf nonce must be 16 bytes")
    if not (10 <= cost <= 22):
        raise InvalidKey("kdf cost exponent out of range")
    derivation = Scrypt(salt=nonce, length=KEY_SIZE, n=2**cost, r=8, p=1)
    return derivation.derive(secret_key + nonce)


def aead_encrypt(
    key: bytes,
    plaintext: bytes,
    associated_data: bytes = b"",
    *,
    nonce: bytes | None = None,
    rng: Random | None = None,
) -> bytes:
    """Authenticated encryption; returns nonce || ciphertext-with-tag.

    Misuse-resistant AEAD, so a repeated nonce degrades gracefully, but
    callers still supply a fresh nonce per message (or let one be drawn).
    """
    if len(key) != KEY_SIZE:
        raise InvalidKey("aead key must be 32 bytes")
    if nonce is None:
        nonce = rand_bytes(rng, AEAD_NONCE_SIZE)
    if len(nonce) != AEAD_NONCE_SIZE:
        raise InvalidKey("aead nonce must be 12 bytes")
    return nonce + AESGCMSIV(key).encrypt(nonce, plaintext, associated_data)


def aead_decrypt(key: bytes, blob: bytes, associated_data: bytes = b"") -> bytes:
    """Open an aead_encrypt blob; IntegrityError on any tamper.

    The failure is identical for every tamper position: one exception
    type, one message, no offset information.
    """
    if len(key) != KEY_SIZE:
        raise InvalidKey("aead key must be 32 bytes")
    if len(blob) < _AEAD_OVERHEAD:
        raise IntegrityError("authentication failed")
    try:
        return AESGCMSIV(key).decrypt(blob[:AEAD_NONCE_SIZE], blob[AEAD_NONCE_SIZE:], associated_data)
    except InvalidTag:
        raise IntegrityError("authentication failed") from None

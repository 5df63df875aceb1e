"""Decryptor capsules and the payload metadata record.

A capsule binds everything a consumer-side toolkit needs to unlock one
protected payload: the token binding, the contracts that govern it, the
challenge digest, the payload key wrapped along two independent paths
(policy path for attribute holders, sealed path for owners and payers),
and either the policy ciphertext or the price terms.

Binary capsule layout (all integers little-endian):

    magic "SSPT" | version u8 | mode u8 | 8 sections

each section prefixed by a u32 length, in order: token id (16), token
contract address (20), identity-manager address (20), access terms
(policy ciphertext, or price u64 plus payee 20), challenge digest (32),
policy-wrapped key, sealed key, metadata address (utf-8, may be empty).

Capsules stored on a storage chain are always sealed (authenticated
encryption under the deployment seal key), so their contents are opaque
at rest and any tamper fails closed before key material is touched.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from random import Random

from . import abe
from .crypto import (
    KDF_NONCE_SIZE,
    KeyPair,
    aead_decrypt,
    aead_encrypt,
    hash_bytes,
    kdf,
    rand_bytes,
)
from .errors import EmptyData, IntegrityError
from .policy import PolicyNode

MAGIC = b"SSPT"
VERSION = 1

MODE_FINE = "fine"
MODE_PAYMENT = "payment"
_MODE_BYTES = {MODE_FINE: 1, MODE_PAYMENT: 2}
_MODE_NAMES = {v: k for k, v in _MODE_BYTES.items()}

TOKEN_SIZE = 16

_WRAP_TAG = b"umbra/challenge-wrap"
_POLICY_AAD = b"umbra/policy-path"
_SEAL_AAD = b"umbra/seal-path"
_CAPSULE_AAD = b"umbra/capsule-seal"


@dataclass(frozen=True)
class Metadata:
    """The stored record that links a payload blob to its capsule."""

    data_address: str
    data_digest: bytes
    capsule_address: str
    capsule_digest: bytes
    title: str = ""
    preview: str = ""

    def to_bytes(self) -> bytes:
        doc = {
            "data": self.data_address,
            "data_digest": self.data_digest.hex(),
            "capsule": self.capsule_address,
            "capsule_digest": self.capsule_digest.hex(),
            "title": self.title,
            "preview": self.preview,
        }
        return json.dumps(doc, separators=(",", ":")).encode()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Metadata":
        doc = json.loads(data)
        return cls(
            data_address=doc["data"],
            data_digest=bytes.fromhex(doc["data_digest"]),
            capsule_address=doc["capsule"],
            capsule_digest=bytes.fromhex(doc["capsule_digest"]),
            title=doc.get("title", ""),
            preview=doc.get("preview", ""),
        )


@dataclass(frozen=True)
class Capsule:
    mode: str
    token_id: bytes
    distributor: bytes
    id_manager: bytes
    challenge_digest: bytes
    policy_ciphertext: abe.AbeCiphertext | None
    price: int | None
    payee: bytes | None
    policy_wrapped_key: bytes
    sealed_key: bytes
    metadata_address: str = ""


def _payload_aad(mode: str, challenge_digest: bytes, token_id: bytes) -> bytes:
    return MAGIC + bytes([_MODE_BYTES[mode]]) + challenge_digest + token_id


def encrypt_data(
    data: bytes,
    provider: KeyPair,
    *,
    distributor: bytes,
    id_manager: bytes,
    seal_key: bytes,
    abe_params: abe.AbePublicParams | None = None,
    policy: PolicyNode | None = None,
    price: int | None = None,
    payee: bytes | None = None,
    kdf_cost: int | None = None,
    rng: Random | None = None,
) -> tuple[bytes, Capsule]:
    """Protect a payload; returns (encrypted payload blob, capsule).

    Fine-grained mode takes abe_params and a policy; payment mode takes a
    price and payee. The payload key is derived from the provider's
    secret and a fresh nonce, then wrapped for the applicable access
    paths. A fresh 32-byte challenge secret underlies the policy path;
    only its digest appears in the capsule.
    """
    if len(data) == 0:
        raise EmptyData("refusing to protect an empty payload")
    fine = policy is not None or abe_params is not None
    if fine and (price is not None or payee is not None):
        raise ValueError("cannot mix policy and price terms")
    if fine and (policy is None or abe_params is None):
        raise ValueError("fine-grained mode needs both abe_params and policy")
    if not fine and price is None:
        raise ValueError("payment mode needs a price")
    mode = MODE_FINE if fine else MODE_PAYMENT
    if mode == MODE_PAYMENT:
        if payee is None:
            payee = provider.wallet_address
        if price < 0:
            raise ValueError("price must be non-negative")

    token_id = rand_bytes(rng, TOKEN_SIZE)
    nonce = rand_bytes(rng, KDF_NONCE_SIZE)
    cost_kw = {} if kdf_cost is None else {"cost": kdf_cost}
    payload_key = kdf(provider.secret_key, nonce, **cost_kw)
    challenge = rand_bytes(rng, 32)
    challenge_digest = hash_bytes(challenge)
    aad = _payload_aad(mode, challenge_digest, token_id)
    payload = aead_encrypt(payload_key, data, aad, rng=rng)

    if mode == MODE_FINE:
        ciphertext = abe.encrypt(abe_params, challenge, policy, rng=rng)
        wrap_key = hash_bytes(_WRAP_TAG + challenge)
        policy_wrapped = aead_encrypt(
            wrap_key, payload_key, _POLICY_AAD + challenge_digest, rng=rng
        )
    else:
        ciphertext = None
        policy_wrapped = b""
    sealed = aead_encrypt(seal_key, payload_key, _SEAL_AAD + challenge_digest, rng=rng)

    capsule = Capsule(
        mode=mode,
        token_id=token_id,
        distributor=distributor,
        id_manager=id_manager,
        challenge_digest=challenge_digest,
        policy_ciphertext=ciphertext,
        price=price,
        payee=payee,
        policy_wrapped_key=policy_wrapped,
        sealed_key=sealed,
    )
    return payload, capsule


def open_payload(capsule: Capsule, payload_key: bytes, payload_blob: bytes) -> bytes:
    """Authenticated decryption of the payload under the capsule's binding."""
    aad = _payload_aad(capsule.mode, capsule.challenge_digest, capsule.token_id)
    return aead_decrypt(payload_key, payload_blob, aad)


def unwrap_policy_path(capsule: Capsule, challenge: bytes) -> bytes:
    """Recover the payload key from the recovered challenge secret."""
    if hash_bytes(challenge) != capsule.challenge_digest:
        raise IntegrityError("challenge secret does not match the capsule")
    wrap_key = hash_bytes(_WRAP_TAG + challenge)
    return aead_decrypt(
        wrap_key, capsule.policy_wrapped_key, _POLICY_AAD + capsule.challenge_digest
    )


def unwrap_sealed_path(capsule: Capsule, seal_key: bytes) -> bytes:
    """Recover the payload key along the sealed (owner/payment) path."""
    return aead_decrypt(
        seal_key, capsule.sealed_key, _SEAL_AAD + capsule.challenge_digest
    )


# --- binary wire format ---

def _section(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def capsule_to_bytes(capsule: Capsule) -> bytes:
    if capsule.mode == MODE_FINE:
        access = abe.ciphertext_to_bytes(capsule.policy_ciphertext)
    else:
        access = struct.pack("<Q", capsule.price) + capsule.payee
    out = MAGIC + bytes([VERSION, _MODE_BYTES[capsule.mode]])
    for blob in (
        capsule.token_id,
        capsule.distributor,
        capsule.id_manager,
        access,
        capsule.challenge_digest,
        capsule.policy_wrapped_key,
        capsule.sealed_key,
        capsule.metadata_address.encode(),
    ):
        out += _section(blob)
    return out


def capsule_from_bytes(data: bytes) -> Capsule:
    if len(data) < 6 or data[:4] != MAGIC:
        raise IntegrityError("capsule magic missing")
    version, mode_byte = data[4], data[5]
    if version != VERSION:
        raise IntegrityError(f"unsupported capsule version {version}")
    mode = _MODE_NAMES.get(mode_byte)
    if mode is None:
        raise IntegrityError(f"unknown capsule mode byte {mode_byte}")
    sections = []
    offset = 6
    for _ in range(8):
        if offset + 4 > len(data):
            raise IntegrityError("capsule truncated")
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise IntegrityError("capsule truncated")
        sections.append(data[offset : offset + length])
        offset += length
    if offset != len(data):
        raise IntegrityError("trailing bytes after capsule")
    token_id, distributor, id_manager, access, digest, wrapped, sealed, addr = sections
    if len(token_id) != TOKEN_SIZE or len(distributor) != 20 or len(id_manager) != 20:
        raise IntegrityError("capsule section has the wrong size")
    if len(digest) != 32:
        raise IntegrityError("capsule section has the wrong size")
    if mode == MODE_FINE:
        ciphertext, price, payee = abe.ciphertext_from_bytes(access), None, None
    else:
        if len(access) != 8 + 20:
            raise IntegrityError("capsule section has the wrong size")
        (price,) = struct.unpack_from("<Q", access)
        ciphertext, payee = None, access[8:]
    return Capsule(
        mode=mode,
        token_id=token_id,
        distributor=distributor,
        id_manager=id_manager,
        challenge_digest=digest,
        policy_ciphertext=ciphertext,
        price=price,
        payee=payee,
        policy_wrapped_key=wrapped,
        sealed_key=sealed,
        metadata_address=addr.decode(),
    )


def seal_capsule(capsule: Capsule, seal_key: bytes, *, rng: Random | None = None) -> bytes:
    """Encrypt a capsule for storage; opaque at rest."""
    return aead_encrypt(seal_key, capsule_to_bytes(capsule), _CAPSULE_AAD, rng=rng)


def unseal_capsule(blob: bytes, seal_key: bytes) -> Capsule:
    """Open a sealed capsule; IntegrityError (before parsing) on any tamper."""
    return capsule_from_bytes(aead_decrypt(seal_key, blob, _CAPSULE_AAD))

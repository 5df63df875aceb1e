"""Ciphertext-policy attribute-based encryption of fixed-size challenge
secrets.

Construction sketch: setup fixes an attribute universe and publishes, per
attribute, a commitment T_a = t_a * (alpha * G) on the signing curve.
Encryption shares a KEM scalar down the policy tree (threshold splitting at
every gate, over the 256-bit prime field), then masks each leaf share with a
hash of the Diffie-Hellman point r * T_a, publishing R = r * (alpha * G).
A user key holds t_a offset by a per-user blinding scalar plus a binding
tag over all components, so components are only usable through a key whose
tag verifies.

This is functional access control at API level, not a pairing-based
scheme: it is NOT collusion-resistant (two users pooling raw components
could recover masks for the union of their attributes) and the masking
rests on hashed DH points rather than a reduction. Serialized user keys
carry hashed attribute identifiers, never attribute strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from random import Random
from types import MappingProxyType
from typing import Mapping

from . import curve, policy, shamir
from .crypto import hash_bytes, rand_scalar
from .errors import (
    InvalidAttributeSpace,
    KeyBindingError,
    PolicyNotSatisfied,
    UnknownAttribute,
)
from .policy import ATTRIBUTE_RE, RESERVED, PolicyNode

# KEM shares live in the 256-bit prime field.
FIELD = 2**256 - 189

MAX_ATTRIBUTES = 256

_ID_TAG = b"umbra/attr-id"
_BIND_TAG = b"umbra/key-bind"
_MASK_TAG = b"umbra/leaf-mask"
_CHECK_TAG = b"umbra/share-check"
_PAD_TAG = b"umbra/message-mask"


def attribute_id(attribute: str) -> str:
    """Stable 16-byte hashed identifier standing in for the attribute name."""
    return hash_bytes(_ID_TAG + attribute.encode())[:16].hex()


@dataclass(frozen=True)
class AbePublicParams:
    attribute_space: tuple[str, ...]
    security_bits: int
    generator: bytes  # compressed point alpha * G
    commitments: Mapping[str, bytes]  # attribute -> compressed T_a


@dataclass(frozen=True)
class AbeMasterKey:
    master_scalar: int
    attribute_secrets: Mapping[str, int]
    attribute_space: tuple[str, ...]


@dataclass(frozen=True)
class AbeUserKey:
    """Per-user decryption key.

    ``attributes`` is kept only in memory for convenience; the wire form
    identifies components by hashed attribute id alone and deserializes
    with attributes None.
    """

    components: Mapping[str, int]  # attribute id (hex) -> blinded scalar
    blind: int
    tag: bytes
    attributes: frozenset[str] | None = None


@dataclass(frozen=True)
class AbeCiphertext:
    policy: PolicyNode
    ephemeral: bytes  # compressed point R
    leaf_boxes: tuple[int, ...]  # masked shares in pre-order leaf order
    share_check: bytes
    box: bytes  # masked 32-byte message


def _key_tag(blind: int, components: Mapping[str, int]) -> bytes:
    acc = blind.to_bytes(32, "big")
    for aid in sorted(components):
        acc += bytes.fromhex(aid) + components[aid].to_bytes(32, "big")
    return hash_bytes(_BIND_TAG + acc)


def setup(
    attribute_space: list[str] | tuple[str, ...],
    *,
    security_bits: int = 256,
    rng: Random | None = None,
) -> tuple[AbePublicParams, AbeMasterKey]:
    """Fix the attribute universe and derive public/master key material."""
    space = tuple(attribute_space)
    if not space:
        raise InvalidAttributeSpace("attribute universe is empty")
    if len(space) > MAX_ATTRIBUTES:
        raise InvalidAttributeSpace(f"more than {MAX_ATTRIBUTES} attributes")
    if len(set(space)) != len(space):
        raise InvalidAttributeSpace("duplicate attribute names")
    for name in space:
        if not ATTRIBUTE_RE.match(name) or name in RESERVED:
            raise InvalidAttributeSpace(f"invalid attribute name {name!r}")
    if security_bits != 256:
        raise InvalidAttributeSpace("only the 256-bit field class is supported")
    alpha = rand_scalar(rng, curve.N)
    base = curve.scalar_mult(alpha)
    secrets = {a: rand_scalar(rng, curve.N) for a in space}
    commitments = {
        a: curve.encode_point(curve.scalar_mult(t, base)) for a, t in secrets.items()
    }
    params = AbePublicParams(
        attribute_space=space,
        security_bits=security_bits,
        generator=curve.encode_point(base),
        commitments=MappingProxyType(dict(commitments)),
    )
    master = AbeMasterKey(
        master_scalar=alpha,
        attribute_secrets=MappingProxyType(dict(secrets)),
        attribute_space=space,
    )
    return params, master


def keygen(
    master: AbeMasterKey,
    attributes: set[str] | frozenset[str],
    *,
    rng: Random | None = None,
) -> AbeUserKey:
    """Issue a user key for an attribute subset of the universe."""
    attrs = frozenset(attributes)
    unknown = attrs - set(master.attribute_space)
    if unknown:
        raise UnknownAttribute(f"attributes not in the universe: {sorted(unknown)}")
    blind = rand_scalar(rng, curve.N)
    components = {
        attribute_id(a): (master.attribute_secrets[a] + blind) % curve.N
        for a in attrs
    }
    return AbeUserKey(
        components=MappingProxyType(components),
        blind=blind,
        tag=_key_tag(blind, components),
        attributes=attrs,
    )


def _leaf_mask(shared_point: tuple[int, int], leaf_index: int) -> int:
    raw = hash_bytes(
        _MASK_TAG + curve.encode_point(shared_point) + leaf_index.to_bytes(4, "little")
    )
    return int.from_bytes(raw, "big") % FIELD


def _assign_shares(
    node: PolicyNode, value: int, rng: Random | None, out: list[int]
) -> None:
    # walks leaves in the same pre-order as policy.leaves()
    if node.is_leaf:
        out.append(value)
        return
    pieces = shamir.split_secret(
        value, len(node.children), node.threshold, FIELD, rng=rng
    )
    for child, piece in zip(node.children, pieces):
        _assign_shares(child, piece.value, rng, out)


def encrypt(
    params: AbePublicParams,
    message: bytes,
    tree: PolicyNode,
    *,
    rng: Random | None = None,
) -> AbeCiphertext:
    """Encrypt a 32-byte message so only keys satisfying the policy open it.

    Uses public parameters only.
    """
    if len(message) != 32:
        raise ValueError("message must be exactly 32 bytes")
    policy.validate(tree, set(params.attribute_space))
    s = rand_scalar(rng, FIELD)
    leaf_shares: list[int] = []
    _assign_shares(tree, s, rng, leaf_shares)
    r = rand_scalar(rng, curve.N)
    base = curve.decode_point(params.generator)
    ephemeral = curve.scalar_mult(r, base)
    boxes = []
    for (index, leaf), share in zip(policy.leaves(tree), leaf_shares):
        commitment = curve.decode_point(params.commitments[leaf.attribute])
        mask = _leaf_mask(curve.scalar_mult(r, commitment), index)
        boxes.append((share + mask) % FIELD)
    s_bytes = s.to_bytes(32, "big")
    pad = hash_bytes(_PAD_TAG + s_bytes)
    return AbeCiphertext(
        policy=tree,
        ephemeral=curve.encode_point(ephemeral),
        leaf_boxes=tuple(boxes),
        share_check=hash_bytes(_CHECK_TAG + s_bytes),
        box=bytes(a ^ b for a, b in zip(message, pad)),
    )


def _recover(
    node: PolicyNode,
    counter: list[int],
    ciphertext: AbeCiphertext,
    ephemeral: tuple[int, int],
    key: AbeUserKey,
) -> int | None:
    if node.is_leaf:
        index = counter[0]
        counter[0] += 1
        component = key.components.get(attribute_id(node.attribute))
        if component is None:
            return None
        t_a = (component - key.blind) % curve.N
        mask = _leaf_mask(curve.scalar_mult(t_a, ephemeral), index)
        return (ciphertext.leaf_boxes[index] - mask) % FIELD
    points = []
    for position, child in enumerate(node.children, start=1):
        value = _recover(child, counter, ciphertext, ephemeral, key)
        if value is not None:
            points.append((position, value))
    if len(points) < node.threshold:
        return None
    return shamir.interpolate_at_zero(points[: node.threshold], FIELD)


def decrypt(params: AbePublicParams, ciphertext: AbeCiphertext, key: AbeUserKey) -> bytes:
    """Recover the 32-byte message; PolicyNotSatisfied when the key cannot.

    The failure carries no information about the message. A key whose
    binding tag does not match its components is rejected outright.
    """
    if _key_tag(key.blind, key.components) != key.tag:
        raise KeyBindingError("user key components do not match the binding tag")
    ephemeral = curve.decode_point(ciphertext.ephemeral)
    counter = [0]
    s = _recover(ciphertext.policy, counter, ciphertext, ephemeral, key)
    if s is None:
        raise PolicyNotSatisfied("attribute set does not satisfy the policy")
    s_bytes = s.to_bytes(32, "big")
    if hash_bytes(_CHECK_TAG + s_bytes) != ciphertext.share_check:
        raise PolicyNotSatisfied("attribute set does not satisfy the policy")
    pad = hash_bytes(_PAD_TAG + s_bytes)
    return bytes(a ^ b for a, b in zip(ciphertext.box, pad))


# --- wire formats (deterministic JSON) ---

def params_to_bytes(params: AbePublicParams) -> bytes:
    doc = {
        "space": list(params.attribute_space),
        "bits": params.security_bits,
        "generator": params.generator.hex(),
        "commitments": {a: params.commitments[a].hex() for a in params.attribute_space},
    }
    return json.dumps(doc, separators=(",", ":")).encode()


def params_from_bytes(data: bytes) -> AbePublicParams:
    doc = json.loads(data)
    return AbePublicParams(
        attribute_space=tuple(doc["space"]),
        security_bits=doc["bits"],
        generator=bytes.fromhex(doc["generator"]),
        commitments=MappingProxyType(
            {a: bytes.fromhex(h) for a, h in doc["commitments"].items()}
        ),
    )


def master_to_bytes(master: AbeMasterKey) -> bytes:
    doc = {
        "alpha": hex(master.master_scalar),
        "space": list(master.attribute_space),
        "secrets": {a: hex(master.attribute_secrets[a]) for a in master.attribute_space},
    }
    return json.dumps(doc, separators=(",", ":")).encode()


def master_from_bytes(data: bytes) -> AbeMasterKey:
    doc = json.loads(data)
    return AbeMasterKey(
        master_scalar=int(doc["alpha"], 16),
        attribute_secrets=MappingProxyType(
            {a: int(h, 16) for a, h in doc["secrets"].items()}
        ),
        attribute_space=tuple(doc["space"]),
    )


def key_to_bytes(key: AbeUserKey) -> bytes:
    """Serialize a user key; attribute names are NOT part of the wire form."""
    doc = {
        "blind": hex(key.blind),
        "tag": key.tag.hex(),
        "components": {aid: hex(key.components[aid]) for aid in sorted(key.components)},
    }
    return json.dumps(doc, separators=(",", ":")).encode()


def key_from_bytes(data: bytes) -> AbeUserKey:
    doc = json.loads(data)
    return AbeUserKey(
        components=MappingProxyType(
            {aid: int(h, 16) for aid, h in doc["components"].items()}
        ),
        blind=int(doc["blind"], 16),
        tag=bytes.fromhex(doc["tag"]),
        attributes=None,
    )


def ciphertext_to_bytes(ciphertext: AbeCiphertext) -> bytes:
    doc = {
        "policy": policy.format_policy(ciphertext.policy),
        "ephemeral": ciphertext.ephemeral.hex(),
        "boxes": [hex(b) for b in ciphertext.leaf_boxes],
        "check": ciphertext.share_check.hex(),
        "box": ciphertext.box.hex(),
    }
    return json.dumps(doc, separators=(",", ":")).encode()


def ciphertext_from_bytes(data: bytes) -> AbeCiphertext:
    doc = json.loads(data)
    return AbeCiphertext(
        policy=policy.parse_policy(doc["policy"]),
        ephemeral=bytes.fromhex(doc["ephemeral"]),
        leaf_boxes=tuple(int(h, 16) for h in doc["boxes"]),
        share_check=bytes.fromhex(doc["check"]),
        box=bytes.fromhex(doc["box"]),
    )

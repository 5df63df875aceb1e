"""Capsule construction, wire format, and unwrap paths."""

from __future__ import annotations

import random
import struct

import pytest

from umbra import abe, capsule as capsule_mod
from umbra.capsule import (
    MAGIC,
    MODE_FINE,
    MODE_PAYMENT,
    Capsule,
    Metadata,
    capsule_from_bytes,
    capsule_to_bytes,
    encrypt_data,
    open_payload,
    seal_capsule,
    unseal_capsule,
    unwrap_policy_path,
    unwrap_sealed_path,
)
from umbra.crypto import keygen
from umbra.errors import EmptyData, IntegrityError
from umbra.policy import attr

DISTRIBUTOR = b"\xaa" * 20
ID_MANAGER = b"\xbb" * 20


def fine_setup(seed=21):
    rng = random.Random(seed)
    params, master = abe.setup(("alpha", "beta"), rng=rng)
    provider = keygen(rng=rng)
    seal_key = bytes(range(32))
    return rng, params, master, provider, seal_key


def make_fine(data=b"fine payload", seed=21):
    rng, params, master, provider, seal_key = fine_setup(seed)
    blob, caps = encrypt_data(
        data,
        provider,
        distributor=DISTRIBUTOR,
        id_manager=ID_MANAGER,
        seal_key=seal_key,
        abe_params=params,
        policy=attr("alpha"),
        kdf_cost=10,
        rng=rng,
    )
    return blob, caps, params, master, provider, seal_key, rng


class TestEncryptData:
    def test_fine_round_trip_via_sealed_path(self):
        blob, caps, *_rest = make_fine()
        seal_key = _rest[3]
        key = unwrap_sealed_path(caps, seal_key)
        assert open_payload(caps, key, blob) == b"fine payload"

    def test_fine_round_trip_via_policy_path(self):
        blob, caps, params, master, _, _, rng = make_fine()
        user_key = abe.keygen(master, frozenset({"alpha"}), rng=rng)
        challenge = abe.decrypt(params, caps.policy_ciphertext, user_key)
        key = unwrap_policy_path(caps, challenge)
        assert open_payload(caps, key, blob) == b"fine payload"

    def test_challenge_digest_gates_policy_path(self):
        _, caps, *_ = make_fine()
        with pytest.raises(IntegrityError):
            unwrap_policy_path(caps, b"\x00" * 32)

    def test_payment_capsule(self):
        rng = random.Random(5)
        provider = keygen(rng=rng)
        seal_key = b"\x09" * 32
        blob, caps = encrypt_data(
            b"work",
            provider,
            distributor=DISTRIBUTOR,
            id_manager=ID_MANAGER,
            seal_key=seal_key,
            price=250,
            kdf_cost=10,
            rng=rng,
        )
        assert caps.mode == MODE_PAYMENT
        assert caps.price == 250
        assert caps.payee == provider.wallet_address
        assert caps.policy_ciphertext is None
        assert open_payload(caps, unwrap_sealed_path(caps, seal_key), blob) == b"work"

    def test_empty_data_rejected(self):
        rng, params, _, provider, seal_key = fine_setup()
        with pytest.raises(EmptyData):
            encrypt_data(
                b"",
                provider,
                distributor=DISTRIBUTOR,
                id_manager=ID_MANAGER,
                seal_key=seal_key,
                abe_params=params,
                policy=attr("alpha"),
                kdf_cost=10,
                rng=rng,
            )

    def test_mode_mixing_rejected(self):
        rng, params, _, provider, seal_key = fine_setup()
        common = dict(
            distributor=DISTRIBUTOR,
            id_manager=ID_MANAGER,
            seal_key=seal_key,
            kdf_cost=10,
            rng=rng,
        )
        with pytest.raises(ValueError):
            encrypt_data(b"x", provider, abe_params=params, policy=attr("alpha"), price=1, **common)
        with pytest.raises(ValueError):
            encrypt_data(b"x", provider, **common)

    def test_payload_bound_to_capsule(self):
        # payload from one capsule does not open under another
        blob1, caps1, params, master, provider, seal_key, rng = make_fine(seed=31)
        blob2, caps2 = encrypt_data(
            b"other payload",
            provider,
            distributor=DISTRIBUTOR,
            id_manager=ID_MANAGER,
            seal_key=seal_key,
            abe_params=params,
            policy=attr("alpha"),
            kdf_cost=10,
            rng=rng,
        )
        key2 = unwrap_sealed_path(caps2, seal_key)
        with pytest.raises(IntegrityError):
            open_payload(caps2, key2, blob1)


class TestWireFormat:
    def test_fine_round_trip(self):
        _, caps, *_ = make_fine()
        assert capsule_from_bytes(capsule_to_bytes(caps)) == caps

    def test_payment_layout_by_hand(self):
        # golden layout check: build the expected bytes section by section
        caps = Capsule(
            mode=MODE_PAYMENT,
            token_id=b"\x10" * 16,
            distributor=DISTRIBUTOR,
            id_manager=ID_MANAGER,
            challenge_digest=b"\x20" * 32,
            policy_ciphertext=None,
            price=1000,
            payee=b"\x30" * 20,
            policy_wrapped_key=b"",
            sealed_key=b"\x40" * 56,
            metadata_address="cas1-" + "ab" * 32,
        )
        sections = [
            b"\x10" * 16,
            DISTRIBUTOR,
            ID_MANAGER,
            (1000).to_bytes(8, "little") + b"\x30" * 20,
            b"\x20" * 32,
            b"",
            b"\x40" * 56,
            ("cas1-" + "ab" * 32).encode(),
        ]
        expected = MAGIC + bytes([1, 2])
        for section in sections:
            expected += struct.pack("<I", len(section)) + section
        assert capsule_to_bytes(caps) == expected
        assert capsule_from_bytes(expected) == caps

    def test_malformed_blobs_rejected(self):
        _, caps, *_ = make_fine()
        blob = capsule_to_bytes(caps)
        with pytest.raises(IntegrityError):
            capsule_from_bytes(b"XXXX" + blob[4:])
        with pytest.raises(IntegrityError):
            capsule_from_bytes(blob[:4] + b"\x09" + blob[5:])  # unknown version
        with pytest.raises(IntegrityError):
            capsule_from_bytes(blob[:5] + b"\x07" + blob[6:])  # unknown mode
        with pytest.raises(IntegrityError):
            capsule_from_bytes(blob[:-3])  # truncated
        with pytest.raises(IntegrityError):
            capsule_from_bytes(blob + b"\x00")  # trailing garbage


class TestSealing:
    def test_seal_unseal_round_trip(self):
        _, caps, *_rest = make_fine()
        seal_key = _rest[3]
        rng = _rest[4]
        sealed = seal_capsule(caps, seal_key, rng=rng)
        assert unseal_capsule(sealed, seal_key) == caps

    def test_wrong_seal_key_fails(self):
        _, caps, *_rest = make_fine()
        seal_key = _rest[3]
        sealed = seal_capsule(caps, seal_key, rng=_rest[4])
        with pytest.raises(IntegrityError):
            unseal_capsule(sealed, b"\xff" * 32)


class TestMetadata:
    def test_round_trip(self):
        meta = Metadata(
            data_address="cas1-" + "00" * 32,
            data_digest=b"\x11" * 32,
            capsule_address="cas1-" + "22" * 32,
            capsule_digest=b"\x33" * 32,
            title="a title",
            preview="a preview",
        )
        assert Metadata.from_bytes(meta.to_bytes()) == meta

"""Shared fixtures.

Tests run the KDF at cost 10 (the floor) so flows stay fast; the
dedicated timing tests use the real default cost.
"""

from __future__ import annotations

import random

import pytest

from umbra import protocols
from umbra.chain import ControlChain
from umbra.crypto import keygen
from umbra.storage import StorageChain

FAST_KDF_COST = 10


def build_system(
    *,
    mode: str = "fine",
    attributes: tuple[str, ...] = ("clinician", "researcher", "auditor"),
    organizers: int = 3,
    threshold: int = 2,
    seed: int = 1337,
    control_id: str = "control-0",
    storage_id: str = "storage-0",
):
    """One in-memory system with deterministic keys and a seeded rng."""
    rng = random.Random(seed)
    organizer_keys = [keygen(rng=rng) for _ in range(organizers)]
    handle = protocols.initialize(
        ControlChain(control_id),
        StorageChain(storage_id),
        organizer_keys,
        threshold,
        attributes,
        mode=mode,
        rng=rng,
        kdf_cost=FAST_KDF_COST,
    )
    return handle


def enroll(handle, attributes=frozenset()):
    """Register a consumer with the given attributes; returns its keys."""
    control_key = keygen(rng=handle.rng)
    storage_key = keygen(rng=handle.rng)
    protocols.register_participant(
        handle,
        protocols.RegistrationRecord(
            control_key.public_key, storage_key.public_key, frozenset(attributes)
        ),
        approvals=list(handle.organizer_keys),
    )
    return control_key, storage_key


@pytest.fixture
def fine_system():
    return build_system(mode="fine")


@pytest.fixture
def payment_system():
    return build_system(mode="payment", seed=2024)


@pytest.fixture
def provider(fine_system):
    return enroll(fine_system, {"clinician"})

"""End-to-end sharing protocols over the chain simulators.

Covers system initialization (master key ceremony, contract deployment,
toolkit publication), participant registration (organizer quorum and key
issuance), solidification (encrypt, persist, distribute), authorization
(requisition, acquisition, verification, decryption), the payment-based
publishing flows, and multi-chain registration and routing.

Every flow appends a structured trace entry (step name, digest of the
step inputs, emitted event sequence numbers) to its handle, and performs
storage writes strictly before the chain writes that reference them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from random import Random
from typing import Sequence

from . import abe, capsule as capsule_mod, shamir
from .capsule import Capsule, Metadata, encrypt_data, seal_capsule, unseal_capsule
from .chain import (
    CONTRACT_CHAIN_MANAGER,
    CONTRACT_DISTRIBUTOR,
    CONTRACT_ID_MANAGER,
    ControlChain,
)
from .crypto import (
    DEFAULT_KDF_COST,
    KeyPair,
    hash_bytes,
    keygen,
    rand_bytes,
    wallet_address,
)
from .errors import (
    AlreadyInitialized,
    IntegrityError,
    KeyBindingError,
    NonExistence,
    NotVerified,
    PolicyNotSatisfied,
    QuorumNotMet,
    Rejected,
    Unauthorized,
    UnknownAttribute,
    UnknownContract,
    UnknownMetadata,
    UnknownToken,
)
from .policy import PolicyNode, parse_policy
from .storage import StorageChain

DEFAULT_FUNDING = 1_000_000

MODE_FINE = capsule_mod.MODE_FINE
MODE_PAYMENT = capsule_mod.MODE_PAYMENT


@dataclass(frozen=True)
class RegistrationRecord:
    """A participant's enrollment request: account keys plus attribute set."""

    control_key: bytes  # public key on the control chain
    storage_key: bytes  # public key on the storage side
    attributes: frozenset[str] = frozenset()


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of the verification step; ``granted`` follows the access rule:
    ownership alone, or (request and attribute challenge) in fine mode, or
    (request irrelevant) a matching payment in payment mode."""

    mode: str
    owned: bool
    requested: bool | None = None
    challenge_ok: bool | None = None
    paid: bool | None = None

    @property
    def granted(self) -> bool:
        if self.mode == MODE_FINE:
            return self.owned or (bool(self.requested) and bool(self.challenge_ok))
        return self.owned or bool(self.paid)


@dataclass
class ControlPeer:
    index: int
    chain: ControlChain
    distributor: str
    id_manager: str
    master: KeyPair


@dataclass
class StoragePeer:
    index: int
    chain: StorageChain
    master: KeyPair
    cipher_suite: str
    control_linker: str
    storage_linker: str


@dataclass
class ChainRegistry:
    manager_contract: str
    control_peers: dict[int, ControlPeer] = field(default_factory=dict)
    storage_peers: dict[int, StoragePeer] = field(default_factory=dict)


@dataclass
class SystemHandle:
    """Everything a deployed sharing system needs at runtime."""

    mode: str
    control: ControlChain
    storage: StorageChain
    distributor: str
    id_manager: str
    master_control: KeyPair
    master_storage: KeyPair
    organizer_keys: tuple[KeyPair, ...]
    threshold: int
    abe_params: abe.AbePublicParams
    abe_master: abe.AbeMasterKey
    seal_key: bytes
    kdf_cost: int = DEFAULT_KDF_COST
    rng: Random | None = None
    funding: int = DEFAULT_FUNDING
    cipher_suite: str = ""
    control_linker: str = ""
    storage_linker: str = ""
    chain_manager: str | None = None
    registry: ChainRegistry | None = None
    control_shares: list = field(default_factory=list)
    storage_shares: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def organizers(self) -> tuple[str, ...]:
        return tuple(k.wallet_hex for k in self.organizer_keys)


def _trace(handle: SystemHandle, step: str, inputs: bytes, seqs: Sequence[int] = ()) -> None:
    handle.trace.append(
        {"step": step, "inputs": hash_bytes(inputs).hex(), "events": list(seqs)}
    )


def _toolkit_manifests(chain_id: str, distributor: str, id_manager: str) -> tuple[bytes, bytes, bytes]:
    """Deterministic release manifests standing in for the compiled toolkit."""
    base = f"umbra-toolkit 0.1.0\ncontrol-chain {chain_id}\ndistributor {distributor}\nid-manager {id_manager}\n"
    return (
        (base + "component cipher-suite\n").encode(),
        (base + "component control-linker\n").encode(),
        (base + "component storage-linker\n").encode(),
    )


def initialize(
    control: ControlChain,
    storage: StorageChain,
    organizer_keys: Sequence[KeyPair],
    threshold: int,
    attribute_space: Sequence[str],
    *,
    mode: str = MODE_FINE,
    participating: Sequence[int] | None = None,
    rng: Random | None = None,
    kdf_cost: int = DEFAULT_KDF_COST,
    funding: int = DEFAULT_FUNDING,
    security_bits: int = 256,
) -> SystemHandle:
    """Deploy a sharing system: master key ceremony, contracts, toolkit.

    Master account secrets are split among the organizers; the ceremony
    reconstructs them from the ``participating`` organizer indices
    (1-based, default all) and aborts with InsufficientShares below the
    threshold, before anything is deployed.
    """
    if mode not in (MODE_FINE, MODE_PAYMENT):
        raise ValueError(f"unknown mode {mode!r}")
    if control.distributor_addresses():
        raise AlreadyInitialized(f"chain {control.chain_id} already hosts a system")

    control_secret = rand_bytes(rng, 32)
    storage_secret = rand_bytes(rng, 32)
    control_shares = shamir.split_key_material(
        control_secret, len(organizer_keys), threshold, rng=rng
    )
    storage_shares = shamir.split_key_material(
        storage_secret, len(organizer_keys), threshold, rng=rng
    )
    if participating is None:
        participating = range(1, len(organizer_keys) + 1)
    chosen = set(participating)
    rebuilt_control = shamir.recombine_key_material(
        [s for s in control_shares if s.index in chosen]
    )
    rebuilt_storage = shamir.recombine_key_material(
        [s for s in storage_shares if s.index in chosen]
    )
    master_control = keygen(rebuilt_control)
    master_storage = keygen(rebuilt_storage)

    control.fund(master_control.public_key, funding)
    for organizer in organizer_keys:
        control.fund(organizer.public_key, funding)

    distributor = control.deploy_contract(master_control, CONTRACT_DISTRIBUTOR)
    id_manager = control.deploy_contract(
        master_control,
        CONTRACT_ID_MANAGER,
        {"organizers": [k.wallet_hex for k in organizer_keys]},
    )
    params, master = abe.setup(
        tuple(attribute_space), security_bits=security_bits, rng=rng
    )
    control.set_abe(
        master_control, distributor, abe.params_to_bytes(params), abe.master_to_bytes(master)
    )

    suite_blob, cl_blob, sl_blob = _toolkit_manifests(
        control.chain_id, distributor, id_manager
    )
    cipher_suite = storage.put(suite_blob, master_storage)
    control_linker = storage.put(cl_blob, master_storage)
    storage_linker = storage.put(sl_blob, master_storage)

    event = control.emit_event(
        master_control,
        "StorageRegistered",
        {
            "wa": master_storage.wallet_hex,
            "cipher_suite": cipher_suite,
            "control_linker": control_linker,
            "storage_linker": storage_linker,
        },
    )

    handle = SystemHandle(
        mode=mode,
        control=control,
        storage=storage,
        distributor=distributor,
        id_manager=id_manager,
        master_control=master_control,
        master_storage=master_storage,
        organizer_keys=tuple(organizer_keys),
        threshold=threshold,
        abe_params=params,
        abe_master=master,
        seal_key=rand_bytes(rng, 32),
        kdf_cost=kdf_cost,
        rng=rng,
        funding=funding,
        cipher_suite=cipher_suite,
        control_linker=control_linker,
        storage_linker=storage_linker,
        control_shares=control_shares,
        storage_shares=storage_shares,
    )
    _trace(handle, "initialize", distributor.encode() + id_manager.encode(), [event["seq"]])
    return handle


def create_account(handle: SystemHandle, *, funding: int | None = None) -> KeyPair:
    """Draw a key pair and fund its control-chain account."""
    pair = keygen(rng=handle.rng)
    handle.control.fund(pair.public_key, handle.funding if funding is None else funding)
    return pair


def register_participant(
    handle: SystemHandle,
    record: RegistrationRecord,
    approvals: Sequence[KeyPair],
    rejections: Sequence[KeyPair] = (),
) -> dict:
    """Run the organizer-quorum registration; returns the Registered event.

    Any organizer rejection aborts. Approvals are counted only from
    roster organizers; fewer than the threshold aborts. On success the
    participant's control account is funded and the issued key material
    is embedded in the event, identified by hashed attribute ids only.
    """
    organizers = set(handle.organizers)
    if any(k.wallet_hex in organizers for k in rejections):
        raise Rejected("an organizer rejected the registration request")
    approving = [k for k in approvals if k.wallet_hex in organizers]
    if len({k.wallet_hex for k in approving}) < handle.threshold:
        raise QuorumNotMet(
            f"{len(approving)} organizer approvals < threshold {handle.threshold}"
        )
    unknown = record.attributes - set(handle.abe_params.attribute_space)
    if unknown:
        raise UnknownAttribute(f"attributes not in the universe: {sorted(unknown)}")
    user_key = abe.keygen(handle.abe_master, record.attributes, rng=handle.rng)

    wa_c = wallet_address(record.control_key).hex()
    wa_s = wallet_address(record.storage_key).hex()
    if not handle.control.has_account(wa_c):
        handle.control.fund(record.control_key, handle.funding)
    event = handle.control.emit_event(
        approving[0],
        "Registered",
        {
            "contract": handle.id_manager,
            "wa_c": wa_c,
            "wa_s": wa_s,
            "chi": abe.key_to_bytes(user_key).hex(),
        },
    )
    _trace(handle, "register", record.control_key + record.storage_key, [event["seq"]])
    return event


@dataclass(frozen=True)
class SolidifyResult:
    metadata_address: str
    token_id: bytes
    data_address: str
    capsule_address: str


def solidify(
    handle: SystemHandle,
    provider_control: KeyPair,
    provider_storage: KeyPair,
    data: bytes,
    *,
    policy: PolicyNode | str | None = None,
    price: int | None = None,
    payee: bytes | None = None,
    title: str = "",
    preview: str = "",
) -> SolidifyResult:
    """Encrypt, persist, and distribute one payload.

    All three storage writes (payload, sealed capsule, metadata record)
    complete before the first control-chain write, so a failed chain step
    never leaves dangling chain state pointing at missing blobs.
    """
    if isinstance(policy, str):
        policy = parse_policy(policy)
    if handle.mode == MODE_FINE:
        if policy is None:
            raise ValueError("fine-grained mode requires a policy")
        if price is not None:
            raise ValueError("price terms belong to payment mode")
        payload, caps = encrypt_data(
            data,
            provider_control,
            distributor=bytes.fromhex(handle.distributor),
            id_manager=bytes.fromhex(handle.id_manager),
            seal_key=handle.seal_key,
            abe_params=handle.abe_params,
            policy=policy,
            kdf_cost=handle.kdf_cost,
            rng=handle.rng,
        )
    else:
        if price is None:
            raise ValueError("payment mode requires a price")
        if policy is not None:
            raise ValueError("policies belong to fine-grained mode")
        payload, caps = encrypt_data(
            data,
            provider_control,
            distributor=bytes.fromhex(handle.distributor),
            id_manager=bytes.fromhex(handle.id_manager),
            seal_key=handle.seal_key,
            price=price,
            payee=payee if payee is not None else provider_control.wallet_address,
            kdf_cost=handle.kdf_cost,
            rng=handle.rng,
        )

    data_address = handle.storage.put(payload, provider_storage)
    sealed = seal_capsule(caps, handle.seal_key, rng=handle.rng)
    capsule_address = handle.storage.put(sealed, provider_storage)
    meta = Metadata(
        data_address=data_address,
        data_digest=hash_bytes(payload),
        capsule_address=capsule_address,
        capsule_digest=hash_bytes(sealed),
        title=title,
        preview=preview,
    )
    metadata_address = handle.storage.put(meta.to_bytes(), provider_storage)

    handle.control.mint(
        provider_control,
        handle.distributor,
        caps.token_id,
        provider_control.wallet_address,
        metadata_address,
    )
    handle.control.insert_mapping(
        provider_control, handle.distributor, metadata_address, caps.token_id
    )
    event = handle.control.emit_event(
        provider_control,
        "Distributed",
        {
            "contract": handle.distributor,
            "wa": provider_control.wallet_hex,
            "token": caps.token_id.hex(),
        },
    )
    _trace(handle, "solidify", data, [event["seq"]])
    return SolidifyResult(metadata_address, caps.token_id, data_address, capsule_address)


def requisition(handle: SystemHandle, consumer_control: KeyPair, metadata_address: str) -> bytes:
    """Request access to a payload; returns the bound token id.

    Fine-grained mode refuses unregistered consumers (NonExistence);
    payment mode has no identity step.
    """
    wa = consumer_control.wallet_hex
    if handle.mode == MODE_FINE:
        registered = handle.control.query_events("Registered", wa_c=wa)
        if not registered:
            raise NonExistence(f"wallet {wa} is not registered")
    token = handle.control.resolve_metadata(handle.distributor, metadata_address)
    event = handle.control.emit_event(
        consumer_control,
        "Requested",
        {
            "contract": handle.distributor,
            "wa": wa,
            "token": token.hex(),
        },
    )
    _trace(handle, "requisition", metadata_address.encode(), [event["seq"]])
    return token


def acquisition(handle: SystemHandle, metadata_address: str) -> tuple[Capsule, Metadata]:
    """Fetch metadata and the sealed capsule, check digests, unseal."""
    meta = Metadata.from_bytes(handle.storage.get(metadata_address))
    sealed = handle.storage.get(meta.capsule_address)
    if hash_bytes(sealed) != meta.capsule_digest:
        raise IntegrityError("sealed capsule does not match the metadata digest")
    caps = unseal_capsule(sealed, handle.seal_key)
    _trace(handle, "acquisition", metadata_address.encode())
    return caps, meta


def _latest_user_key(handle: SystemHandle, wa: str) -> abe.AbeUserKey | None:
    events = handle.control.query_events("Registered", wa_c=wa)
    if not events:
        return None
    # re-registration is latest-wins
    return abe.key_from_bytes(bytes.fromhex(events[-1]["payload"]["chi"]))


def verify_access(
    handle: SystemHandle, consumer_control: KeyPair, caps: Capsule
) -> VerificationResult:
    """Run the verification predicates and emit the Verified event.

    Fine mode: ownership, or an existing request plus a successful
    attribute challenge (the consumer's issued key must decrypt the
    capsule's policy ciphertext to the committed challenge secret).
    Payment mode: ownership or a recorded payment of at least the price
    to the payee with the token id as memo.
    """
    wa = consumer_control.wallet_hex
    token = caps.token_id
    distributor = caps.distributor.hex()
    try:
        owned = handle.control.owner_of(distributor, token).hex() == wa
    except UnknownToken:
        owned = False

    if caps.mode == MODE_FINE:
        user_key = _latest_user_key(handle, wa)
        if user_key is None:
            raise NonExistence(f"wallet {wa} is not registered")
        requested = bool(
            handle.control.query_events("Requested", wa=wa, token=token.hex())
        )
        try:
            challenge = abe.decrypt(handle.abe_params, caps.policy_ciphertext, user_key)
            challenge_ok = hash_bytes(challenge) == caps.challenge_digest
        except (PolicyNotSatisfied, KeyBindingError):
            challenge_ok = False
        result = VerificationResult(
            mode=MODE_FINE, owned=owned, requested=requested, challenge_ok=challenge_ok
        )
    else:
        # a zero price asks for nothing, so it is trivially covered
        paid = caps.price == 0 or bool(
            handle.control.query_receipts(
                sender=wa,
                to=caps.payee.hex(),
                memo=token.hex(),
                min_amount=caps.price,
            )
        )
        result = VerificationResult(mode=MODE_PAYMENT, owned=owned, paid=paid)

    event = handle.control.emit_event(
        consumer_control,
        "Verified",
        {
            "contract": distributor,
            "wa": wa,
            "token": token.hex(),
            "result": "1" if result.granted else "0",
        },
    )
    _trace(handle, "verify", token, [event["seq"]])
    return result


def decrypt_payload(
    handle: SystemHandle, consumer_control: KeyPair, caps: Capsule
) -> bytes:
    """Recover the plaintext after an affirmative verification.

    Refuses (NotVerified) unless an affirmative Verified event emitted by
    the consumer itself exists; an event someone else emitted about this
    consumer does not count. The payload key is unwrapped along the
    policy path when the consumer's key meets the policy, otherwise the
    sealed path after re-checking ownership or payment, otherwise
    Unauthorized. Payload tampering fails as IntegrityError regardless
    of authorization.
    """
    wa = consumer_control.wallet_hex
    token = caps.token_id
    distributor = caps.distributor.hex()
    affirmative = [
        e
        for e in handle.control.query_events(
            "Verified", wa=wa, token=token.hex(), result="1"
        )
        if e["emitter"] == wa
    ]
    if not affirmative:
        raise NotVerified(f"no affirmative verification for wallet {wa}")

    metadata_address = handle.control.token_uri(distributor, token)
    meta = Metadata.from_bytes(handle.storage.get(metadata_address))
    payload = handle.storage.get(meta.data_address)
    if hash_bytes(payload) != meta.data_digest:
        raise IntegrityError("payload does not match the metadata digest")

    payload_key: bytes | None = None
    if caps.mode == MODE_FINE:
        user_key = _latest_user_key(handle, wa)
        if user_key is not None:
            try:
                challenge = abe.decrypt(handle.abe_params, caps.policy_ciphertext, user_key)
                payload_key = capsule_mod.unwrap_policy_path(caps, challenge)
            except (PolicyNotSatisfied, KeyBindingError, IntegrityError):
                payload_key = None
    if payload_key is None:
        try:
            owned = handle.control.owner_of(distributor, token).hex() == wa
        except UnknownToken:
            owned = False
        allowed = owned
        if not allowed and caps.mode == MODE_PAYMENT:
            allowed = caps.price == 0 or bool(
                handle.control.query_receipts(
                    sender=wa, to=caps.payee.hex(), memo=token.hex(), min_amount=caps.price
                )
            )
        if not allowed:
            raise Unauthorized("no usable unwrap path for this consumer")
        payload_key = capsule_mod.unwrap_sealed_path(caps, handle.seal_key)

    plaintext = capsule_mod.open_payload(caps, payload_key, payload)
    _trace(handle, "decrypt", token)
    return plaintext


def authorize_and_decrypt(
    handle: SystemHandle, consumer_control: KeyPair, metadata_address: str
) -> bytes:
    """Full authorization pipeline; routes to the right chain when a
    registry is present."""
    sys_handle = locate_system(handle, metadata_address)
    requisition(sys_handle, consumer_control, metadata_address)
    caps, _ = acquisition(sys_handle, metadata_address)
    result = verify_access(sys_handle, consumer_control, caps)
    if not result.granted:
        raise Unauthorized("verification denied access")
    return decrypt_payload(sys_handle, consumer_control, caps)


# --- payment-based publishing ---

def publish_work(
    handle: SystemHandle,
    creator_control: KeyPair,
    creator_storage: KeyPair,
    work: bytes,
    price: int,
    *,
    title: str = "",
    preview: str = "",
) -> SolidifyResult:
    """Publish a creative work for per-use purchase (payment mode)."""
    if handle.mode != MODE_PAYMENT:
        raise ValueError("publishing requires a payment-mode system")
    return solidify(
        handle, creator_control, creator_storage, work,
        price=price, title=title, preview=preview,
    )


def purchase_use(
    handle: SystemHandle,
    customer_control: KeyPair,
    metadata_address: str,
    *,
    amount: int | None = None,
) -> bytes:
    """Pay for one use and decrypt. ``amount`` overrides the asking price
    (underpayment is recorded but fails authorization)."""
    sys_handle = locate_system(handle, metadata_address)
    caps, _ = acquisition(sys_handle, metadata_address)
    token = sys_handle.control.resolve_metadata(sys_handle.distributor, metadata_address)
    pay_amount = caps.price if amount is None else amount
    if pay_amount > 0:
        sys_handle.control.pay(customer_control, caps.payee, pay_amount, memo=token.hex())
    return authorize_and_decrypt(handle, customer_control, metadata_address)


def purchase_ownership(
    handle: SystemHandle,
    customer_control: KeyPair,
    owner_control: KeyPair,
    metadata_address: str,
    offer: int,
) -> bytes:
    """Buy the token outright: pay the owner, owner transfers the token,
    and the new owner decrypts via the ownership predicate."""
    sys_handle = locate_system(handle, metadata_address)
    token = sys_handle.control.resolve_metadata(sys_handle.distributor, metadata_address)
    owner_wallet = sys_handle.control.owner_of(sys_handle.distributor, token)
    if owner_wallet.hex() != owner_control.wallet_hex:
        raise Unauthorized("transfer must be signed by the current owner")
    if offer > 0:
        sys_handle.control.pay(
            customer_control, owner_wallet, offer, memo="own-" + token.hex()
        )
    sys_handle.control.transfer(
        owner_control, sys_handle.distributor, token, customer_control.wallet_address
    )
    return authorize_and_decrypt(handle, customer_control, metadata_address)


# --- multi-chain management ---

def ensure_chain_manager(handle: SystemHandle) -> str:
    """Deploy the chain-manager contract on the master chain if missing."""
    if handle.chain_manager is None:
        handle.chain_manager = handle.control.deploy_contract(
            handle.master_control, CONTRACT_CHAIN_MANAGER
        )
        handle.registry = ChainRegistry(manager_contract=handle.chain_manager)
    return handle.chain_manager


def register_control_chain(
    handle: SystemHandle, chain: ControlChain, *, index: int | None = None
) -> ControlPeer:
    """Deploy contracts on a peer control chain and record it on the
    master chain with a ControlRegistered event."""
    ensure_chain_manager(handle)
    registry = handle.registry
    if index is None:
        index = len(registry.control_peers)
    master = keygen(rng=handle.rng)
    chain.fund(master.public_key, handle.funding)
    for organizer in handle.organizer_keys:
        chain.fund(organizer.public_key, handle.funding)
    distributor = chain.deploy_contract(master, CONTRACT_DISTRIBUTOR)
    id_manager = chain.deploy_contract(
        master,
        CONTRACT_ID_MANAGER,
        {"organizers": [k.wallet_hex for k in handle.organizer_keys]},
    )
    chain.set_abe(
        master,
        distributor,
        abe.params_to_bytes(handle.abe_params),
        abe.master_to_bytes(handle.abe_master),
    )
    event = handle.control.emit_event(
        handle.master_control,
        "ControlRegistered",
        {
            "contract": handle.chain_manager,
            "index": str(index),
            "wa": master.wallet_hex,
            "chain": chain.chain_id,
            "distributor": distributor,
            "id_manager": id_manager,
        },
    )
    peer = ControlPeer(index, chain, distributor, id_manager, master)
    registry.control_peers[index] = peer
    _trace(handle, "register-control-chain", chain.chain_id.encode(), [event["seq"]])
    return peer


def register_storage_chain(
    handle: SystemHandle, chain: StorageChain, *, index: int | None = None
) -> StoragePeer:
    """Publish the toolkit to a peer storage chain and record it on the
    master chain with a StorageRegistered event."""
    ensure_chain_manager(handle)
    registry = handle.registry
    if index is None:
        index = len(registry.storage_peers)
    master = keygen(rng=handle.rng)
    suite_blob, cl_blob, sl_blob = _toolkit_manifests(
        chain.chain_id, handle.distributor, handle.id_manager
    )
    cipher_suite = chain.put(suite_blob, master)
    control_linker = chain.put(cl_blob, master)
    storage_linker = chain.put(sl_blob, master)
    event = handle.control.emit_event(
        handle.master_control,
        "StorageRegistered",
        {
            "contract": handle.chain_manager,
            "index": str(index),
            "wa": master.wallet_hex,
            "chain": chain.chain_id,
            "cipher_suite": cipher_suite,
            "control_linker": control_linker,
            "storage_linker": storage_linker,
        },
    )
    peer = StoragePeer(index, chain, master, cipher_suite, control_linker, storage_linker)
    registry.storage_peers[index] = peer
    _trace(handle, "register-storage-chain", chain.chain_id.encode(), [event["seq"]])
    return peer


def chain_init(
    handle: SystemHandle,
    control_chains: Sequence[ControlChain] = (),
    storage_chains: Sequence[StorageChain] = (),
) -> ChainRegistry:
    """Register a batch of peer chains; one event per chain on the master."""
    ensure_chain_manager(handle)
    for chain in control_chains:
        register_control_chain(handle, chain)
    for chain in storage_chains:
        register_storage_chain(handle, chain)
    return handle.registry


def chain_resolve(handle: SystemHandle, contract_address: str) -> tuple[int | None, ControlChain]:
    """Map a contract address to its hosting chain by querying the
    master chain's ControlRegistered events. The master chain's own
    contracts resolve to (None, master chain)."""
    if contract_address in (handle.distributor, handle.id_manager, handle.chain_manager):
        return None, handle.control
    if handle.registry is not None:
        for event in handle.control.query_events("ControlRegistered"):
            payload = event["payload"]
            if contract_address in (payload["distributor"], payload["id_manager"]):
                index = int(payload["index"])
                peer = handle.registry.control_peers.get(index)
                if peer is not None:
                    return index, peer.chain
    raise UnknownContract(f"no registered chain hosts contract {contract_address}")


def peer_system(
    handle: SystemHandle, control_index: int, storage_index: int | None = None
) -> SystemHandle:
    """A view of the system bound to one registered peer chain pair."""
    if handle.registry is None:
        raise UnknownContract("no chain registry on this handle")
    peer = handle.registry.control_peers.get(control_index)
    if peer is None:
        raise UnknownContract(f"no control chain registered at index {control_index}")
    storage = handle.storage
    if storage_index is not None:
        speer = handle.registry.storage_peers.get(storage_index)
        if speer is None:
            raise UnknownContract(f"no storage chain registered at index {storage_index}")
        storage = speer.chain
    view = replace(
        handle,
        control=peer.chain,
        storage=storage,
        distributor=peer.distributor,
        id_manager=peer.id_manager,
        master_control=peer.master,
        chain_manager=None,
        registry=None,
        control_shares=[],
        storage_shares=[],
        trace=handle.trace,
    )
    return view


def locate_system(handle: SystemHandle, metadata_address: str) -> SystemHandle:
    """Find the system view whose control chain maps this metadata address.

    The home chain is tried first, then every registered peer (routing by
    the ControlRegistered events via chain_resolve)."""
    try:
        handle.control.resolve_metadata(handle.distributor, metadata_address)
        return handle
    except UnknownMetadata:
        pass
    if handle.registry is not None:
        for event in handle.control.query_events("ControlRegistered"):
            payload = event["payload"]
            index, chain = chain_resolve(handle, payload["distributor"])
            try:
                chain.resolve_metadata(payload["distributor"], metadata_address)
            except UnknownMetadata:
                continue
            storage_index = None
            if not handle.storage.has(metadata_address):
                for sindex, speer in sorted(handle.registry.storage_peers.items()):
                    if speer.chain.has(metadata_address):
                        storage_index = sindex
                        break
            return peer_system(handle, index, storage_index)
    raise UnknownMetadata(f"no registered chain maps {metadata_address}")


def registry_from_events(handle: SystemHandle) -> dict:
    """Reconstruct the registry's recorded facts purely from master-chain
    events (used to check the live registry against the log)."""
    control = {}
    storage = {}
    for event in handle.control.query_events("ControlRegistered"):
        p = event["payload"]
        control[int(p["index"])] = {
            "wa": p["wa"],
            "chain": p["chain"],
            "distributor": p["distributor"],
            "id_manager": p["id_manager"],
        }
    for event in handle.control.query_events("StorageRegistered"):
        p = event["payload"]
        if "index" not in p:
            continue  # the deployment announcement, not a registry entry
        storage[int(p["index"])] = {
            "wa": p["wa"],
            "chain": p["chain"],
            "cipher_suite": p["cipher_suite"],
            "control_linker": p["control_linker"],
            "storage_linker": p["storage_linker"],
        }
    return {"control": control, "storage": storage}


def registry_facts(registry: ChainRegistry) -> dict:
    """The same shape as registry_from_events, from the live registry."""
    return {
        "control": {
            i: {
                "wa": p.master.wallet_hex,
                "chain": p.chain.chain_id,
                "distributor": p.distributor,
                "id_manager": p.id_manager,
            }
            for i, p in registry.control_peers.items()
        },
        "storage": {
            i: {
                "wa": p.master.wallet_hex,
                "chain": p.chain.chain_id,
                "cipher_suite": p.cipher_suite,
                "control_linker": p.control_linker,
                "storage_linker": p.storage_linker,
            }
            for i, p in registry.storage_peers.items()
        },
    }

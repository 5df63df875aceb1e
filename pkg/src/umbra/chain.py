"""Control chain simulator: accounts, contracts, events, payments.

The chain is an append-only log of line-delimited JSON records with a
fixed key order (seq, type, kind, emitter, payload, prev, sig). Every
record carries the digest of the previous line and a signature by the
emitting account over the whole record body, so flipping any byte of any
line is detectable. Replaying a log through the same apply path as live
submission reconstructs identical state and an identical head digest.

There is no consensus or gas model: one in-process chain object, writers
serialized by a lock, reads served from current state. Account creation
is a genesis funding operation rather than an on-chain transaction.

Contracts are simulated natively: a token contract (mint / ownership /
transfer / token URIs / metadata-address mapping / ABE parameter slots),
an identity-manager contract holding the organizer roster, and a
chain-manager contract holding the peer-chain registry.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from .crypto import KeyPair, hash_bytes, sign, verify, wallet_address
from .errors import (
    AlreadySet,
    ChainError,
    IndexExists,
    InsufficientBalance,
    IntegrityError,
    InvalidContract,
    MappingExists,
    TokenExists,
    Unauthorized,
    UnknownAccount,
    UnknownMetadata,
    UnknownToken,
)

GENESIS_PREV = "0" * 64
GENESIS_EMITTER = "genesis"

CONTRACT_DISTRIBUTOR = "distributor"
CONTRACT_ID_MANAGER = "id_manager"
CONTRACT_CHAIN_MANAGER = "chain_manager"

EVENT_KINDS = {
    "Registered",
    "Distributed",
    "Requested",
    "Verified",
    "StorageRegistered",
    "ControlRegistered",
}

TX_KINDS = {"fund", "deploy", "set_abe", "mint", "transfer", "map_insert", "pay"}


@dataclass
class _Account:
    public_key: bytes
    balance: int = 0
    nonce: int = 0  # count of records emitted, feeds contract addresses


@dataclass
class _Distributor:
    deployer: str
    owners: dict = field(default_factory=dict)        # token hex -> wallet hex
    uris: dict = field(default_factory=dict)          # token hex -> metadata address
    id_mapping: dict = field(default_factory=dict)    # metadata address -> token hex
    abe_public: bytes | None = None
    abe_master: bytes | None = None


@dataclass
class _IdManager:
    deployer: str
    organizers: tuple = ()


@dataclass
class _ChainManager:
    deployer: str
    control_indices: set = field(default_factory=set)
    storage_indices: set = field(default_factory=set)


def _contract_address(wallet_hex: str, nonce: int) -> str:
    material = b"umbra/contract" + bytes.fromhex(wallet_hex) + nonce.to_bytes(8, "little")
    return hash_bytes(material)[-20:].hex()


def _canon(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"))


class ControlChain:
    """One simulated control chain."""

    def __init__(self, chain_id: str = "control-0", *, expose_master_key: bool = False):
        self.chain_id = chain_id
        self.expose_master_key = expose_master_key
        self._lock = threading.RLock()
        self._lines: list[str] = []
        self._head = GENESIS_PREV
        self._accounts: dict[str, _Account] = {}
        self._distributors: dict[str, _Distributor] = {}
        self._id_managers: dict[str, _IdManager] = {}
        self._chain_managers: dict[str, _ChainManager] = {}
        self._events: list[dict] = []
        self._receipts: list[dict] = []

    # --- record construction and validation ---

    def _signing_doc(self, seq: int, rtype: str, kind: str, emitter: str, payload: dict, prev: str) -> dict:
        return {
            "seq": seq,
            "type": rtype,
            "kind": kind,
            "emitter": emitter,
            "payload": payload,
            "prev": prev,
        }

    def _submit(self, rtype: str, kind: str, payload: dict, signer: KeyPair | None) -> dict:
        """Validate, apply, sign, and append one record (live path)."""
        with self._lock:
            for key, value in payload.items():
                if not isinstance(key, str) or not isinstance(value, str):
                    raise ChainError("payload entries must be strings")
            emitter = GENESIS_EMITTER if signer is None else signer.wallet_hex
            seq = len(self._lines)
            doc = self._signing_doc(seq, rtype, kind, emitter, dict(payload), self._head)
            if signer is None:
                sig = ""
            else:
                if emitter not in self._accounts and kind != "fund":
                    raise UnknownAccount(f"no account for wallet {emitter}")
                sig = sign(signer.secret_key, _canon(doc).encode()).hex()
            record = dict(doc)
            record["sig"] = sig
            self._apply(record)
            line = _canon(record)
            self._lines.append(line)
            self._head = hash_bytes(line.encode()).hex()
            return record

    def _apply(self, record: dict) -> None:
        """State transition for one validated record; shared by live and replay."""
        rtype, kind = record["type"], record["kind"]
        emitter, payload = record["emitter"], record["payload"]
        if rtype == "tx":
            if kind not in TX_KINDS:
                raise ChainError(f"unknown transaction kind {kind!r}")
            getattr(self, f"_apply_{kind}")(emitter, payload)
        elif rtype == "event":
            if kind not in EVENT_KINDS:
                raise ChainError(f"unknown event kind {kind!r}")
            self._apply_event(kind, emitter, payload)
            self._events.append(
                {"seq": record["seq"], "kind": kind, "emitter": emitter, "payload": dict(payload)}
            )
        else:
            raise ChainError(f"unknown record type {rtype!r}")
        if emitter != GENESIS_EMITTER:
            self._accounts[emitter].nonce += 1

    # --- transaction kinds ---

    def _apply_fund(self, emitter: str, payload: dict) -> None:
        if emitter != GENESIS_EMITTER:
            raise Unauthorized("funding is a genesis operation")
        wallet = payload["wallet"]
        amount = int(payload["amount"])
        account = self._accounts.get(wallet)
        if account is None:
            public_key = bytes.fromhex(payload["pubkey"])
            if wallet_address(public_key).hex() != wallet:
                raise ChainError("funded wallet does not match its public key")
            account = _Account(public_key=public_key)
            self._accounts[wallet] = account
        account.balance += amount

    def _require_account(self, wallet: str) -> _Account:
        account = self._accounts.get(wallet)
        if account is None:
            raise UnknownAccount(f"no account for wallet {wallet}")
        return account

    def _apply_deploy(self, emitter: str, payload: dict) -> None:
        account = self._require_account(emitter)
        kind = payload["contract"]
        expected = _contract_address(emitter, account.nonce)
        if payload["address"] != expected:
            raise ChainError("deploy address does not match the emitter nonce")
        address = payload["address"]
        if (
            address in self._distributors
            or address in self._id_managers
            or address in self._chain_managers
        ):
            raise ChainError(f"contract address collision at {address}")
        params = json.loads(payload.get("params", "{}"))
        if kind == CONTRACT_DISTRIBUTOR:
            self._distributors[address] = _Distributor(deployer=emitter)
        elif kind == CONTRACT_ID_MANAGER:
            organizers = tuple(params.get("organizers", ()))
            self._id_managers[address] = _IdManager(deployer=emitter, organizers=organizers)
        elif kind == CONTRACT_CHAIN_MANAGER:
            self._chain_managers[address] = _ChainManager(deployer=emitter)
        else:
            raise InvalidContract(f"unknown contract kind {kind!r}")

    def _apply_set_abe(self, emitter: str, payload: dict) -> None:
        self._require_account(emitter)
        contract = self._distributor(payload["contract"])
        if contract.deployer != emitter:
            raise Unauthorized("only the deployer may set encryption parameters")
        if contract.abe_public is not None:
            raise AlreadySet("encryption parameters were already set")
        contract.abe_public = bytes.fromhex(payload["public"])
        contract.abe_master = bytes.fromhex(payload["master"])

    def _apply_mint(self, emitter: str, payload: dict) -> None:
        self._require_account(emitter)
        contract = self._distributor(payload["contract"])
        token = payload["token"]
        if token in contract.owners:
            raise TokenExists(f"token {token} already minted")
        contract.owners[token] = payload["owner"]
        contract.uris[token] = payload["uri"]

    def _apply_transfer(self, emitter: str, payload: dict) -> None:
        self._require_account(emitter)
        contract = self._distributor(payload["contract"])
        token = payload["token"]
        owner = contract.owners.get(token)
        if owner is None:
            raise UnknownToken(f"token {token} was never minted")
        if owner != emitter:
            raise Unauthorized("only the owner may transfer a token")
        contract.owners[token] = payload["to"]

    def _apply_map_insert(self, emitter: str, payload: dict) -> None:
        self._require_account(emitter)
        contract = self._distributor(payload["contract"])
        token, uri = payload["token"], payload["uri"]
        if contract.owners.get(token) is None:
            raise UnknownToken(f"token {token} was never minted")
        if contract.owners[token] != emitter:
            raise Unauthorized("only the token owner may map a metadata address")
        if uri in contract.id_mapping:
            raise MappingExists(f"metadata address {uri} already mapped")
        contract.id_mapping[uri] = token

    def _apply_pay(self, emitter: str, payload: dict) -> None:
        sender = self._require_account(emitter)
        recipient = self._require_account(payload["to"])
        amount = int(payload["amount"])
        if amount <= 0:
            raise ChainError("payment amount must be positive")
        if sender.balance < amount:
            raise InsufficientBalance(
                f"balance {sender.balance} cannot cover {amount}"
            )
        sender.balance -= amount
        recipient.balance += amount
        self._receipts.append(
            {
                "from": emitter,
                "to": payload["to"],
                "amount": amount,
                "memo": payload.get("memo", ""),
            }
        )

    # --- event kinds ---

    def _apply_event(self, kind: str, emitter: str, payload: dict) -> None:
        self._require_account(emitter)
        if kind == "Registered":
            manager = self._id_manager(payload["contract"])
            if emitter not in manager.organizers:
                raise Unauthorized("only an organizer may register identities")
        elif kind in ("ControlRegistered", "StorageRegistered") and "index" in payload:
            manager = self._chain_manager(payload["contract"])
            if emitter != manager.deployer:
                raise Unauthorized("only the chain-manager deployer may register chains")
            index = int(payload["index"])
            pool = (
                manager.control_indices
                if kind == "ControlRegistered"
                else manager.storage_indices
            )
            if index in pool:
                raise IndexExists(f"chain index {index} already registered")
            pool.add(index)

    # --- contract lookups ---

    def _distributor(self, address: str) -> _Distributor:
        contract = self._distributors.get(address)
        if contract is None:
            raise InvalidContract(f"no token contract at {address}")
        return contract

    def _id_manager(self, address: str) -> _IdManager:
        contract = self._id_managers.get(address)
        if contract is None:
            raise InvalidContract(f"no identity-manager contract at {address}")
        return contract

    def _chain_manager(self, address: str) -> _ChainManager:
        contract = self._chain_managers.get(address)
        if contract is None:
            raise InvalidContract(f"no chain-manager contract at {address}")
        return contract

    # --- public write API ---

    def fund(self, public_key: bytes, amount: int) -> str:
        """Genesis operation: create (if needed) and credit an account."""
        wallet = wallet_address(public_key).hex()
        self._submit(
            "tx",
            "fund",
            {"wallet": wallet, "pubkey": public_key.hex(), "amount": str(int(amount))},
            None,
        )
        return wallet

    def deploy_contract(self, signer: KeyPair, kind: str, params: dict | None = None) -> str:
        with self._lock:
            account = self._require_account(signer.wallet_hex)
            address = _contract_address(signer.wallet_hex, account.nonce)
            payload = {
                "contract": kind,
                "address": address,
                "params": _canon(params or {}),
            }
            self._submit("tx", "deploy", payload, signer)
            return address

    def set_abe(self, signer: KeyPair, contract: str, public: bytes, master: bytes) -> None:
        self._submit(
            "tx",
            "set_abe",
            {"contract": contract, "public": public.hex(), "master": master.hex()},
            signer,
        )

    def mint(self, signer: KeyPair, contract: str, token: bytes, owner: bytes, uri: str) -> None:
        self._submit(
            "tx",
            "mint",
            {
                "contract": contract,
                "token": token.hex(),
                "owner": owner.hex(),
                "uri": uri,
            },
            signer,
        )

    def transfer(self, signer: KeyPair, contract: str, token: bytes, to: bytes) -> None:
        self._submit(
            "tx",
            "transfer",
            {"contract": contract, "token": token.hex(), "to": to.hex()},
            signer,
        )

    def insert_mapping(self, signer: KeyPair, contract: str, uri: str, token: bytes) -> None:
        self._submit(
            "tx",
            "map_insert",
            {"contract": contract, "uri": uri, "token": token.hex()},
            signer,
        )

    def pay(self, signer: KeyPair, to: bytes, amount: int, memo: str = "") -> dict:
        """Transfer balance; returns the receipt (also queryable later)."""
        record = self._submit(
            "tx",
            "pay",
            {"to": to.hex(), "amount": str(int(amount)), "memo": memo},
            signer,
        )
        receipt = dict(self._receipts[-1])
        receipt["tx"] = hash_bytes(_canon(record).encode()).hex()
        return receipt

    def emit_event(self, signer: KeyPair, kind: str, payload: dict) -> dict:
        """Append a typed event record signed by the emitter."""
        record = self._submit("event", kind, dict(payload), signer)
        return {
            "seq": record["seq"],
            "kind": kind,
            "emitter": record["emitter"],
            "payload": dict(record["payload"]),
        }

    # --- public read API ---

    def has_account(self, wallet: bytes | str) -> bool:
        wallet_hex = wallet.hex() if isinstance(wallet, bytes) else wallet
        return wallet_hex in self._accounts

    def balance_of(self, wallet: bytes | str) -> int:
        wallet_hex = wallet.hex() if isinstance(wallet, bytes) else wallet
        return self._require_account(wallet_hex).balance

    def account_key(self, wallet: bytes | str) -> bytes:
        wallet_hex = wallet.hex() if isinstance(wallet, bytes) else wallet
        return self._require_account(wallet_hex).public_key

    def owner_of(self, contract: str, token: bytes) -> bytes:
        owner = self._distributor(contract).owners.get(token.hex())
        if owner is None:
            raise UnknownToken(f"token {token.hex()} was never minted")
        return bytes.fromhex(owner)

    def token_uri(self, contract: str, token: bytes) -> str:
        uri = self._distributor(contract).uris.get(token.hex())
        if uri is None:
            raise UnknownToken(f"token {token.hex()} was never minted")
        return uri

    def resolve_metadata(self, contract: str, uri: str) -> bytes:
        token = self._distributor(contract).id_mapping.get(uri)
        if token is None:
            raise UnknownMetadata(f"no token mapped to {uri}")
        return bytes.fromhex(token)

    def abe_public(self, contract: str) -> bytes:
        blob = self._distributor(contract).abe_public
        if blob is None:
            raise ChainError("encryption parameters were never set")
        return blob

    def abe_master(self, contract: str) -> bytes:
        """Master key slot; readable only when the chain exposes it."""
        contract_state = self._distributor(contract)
        if contract_state.abe_master is None:
            raise ChainError("encryption parameters were never set")
        if not self.expose_master_key:
            raise Unauthorized("master key reads are disabled on this chain")
        return contract_state.abe_master

    def organizers_of(self, contract: str) -> tuple:
        return self._id_manager(contract).organizers

    def distributor_addresses(self) -> list[str]:
        return list(self._distributors)

    def chain_manager_addresses(self) -> list[str]:
        return list(self._chain_managers)

    def query_events(self, kind: str | None = None, **filters: str) -> list[dict]:
        """Events matching kind and exact payload fields; absent or '*' fields
        match anything. Returned in append order."""
        with self._lock:
            out = []
            for event in self._events:
                if kind is not None and event["kind"] != kind:
                    continue
                payload = event["payload"]
                ok = True
                for fkey, fval in filters.items():
                    if fval == "*":
                        continue
                    if payload.get(fkey) != fval:
                        ok = False
                        break
                if ok:
                    out.append({**event, "payload": dict(payload)})
            return out

    def query_receipts(
        self,
        sender: str | None = None,
        to: str | None = None,
        memo: str | None = None,
        min_amount: int | None = None,
    ) -> list[dict]:
        with self._lock:
            out = []
            for receipt in self._receipts:
                if sender is not None and receipt["from"] != sender:
                    continue
                if to is not None and receipt["to"] != to:
                    continue
                if memo is not None and receipt["memo"] != memo:
                    continue
                if min_amount is not None and receipt["amount"] < min_amount:
                    continue
                out.append(dict(receipt))
            return out

    def records(self) -> list[str]:
        """The raw log lines, in order."""
        with self._lock:
            return list(self._lines)

    def head_digest(self) -> str:
        return self._head

    # --- replay and verification ---

    @classmethod
    def replay(
        cls,
        lines: list[str],
        chain_id: str = "control-0",
        *,
        expose_master_key: bool = False,
    ) -> "ControlChain":
        """Rebuild a chain from its log, re-validating every record."""
        chain = cls(chain_id, expose_master_key=expose_master_key)
        for line in lines:
            if not line.strip():
                continue
            chain._ingest(line)
        return chain

    def _ingest(self, line: str) -> None:
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            raise IntegrityError("log line is not valid JSON") from None
        expected_keys = ["seq", "type", "kind", "emitter", "payload", "prev", "sig"]
        if list(record.keys()) != expected_keys:
            raise IntegrityError("log record has unexpected shape")
        if record["seq"] != len(self._lines):
            raise IntegrityError("log record sequence number out of order")
        if record["prev"] != self._head:
            raise IntegrityError("log record breaks the digest chain")
        if _canon(record) != line.strip():
            raise IntegrityError("log line is not in canonical form")
        doc = self._signing_doc(
            record["seq"], record["type"], record["kind"],
            record["emitter"], record["payload"], record["prev"],
        )
        if record["emitter"] == GENESIS_EMITTER:
            if record["sig"] != "" or record["kind"] != "fund":
                raise IntegrityError("malformed genesis record")
        else:
            account = self._accounts.get(record["emitter"])
            if account is None:
                raise IntegrityError("record emitted by an unknown account")
            try:
                ok = verify(
                    account.public_key,
                    _canon(doc).encode(),
                    bytes.fromhex(record["sig"]),
                )
            except Exception:
                ok = False
            if not ok:
                raise IntegrityError("record signature does not verify")
        self._apply(record)
        stripped = line.strip()
        self._lines.append(stripped)
        self._head = hash_bytes(stripped.encode()).hex()

    @classmethod
    def verify_log(cls, lines: list[str], chain_id: str = "control-0") -> str:
        """Full validation pass over a log; returns the head digest."""
        return cls.replay(lines, chain_id).head_digest()

"""Control chain: accounts, contracts, events, log integrity."""

from __future__ import annotations

import json
import random

import pytest

from umbra import chain as chain_mod
from umbra.chain import ControlChain
from umbra.crypto import keygen
from umbra.errors import (
    AlreadySet,
    ChainError,
    InsufficientBalance,
    IntegrityError,
    MappingExists,
    TokenExists,
    Unauthorized,
    UnknownAccount,
    UnknownMetadata,
    UnknownToken,
)


def fresh():
    rng = random.Random(99)
    chain = ControlChain("control-t")
    deployer = keygen(rng=rng)
    other = keygen(rng=rng)
    chain.fund(deployer.public_key, 1000)
    chain.fund(other.public_key, 500)
    return chain, deployer, other


class TestAccounts:
    def test_fund_creates_account(self):
        chain, deployer, _ = fresh()
        assert chain.has_account(deployer.wallet_hex)
        assert chain.balance_of(deployer.wallet_hex) == 1000

    def test_repeat_funding_accumulates(self):
        chain, deployer, _ = fresh()
        chain.fund(deployer.public_key, 50)
        assert chain.balance_of(deployer.wallet_hex) == 1050

    def test_unknown_account_cannot_act(self):
        chain, _, _ = fresh()
        stranger = keygen(rng=random.Random(5))
        with pytest.raises(UnknownAccount):
            chain.deploy_contract(stranger, chain_mod.CONTRACT_DISTRIBUTOR)

    def test_pay_moves_balance(self):
        chain, deployer, other = fresh()
        receipt = chain.pay(deployer, other.wallet_address, 300, memo="abc")
        assert chain.balance_of(deployer.wallet_hex) == 700
        assert chain.balance_of(other.wallet_hex) == 800
        assert receipt["amount"] == 300
        assert receipt["memo"] == "abc"

    def test_overdraft_rejected(self):
        chain, deployer, other = fresh()
        with pytest.raises(InsufficientBalance):
            chain.pay(deployer, other.wallet_address, 1001)

    def test_balance_is_conserved(self):
        chain, deployer, other = fresh()
        rng = random.Random(6)
        total = chain.balance_of(deployer.wallet_hex) + chain.balance_of(other.wallet_hex)
        for _ in range(20):
            src, dst = (deployer, other) if rng.random() < 0.5 else (other, deployer)
            amount = rng.randint(1, 50)
            if chain.balance_of(src.wallet_hex) >= amount:
                chain.pay(src, dst.wallet_address, amount)
        assert (
            chain.balance_of(deployer.wallet_hex) + chain.balance_of(other.wallet_hex)
            == total
        )

    def test_receipt_queries(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 10, memo="m1")
        chain.pay(deployer, other.wallet_address, 20, memo="m2")
        hits = chain.query_receipts(sender=deployer.wallet_hex, memo="m2")
        assert len(hits) == 1 and hits[0]["amount"] == 20
        assert not chain.query_receipts(sender=deployer.wallet_hex, memo="m3")
        assert chain.query_receipts(min_amount=15)[0]["memo"] == "m2"


class TestContracts:
    def test_deploy_addresses_are_distinct_and_stable(self):
        chain, deployer, _ = fresh()
        a = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        b = chain.deploy_contract(
            deployer, chain_mod.CONTRACT_ID_MANAGER, {"organizers": []}
        )
        assert a != b
        assert len(bytes.fromhex(a)) == 20
        assert chain.distributor_addresses() == [a]

    def test_mint_and_ownership(self):
        chain, deployer, other = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        token = b"\x11" * 16
        chain.mint(deployer, contract, token, deployer.wallet_address, "uri-1")
        assert chain.owner_of(contract, token) == deployer.wallet_address
        assert chain.token_uri(contract, token) == "uri-1"
        with pytest.raises(TokenExists):
            chain.mint(deployer, contract, token, deployer.wallet_address, "uri-2")
        chain.transfer(deployer, contract, token, other.wallet_address)
        assert chain.owner_of(contract, token) == other.wallet_address

    def test_transfer_requires_owner(self):
        chain, deployer, other = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        token = b"\x22" * 16
        chain.mint(deployer, contract, token, deployer.wallet_address, "uri")
        with pytest.raises(Unauthorized):
            chain.transfer(other, contract, token, other.wallet_address)

    def test_unknown_token(self):
        chain, deployer, _ = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        with pytest.raises(UnknownToken):
            chain.owner_of(contract, b"\x00" * 16)

    def test_metadata_mapping(self):
        chain, deployer, _ = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        token = b"\x33" * 16
        chain.mint(deployer, contract, token, deployer.wallet_address, "uri-x")
        chain.insert_mapping(deployer, contract, "uri-x", token)
        assert chain.resolve_metadata(contract, "uri-x") == token
        with pytest.raises(MappingExists):
            chain.insert_mapping(deployer, contract, "uri-x", token)
        with pytest.raises(UnknownMetadata):
            chain.resolve_metadata(contract, "uri-y")

    def test_abe_params_slot(self):
        chain, deployer, other = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        with pytest.raises(ChainError):
            chain.abe_public(contract)
        chain.set_abe(deployer, contract, b"public-bytes", b"master-bytes")
        assert chain.abe_public(contract) == b"public-bytes"
        with pytest.raises(AlreadySet):
            chain.set_abe(deployer, contract, b"p2", b"m2")
        with pytest.raises(Unauthorized):
            chain.abe_master(contract)

    def test_set_abe_is_deployer_only(self):
        chain, deployer, other = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        with pytest.raises(Unauthorized):
            chain.set_abe(other, contract, b"p", b"m")


class TestEvents:
    def test_emit_and_query(self):
        chain, deployer, other = fresh()
        chain.emit_event(deployer, "Requested", {"token": "aa", "wa": "w1"})
        chain.emit_event(other, "Requested", {"token": "bb", "wa": "w2"})
        chain.emit_event(deployer, "Verified", {"token": "aa", "result": "1"})
        assert len(chain.query_events()) == 3
        assert len(chain.query_events("Requested")) == 2
        assert chain.query_events("Requested", token="bb")[0]["payload"]["wa"] == "w2"
        assert chain.query_events("Requested", token="*") == chain.query_events("Requested")

    def test_unknown_kind_rejected(self):
        chain, deployer, _ = fresh()
        with pytest.raises(ChainError):
            chain.emit_event(deployer, "Bogus", {})

    def test_registered_requires_roster_membership(self):
        chain, deployer, other = fresh()
        id_manager = chain.deploy_contract(
            deployer, chain_mod.CONTRACT_ID_MANAGER, {"organizers": [deployer.wallet_hex]}
        )
        payload = {"contract": id_manager, "wa_c": "w", "wa_s": "w", "chi": ""}
        with pytest.raises(Unauthorized):
            chain.emit_event(other, "Registered", payload)
        event = chain.emit_event(deployer, "Registered", payload)
        assert event["kind"] == "Registered"
        assert chain.organizers_of(id_manager) == (deployer.wallet_hex,)


class TestLogIntegrity:
    def test_record_shape(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        last = chain.records()[-1]
        assert list(json.loads(last)) == [
            "seq",
            "type",
            "kind",
            "emitter",
            "payload",
            "prev",
            "sig",
        ]

    def test_replay_reproduces_state_and_head(self):
        chain, deployer, other = fresh()
        contract = chain.deploy_contract(deployer, chain_mod.CONTRACT_DISTRIBUTOR)
        token = b"\x44" * 16
        chain.mint(deployer, contract, token, deployer.wallet_address, "u")
        chain.pay(deployer, other.wallet_address, 77)
        replayed = ControlChain.replay(chain.records(), "control-t")
        assert replayed.head_digest() == chain.head_digest()
        assert replayed.balance_of(other.wallet_hex) == 577
        assert replayed.owner_of(contract, token) == deployer.wallet_address

    def test_forged_signature_detected(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        lines = chain.records()
        doc = json.loads(lines[-1])
        doc["sig"] = "00" * 64
        lines[-1] = json.dumps(doc, separators=(",", ":"))
        with pytest.raises(IntegrityError):
            ControlChain.replay(lines, "control-t")

    def test_reordered_records_detected(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        chain.pay(deployer, other.wallet_address, 6)
        lines = chain.records()
        lines[-1], lines[-2] = lines[-2], lines[-1]
        with pytest.raises(IntegrityError):
            ControlChain.replay(lines, "control-t")

    def test_dropped_record_detected(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        chain.pay(deployer, other.wallet_address, 6)
        lines = chain.records()
        del lines[-2]
        with pytest.raises(IntegrityError):
            ControlChain.replay(lines, "control-t")

    def test_payload_edit_detected(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        lines = chain.records()
        doc = json.loads(lines[-1])
        doc["payload"]["amount"] = "500"
        lines[-1] = json.dumps(doc, separators=(",", ":"))
        with pytest.raises(IntegrityError):
            ControlChain.replay(lines, "control-t")

    def test_verify_log_returns_head(self):
        chain, deployer, other = fresh()
        chain.pay(deployer, other.wallet_address, 5)
        assert ControlChain.verify_log(chain.records(), "control-t") == chain.head_digest()

"""CLI walkthroughs against temporary workspaces."""

from __future__ import annotations

import json

import pytest

from umbra.cli import main

ATTRS = "clinician,researcher,auditor"


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def ws_env(tmp_path, monkeypatch):
    root = tmp_path / "ws"
    monkeypatch.setenv("UMBRA_WORKSPACE", str(root))
    return root


def init_fine(capsys, seed="11aa"):
    code, out, err = run(
        [
            "init",
            "--attributes",
            ATTRS,
            "--threshold",
            "2",
            "--seed",
            seed,
            "--kdf-cost",
            "10",
        ],
        capsys,
    )
    assert code == 0, err
    return out


def share_file(tmp_path, capsys, actor, policy):
    payload = tmp_path / "data.txt"
    payload.write_bytes(b"shared payload contents")
    code, out, err = run(
        ["share", str(payload), "--as", actor, "--policy", policy, "--json"],
        capsys,
    )
    assert code == 0, err
    return json.loads(out)


class TestFineFlow:
    def test_full_walkthrough(self, ws_env, tmp_path, capsys):
        init_fine(capsys)
        code, _, err = run(["register", "ana", "--attrs", "clinician"], capsys)
        assert code == 0, err
        code, _, err = run(["register", "ben", "--attrs", "auditor"], capsys)
        assert code == 0, err

        doc = share_file(tmp_path, capsys, "ana", "clinician")
        meta = doc["metadata_address"]

        # owner path
        out_file = tmp_path / "ana_copy.bin"
        code, _, err = run(["acquire", meta, "--as", "ana", "-o", str(out_file)], capsys)
        assert code == 0, err
        assert out_file.read_bytes() == b"shared payload contents"

        # non-matching attributes are refused
        code, _, err = run(["acquire", meta, "--as", "ben", "-o", str(tmp_path / "x")], capsys)
        assert code == 1
        assert "denied" in err

        # matching consumer succeeds and the plain stdout path works
        code, _, err = run(["register", "cal", "--attrs", "clinician"], capsys)
        assert code == 0, err
        code, out, err = run(["request", meta, "--as", "cal", "--json"], capsys)
        assert code == 0, err
        token = json.loads(out)["token"]
        code, _, err = run(["acquire", meta, "--as", "cal", "-o", str(tmp_path / "c.bin")], capsys)
        assert code == 0, err

        # events carry the token, redacting nothing that matters
        code, out, err = run(["events", "--kind", "Verified", "--json"], capsys)
        assert code == 0, err
        events = json.loads(out)
        assert any(e["payload"]["token"] == token for e in events)

        # inspect resolves names, addresses, and tokens
        code, out, err = run(["inspect", "ana", "--json"], capsys)
        assert code == 0, err
        assert "wallet" in json.loads(out)
        code, out, err = run(["inspect", meta, "--json"], capsys)
        assert code == 0, err
        assert json.loads(out)["token"] == doc["token"]
        code, out, err = run(["inspect", doc["token"], "--json"], capsys)
        assert code == 0, err
        assert json.loads(out)["metadata_address"] == meta

    def test_double_init_refused(self, ws_env, capsys):
        init_fine(capsys)
        code, _, err = run(["init", "--attributes", ATTRS, "--seed", "22", "--kdf-cost", "10"], capsys)
        assert code == 1
        assert "already initialized" in err

    def test_chi_is_summarized_by_default(self, ws_env, capsys):
        init_fine(capsys)
        run(["register", "ana", "--attrs", "clinician"], capsys)
        code, out, err = run(["events", "--kind", "Registered"], capsys)
        assert code == 0, err
        assert " bytes>" in out
        code, out, err = run(["events", "--kind", "Registered", "--full"], capsys)
        assert " bytes>" not in out


class TestPaymentFlow:
    def test_pay_then_acquire(self, ws_env, tmp_path, capsys):
        code, _, err = run(
            ["init", "--mode", "payment", "--seed", "33cc", "--kdf-cost", "10"], capsys
        )
        assert code == 0, err
        run(["register", "seller"], capsys)
        run(["register", "buyer"], capsys)
        work = tmp_path / "work.bin"
        work.write_bytes(b"valuable work")
        code, out, err = run(
            ["share", str(work), "--as", "seller", "--price", "40", "--json"], capsys
        )
        assert code == 0, err
        meta = json.loads(out)["metadata_address"]

        code, _, err = run(["acquire", meta, "--as", "buyer", "-o", str(tmp_path / "b")], capsys)
        assert code == 1

        code, _, err = run(["pay", meta, "--as", "buyer"], capsys)
        assert code == 0, err
        code, _, err = run(["acquire", meta, "--as", "buyer", "-o", str(tmp_path / "b")], capsys)
        assert code == 0, err
        assert (tmp_path / "b").read_bytes() == b"valuable work"

    def test_attrs_meaningless_in_payment_mode(self, ws_env, capsys):
        run(["init", "--mode", "payment", "--seed", "44", "--kdf-cost", "10"], capsys)
        code, _, err = run(["register", "x", "--attrs", "clinician"], capsys)
        assert code == 2


class TestMultiChain:
    def test_peer_chain_flow(self, ws_env, tmp_path, capsys):
        init_fine(capsys)
        code, out, err = run(["chain", "add", "--control", "--json"], capsys)
        assert code == 0, err
        assert json.loads(out)["index"] == 0
        code, _, err = run(["chain", "add", "--storage"], capsys)
        assert code == 0, err
        code, _, err = run(["register", "dia", "--attrs", "clinician", "--chain", "0"], capsys)
        assert code == 0, err

        payload = tmp_path / "p.txt"
        payload.write_bytes(b"peer payload")
        code, out, err = run(
            ["share", str(payload), "--as", "dia", "--policy", "clinician", "--chain", "0", "--json"],
            capsys,
        )
        assert code == 0, err
        meta = json.loads(out)["metadata_address"]

        # routing finds the peer system from the master view
        code, _, err = run(["acquire", meta, "--as", "dia", "-o", str(tmp_path / "d")], capsys)
        assert code == 0, err
        assert (tmp_path / "d").read_bytes() == b"peer payload"

        code, out, err = run(["chain", "list", "--json"], capsys)
        assert code == 0, err
        peers = json.loads(out)["peers"]
        assert set(peers["control"]) == {"0"} and set(peers["storage"]) == {"0"}


class TestUsageErrors:
    def test_missing_workspace(self, ws_env, capsys):
        code, _, err = run(["events"], capsys)
        assert code == 1

    def test_share_needs_exactly_one_mode_flag(self, ws_env, tmp_path, capsys):
        init_fine(capsys)
        run(["register", "ana", "--attrs", "clinician"], capsys)
        f = tmp_path / "f"
        f.write_bytes(b"z")
        code, _, err = run(["share", str(f), "--as", "ana"], capsys)
        assert code == 2
        code, _, err = run(
            ["share", str(f), "--as", "ana", "--policy", "clinician", "--price", "3"],
            capsys,
        )
        assert code == 2

    def test_fine_init_needs_attributes(self, ws_env, capsys):
        code, _, err = run(["init", "--seed", "55", "--kdf-cost", "10"], capsys)
        assert code == 2


class TestDeterminism:
    def test_identical_sessions_produce_identical_logs(self, tmp_path, monkeypatch, capsys):
        def session(root):
            monkeypatch.setenv("UMBRA_WORKSPACE", str(root))
            assert main(
                [
                    "init",
                    "--attributes",
                    ATTRS,
                    "--seed",
                    "5eed",
                    "--kdf-cost",
                    "10",
                ]
            ) == 0
            assert main(["register", "ana", "--attrs", "clinician"]) == 0
            payload = tmp_path / "p.bin"
            payload.write_bytes(b"deterministic")
            assert main(["share", str(payload), "--as", "ana", "--policy", "clinician"]) == 0
            capsys.readouterr()
            return (root / "chains" / "control-0.log").read_bytes()

        assert session(tmp_path / "one") == session(tmp_path / "two")

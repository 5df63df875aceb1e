"""Workspace config parsing and on-disk persistence."""

from __future__ import annotations

import random

import pytest

from umbra.config import WorkspaceConfig, format_config, parse_config
from umbra.crypto import keygen
from umbra.errors import WorkspaceError
from umbra.workspace import Workspace, resolve_root


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = WorkspaceConfig()
        assert parse_config(format_config(cfg)) == cfg

    def test_full_round_trip(self):
        cfg = WorkspaceConfig(
            mode="payment",
            seed="11aa",
            kdf_cost=12,
            threshold=3,
            organizers=5,
            attributes=("a", "b"),
            funding=99,
            max_blob=1024,
        )
        assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# comment\n\nmode=payment\n")
        assert cfg.mode == "payment"

    def test_unknown_key_rejected(self):
        with pytest.raises(WorkspaceError):
            parse_config("colour=blue\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(WorkspaceError):
            parse_config("just words\n")

    def test_bad_values_rejected(self):
        for text in ("mode=loose", "kdf-cost=banana", "threshold=0", "seed=xyz"):
            with pytest.raises(WorkspaceError):
                parse_config(text + "\n")


class TestWorkspace:
    def test_resolve_root_precedence(self, monkeypatch, tmp_path):
        monkeypatch.delenv("UMBRA_WORKSPACE", raising=False)
        assert resolve_root(str(tmp_path / "flag")) == tmp_path / "flag"
        monkeypatch.setenv("UMBRA_WORKSPACE", str(tmp_path / "env"))
        assert resolve_root(None) == tmp_path / "env"
        assert resolve_root(str(tmp_path / "flag")) == tmp_path / "flag"
        monkeypatch.delenv("UMBRA_WORKSPACE")
        assert resolve_root(None).name == ".umbra"

    def test_layout_and_key_round_trip(self, tmp_path):
        ws = Workspace(tmp_path / "ws")
        ws.create_layout()
        assert not ws.exists()  # initialized only once config and state land
        ws.save_config(WorkspaceConfig())
        ws.save_state({"op_counter": 0})
        assert ws.exists()
        pair = keygen(rng=random.Random(1))
        ws.save_key("tester", pair)
        assert ws.has_key("tester")
        assert ws.load_key("tester") == pair
        assert "tester" in ws.key_names()
        with pytest.raises(WorkspaceError):
            ws.load_key("missing")

    def test_state_round_trip(self, tmp_path):
        ws = Workspace(tmp_path / "ws")
        ws.create_layout()
        ws.save_state({"op_counter": 3, "nested": {"a": 1}})
        assert ws.load_state() == {"op_counter": 3, "nested": {"a": 1}}

    def test_lock_excludes_second_holder(self, tmp_path):
        ws = Workspace(tmp_path / "ws")
        ws.create_layout()
        with ws:
            other = Workspace(tmp_path / "ws")
            with pytest.raises(WorkspaceError):
                other.lock()
        # released on exit
        other.lock()
        other.unlock()

    def test_command_rng_streams_differ_per_counter(self, tmp_path):
        ws = Workspace(tmp_path / "ws")
        ws.create_layout()
        cfg = WorkspaceConfig(seed="ab" * 8)
        state = {"op_counter": 0}
        first = ws.command_rng(cfg, state).random()
        second = ws.command_rng(cfg, state).random()
        assert state["op_counter"] == 2
        assert first != second
        # same seed and counter reproduce the stream
        replay = ws.command_rng(cfg, {"op_counter": 0}).random()
        assert replay == first

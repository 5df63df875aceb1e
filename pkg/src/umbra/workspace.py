"""On-disk workspace: keystore, chain logs, storage trees, and run state.

Layout under the workspace root:

    config.txt            documented key=value configuration
    state.json            deployment state and the command counter
    keys/<name>.key       one hex secret per line
    shares/<name>.share   organizer share files (binary wire format)
    chains/<id>.log       control chain logs, line-delimited records
    storage/<id>/         content-addressed trees (blobs/ + index.log)
    reports/              sweep output (csv + png)
    .lock                 exclusive-creation lock while a command runs

Control chains are persisted by rewriting their full log after a
command; storage chains persist incrementally through their root mode.
Each command draws its randomness from the workspace seed combined with
a persistent counter, so a scripted session replays byte-identically.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from random import Random

from . import abe
from .chain import ControlChain
from .config import WorkspaceConfig, format_config, parse_config
from .crypto import KeyPair, hash_bytes
from .errors import WorkspaceError, WorkspaceLocked
from .protocols import ChainRegistry, ControlPeer, StoragePeer, SystemHandle
from .storage import StorageChain

ENV_WORKSPACE = "UMBRA_WORKSPACE"
DEFAULT_WORKSPACE = ".umbra"


def resolve_root(flag_value: str | None) -> Path:
    """Workspace path resolution: flag beats env beats default."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_WORKSPACE)
    if env:
        return Path(env)
    return Path(DEFAULT_WORKSPACE)


class Workspace:
    def __init__(self, root: Path):
        self.root = Path(root)

    # --- layout ---

    @property
    def config_path(self) -> Path:
        return self.root / "config.txt"

    @property
    def state_path(self) -> Path:
        return self.root / "state.json"

    def exists(self) -> bool:
        return self.config_path.exists() and self.state_path.exists()

    def create_layout(self) -> None:
        for sub in ("keys", "shares", "chains", "storage", "reports"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # --- locking ---

    def lock(self) -> None:
        try:
            fd = os.open(self.root / ".lock", os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLocked(
                f"workspace {self.root} is locked by another command"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)

    def unlock(self) -> None:
        try:
            os.unlink(self.root / ".lock")
        except FileNotFoundError:
            pass

    def __enter__(self) -> "Workspace":
        self.lock()
        return self

    def __exit__(self, *exc) -> None:
        self.unlock()

    # --- config and state ---

    def load_config(self) -> WorkspaceConfig:
        if not self.config_path.exists():
            raise WorkspaceError(f"no workspace at {self.root} (missing config.txt)")
        return parse_config(self.config_path.read_text(encoding="utf-8"))

    def save_config(self, cfg: WorkspaceConfig) -> None:
        self.config_path.write_text(format_config(cfg), encoding="utf-8")

    def load_state(self) -> dict:
        if not self.state_path.exists():
            raise WorkspaceError(f"no workspace at {self.root} (missing state.json)")
        return json.loads(self.state_path.read_text(encoding="utf-8"))

    def save_state(self, state: dict) -> None:
        self.state_path.write_text(
            json.dumps(state, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )

    # --- keystore ---

    def save_key(self, name: str, pair: KeyPair) -> None:
        path = self.root / "keys" / f"{name}.key"
        path.write_text(pair.secret_key.hex() + "\n", encoding="utf-8")

    def load_key(self, name: str) -> KeyPair:
        path = self.root / "keys" / f"{name}.key"
        if not path.exists():
            raise WorkspaceError(f"no key named {name!r} in the workspace keystore")
        secret = bytes.fromhex(path.read_text(encoding="utf-8").strip())
        return KeyPair.from_secret(secret)

    def has_key(self, name: str) -> bool:
        return (self.root / "keys" / f"{name}.key").exists()

    def key_names(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "keys").glob("*.key"))

    def save_share(self, name: str, blob: bytes) -> None:
        (self.root / "shares" / f"{name}.share").write_bytes(blob)

    # --- chains ---

    def chain_log_path(self, chain_id: str) -> Path:
        return self.root / "chains" / f"{chain_id}.log"

    def save_control_chain(self, chain: ControlChain) -> None:
        lines = chain.records()
        text = "\n".join(lines) + ("\n" if lines else "")
        self.chain_log_path(chain.chain_id).write_text(text, encoding="utf-8")

    def load_control_chain(self, chain_id: str, *, expose_master_key: bool = False) -> ControlChain:
        path = self.chain_log_path(chain_id)
        lines = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
        return ControlChain.replay(lines, chain_id, expose_master_key=expose_master_key)

    def storage_root(self, chain_id: str) -> Path:
        return self.root / "storage" / chain_id

    def load_storage_chain(self, chain_id: str, *, max_blob_size: int) -> StorageChain:
        return StorageChain.load(
            self.storage_root(chain_id), chain_id, max_blob_size=max_blob_size
        )

    # --- per-command randomness ---

    def command_rng(self, cfg: WorkspaceConfig, state: dict) -> Random:
        """Deterministic per-command stream; bumps the persisted counter."""
        counter = state.get("op_counter", 0)
        state["op_counter"] = counter + 1
        seed_material = bytes.fromhex(cfg.seed) + counter.to_bytes(8, "little")
        return Random(int.from_bytes(hash_bytes(seed_material), "big"))

    # --- handle assembly ---

    def build_handle(self, cfg: WorkspaceConfig, state: dict) -> SystemHandle:
        """Rehydrate the SystemHandle from logs, trees, and the keystore."""
        control = self.load_control_chain(state["master_control_chain"])
        storage = self.load_storage_chain(
            state["master_storage_chain"], max_blob_size=cfg.max_blob
        )
        organizer_keys = tuple(
            self.load_key(name) for name in state["organizer_key_names"]
        )
        handle = SystemHandle(
            mode=cfg.mode,
            control=control,
            storage=storage,
            distributor=state["distributor"],
            id_manager=state["id_manager"],
            master_control=self.load_key("master-control"),
            master_storage=self.load_key("master-storage"),
            organizer_keys=organizer_keys,
            threshold=cfg.threshold,
            abe_params=abe.params_from_bytes(bytes.fromhex(state["abe_params"])),
            abe_master=abe.master_from_bytes(bytes.fromhex(state["abe_master"])),
            seal_key=bytes.fromhex(state["seal_key"]),
            kdf_cost=cfg.kdf_cost,
            funding=cfg.funding,
            cipher_suite=state["cipher_suite"],
            control_linker=state["control_linker"],
            storage_linker=state["storage_linker"],
            chain_manager=state.get("chain_manager"),
        )
        peers = state.get("peers", {"control": {}, "storage": {}})
        if handle.chain_manager is not None:
            registry = ChainRegistry(manager_contract=handle.chain_manager)
            for index_str, entry in peers["control"].items():
                index = int(index_str)
                registry.control_peers[index] = ControlPeer(
                    index=index,
                    chain=self.load_control_chain(entry["chain"]),
                    distributor=entry["distributor"],
                    id_manager=entry["id_manager"],
                    master=self.load_key(entry["key"]),
                )
            for index_str, entry in peers["storage"].items():
                index = int(index_str)
                registry.storage_peers[index] = StoragePeer(
                    index=index,
                    chain=self.load_storage_chain(
                        entry["chain"], max_blob_size=cfg.max_blob
                    ),
                    master=self.load_key(entry["key"]),
                    cipher_suite=entry["cipher_suite"],
                    control_linker=entry["control_linker"],
                    storage_linker=entry["storage_linker"],
                )
            handle.registry = registry
        return handle

    def persist_handle(self, handle: SystemHandle, state: dict) -> None:
        """Write back every control chain log; storage trees persist live."""
        self.save_control_chain(handle.control)
        if handle.registry is not None:
            for peer in handle.registry.control_peers.values():
                self.save_control_chain(peer.chain)
        self.save_state(state)

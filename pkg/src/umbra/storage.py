"""Content-addressed storage chain simulator.

Blobs are immutable and named by their digest: the address is
``cas1-<hex of the 32-byte digest>``. Every read re-hashes the stored
bytes against the address, so corruption of a blob at rest surfaces as
IntegrityError on get. An append-only index log records who stored what.

On-disk layout (when a root directory is given): one file per blob under
``blobs/`` named by its address, plus a line-delimited ``index.log`` of
JSON entries ``{"addr","uploader","uploader_key","sig"}``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .crypto import KeyPair, hash_bytes, sign, verify
from .errors import EmptyBlob, IntegrityError, NotFound, TooLarge

ADDRESS_PREFIX = "cas1-"
DEFAULT_MAX_BLOB = 64 * 1024 * 1024


def address_for(data: bytes) -> str:
    return ADDRESS_PREFIX + hash_bytes(data).hex()


def is_address(text: str) -> bool:
    if not text.startswith(ADDRESS_PREFIX):
        return False
    digest = text[len(ADDRESS_PREFIX):]
    if len(digest) != 64:
        return False
    try:
        bytes.fromhex(digest)
    except ValueError:
        return False
    return True


class StorageChain:
    """In-process content-addressed store with optional disk persistence."""

    def __init__(
        self,
        chain_id: str = "storage-0",
        *,
        max_blob_size: int = DEFAULT_MAX_BLOB,
        root: Path | str | None = None,
    ):
        self.chain_id = chain_id
        self.max_blob_size = max_blob_size
        self.root = Path(root) if root is not None else None
        self._blobs: dict[str, bytes] = {}
        self._index: list[dict] = []
        if self.root is not None:
            (self.root / "blobs").mkdir(parents=True, exist_ok=True)
            index_path = self.root / "index.log"
            if not index_path.exists():
                index_path.write_bytes(b"")

    def put(self, data: bytes, uploader: KeyPair) -> str:
        """Store a blob; returns its address. Idempotent for identical content."""
        if len(data) == 0:
            raise EmptyBlob("refusing to store an empty blob")
        if len(data) > self.max_blob_size:
            raise TooLarge(f"blob of {len(data)} bytes exceeds {self.max_blob_size}")
        addr = address_for(data)
        if addr in self._blobs:
            return addr
        entry = {
            "addr": addr,
            "uploader": uploader.wallet_hex,
            "uploader_key": uploader.public_key.hex(),
            "sig": sign(uploader.secret_key, addr.encode()).hex(),
        }
        self._blobs[addr] = bytes(data)
        self._index.append(entry)
        if self.root is not None:
            (self.root / "blobs" / addr).write_bytes(data)
            with open(self.root / "index.log", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
        return addr

    def get(self, address: str) -> bytes:
        """Fetch a blob; the digest is re-checked against the address."""
        if not is_address(address):
            raise NotFound(f"malformed storage address {address!r}")
        data = self._blobs.get(address)
        if data is None:
            raise NotFound(f"no blob stored at {address}")
        if address_for(data) != address:
            raise IntegrityError("stored blob does not match its address")
        return data

    def has(self, address: str) -> bool:
        return address in self._blobs

    def __len__(self) -> int:
        return len(self._blobs)

    def entries(self) -> list[dict]:
        """Copy of the index log entries, in append order."""
        return [dict(e) for e in self._index]

    def verify_index(self) -> None:
        """Check every index entry's uploader signature; IntegrityError on failure."""
        for entry in self._index:
            key = bytes.fromhex(entry["uploader_key"])
            if not verify(key, entry["addr"].encode(), bytes.fromhex(entry["sig"])):
                raise IntegrityError("index entry signature does not verify")

    @classmethod
    def load(
        cls,
        root: Path | str,
        chain_id: str = "storage-0",
        *,
        max_blob_size: int = DEFAULT_MAX_BLOB,
    ) -> "StorageChain":
        """Rehydrate a store from its on-disk layout."""
        chain = cls(chain_id, max_blob_size=max_blob_size, root=root)
        index_path = chain.root / "index.log"
        if index_path.exists():
            for line in index_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                chain._index.append(entry)
                blob_path = chain.root / "blobs" / entry["addr"]
                if blob_path.exists():
                    chain._blobs[entry["addr"]] = blob_path.read_bytes()
        return chain

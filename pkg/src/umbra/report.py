"""Performance sweep: protect-and-authorize timings across payload sizes.

Produces one row per payload size with median timings for the full
solidify and authorize flows plus the isolated key-derivation and
payload-cipher costs, written as CSV and rendered to a PNG figure. The
interesting shape: the fixed key-derivation floor dominates, while the
cipher cost grows (at most linearly) with size.
"""

from __future__ import annotations

import csv
import statistics
import time
from pathlib import Path
from random import Random

from . import crypto, protocols
from .chain import ControlChain
from .protocols import RegistrationRecord
from .storage import StorageChain

DEFAULT_SIZES = (1024, 2048, 4096, 8192, 16384)

CSV_COLUMNS = (
    "size_bytes",
    "solidify_ms",
    "authorize_ms",
    "kdf_ms",
    "aead_encrypt_ms",
    "aead_decrypt_ms",
)


def _median_ms(fn, repeats: int) -> float:
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1000.0)
    return statistics.median(samples)


def run_sweep(
    sizes: tuple[int, ...] = DEFAULT_SIZES,
    *,
    repeats: int = 3,
    kdf_cost: int = crypto.DEFAULT_KDF_COST,
    seed: int = 20_24,
) -> list[dict]:
    """Time the full flows per payload size on a fresh in-memory system."""
    rng = Random(seed)
    organizers = [crypto.keygen(rng=rng) for _ in range(2)]
    control = ControlChain("bench-control")
    storage = StorageChain("bench-storage")
    handle = protocols.initialize(
        control, storage, organizers, 2, ["reader"], rng=rng, kdf_cost=kdf_cost
    )
    provider_c = crypto.keygen(rng=rng)
    provider_s = crypto.keygen(rng=rng)
    protocols.register_participant(
        handle,
        RegistrationRecord(provider_c.public_key, provider_s.public_key, frozenset()),
        approvals=organizers,
    )
    consumer_c = crypto.keygen(rng=rng)
    consumer_s = crypto.keygen(rng=rng)
    protocols.register_participant(
        handle,
        RegistrationRecord(
            consumer_c.public_key, consumer_s.public_key, frozenset({"reader"})
        ),
        approvals=organizers,
    )

    aead_key = crypto.rand_bytes(rng, 32)
    kdf_secret = crypto.rand_bytes(rng, 32)
    rows = []
    for size in sizes:
        solidify_samples = []
        authorize_samples = []
        for _ in range(repeats):
            payload = crypto.rand_bytes(rng, size)
            start = time.perf_counter()
            result = protocols.solidify(
                handle, provider_c, provider_s, payload, policy="reader"
            )
            solidify_samples.append((time.perf_counter() - start) * 1000.0)
            start = time.perf_counter()
            out = protocols.authorize_and_decrypt(
                handle, consumer_c, result.metadata_address
            )
            authorize_samples.append((time.perf_counter() - start) * 1000.0)
            assert out == payload

        kdf_nonce = crypto.rand_bytes(rng, 16)
        kdf_ms = _median_ms(
            lambda: crypto.kdf(kdf_secret, kdf_nonce, cost=kdf_cost), repeats
        )
        data = crypto.rand_bytes(rng, size)
        blob = crypto.aead_encrypt(aead_key, data)
        enc_ms = _median_ms(lambda: crypto.aead_encrypt(aead_key, data), max(repeats, 9))
        dec_ms = _median_ms(lambda: crypto.aead_decrypt(aead_key, blob), max(repeats, 9))
        rows.append(
            {
                "size_bytes": size,
                "solidify_ms": round(statistics.median(solidify_samples), 3),
                "authorize_ms": round(statistics.median(authorize_samples), 3),
                "kdf_ms": round(kdf_ms, 3),
                "aead_encrypt_ms": round(enc_ms, 4),
                "aead_decrypt_ms": round(dec_ms, 4),
            }
        )
    return rows


def write_csv(rows: list[dict], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def fit_slope(rows: list[dict], column: str) -> tuple[float, float]:
    """Least-squares line (slope per KiB, intercept ms) for column vs size."""
    xs = [r["size_bytes"] / 1024.0 for r in rows]
    ys = [float(r[column]) for r in rows]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var = sum((x - mean_x) ** 2 for x in xs)
    if var == 0:
        return 0.0, mean_y
    slope = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / var
    return slope, mean_y - slope * mean_x


def render_figure(rows: list[dict], path: Path | str) -> None:
    """Two panels: flow totals vs size, and the cipher cost with its fit."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes_kib = [r["size_bytes"] / 1024.0 for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    ax1.plot(sizes_kib, [r["solidify_ms"] for r in rows], "o-", label="solidify")
    ax1.plot(sizes_kib, [r["authorize_ms"] for r in rows], "s-", label="authorize")
    ax1.axhline(
        rows[0]["kdf_ms"], color="gray", linestyle="--", label="key-derivation floor"
    )
    ax1.set_xlabel("payload size (KiB)")
    ax1.set_ylabel("time (ms)")
    ax1.set_title("flow timings")
    ax1.legend()
    ax1.grid(True, alpha=0.3)

    enc = [r["aead_encrypt_ms"] for r in rows]
    slope, intercept = fit_slope(rows, "aead_encrypt_ms")
    ax2.plot(sizes_kib, enc, "o", label="payload cipher (encrypt)")
    ax2.plot(
        sizes_kib,
        [slope * x + intercept for x in sizes_kib],
        "-",
        label=f"fit: {slope:.4f} ms/KiB",
    )
    ax2.set_xlabel("payload size (KiB)")
    ax2.set_ylabel("time (ms)")
    ax2.set_title("cipher cost vs size")
    ax2.legend()
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)

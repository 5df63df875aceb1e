"""Workspace configuration: a documented plain-text key=value file.

Recognized keys (all others are rejected):

    mode        = fine | payment          sharing mode of this deployment
    seed        = <hex>                   workspace RNG seed (32 bytes hex)
    digest      = sha3-256                digest algorithm (informational)
    kdf-cost    = 10..22                  KDF work-factor exponent
    threshold   = <int>                   organizer quorum g
    organizers  = <int>                   organizer count
    attributes  = a,b,c                   attribute universe (fine mode)
    funding     = <int>                   genesis balance per account
    max-blob    = <int>                   storage blob size cap in bytes

Lines starting with ``#`` and blank lines are ignored. Whitespace around
keys and values is stripped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import DEFAULT_KDF_COST, DIGEST_NAME
from .errors import WorkspaceError
from .storage import DEFAULT_MAX_BLOB

_KNOWN_KEYS = {
    "mode",
    "seed",
    "digest",
    "kdf-cost",
    "threshold",
    "organizers",
    "attributes",
    "funding",
    "max-blob",
}


@dataclass
class WorkspaceConfig:
    mode: str = "fine"
    seed: str = ""
    digest: str = DIGEST_NAME
    kdf_cost: int = DEFAULT_KDF_COST
    threshold: int = 2
    organizers: int = 3
    attributes: tuple[str, ...] = ()
    funding: int = 1_000_000
    max_blob: int = DEFAULT_MAX_BLOB


def parse_config(text: str) -> WorkspaceConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise WorkspaceError(f"config line {lineno} is not key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            raise WorkspaceError(f"unknown config key {key!r} on line {lineno}")
        values[key] = value

    cfg = WorkspaceConfig()
    if "mode" in values:
        if values["mode"] not in ("fine", "payment"):
            raise WorkspaceError(f"mode must be fine or payment, not {values['mode']!r}")
        cfg.mode = values["mode"]
    if "seed" in values:
        try:
            bytes.fromhex(values["seed"])
        except ValueError:
            raise WorkspaceError("seed must be hex") from None
        cfg.seed = values["seed"]
    if "digest" in values:
        if values["digest"] != DIGEST_NAME:
            raise WorkspaceError(f"unsupported digest {values['digest']!r}")
        cfg.digest = values["digest"]
    for key, attr, lowest in (
        ("kdf-cost", "kdf_cost", 10),
        ("threshold", "threshold", 1),
        ("organizers", "organizers", 1),
        ("funding", "funding", 0),
        ("max-blob", "max_blob", 1),
    ):
        if key in values:
            try:
                number = int(values[key])
            except ValueError:
                raise WorkspaceError(f"{key} must be an integer") from None
            if number < lowest:
                raise WorkspaceError(f"{key} must be at least {lowest}")
            setattr(cfg, attr, number)
    if "attributes" in values:
        cfg.attributes = tuple(
            a.strip() for a in values["attributes"].split(",") if a.strip()
        )
    return cfg


def format_config(cfg: WorkspaceConfig) -> str:
    lines = [
        "# umbra workspace configuration",
        f"mode = {cfg.mode}",
        f"seed = {cfg.seed}",
        f"digest = {cfg.digest}",
        f"kdf-cost = {cfg.kdf_cost}",
        f"threshold = {cfg.threshold}",
        f"organizers = {cfg.organizers}",
        f"funding = {cfg.funding}",
        f"max-blob = {cfg.max_blob}",
    ]
    if cfg.attributes:
        lines.append(f"attributes = {','.join(cfg.attributes)}")
    return "\n".join(lines) + "\n"

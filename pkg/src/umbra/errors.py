"""Exception taxonomy for the umbra package.

Every error raised by the library derives from UmbraError so callers can
catch the whole family with one clause. Chain-level failures additionally
derive from ChainError.
"""

from __future__ import annotations


class UmbraError(Exception):
    """Base class for all errors raised by this package."""


# --- key material and signing ---

class InvalidSeed(UmbraError):
    """Seed material has the wrong length or is otherwise unusable."""


class InvalidKey(UmbraError):
    """Key bytes are malformed (wrong length, point not on curve, ...)."""


class InvalidSignature(UmbraError):
    """Signature bytes are structurally malformed (not merely invalid)."""


class IntegrityError(UmbraError):
    """Authenticated decryption or a digest check failed."""


# --- secret sharing ---

class InvalidThreshold(UmbraError):
    """Threshold outside 1 <= threshold <= share count."""


class OutOfRange(UmbraError):
    """A field element does not lie in [0, modulus)."""


class InsufficientShares(UmbraError):
    """Fewer distinct shares supplied than the reconstruction threshold."""


class DuplicateShare(UmbraError):
    """Two supplied shares carry the same evaluation index."""


class MismatchedShares(UmbraError):
    """Supplied shares disagree on modulus or threshold metadata."""


# --- attribute-based encryption ---

class InvalidAttributeSpace(UmbraError):
    """Attribute universe is empty, oversized, or contains duplicates."""


class UnknownAttribute(UmbraError):
    """Attribute not present in the configured attribute universe."""


class PolicyError(UmbraError):
    """Access policy failed to parse or is structurally invalid."""


class PolicyNotSatisfied(UmbraError):
    """Key's attribute set does not satisfy the ciphertext policy."""


class KeyBindingError(UmbraError):
    """User key components do not match their binding tag."""


# --- control chain ---

class ChainError(UmbraError):
    """Base class for control-chain failures."""


class UnknownAccount(ChainError):
    """Wallet address has no account on this chain."""


class InvalidContract(ChainError):
    """Address does not name a deployed contract of the expected kind."""


class AlreadySet(ChainError):
    """A write-once contract variable was already written."""


class Unauthorized(UmbraError):
    """Caller lacks the right to perform the operation."""


class TokenExists(ChainError):
    """Token id already minted."""


class UnknownToken(ChainError):
    """Token id was never minted."""


class UnknownMetadata(ChainError):
    """No token is mapped to this metadata address."""


class MappingExists(ChainError):
    """Metadata address already mapped to a token."""


class InsufficientBalance(ChainError):
    """Account balance cannot cover the transfer."""


class IndexExists(ChainError):
    """Registry index already assigned to a chain."""


# --- storage chain ---

class EmptyBlob(UmbraError):
    """Attempted to store a zero-length blob."""


class TooLarge(UmbraError):
    """Blob exceeds the configured size limit."""


class NotFound(UmbraError):
    """No blob stored under this address."""


# --- protocol flows ---

class EmptyData(UmbraError):
    """Refused to protect an empty payload."""


class NonExistence(UmbraError):
    """Consumer identity is not registered on the control chain."""


class NotVerified(UmbraError):
    """No affirmative verification event exists for this consumer/token."""


class QuorumNotMet(UmbraError):
    """Fewer organizer approvals than the registration quorum."""


class Rejected(UmbraError):
    """An organizer rejected the registration request."""


class AlreadyInitialized(UmbraError):
    """Target chain already hosts a deployed sharing system."""


class UnknownContract(UmbraError):
    """Contract address not present in the chain registry."""


# --- workspace / CLI ---

class WorkspaceError(UmbraError):
    """Workspace directory is missing, malformed, or not initialized."""


class WorkspaceLocked(WorkspaceError):
    """Another process holds the workspace lock."""

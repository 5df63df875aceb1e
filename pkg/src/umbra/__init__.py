"""umbra: privacy-preserving, access-controlled data sharing over simulated
control and storage chains.

The package provides the cryptographic toolkit (signatures, threshold
secret sharing, attribute-based encryption, authenticated payload
encryption), in-process chain simulators, the capsule format that carries
wrapped payload keys, and the end-to-end sharing protocols, plus a CLI.
"""

from .errors import UmbraError

__version__ = "0.1.0"

__all__ = ["UmbraError", "__version__"]

"""Hashing, MAC, and simulated signature primitives.

All digests and keys are ``DIGEST_BYTES`` octets wide (80 bits by default; a
short tag is enough for ephemeral safety beacons). Two chain hash roles and
the message-digest role are kept apart with single-octet domain tags, so the
functions behave as distinct hash functions while sharing one underlying
256-bit hash.

Everything here is a pure function; no shared mutable state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from hashlib import sha256

DIGEST_BITS = 80
DIGEST_BYTES = DIGEST_BITS // 8

# Domain tags, prepended to the input before hashing.
TAG_CHAIN = b"\x01"      # key-chain hashing and MACs
TAG_MAC_KEY = b"\x02"    # MAC-key derivation from a chain key
TAG_MSG = b"\x03"        # message digests (queue identifiers)
TAG_SIG = b"\x04"        # simulated signature binding

_pack_u64 = struct.Struct("<Q").pack


def hash_h(data: bytes, nbytes: int = DIGEST_BYTES) -> bytes:
    """One-way hash used to walk key chains; truncated to the digest width."""
    return sha256(TAG_CHAIN + data).digest()[:nbytes]


def hash_h_prime(key: bytes, nbytes: int = DIGEST_BYTES) -> bytes:
    """Derive the MAC key for a chain key. Domain-separated from hash_h."""
    return sha256(TAG_MAC_KEY + key).digest()[:nbytes]


def mac(key: bytes, data: bytes, nbytes: int = DIGEST_BYTES) -> bytes:
    """Keyed MAC, defined as hash_h(key || data). Verify by recomputing."""
    return sha256(TAG_CHAIN + key + data).digest()[:nbytes]


def msg_digest(encoded_message: bytes, nbytes: int = DIGEST_BYTES) -> bytes:
    """Short identifier of a canonically encoded beacon message."""
    return sha256(TAG_MSG + encoded_message).digest()[:nbytes]


@dataclass(frozen=True, slots=True)
class SignatureToken:
    """Simulation-mode signature.

    ``valid`` is ground truth set by the producer: honest signers set it,
    adversaries attaching random bytes do not. ``blob`` binds the signer id
    and the signed payload so any tampering is detected on verification.
    The CPU cost of verifying is charged by the simulator, not here.
    """

    signer_pc_id: int
    valid: bool
    blob: bytes


def sig_blob(pc_id: int, data: bytes) -> bytes:
    return sha256(TAG_SIG + _pack_u64(pc_id) + data).digest()[:DIGEST_BYTES]


def sign(pc_secret: int, data: bytes) -> SignatureToken:
    """Sign ``data`` under the pseudonym's key handle (the pc id in simulation)."""
    return SignatureToken(pc_secret, True, sig_blob(pc_secret, data))


def verify_signature(pc_id: int, token: SignatureToken, data: bytes) -> bool:
    """True iff the token is valid, signed by ``pc_id``, and binds ``data``."""
    return (
        token.valid
        and token.signer_pc_id == pc_id
        and token.blob == sig_blob(pc_id, data)
    )

"""Beacon message structures and their canonical byte encoding.

The wire layout is fixed-width, little-endian, and version-tagged; it is the
byte string that gets signed, MACed, and digested, so it must be injective
and stable across encode/decode round trips. All timestamps are integer
microseconds since the simulation epoch.

Layout (in order): version octet, status (4 float64), timestamp, disclosed
key, piggyback count octet, piggyback digests, pc id, pc validity window,
signature (signer id, validity octet, blob), and, for a full message, the
trailing MAC.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .crypto import DIGEST_BYTES, SignatureToken, msg_digest

WIRE_VERSION = 0x01

_HEAD = struct.Struct("<Bddddq")    # version, x, y, speed, heading, t_i_us
_PC_PART = struct.Struct("<Qqq")    # pc_id, valid_from_us, valid_to_us
_SIG_PART = struct.Struct("<QB")    # signer_pc_id, validity flag
SIG_WIRE_LEN = _SIG_PART.size + DIGEST_BYTES

_FIXED_BEACON_LEN = _HEAD.size + DIGEST_BYTES + 1 + _PC_PART.size + SIG_WIRE_LEN


class DecodeError(ValueError):
    """Raised for truncated, overlong, or malformed wire bytes."""


@dataclass(frozen=True, slots=True)
class PseudonymCertificate:
    """Short-lived anonymous credential; one valid per node at a time.

    ``holder_node`` and ``legit`` are simulation bookkeeping (ground truth
    for metrics and adversary accounting). They are never read by receiver
    logic, are not on the wire, and do not take part in equality.
    """

    pc_id: int
    valid_from_us: int
    valid_to_us: int
    public_key_handle: int
    holder_node: int = field(default=-1, compare=False)
    legit: bool = field(default=True, compare=False)


@dataclass(frozen=True, slots=True)
class VehicleStatus:
    x: float
    y: float
    speed: float
    heading: float


@dataclass(frozen=True, slots=True)
class SignedBeacon:
    status: VehicleStatus
    t_i_us: int
    disclosed_key: bytes
    piggyback: tuple[bytes, ...]
    pc: PseudonymCertificate
    signature: SignatureToken


@dataclass(frozen=True, slots=True)
class BeaconMessage:
    beacon: SignedBeacon
    mac: bytes


def encode_signing_input(b: SignedBeacon) -> bytes:
    """The signed portion of a beacon: everything up to the signature."""
    s = b.status
    parts = [
        _HEAD.pack(WIRE_VERSION, s.x, s.y, s.speed, s.heading, b.t_i_us),
        b.disclosed_key,
        bytes((len(b.piggyback),)),
    ]
    parts.extend(b.piggyback)
    parts.append(_PC_PART.pack(b.pc.pc_id, b.pc.valid_from_us, b.pc.valid_to_us))
    return b"".join(parts)


def encode_beacon(b: SignedBeacon) -> bytes:
    sig = b.signature
    return (encode_signing_input(b)
            + _SIG_PART.pack(sig.signer_pc_id, 1 if sig.valid else 0)
            + sig.blob)


def encode_message(m: BeaconMessage) -> bytes:
    return encode_beacon(m.beacon) + m.mac


def decode_message(data: bytes) -> BeaconMessage:
    """Parse wire bytes back into a message; strict about length and version."""
    beacon, off = _decode_beacon(data)
    if len(data) != off + DIGEST_BYTES:
        raise DecodeError(f"bad message length {len(data)}")
    return BeaconMessage(beacon, data[off:off + DIGEST_BYTES])


def decode_beacon(data: bytes) -> SignedBeacon:
    beacon, off = _decode_beacon(data)
    if len(data) != off:
        raise DecodeError(f"bad beacon length {len(data)}")
    return beacon


def _decode_beacon(data: bytes) -> tuple[SignedBeacon, int]:
    if len(data) < _FIXED_BEACON_LEN:
        raise DecodeError("truncated beacon")
    version, x, y, speed, heading, t_i_us = _HEAD.unpack_from(data, 0)
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version:#x}")
    off = _HEAD.size
    disclosed = data[off:off + DIGEST_BYTES]
    off += DIGEST_BYTES
    npb = data[off]
    off += 1
    need = off + npb * DIGEST_BYTES + _PC_PART.size + SIG_WIRE_LEN
    if len(data) < need:
        raise DecodeError("truncated beacon")
    piggyback = tuple(data[off + i * DIGEST_BYTES:off + (i + 1) * DIGEST_BYTES]
                      for i in range(npb))
    off += npb * DIGEST_BYTES
    pc_id, vf, vt = _PC_PART.unpack_from(data, off)
    off += _PC_PART.size
    signer, valid = _SIG_PART.unpack_from(data, off)
    off += _SIG_PART.size
    blob = data[off:off + DIGEST_BYTES]
    off += DIGEST_BYTES
    pc = PseudonymCertificate(pc_id, vf, vt, public_key_handle=pc_id)
    beacon = SignedBeacon(VehicleStatus(x, y, speed, heading), t_i_us,
                          disclosed, piggyback, pc,
                          SignatureToken(signer, bool(valid), blob))
    return beacon, off


def beacon_hash(m: BeaconMessage) -> bytes:
    """Digest identifying a message in queues and piggyback lists."""
    return msg_digest(encode_message(m))

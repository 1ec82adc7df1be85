"""Per-node beacon production and adversarial traffic generation.

A sender broadcasts one beacon per slot at a fixed phase offset within the
slot. Each beacon is signed under the currently valid pseudonym, MACed with
the slot's chain key, and carries up to ``alpha`` digests of the freshest
beacons this node verified by signature (only those; results obtained
cooperatively or via MACs are not shared).

Pseudonym lifetimes are aligned to a global epoch and abut exactly; rotation
mints a fresh certificate and an independent key chain so beacons across a
rotation share no key material.
"""

from __future__ import annotations

import struct
from hashlib import sha256

from .chain import TeslaChain, generate_chain
from .crypto import DIGEST_BYTES, SignatureToken, mac, msg_digest, sign
from .messages import (BeaconMessage, PseudonymCertificate, SignedBeacon,
                       VehicleStatus, encode_signing_input)
from .receiver import SIGNATURE_VERIFIED, Frame

FAKE_PC_BASE = 1 << 40


def default_credentials(node_id: int, lifetime_index: int, tau_us: int,
                        gamma: float, seed_salt: int = 0,
                        stride: int = 10) -> tuple[PseudonymCertificate, TeslaChain]:
    """Mint a pseudonym and an independent chain for one aligned lifetime."""
    start = lifetime_index * tau_us
    pc_id = node_id * 1_000_000 + lifetime_index
    period_us = round(1_000_000 / gamma)
    length = tau_us // period_us
    seed = sha256(f"chain:{seed_salt}:{node_id}:{lifetime_index}".encode()).digest()
    chain = generate_chain(seed, length, pc_id, start, stride=stride,
                           period_us=period_us)
    pc = PseudonymCertificate(pc_id, start, start + tau_us,
                              public_key_handle=pc_id, holder_node=node_id)
    return pc, chain


class SenderState:
    __slots__ = ("node_id", "gamma", "period_us", "alpha", "tau_us",
                 "phase_us", "pc", "chain", "verified", "_credentials")

    def __init__(self, node_id: int, gamma: float, alpha: int, tau_us: int,
                 phase_us: int, start_us: int = 0, credentials=None,
                 seed_salt: int = 0):
        self.node_id = node_id
        self.gamma = gamma
        self.period_us = round(1_000_000 / gamma)
        self.alpha = alpha
        self.tau_us = tau_us
        self.phase_us = phase_us
        if credentials is None:
            credentials = lambda nid, k: default_credentials(
                nid, k, tau_us, gamma, seed_salt)
        self._credentials = credentials
        self.pc, self.chain = credentials(node_id, start_us // tau_us)
        # digest -> beacon timestamp, insertion-ordered, newest last
        self.verified: dict[bytes, int] = {}

    def next_tx_us(self, now_us: int) -> int:
        """First beacon time at or after ``now_us`` on this node's grid."""
        period = self.period_us
        k = -((self.phase_us - now_us) // period)  # ceil division
        return k * period + self.phase_us

    def pc_rotation(self, now_us: int) -> None:
        """Activate the pseudonym for the lifetime containing ``now_us``.

        The verified-digest buffer survives: it is receiver-side knowledge,
        not sender identity."""
        self.pc, self.chain = self._credentials(self.node_id,
                                                now_us // self.tau_us)

    def record_verified(self, digest: bytes, beacon_timestamp_us: int,
                        kind: int = SIGNATURE_VERIFIED) -> None:
        """Remember a signature-verified beacon for sharing; other validation
        kinds are not eligible and are ignored."""
        if kind != SIGNATURE_VERIFIED or self.alpha == 0:
            return
        buf = self.verified
        if digest in buf:
            del buf[digest]
        buf[digest] = beacon_timestamp_us
        if len(buf) > self.alpha:
            del buf[next(iter(buf))]

    def build_frame(self, now_us: int, status: VehicleStatus) -> Frame:
        if now_us >= self.pc.valid_to_us:
            self.pc_rotation(now_us)
        chain = self.chain
        slot = chain.slot_index(now_us)
        disclosed = chain.key_at(slot)
        mac_key = chain.mac_key_at(slot + 1)
        piggyback = tuple(reversed(self.verified))  # newest first, len <= alpha
        core = _encode_core(status, now_us, disclosed, piggyback, self.pc)
        token = sign(self.pc.pc_id, core)
        enc_beacon = core + _sig_wire(token)
        beacon = SignedBeacon(status, now_us, disclosed, piggyback, self.pc,
                              token)
        msg = BeaconMessage(beacon, mac(mac_key, enc_beacon))
        return _frame_from_parts(msg, enc_beacon, self.period_us)

    def build_beacon(self, now_us: int, status: VehicleStatus) -> BeaconMessage:
        return self.build_frame(now_us, status).msg


class AdversaryState:
    """Floods fictitious beacons. ``fresh_fake_pc`` invents a new pseudonym
    per message; ``replay_valid_pc`` attaches an overheard legitimate
    pseudonym (and its stale disclosed key) to junk."""

    __slots__ = ("node_id", "rng", "strategy", "tau_us", "period_us",
                 "_seq", "_observed")

    def __init__(self, node_id: int, rng, strategy: str, tau_us: int,
                 period_us: int = 100_000):
        if strategy not in ("fresh_fake_pc", "replay_valid_pc"):
            raise ValueError(f"unknown adversary strategy {strategy!r}")
        self.node_id = node_id
        self.rng = rng
        self.strategy = strategy
        self.tau_us = tau_us
        self.period_us = period_us
        self._seq = 0
        self._observed: list[tuple[PseudonymCertificate, bytes]] = []

    def observe(self, pc: PseudonymCertificate, disclosed_key: bytes) -> None:
        obs = self._observed
        obs.append((pc, disclosed_key))
        if len(obs) > 256:
            del obs[:128]

    def build_frame(self, now_us: int, status: VehicleStatus,
                    strategy: str | None = None) -> Frame:
        rng = self.rng
        strategy = strategy or self.strategy
        if strategy == "replay_valid_pc" and self._observed:
            pc, key = self._observed[rng.randrange(len(self._observed))]
        else:
            self._seq += 1
            start = (now_us // self.tau_us) * self.tau_us
            pc_id = FAKE_PC_BASE + self.node_id * 10_000_000 + self._seq
            pc = PseudonymCertificate(pc_id, start, start + self.tau_us,
                                      public_key_handle=pc_id,
                                      holder_node=self.node_id, legit=False)
            key = rng.randbytes(DIGEST_BYTES)
        token = SignatureToken(pc.pc_id, False, rng.randbytes(DIGEST_BYTES))
        core = _encode_core(status, now_us, key, (), pc)
        enc_beacon = core + _sig_wire(token)
        beacon = SignedBeacon(status, now_us, key, (), pc, token)
        msg = BeaconMessage(beacon, rng.randbytes(DIGEST_BYTES))
        return _frame_from_parts(msg, enc_beacon, self.period_us)

    def build_beacon(self, now_us: int, status: VehicleStatus,
                     strategy: str | None = None) -> BeaconMessage:
        return self.build_frame(now_us, status, strategy).msg


def adversary_build(adv: AdversaryState, now_us: int, strategy: str,
                    status: VehicleStatus | None = None) -> BeaconMessage:
    if status is None:
        status = VehicleStatus(0.0, 0.0, 0.0, 0.0)
    return adv.build_beacon(now_us, status, strategy)


def _encode_core(status, t_i_us, disclosed, piggyback, pc):
    b = SignedBeacon(status, t_i_us, disclosed, piggyback, pc, _NULL_TOKEN)
    return encode_signing_input(b)


def _sig_wire(token: SignatureToken) -> bytes:
    return struct.pack("<QB", token.signer_pc_id, 1 if token.valid else 0) + token.blob


def _frame_from_parts(msg: BeaconMessage, enc_beacon: bytes,
                      period_us: int) -> Frame:
    return Frame(msg, enc_beacon, msg_digest(enc_beacon + msg.mac), period_us)


_NULL_TOKEN = SignatureToken(0, False, b"\x00" * DIGEST_BYTES)

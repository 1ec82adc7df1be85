"""One-way key chains with checkpointed storage and slot indexing.

A chain bound to one pseudonym certificate holds keys ``K_0 .. K_length``,
generated backward from a terminal key so that ``K_i = hash_h(K_{i+1})``.
Later keys therefore hash *down* to earlier ones; nobody can compute a key
that has not been disclosed yet. The beacon of slot ``s`` (0-based) is MACed
under ``H'(K_{s+1})`` and discloses ``K_s``, so ``K_s`` becomes public one
slot after the beacon it protects.

Only every ``stride``-th key (plus the terminal key) is stored; the keys in
between are recomputed on demand, at most ``stride - 1`` hash applications
per lookup. Chains are immutable after generation apart from a small
derivation memo, which makes them single-thread objects; use one chain per
worker or disable the memo if sharing is ever needed.
"""

from __future__ import annotations

from .crypto import hash_h, hash_h_prime


class ChainExpiredError(ValueError):
    """A timestamp fell outside the chain's lifetime."""


class TeslaChain:
    __slots__ = ("pc_id", "length", "slot0_us", "period_us", "stride",
                 "checkpoints", "anchor", "_memo")

    def __init__(self, pc_id, length: int, slot0_us: int, period_us: int,
                 stride: int, checkpoints: dict[int, bytes], anchor: bytes):
        self.pc_id = pc_id
        self.length = length
        self.slot0_us = slot0_us
        self.period_us = period_us
        self.stride = stride
        self.checkpoints = checkpoints
        self.anchor = anchor
        self._memo: dict[int, bytes] = {}

    def key_at(self, i: int) -> bytes:
        """Chain key ``K_i``, derived from the nearest stored checkpoint above."""
        if not 0 <= i <= self.length:
            raise IndexError(f"key index {i} outside [0, {self.length}]")
        k = self.checkpoints.get(i)
        if k is not None:
            return k
        k = self._memo.get(i)
        if k is not None:
            return k
        stride = self.stride
        cp = ((i + stride - 1) // stride) * stride
        if cp > self.length:
            cp = self.length
        k = self.checkpoints[cp]
        memo = self._memo
        if len(memo) > 4 * stride:
            memo.clear()
        for j in range(cp - 1, i - 1, -1):
            k = hash_h(k)
            memo[j] = k
        return k

    def mac_key_at(self, i: int) -> bytes:
        """MAC key for slot ``i`` beacons: ``H'(K_i)``."""
        return hash_h_prime(self.key_at(i))

    def slot_index(self, t_us: int) -> int:
        """0-based slot covering time ``t_us``; raises once the chain is spent."""
        idx = (t_us - self.slot0_us) // self.period_us
        if idx < 0 or idx >= self.length:
            raise ChainExpiredError(
                f"time {t_us} outside chain lifetime starting {self.slot0_us}")
        return idx

    def stored_key_count(self) -> int:
        return len(self.checkpoints)


def generate_chain(seed: bytes, length: int, pc_id, slot0_us: int,
                   stride: int = 10, period_us: int = 100_000) -> TeslaChain:
    """Generate a chain of ``length`` slots from a random seed.

    The terminal key is the hash of the seed; walking the hash backward
    yields ``K_{length-1} .. K_0``. Checkpoints are kept every ``stride``
    slots plus the terminal key.
    """
    if length < 1:
        raise ValueError("chain length must be >= 1")
    if stride < 1:
        raise ValueError("checkpoint stride must be >= 1")
    k = hash_h(seed)
    checkpoints = {length: k}
    for i in range(length - 1, -1, -1):
        k = hash_h(k)
        if i % stride == 0:
            checkpoints[i] = k
    return TeslaChain(pc_id, length, slot0_us, period_us, stride, checkpoints, k)


def verify_disclosed_key(last_auth_key: bytes, last_auth_slot: int,
                         candidate: bytes, candidate_slot: int) -> bool:
    """Check a newly disclosed key against the last authenticated one.

    True iff hashing ``candidate`` down ``candidate_slot - last_auth_slot``
    times reproduces ``last_auth_key``. Slots at or before the last
    authenticated one are rejected outright (duplicate or stale keys).
    """
    delta = candidate_slot - last_auth_slot
    if delta <= 0:
        return False
    k = candidate
    for _ in range(delta):
        k = hash_h(k)
    return k == last_auth_key

"""Receiver state machine: two queues, cached pseudonyms, and the four
validation paths (reception filtering, queue element selection, signature
verification with shared results, MAC validation).

Queue_1 holds newly received messages, most recent at the head. Queue_2
holds messages flagged as potentially valid that are signed under pseudonyms
not yet verified; it is served first. Both queues are insertion-ordered
digest -> element maps, so membership tests, piggyback matching, and
head/tail access are all O(1).

This module charges no CPU time itself: signature costs are applied by the
caller (the simulator charges one verification delay for a cached pseudonym
and two for a new one, covering certificate plus message). Hash and MAC work
is treated as free in simulated time.

A ReceiverState is single-threaded; the simulator serializes all calls on it.
"""

from __future__ import annotations

from hashlib import sha256

from .crypto import DIGEST_BYTES, TAG_CHAIN, hash_h, hash_h_prime, sig_blob
from .messages import (SIG_WIRE_LEN, BeaconMessage, beacon_hash,
                       encode_beacon)

SIGNATURE_VERIFIED = 0
COOPERATIVELY_VALIDATED = 1
TESLA_VALIDATED = 2
DROPPED = 3
KIND_NAMES = ("signature", "cooperative", "tesla", "dropped")


class Frame:
    """A transmitted message plus everything receivers need, precomputed
    once per transmission and shared read-only by every receiver."""

    __slots__ = ("msg", "enc_beacon", "digest", "mac", "pc_id",
                 "valid_from_us", "valid_to_us", "legit", "t_i_us", "slot",
                 "disclosed_key", "piggyback", "sig")

    def __init__(self, msg: BeaconMessage, enc_beacon: bytes, digest: bytes,
                 period_us: int):
        b = msg.beacon
        pc = b.pc
        self.msg = msg
        self.enc_beacon = enc_beacon
        self.digest = digest
        self.mac = msg.mac
        self.pc_id = pc.pc_id
        self.valid_from_us = pc.valid_from_us
        self.valid_to_us = pc.valid_to_us
        self.legit = pc.legit
        self.t_i_us = b.t_i_us
        self.slot = (b.t_i_us - pc.valid_from_us) // period_us
        self.disclosed_key = b.disclosed_key
        self.piggyback = b.piggyback
        self.sig = b.signature


def make_frame(msg: BeaconMessage, period_us: int) -> Frame:
    enc = encode_beacon(msg.beacon)
    return Frame(msg, enc, beacon_hash(msg), period_us)


class QueueElement:
    __slots__ = ("frame", "received_at_us")

    def __init__(self, frame: Frame, received_at_us: int):
        self.frame = frame
        self.received_at_us = received_at_us


class CachedEntry:
    """Last authenticated chain key (and its slot) for a verified pseudonym."""

    __slots__ = ("key", "slot")

    def __init__(self, key: bytes, slot: int):
        self.key = key
        self.slot = slot


class ReceiverState:
    __slots__ = ("node_id", "period_us", "q1", "q2", "q1_by_pc", "cached",
                 "t_next_us", "rng", "tesla_enabled", "fcfs", "queue_cap",
                 "counts", "records", "record_enabled", "share_hook",
                 "first_validated_us")

    def __init__(self, node_id, period_us: int, rng, *, tesla_enabled=True,
                 fcfs=False, queue_cap=None, keep_records=False,
                 share_hook=None):
        self.node_id = node_id
        self.period_us = period_us
        self.q1: dict[bytes, QueueElement] = {}
        self.q2: dict[bytes, QueueElement] = {}
        self.q1_by_pc: dict[int, dict[bytes, QueueElement]] = {}
        self.cached: dict[int, CachedEntry] = {}
        self.t_next_us = 0
        self.rng = rng
        self.tesla_enabled = tesla_enabled
        self.fcfs = fcfs
        self.queue_cap = queue_cap
        self.counts = [0, 0, 0, 0]
        # record tuples: (kind, pc_id, received_us, validated_us, t_i_us,
        #                 digest, justified_by, legit)
        self.records: list[tuple] = []
        self.record_enabled = keep_records
        self.share_hook = share_hook
        # pc_id -> first acceptance time; set to None to skip tracking
        self.first_validated_us: dict[int, int] | None = {}

    # -- reception (queue admission) ------------------------------------

    def on_receive(self, m: BeaconMessage, now_us: int) -> None:
        """Admit a decoded message; convenience wrapper over the frame path."""
        self.receive_frame(make_frame(m, self.period_us), now_us)

    def receive_frame(self, f: Frame, now_us: int) -> None:
        entry = self.cached.get(f.pc_id) if self.tesla_enabled else None
        if entry is None:
            self._q1_insert(f, now_us)
            return
        # Cached pseudonym: the disclosed key must be new and chain down to
        # the last authenticated key; anything else is dropped here.
        delta = f.slot - entry.slot
        if delta <= 0:
            self._record_drop(f, now_us)
            return
        k = f.disclosed_key
        for _ in range(delta):
            k = sha256(TAG_CHAIN + k).digest()[:DIGEST_BYTES]
        if k != entry.key:
            self._record_drop(f, now_us)
            return
        entry.key = f.disclosed_key
        entry.slot = f.slot
        self._q1_insert(f, now_us)
        # The older queued message from this sender can now be MAC-checked
        # with a key derived from the freshly authenticated disclosure.
        bucket = self.q1_by_pc.get(f.pc_id)
        if bucket is not None and len(bucket) > 1:
            for d in list(bucket):
                if d == f.digest:
                    continue
                el = bucket.pop(d)
                del self.q1[d]
                self._validate_with_chain(el, f.disclosed_key, f.slot, now_us)
            if not bucket:
                del self.q1_by_pc[f.pc_id]

    def _q1_insert(self, f: Frame, now_us: int) -> None:
        if f.digest in self.q1 or f.digest in self.q2:
            self._record_drop(f, now_us)
            return
        el = QueueElement(f, now_us)
        self.q1[f.digest] = el
        self.q1_by_pc.setdefault(f.pc_id, {})[f.digest] = el
        cap = self.queue_cap
        if cap is not None and len(self.q1) > cap:
            old_d = next(iter(self.q1))
            old_el = self.q1.pop(old_d)
            self._q1_unindex(old_el)
            self._drop_element(old_el, now_us)

    # -- selection -------------------------------------------------------

    def select_next(self, now_us: int) -> QueueElement | None:
        """Pop the next element to verify, or None if both queues are empty.

        Queue_2 first (for the head's sender, prefer its latest-stamped
        element); otherwise Queue_1, picking uniformly among the fresh
        head-side prefix, falling back to the head. Messages whose pseudonym
        lifetime already ended are dropped here.
        """
        while True:
            el = self._pick(now_us)
            if el is None:
                return None
            if el.frame.valid_to_us <= now_us:
                self._drop_element(el, now_us)
                continue
            return el

    def _pick(self, now_us: int):
        q2 = self.q2
        if q2:
            head_d = next(iter(q2))
            best_d = head_d
            best = q2[head_d]
            pcid = best.frame.pc_id
            for d, other in q2.items():
                if other.frame.pc_id == pcid and other.frame.t_i_us > best.frame.t_i_us:
                    best_d, best = d, other
            del q2[best_d]
            return best
        q1 = self.q1
        if not q1:
            return None
        if self.fcfs:
            d = next(iter(q1))
            el = q1.pop(d)
        else:
            horizon = self.t_next_us - self.period_us
            fresh = []
            for d, cand in reversed(q1.items()):
                if cand.frame.t_i_us > horizon:
                    fresh.append(d)
                else:
                    break
            if fresh:
                d = fresh[self.rng.randrange(len(fresh))] if len(fresh) > 1 else fresh[0]
                el = q1.pop(d)
            else:
                d, el = q1.popitem()
        self._q1_unindex(el)
        return el

    # -- signature path (shared-result processing) ------------------------

    def signature_cost_units(self, el: QueueElement) -> int:
        """1 verification for a cached pseudonym, 2 (certificate + message)
        for a new one. The simulator multiplies by the per-verification delay."""
        return 1 if el.frame.pc_id in self.cached else 2

    def cooperative_verify(self, el: QueueElement, now_us: int) -> int:
        """Verify the signature of a selected element and apply the shared
        verification results it carries. Returns the outcome kind."""
        f = el.frame
        sig = f.sig
        if not (sig.valid and sig.signer_pc_id == f.pc_id
                and sig.blob == sig_blob(f.pc_id, f.enc_beacon[:-SIG_WIRE_LEN])):
            self._drop_element(el, now_us)
            return DROPPED
        self._accept(el, SIGNATURE_VERIFIED, now_us, None)
        entry = self.cached.get(f.pc_id)
        if entry is None:
            self.cached[f.pc_id] = CachedEntry(f.disclosed_key, f.slot)
            if self.tesla_enabled:
                self._extract_same_pc(f, now_us)
        elif f.slot > entry.slot:
            entry.key = f.disclosed_key
            entry.slot = f.slot
        for d in f.piggyback:
            el2 = self.q1.get(d)
            if el2 is None:
                continue
            del self.q1[d]
            self._q1_unindex(el2)
            if el2.frame.pc_id in self.cached:
                self._accept(el2, COOPERATIVELY_VALIDATED, now_us, f.digest)
            else:
                self.q2[d] = el2
        return SIGNATURE_VERIFIED

    def _extract_same_pc(self, f: Frame, now_us: int) -> None:
        # Newly cached pseudonym: pull its other queued messages, keep only
        # the latest-stamped one in place, MAC-check the rest.
        pcid = f.pc_id
        gathered = []
        bucket = self.q1_by_pc.get(pcid)
        if bucket:
            gathered.extend(bucket.values())
        for el in self.q2.values():
            if el.frame.pc_id == pcid:
                gathered.append(el)
        if not gathered:
            return
        latest = max(gathered, key=lambda e: e.frame.t_i_us)
        for el in gathered:
            if el is latest:
                continue
            d = el.frame.digest
            if d in self.q1:
                del self.q1[d]
                self._q1_unindex(el)
            else:
                del self.q2[d]
            self._validate_with_chain(el, f.disclosed_key, f.slot, now_us)

    # -- MAC path ----------------------------------------------------------

    def tesla_validate(self, m: BeaconMessage, mac_key: bytes, now_us: int,
                       received_at_us: int | None = None) -> int:
        """MAC-check a message with an authenticated slot key."""
        f = make_frame(m, self.period_us)
        el = QueueElement(f, now_us if received_at_us is None else received_at_us)
        return self._tesla_validate_el(el, mac_key, now_us)

    def _tesla_validate_el(self, el: QueueElement, mac_key: bytes,
                           now_us: int) -> int:
        f = el.frame
        if sha256(TAG_CHAIN + mac_key + f.enc_beacon).digest()[:DIGEST_BYTES] != f.mac:
            self._drop_element(el, now_us)
            return DROPPED
        self._accept(el, TESLA_VALIDATED, now_us, None)
        # Discovery only: matches under cached pseudonyms stay queued, since
        # a MAC-validated message must not vouch for other messages.
        for d in f.piggyback:
            el2 = self.q1.get(d)
            if el2 is not None and el2.frame.pc_id not in self.cached:
                del self.q1[d]
                self._q1_unindex(el2)
                self.q2[d] = el2
        return TESLA_VALIDATED

    def _validate_with_chain(self, el: QueueElement, auth_key: bytes,
                             auth_slot: int, now_us: int) -> None:
        # MAC key for a beacon at slot s is H'(K_{s+1}); derive K_{s+1} by
        # hashing the authenticated key down. A message stamped at or after
        # the authenticated slot has an undisclosed MAC key: drop it.
        steps = auth_slot - (el.frame.slot + 1)
        if steps < 0:
            self._drop_element(el, now_us)
            return
        k = auth_key
        for _ in range(steps):
            k = sha256(TAG_CHAIN + k).digest()[:DIGEST_BYTES]
        self._tesla_validate_el(el, hash_h_prime(k), now_us)

    # -- anchor maintenance ------------------------------------------------

    def update_chain_anchor(self, pc_id: int, key: bytes, slot: int) -> bool:
        """Advance the authenticated key for a cached pseudonym. Slots move
        strictly forward; a stale or duplicate slot is rejected."""
        entry = self.cached.get(pc_id)
        if entry is None:
            self.cached[pc_id] = CachedEntry(key, slot)
            return True
        if slot <= entry.slot:
            return False
        entry.key = key
        entry.slot = slot
        return True

    # -- bookkeeping ---------------------------------------------------------

    def _q1_unindex(self, el: QueueElement) -> None:
        pcid = el.frame.pc_id
        bucket = self.q1_by_pc.get(pcid)
        if bucket is not None:
            bucket.pop(el.frame.digest, None)
            if not bucket:
                del self.q1_by_pc[pcid]

    def _accept(self, el: QueueElement, kind: int, now_us: int,
                justified_by) -> None:
        f = el.frame
        self.counts[kind] += 1
        fv = self.first_validated_us
        if fv is not None and f.pc_id not in fv:
            fv[f.pc_id] = now_us
        if self.record_enabled:
            self.records.append((kind, f.pc_id, el.received_at_us, now_us,
                                 f.t_i_us, f.digest, justified_by, f.legit))
        if kind == SIGNATURE_VERIFIED and self.share_hook is not None:
            self.share_hook(f.digest, f.t_i_us)

    def _drop_element(self, el: QueueElement, now_us: int) -> None:
        f = el.frame
        self.counts[DROPPED] += 1
        if self.record_enabled:
            self.records.append((DROPPED, f.pc_id, el.received_at_us, now_us,
                                 f.t_i_us, f.digest, None, f.legit))

    def _record_drop(self, f: Frame, now_us: int) -> None:
        self.counts[DROPPED] += 1
        if self.record_enabled:
            self.records.append((DROPPED, f.pc_id, now_us, now_us,
                                 f.t_i_us, f.digest, None, f.legit))

    # -- diagnostics ----------------------------------------------------------

    def check_invariants(self) -> None:
        """Structural queue invariants; used by tests after pipeline steps."""
        overlap = self.q1.keys() & self.q2.keys()
        assert not overlap, f"element in both queues: {overlap}"
        per_pc: dict[int, int] = {}
        for el in self.q1.values():
            per_pc[el.frame.pc_id] = per_pc.get(el.frame.pc_id, 0) + 1
        for pcid, n in per_pc.items():
            if pcid in self.cached:
                assert n <= 1, f"cached pc {pcid} has {n} elements in Queue_1"
        for pcid, bucket in self.q1_by_pc.items():
            assert bucket, "empty q1 index bucket"
            for d in bucket:
                assert d in self.q1, "index points outside Queue_1"

"""Deterministic discrete-event simulator for the beacon verification schemes.

Two scenarios: a static disc (evaluated node at the center, N neighbors in
the 200 m disc, 3N more in the 200..400 m annulus so density stays flat, and
optional flooding adversaries on a 100 m circle) and a six-lane 1.5 km
highway fed by Poisson arrivals from both ends, calibrated so the average
neighbor count inside the measurement zone matches the target density.

The channel is range + independent Bernoulli loss per receiver; adversary
transmissions are never lost. Each node owns a single CPU that performs one
signature verification at a time (one delay unit for a cached pseudonym, two
for a new one); hash and MAC validations take zero simulated time.

All simulation time is integer microseconds, which makes event ordering and
slot arithmetic exact and runs bit-reproducible for a given (config, seed).
Independent runs share nothing and may execute in parallel processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from heapq import heappush, heappop
from random import Random

import numpy as np

from .config import SimConfig
from .messages import VehicleStatus
from .metrics import (MetricsReport, PsnymDelayRecord, PsnymRatioRecord,
                      RunMetrics, WaitingRecord)
from .receiver import ReceiverState
from .sender import AdversaryState, SenderState, default_credentials

# Event ranks; ties at one timestamp resolve in this order, then by actor id.
_EV_SPAWN = 0
_EV_DEPART = 1
_EV_TX = 2
_EV_ADV_TX = 3
_EV_DELIVER = 4
_EV_CPU_DONE = 5

HIGHWAY_LEN_M = 1500.0
LANE_SPEEDS = (25.0, 30.0, 35.0)
LANE_GAP_M = 4.0
MEASURE_ZONE_M = 300.0
PAIR_FILTER_M = 150.0
PROPAGATION_US = 1


def sample_deliveries(rng: Random, rx_ids, pr_loss: float) -> list:
    """Independent Bernoulli keep-decision per in-range receiver."""
    if pr_loss == 0.0:
        return list(rx_ids)
    rand = rng.random
    return [rid for rid in rx_ids if rand() >= pr_loss]


def place_static(config: SimConfig, rng: Random):
    """Node coordinates for the static disc scenario.

    Returns (benign_xy, adv_xy): the evaluated node at the origin, ``n``
    nodes uniform over the inner disc, ``3n`` over the annulus out to twice
    the range (same density), and adversaries evenly spaced on a 100 m ring.
    """
    r_in = config.range_m
    r_out = 2.0 * config.range_m
    pts = [(0.0, 0.0)]
    for _ in range(config.n):
        r = r_in * math.sqrt(rng.random())
        a = 2.0 * math.pi * rng.random()
        pts.append((r * math.cos(a), r * math.sin(a)))
    for _ in range(3 * config.n):
        r = math.sqrt(rng.random() * (r_out * r_out - r_in * r_in) + r_in * r_in)
        a = 2.0 * math.pi * rng.random()
        pts.append((r * math.cos(a), r * math.sin(a)))
    adv = []
    for k in range(config.n_adv):
        a = 2.0 * math.pi * k / config.n_adv
        adv.append((100.0 * math.cos(a), 100.0 * math.sin(a)))
    return pts, adv


def highway_lane_rates(config: SimConfig) -> list[float]:
    """Per-lane Poisson arrival rates (vehicles/s) giving the target density.

    Equal linear density per lane: rho = n / (2 * range * lanes), so each
    lane's rate is rho * v_lane.
    """
    lanes = 2 * len(LANE_SPEEDS)
    rho_lane = config.n / (2.0 * config.range_m * lanes)
    return [rho_lane * v for v in LANE_SPEEDS]


class _Node:
    __slots__ = ("nid", "sender", "receiver", "x", "y", "cpu_busy_until_us",
                 "active", "rx_in_range", "adv_in_range", "first_seen_us",
                 "pair_min_d2", "zone_hit", "x0", "v", "spawn_us", "adv")

    def __init__(self, nid: int):
        self.nid = nid
        self.sender = None
        self.receiver = None
        self.x = 0.0
        self.y = 0.0
        self.cpu_busy_until_us = 0
        self.active = True
        self.rx_in_range = ()
        self.adv_in_range = ()
        self.first_seen_us = None   # pc_id -> first reception time
        self.pair_min_d2 = None     # pc_id -> min squared distance seen
        self.zone_hit = False
        self.x0 = 0.0
        self.v = 0.0
        self.spawn_us = 0
        self.adv = None


class _Engine:
    def __init__(self, config: SimConfig, run_index: int):
        cfg = config.resolved()
        cfg.validate()
        self.cfg = cfg
        self.base = cfg.seed + run_index
        self.run_index = run_index
        self.period_us = round(1e6 / cfg.gamma)
        self.adv_period_us = round(1e6 / cfg.gamma_adv)
        self.t_vrfc_us = round(cfg.t_vrfc * 1e6)
        self.tau_us = round(cfg.tau * 1e6)
        self.range2 = cfg.range_m * cfg.range_m
        self.benign_start_us = round(cfg.benign_start * 1e6)
        self.end_us = self.benign_start_us + round(cfg.duration * 1e6)
        self.heap: list = []
        self.seq = 0
        self.nodes: list[_Node] = []
        self.adversaries: list[_Node] = []
        self.counters = {
            "tx_beacons": 0, "tx_adv": 0, "delivered": 0, "lost": 0,
            "out_of_range": 0,
        }
        self.neighbor_samples: list[int] = []
        self.rng_channel = Random(self.base * 1_000_003 + 23)
        self._salt = self.base
        self.tesla = cfg.scheme != "baseline-sig-only"
        self.fcfs = cfg.scheme == "baseline-sig-only"
        self.coop = cfg.scheme == "cooperative"
        self._observe_advs = cfg.adversary_strategy == "replay_valid_pc"
        if cfg.scenario == "static":
            self._setup_static()
        else:
            self._setup_highway()

    # -- setup -------------------------------------------------------------

    def _new_sender(self, nid: int, rng_place: Random, start_us: int) -> SenderState:
        phase = rng_place.randrange(self.period_us)
        creds = lambda node_id, k: default_credentials(
            node_id, k, self.tau_us, self.cfg.gamma, self._salt)
        return SenderState(nid, self.cfg.gamma, self.cfg.alpha, self.tau_us,
                           phase, start_us=start_us, credentials=creds)

    def _new_receiver(self, nid: int, sender, *, keep_records: bool,
                      track_pairs: bool) -> ReceiverState:
        rng = Random(self.base * 1_000_003 + 1000 + nid)
        hook = sender.record_verified if (self.coop and sender is not None) else None
        rcv = ReceiverState(nid, self.period_us, rng, tesla_enabled=self.tesla,
                            fcfs=self.fcfs, queue_cap=self.cfg.queue_cap,
                            keep_records=keep_records, share_hook=hook)
        if not track_pairs:
            rcv.first_validated_us = None
        return rcv

    def _setup_static(self):
        cfg = self.cfg
        rng_place = Random(self.base * 1_000_003 + 11)
        benign_xy, adv_xy = place_static(cfg, rng_place)
        # Piggybacked results only exist when alpha > 0, so baseline runs
        # only need the evaluated node's pipeline.
        all_pipelines = self.coop and cfg.alpha > 0
        for nid, (x, y) in enumerate(benign_xy):
            node = _Node(nid)
            node.x, node.y = x, y
            node.sender = self._new_sender(nid, rng_place, self.benign_start_us)
            if nid == 0 or all_pipelines:
                node.receiver = self._new_receiver(
                    nid, node.sender, keep_records=(nid == 0),
                    track_pairs=(nid == 0))
            if nid == 0:
                node.first_seen_us = {}
            self.nodes.append(node)
        for k, (x, y) in enumerate(adv_xy):
            adv = _Node(10_000 + k)
            adv.x, adv.y = x, y
            adv.adv = AdversaryState(
                10_000 + k, Random(self.base * 1_000_003 + 5000 + k),
                cfg.adversary_strategy, self.tau_us, self.period_us)
            self.adversaries.append(adv)
        receivers = [n.nid for n in self.nodes if n.receiver is not None]
        r2 = self.range2
        for node in self.nodes:
            node.rx_in_range = tuple(
                rid for rid in receivers if rid != node.nid
                and _d2(node, self.nodes[rid]) <= r2)
            if self._observe_advs:
                node.adv_in_range = tuple(
                    k for k, a in enumerate(self.adversaries)
                    if _d2(node, a) <= r2)
        for adv in self.adversaries:
            adv.rx_in_range = tuple(
                rid for rid in receivers if _d2(adv, self.nodes[rid]) <= r2)
        self.active_receiver_count = len(receivers)
        # first beacons on each node's grid, adversaries flooding from t=0
        for node in self.nodes:
            self._push(node.sender.next_tx_us(self.benign_start_us), _EV_TX,
                       node.nid, None)
        for k, adv in enumerate(self.adversaries):
            phase = adv.adv.rng.randrange(self.adv_period_us)
            self._push(phase, _EV_ADV_TX, k, None)

    def _setup_highway(self):
        cfg = self.cfg
        self.rng_place = Random(self.base * 1_000_003 + 11)
        self.lane_rngs = [Random(self.base * 1_000_003 + 600 + s)
                          for s in range(2 * len(LANE_SPEEDS))]
        self.lane_rates = highway_lane_rates(cfg)
        self.active_ids: list[int] = []
        self.active_adv_count = 0
        self._arrays_dirty = True
        self.zone_lo = HIGHWAY_LEN_M / 2 - MEASURE_ZONE_M / 2
        self.zone_hi = HIGHWAY_LEN_M / 2 + MEASURE_ZONE_M / 2
        self.pair2 = PAIR_FILTER_M * PAIR_FILTER_M
        for stream in range(2 * len(LANE_SPEEDS)):
            self._schedule_spawn(stream, 0)

    def _schedule_spawn(self, stream: int, now_us: int):
        rate = self.lane_rates[stream % len(LANE_SPEEDS)]
        gap = self.lane_rngs[stream].expovariate(rate)
        self._push(now_us + max(1, round(gap * 1e6)), _EV_SPAWN, stream, None)

    def _spawn_vehicle(self, stream: int, now_us: int):
        cfg = self.cfg
        direction = stream // len(LANE_SPEEDS)      # 0: west->east, 1: east->west
        lane = stream % len(LANE_SPEEDS)
        nid = len(self.nodes)
        node = _Node(nid)
        node.spawn_us = now_us
        node.v = LANE_SPEEDS[lane] if direction == 0 else -LANE_SPEEDS[lane]
        node.x0 = 0.0 if direction == 0 else HIGHWAY_LEN_M
        node.y = (lane + 0.5) * LANE_GAP_M * (1 if direction == 0 else -1)
        node.x = node.x0
        if cfg.n_adv > 0 and self.active_adv_count < cfg.n_adv:
            node.adv = AdversaryState(
                nid, Random(self.base * 1_000_003 + 5000 + nid),
                cfg.adversary_strategy, self.tau_us, self.period_us)
            self.active_adv_count += 1
            start = max(now_us, self.benign_start_us)
            phase = node.adv.rng.randrange(self.adv_period_us)
            self._push(start + phase, _EV_ADV_TX, nid, None)
        else:
            node.sender = self._new_sender(nid, self.rng_place, now_us)
            node.receiver = self._new_receiver(nid, node.sender,
                                               keep_records=False,
                                               track_pairs=True)
            node.first_seen_us = {}
            node.pair_min_d2 = {}
            start = max(now_us, self.benign_start_us)
            self._push(node.sender.next_tx_us(start), _EV_TX, nid, None)
        self.nodes.append(node)
        self.active_ids.append(nid)
        self._arrays_dirty = True
        trip_us = round(HIGHWAY_LEN_M / abs(node.v) * 1e6)
        self._push(now_us + trip_us, _EV_DEPART, nid, None)
        self._schedule_spawn(stream, now_us)

    # -- event machinery -----------------------------------------------------

    def _push(self, t_us: int, rank: int, actor: int, payload):
        self.seq += 1
        heappush(self.heap, (t_us, rank, actor, self.seq, payload))

    def run(self) -> RunMetrics:
        heap = self.heap
        end = self.end_us
        handlers = {
            _EV_SPAWN: self._on_spawn,
            _EV_DEPART: self._on_depart,
            _EV_TX: self._on_tx,
            _EV_ADV_TX: self._on_adv_tx,
            _EV_DELIVER: self._on_deliver,
            _EV_CPU_DONE: self._on_cpu_done,
        }
        while heap:
            t_us, rank, actor, _, payload = heappop(heap)
            if t_us > end:
                break
            handlers[rank](t_us, actor, payload)
        return self._collect()

    def _on_spawn(self, now_us, stream, _):
        self._spawn_vehicle(stream, now_us)

    def _on_depart(self, now_us, nid, _):
        node = self.nodes[nid]
        node.active = False
        self.active_ids.remove(nid)
        self._arrays_dirty = True
        if node.adv is not None:
            self.active_adv_count -= 1

    def _on_tx(self, now_us, nid, _):
        node = self.nodes[nid]
        if not node.active:
            return
        cfg = self.cfg
        if cfg.scenario == "static":
            status = VehicleStatus(node.x, node.y, 0.0, 0.0)
            frame = node.sender.build_frame(now_us, status)
            in_range = node.rx_in_range
            possible = self.active_receiver_count - (1 if node.receiver else 0)
            for k in node.adv_in_range:
                self.adversaries[k].adv.observe(frame.msg.beacon.pc,
                                                frame.disclosed_key)
        else:
            x = node.x0 + node.v * (now_us - node.spawn_us) * 1e-6
            node.x = x
            status = VehicleStatus(x, node.y, abs(node.v),
                                   0.0 if node.v > 0 else math.pi)
            frame = node.sender.build_frame(now_us, status)
            in_range, possible, adv_ids = self._highway_reach(node, now_us, x)
            for aid in adv_ids:
                self.nodes[aid].adv.observe(frame.msg.beacon.pc,
                                            frame.disclosed_key)
        if node.receiver is not None:
            node.receiver.t_next_us = now_us + self.period_us
        delivered = sample_deliveries(self.rng_channel, in_range, cfg.pr_loss)
        c = self.counters
        c["tx_beacons"] += 1
        c["delivered"] += len(delivered)
        c["lost"] += len(in_range) - len(delivered)
        c["out_of_range"] += possible - len(in_range)
        if delivered:
            self._push(now_us + PROPAGATION_US, _EV_DELIVER, nid,
                       (frame, delivered, node.x, node.y))
        self._push(now_us + self.period_us, _EV_TX, nid, None)

    def _on_adv_tx(self, now_us, key, _):
        cfg = self.cfg
        if cfg.scenario == "static":
            adv = self.adversaries[key]
            in_range = adv.rx_in_range
            possible = self.active_receiver_count
            x, y = adv.x, adv.y
        else:
            adv = self.nodes[key]
            if not adv.active:
                return
            x = adv.x0 + adv.v * (now_us - adv.spawn_us) * 1e-6
            adv.x = x
            y = adv.y
            in_range, possible, _ = self._highway_reach(adv, now_us, x)
        status = VehicleStatus(x, y, abs(adv.v), 0.0)
        frame = adv.adv.build_frame(now_us, status)
        c = self.counters
        c["tx_adv"] += 1
        c["delivered"] += len(in_range)
        c["out_of_range"] += possible - len(in_range)
        if in_range:
            self._push(now_us + PROPAGATION_US, _EV_DELIVER, adv.nid,
                       (frame, list(in_range), x, y))
        self._push(now_us + self.adv_period_us, _EV_ADV_TX, key, None)

    def _on_deliver(self, now_us, _tx, payload):
        frame, rx_ids, tx_x, tx_y = payload
        nodes = self.nodes
        legit = frame.legit
        highway = self.cfg.scenario == "highway"
        for rid in rx_ids:
            node = nodes[rid]
            if not node.active:
                continue
            if legit and node.first_seen_us is not None:
                fs = node.first_seen_us
                pcid = frame.pc_id
                if pcid not in fs:
                    fs[pcid] = now_us
                if highway:
                    rx_x = node.x0 + node.v * (now_us - node.spawn_us) * 1e-6
                    dx = rx_x - tx_x
                    dy = node.y - tx_y
                    d2 = dx * dx + dy * dy
                    pm = node.pair_min_d2
                    old = pm.get(pcid)
                    if old is None or d2 < old:
                        pm[pcid] = d2
            node.receiver.receive_frame(frame, now_us)
            # Strict: at equality the pending completion event chains the
            # next job itself; starting here would double-book the CPU.
            if node.cpu_busy_until_us < now_us:
                self._start_verification(node, now_us)

    def _start_verification(self, node, now_us):
        el = node.receiver.select_next(now_us)
        if el is None:
            return
        cost = self.t_vrfc_us * node.receiver.signature_cost_units(el)
        node.cpu_busy_until_us = now_us + cost
        self._push(now_us + cost, _EV_CPU_DONE, node.nid, el)

    def _on_cpu_done(self, now_us, nid, el):
        node = self.nodes[nid]
        if not node.active:
            return
        node.receiver.cooperative_verify(el, now_us)
        self._start_verification(node, now_us)

    # -- highway geometry ------------------------------------------------------

    def _refresh_arrays(self):
        ids = self.active_ids
        n = len(ids)
        self._arr_ids = np.fromiter(ids, dtype=np.int64, count=n)
        self._arr_x0 = np.empty(n)
        self._arr_v = np.empty(n)
        self._arr_spawn = np.empty(n)
        self._arr_y = np.empty(n)
        self._arr_rx = np.empty(n, dtype=bool)
        self._arr_adv = np.empty(n, dtype=bool)
        nodes = self.nodes
        for i, nid in enumerate(ids):
            nd = nodes[nid]
            self._arr_x0[i] = nd.x0
            self._arr_v[i] = nd.v
            self._arr_spawn[i] = nd.spawn_us
            self._arr_y[i] = nd.y
            self._arr_rx[i] = nd.receiver is not None
            self._arr_adv[i] = nd.adv is not None
        self._arrays_dirty = False

    def _highway_reach(self, node, now_us, x):
        """(benign receivers in range, possible receiver count, adversaries
        in earshot) plus measurement-zone bookkeeping for the transmitter."""
        if self._arrays_dirty:
            self._refresh_arrays()
        xs = self._arr_x0 + self._arr_v * ((now_us - self._arr_spawn) * 1e-6)
        dx = xs - x
        dy = self._arr_y - node.y
        d2 = dx * dx + dy * dy
        in_range = d2 <= self.range2
        rx_ids = self._arr_ids[in_range & self._arr_rx]
        measuring = (now_us >= self.benign_start_us
                     and self.zone_lo <= x <= self.zone_hi)
        if node.receiver is not None:
            if measuring:
                node.zone_hit = True
                node.receiver.record_enabled = True
                self.neighbor_samples.append(int(in_range.sum()) - 1)
            else:
                node.receiver.record_enabled = False
        adv_ids = []
        if self._observe_advs and node.adv is None:
            adv_ids = [int(a) for a in self._arr_ids[in_range & self._arr_adv]]
        possible = int(self._arr_rx.sum()) - (1 if node.receiver is not None else 0)
        return [int(r) for r in rx_ids if r != node.nid], possible, adv_ids

    # -- metrics ---------------------------------------------------------------

    def _collect(self) -> RunMetrics:
        cfg = self.cfg
        rm = RunMetrics(run_id=self.run_index, seed=self.base)
        measure_lo = self.benign_start_us
        if cfg.scenario == "static":
            measured = [self.nodes[0]] if self.nodes else []
        else:
            measured = [n for n in self.nodes if n.zone_hit]
        for node in measured:
            rcv = node.receiver
            for kind, pcid, recv_us, val_us, _t_i, _dig, _just, legit in rcv.records:
                if val_us < measure_lo:
                    continue
                rm.waiting.append(WaitingRecord(node.nid, pcid, kind,
                                                recv_us, val_us))
            fs = node.first_seen_us or {}
            fv = rcv.first_validated_us or {}
            pair_ok = None
            if cfg.scenario == "highway":
                pair_ok = {pcid for pcid, d2 in (node.pair_min_d2 or {}).items()
                           if d2 <= self.pair2}
            encountered = 0
            validated = 0
            for pcid in fs:
                if pair_ok is not None and pcid not in pair_ok:
                    continue
                encountered += 1
                val = fv.get(pcid)
                if val is not None:
                    validated += 1
                rm.psnym_delays.append(
                    PsnymDelayRecord(node.nid, pcid, fs[pcid], val))
            rm.psnym_ratios.append(
                PsnymRatioRecord(node.nid, encountered, validated))
        counts = [0, 0, 0, 0]
        for node in self.nodes:
            if node.receiver is not None:
                for i in range(4):
                    counts[i] += node.receiver.counts[i]
        rm.counters = dict(self.counters)
        rm.counters.update(accepted_signature=counts[0],
                           accepted_cooperative=counts[1],
                           accepted_tesla=counts[2], dropped=counts[3])
        if cfg.scenario == "highway" and self.neighbor_samples:
            rm.mean_neighbors = (sum(self.neighbor_samples)
                                 / len(self.neighbor_samples))
        else:
            rm.mean_neighbors = float(cfg.n)
        return rm


def _d2(a, b) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    return dx * dx + dy * dy


def run_single(config: SimConfig, run_index: int) -> RunMetrics:
    """One seeded run; pure function of (config, run_index)."""
    return _Engine(config, run_index).run()


def _run_cell(args) -> RunMetrics:
    return run_single(*args)


def run(config: SimConfig, workers: int | None = None) -> MetricsReport:
    """Execute ``config.runs`` independent runs (seeds seed, seed+1, ...).

    Runs are deterministic and share no state, so they are dispatched to a
    process pool unless ``workers`` is 1.
    """
    cfg = config.resolved()
    cfg.validate()
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, cfg.runs))
    if workers == 1 or cfg.runs == 1:
        runs = [run_single(cfg, i) for i in range(cfg.runs)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_cell, [(cfg, i) for i in range(cfg.runs)]))
    return MetricsReport(cfg, runs)

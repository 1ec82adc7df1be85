"""Metric records and report assembly.

Waiting time of a beacon is its queue residence: validation time minus
reception time. Pseudonym validation delay is the gap between first hearing
a legitimate pseudonym and first validating any of its beacons; the
validation ratio is the fraction of encountered legitimate pseudonyms ever
validated, taken at the end of a node's trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .receiver import (COOPERATIVELY_VALIDATED, DROPPED, SIGNATURE_VERIFIED,
                       TESLA_VALIDATED)

ACCEPT_KINDS = (SIGNATURE_VERIFIED, COOPERATIVELY_VALIDATED, TESLA_VALIDATED)


@dataclass
class WaitingRecord:
    node_id: int
    pc_id: int
    kind: int
    received_at_us: int
    validated_at_us: int

    @property
    def waited_s(self) -> float:
        return (self.validated_at_us - self.received_at_us) / 1e6


@dataclass
class PsnymDelayRecord:
    rx_node: int
    pc_id: int
    first_seen_us: int
    first_validated_us: int | None

    @property
    def delay_s(self) -> float | None:
        if self.first_validated_us is None:
            return None
        return (self.first_validated_us - self.first_seen_us) / 1e6


@dataclass
class PsnymRatioRecord:
    rx_node: int
    encountered: int
    validated: int

    @property
    def ratio(self) -> float:
        return self.validated / self.encountered if self.encountered else 0.0


@dataclass
class RunMetrics:
    run_id: int
    seed: int
    waiting: list[WaitingRecord] = field(default_factory=list)
    psnym_delays: list[PsnymDelayRecord] = field(default_factory=list)
    psnym_ratios: list[PsnymRatioRecord] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)
    mean_neighbors: float = 0.0

    @property
    def accepted(self) -> list[WaitingRecord]:
        return [r for r in self.waiting if r.kind != DROPPED]

    @property
    def avg_waiting_s(self) -> float:
        acc = self.accepted
        if not acc:
            return 0.0
        return sum(r.waited_s for r in acc) / len(acc)

    def avg_waiting_by_kind(self) -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for r in self.accepted:
            sums.setdefault(r.kind, []).append(r.waited_s)
        return {k: sum(v) / len(v) for k, v in sums.items()}

    def type_ratios(self) -> tuple[float, float, float]:
        """(signature, cooperative, tesla) fractions over accepted beacons."""
        counts = [0, 0, 0]
        for r in self.waiting:
            if r.kind != DROPPED:
                counts[r.kind] += 1
        total = sum(counts)
        if total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(c / total for c in counts)

    def mean_waiting_in_window(self, start_s: float, end_s: float) -> float | None:
        vals = [r.waited_s for r in self.accepted
                if start_s <= r.validated_at_us / 1e6 < end_s]
        if not vals:
            return None
        return sum(vals) / len(vals)


@dataclass
class MetricsReport:
    config: "SimConfig"
    runs: list[RunMetrics]

    @property
    def avg_waiting_s(self) -> float:
        vals = [r.avg_waiting_s for r in self.runs]
        return sum(vals) / len(vals) if vals else 0.0

    def avg_type_ratios(self) -> tuple[float, float, float]:
        if not self.runs:
            return (0.0, 0.0, 0.0)
        ratios = [r.type_ratios() for r in self.runs]
        return tuple(sum(col) / len(col) for col in zip(*ratios))

    @property
    def avg_psnym_ratio(self) -> float:
        vals = []
        for run in self.runs:
            if run.psnym_ratios:
                vals.append(sum(r.ratio for r in run.psnym_ratios)
                            / len(run.psnym_ratios))
        return sum(vals) / len(vals) if vals else 0.0

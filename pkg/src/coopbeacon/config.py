"""Scenario configuration and experiment specs.

Configs round-trip through flat snake_case JSON. CLI overrides win over file
values; the resolved (effective) config is what gets written next to the
reports so a run can be reproduced exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

SCHEMES = ("baseline-sig-only", "baseline-tesla", "cooperative")
SCENARIOS = ("static", "highway")
ADVERSARY_STRATEGIES = ("fresh_fake_pc", "replay_valid_pc")


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    scenario: str = "static"
    n: int = 60                      # neighbor count (static) / target density (highway)
    gamma: float = 10.0              # beacon rate, Hz
    t_vrfc: float = 0.004            # signature verification delay, seconds
    pr_loss: float = 0.2
    alpha: int = 4                   # shared verification results per beacon
    n_adv: int = 0
    gamma_adv: float = 250.0         # adversary flood rate, Hz (no packet loss)
    range_m: float = 200.0
    duration: float = 60.0           # measured beaconing time, seconds
    warmup: float | None = None      # resolved: 60 for highway, 0 for static
    runs: int = 5
    seed: int = 1
    adversary_strategy: str = "fresh_fake_pc"
    queue_cap: int | None = None
    scheme: str = "cooperative"
    tau: float = 300.0               # pseudonym lifetime, seconds
    benign_start: float | None = None  # resolved: 10 for adversarial static

    def resolved(self) -> "SimConfig":
        """Fill scenario-dependent defaults; returns a new config."""
        cfg = dataclasses.replace(self)
        if cfg.warmup is None:
            cfg.warmup = 60.0 if cfg.scenario == "highway" else 0.0
        if cfg.benign_start is None:
            if cfg.scenario == "static" and cfg.n_adv > 0:
                cfg.benign_start = 10.0
            else:
                cfg.benign_start = cfg.warmup
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.adversary_strategy not in ADVERSARY_STRATEGIES:
            raise ConfigError(
                f"adversary_strategy must be one of {ADVERSARY_STRATEGIES}")
        if self.n < 0:
            raise ConfigError("n must be >= 0")
        for name in ("gamma", "gamma_adv", "t_vrfc", "range_m", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.pr_loss < 1.0:
            raise ConfigError("pr_loss must lie in [0, 1)")
        if self.alpha < 0 or self.alpha > 255:
            raise ConfigError("alpha must lie in [0, 255]")
        if self.n_adv < 0:
            raise ConfigError("n_adv must be >= 0")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")
        if self.warmup is not None and self.warmup < 0:
            raise ConfigError("warmup must be >= 0")
        if self.benign_start is not None and self.benign_start < 0:
            raise ConfigError("benign_start must be >= 0")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.queue_cap is not None and self.queue_cap < 1:
            raise ConfigError("queue_cap must be >= 1 when set")
        if self.scheme != "cooperative" and self.alpha != 0:
            raise ConfigError("baseline schemes require alpha = 0")
        if self.tau * self.gamma < 1:
            raise ConfigError("tau * gamma must cover at least one slot")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data.pop("sweep", None)
        return cls.from_dict(data)


@dataclass
class ExperimentSpec:
    """A base config plus optional parameter sweeps (cartesian product)."""

    base: SimConfig
    sweep: list[tuple[str, list]] = dataclasses.field(default_factory=list)
    output_dir: Path = Path("out")

    def validate(self) -> None:
        self.base.validate()
        known = {f.name for f in dataclasses.fields(SimConfig)}
        for name, values in self.sweep:
            if name not in known:
                raise ConfigError(f"sweep parameter {name!r} is not a config field")
            if not values:
                raise ConfigError(f"sweep parameter {name!r} has no values")

    def cells(self) -> list[tuple[str, SimConfig]]:
        """All sweep combinations as (label, config) pairs."""
        combos: list[tuple[list[str], SimConfig]] = [([], self.base)]
        for name, values in self.sweep:
            nxt = []
            for labels, cfg in combos:
                for v in values:
                    nxt.append((labels + [f"{name}={v}"],
                                dataclasses.replace(cfg, **{name: v})))
            combos = nxt
        if len(combos) == 1 and not combos[0][0]:
            return [("run", self.base)]
        return [("_".join(labels), cfg) for labels, cfg in combos]

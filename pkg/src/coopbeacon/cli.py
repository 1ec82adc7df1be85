"""Command line front end: run one experiment, sweep parameters, or just
validate a config.

Exit codes: 0 success, 2 configuration/usage error, 3 unwritable output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ConfigError, ExperimentSpec, SimConfig
from .reports import write_reports
from .simulator import run as run_experiment


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--scenario", choices=("static", "highway"))
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--N", dest="n", type=int, help="neighbor count / density")
    p.add_argument("--alpha", type=int)
    p.add_argument("--pr-loss", dest="pr_loss", type=float)
    p.add_argument("--t-vrfc-ms", dest="t_vrfc_ms", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-adv", dest="n_adv", type=int)
    p.add_argument("--gamma-adv", dest="gamma_adv", type=float)
    p.add_argument("--scheme",
                   choices=("baseline-sig-only", "baseline-tesla", "cooperative"))
    p.add_argument("--duration", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--range", dest="range_m", type=float)
    p.add_argument("--adversary-strategy", dest="adversary_strategy",
                   choices=("fresh_fake_pc", "replay_valid_pc"))
    p.add_argument("--queue-cap", dest="queue_cap", type=int)
    p.add_argument("--workers", type=int, help="parallel run workers")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")


_OVERRIDE_FIELDS = ("scenario", "seed", "runs", "n", "alpha", "pr_loss",
                    "gamma", "n_adv", "gamma_adv", "scheme", "duration",
                    "warmup", "tau", "range_m", "adversary_strategy",
                    "queue_cap")


def build_config(args) -> SimConfig:
    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    updates = {}
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if getattr(args, "t_vrfc_ms", None) is not None:
        updates["t_vrfc"] = args.t_vrfc_ms / 1000.0
    cfg = dataclasses.replace(cfg, **updates)
    cfg = cfg.resolved()
    cfg.validate()
    return cfg


def _parse_sweep(args, cfg: SimConfig) -> list[tuple[str, list]]:
    sweep: list[tuple[str, list]] = []
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        for name, values in raw.get("sweep", {}).items():
            sweep.append((name, list(values)))
    for item in args.sweep or ():
        name, _, values = item.partition("=")
        name = name.strip()
        if not values:
            raise ConfigError(f"bad sweep spec {item!r}, expected name=v1,v2")
        field_types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
        if name not in field_types:
            raise ConfigError(f"sweep parameter {name!r} is not a config field")
        current = getattr(cfg, name)
        caster = type(current) if current is not None else str
        if caster is bool:
            caster = lambda v: v.lower() in ("1", "true", "yes")
        parsed = [caster(v) for v in values.split(",") if v != ""]
        sweep.append((name, parsed))
    return sweep


def cmd_run(args) -> int:
    cfg = build_config(args)
    report = run_experiment(cfg, workers=args.workers)
    write_reports(report, args.out, figures=not args.no_figures)
    print(f"wrote reports for {cfg.scheme} {cfg.scenario} run to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    spec = ExperimentSpec(base=cfg, sweep=_parse_sweep(args, cfg),
                          output_dir=args.out)
    spec.validate()
    for label, cell_cfg in spec.cells():
        cell_cfg = cell_cfg.resolved()
        cell_cfg.validate()
        report = run_experiment(cell_cfg, workers=args.workers)
        cell_dir = Path(args.out) / label
        write_reports(report, cell_dir, figures=not args.no_figures)
        print(f"wrote {label} to {cell_dir}")
    return 0


def cmd_validate(args) -> int:
    cfg = build_config(args)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coopbeacon",
        description="Cooperative beacon verification experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    _add_overrides(p_run)
    p_run.set_defaults(fn=cmd_run)
    p_sweep = sub.add_parser("sweep", help="cartesian sweep over parameters")
    _add_overrides(p_sweep)
    p_sweep.add_argument("--sweep", action="append",
                         help="name=v1,v2,... (repeatable)")
    p_sweep.set_defaults(fn=cmd_sweep)
    p_val = sub.add_parser("validate-config", help="check a configuration")
    _add_overrides(p_val)
    p_val.set_defaults(fn=cmd_validate)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())

"""Report serialization: four CSV files, the effective config, and figures.

All CSVs carry a header row, times in seconds with six decimal places, and
deterministic row order, so a repeated run with the same seed produces
byte-identical files. Figures are rendered next to the CSVs unless disabled.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import MetricsReport
from .receiver import KIND_NAMES

SUMMARY_COLUMNS = ("run_id", "scenario", "N", "alpha", "pr_loss", "scheme",
                   "avg_waiting_s", "ratio_sig", "ratio_coop", "ratio_tesla")
WAITING_COLUMNS = ("run_id", "node_id", "pc_id", "received_at_s",
                   "validated_at_s", "waited_s", "kind")
DELAY_COLUMNS = ("run_id", "rx_node", "pc_id", "first_seen_s",
                 "first_validated_s", "delay_s")
RATIO_COLUMNS = ("run_id", "rx_node", "encountered", "validated", "ratio")


def _sec(us: int) -> str:
    return f"{us / 1e6:.6f}"


def write_reports(report: MetricsReport, out_dir: str | Path,
                  figures: bool = True) -> list[Path]:
    """Write summary/waiting/psnym CSVs plus the effective config; returns
    the paths written. Raises OSError if the directory is unusable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    written = []

    path = out / "summary.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for run in report.runs:
            sig, coop, tesla = run.type_ratios()
            w.writerow([run.run_id, cfg.scenario, cfg.n, cfg.alpha,
                        cfg.pr_loss, cfg.scheme, f"{run.avg_waiting_s:.6f}",
                        f"{sig:.6f}", f"{coop:.6f}", f"{tesla:.6f}"])
        sig, coop, tesla = report.avg_type_ratios()
        w.writerow(["avg", cfg.scenario, cfg.n, cfg.alpha, cfg.pr_loss,
                    cfg.scheme, f"{report.avg_waiting_s:.6f}",
                    f"{sig:.6f}", f"{coop:.6f}", f"{tesla:.6f}"])
    written.append(path)

    path = out / "waiting_times.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WAITING_COLUMNS)
        for run in report.runs:
            for r in run.waiting:
                w.writerow([run.run_id, r.node_id, r.pc_id,
                            _sec(r.received_at_us), _sec(r.validated_at_us),
                            f"{r.waited_s:.6f}", KIND_NAMES[r.kind]])
    written.append(path)

    path = out / "psnym_delays.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DELAY_COLUMNS)
        for run in report.runs:
            for r in run.psnym_delays:
                validated = ("" if r.first_validated_us is None
                             else _sec(r.first_validated_us))
                delay = "" if r.delay_s is None else f"{r.delay_s:.6f}"
                w.writerow([run.run_id, r.rx_node, r.pc_id,
                            _sec(r.first_seen_us), validated, delay])
    written.append(path)

    path = out / "psnym_ratio.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATIO_COLUMNS)
        for run in report.runs:
            for r in run.psnym_ratios:
                w.writerow([run.run_id, r.rx_node, r.encountered,
                            r.validated, f"{r.ratio:.6f}"])
    written.append(path)

    cfg_path = out / "effective_config.json"
    cfg.save(cfg_path)
    written.append(cfg_path)

    if figures:
        written.extend(render_figures(report, out))
    return written


def render_figures(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Render waiting-time CDF, validation-type ratios, and pseudonym delay
    CDF as PNGs."""
    out = Path(out_dir)
    paths = []

    waits = sorted(r.waited_s for run in report.runs for r in run.accepted)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if waits:
        frac = [(i + 1) / len(waits) for i in range(len(waits))]
        ax.plot(waits, frac, lw=1.5)
    ax.set_xlabel("waiting time (s)")
    ax.set_ylabel("CDF over accepted beacons")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = out / "waiting_cdf.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    labels = [str(run.run_id) for run in report.runs]
    ratios = [run.type_ratios() for run in report.runs]
    bottoms = [0.0] * len(ratios)
    for idx, name in ((0, "signature"), (1, "cooperative"), (2, "tesla")):
        vals = [r[idx] for r in ratios]
        ax.bar(labels, vals, bottom=bottoms, label=name)
        bottoms = [b + v for b, v in zip(bottoms, vals)]
    ax.set_xlabel("run")
    ax.set_ylabel("fraction of accepted beacons")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    p = out / "validation_types.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    delays = sorted(r.delay_s for run in report.runs for r in run.psnym_delays
                    if r.delay_s is not None)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if delays:
        frac = [(i + 1) / len(delays) for i in range(len(delays))]
        ax.plot(delays, frac, lw=1.5)
    ax.set_xlabel("pseudonym validation delay (s)")
    ax.set_ylabel("CDF over encountered pseudonyms")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = out / "psnym_delay_cdf.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths

"""Experiment orchestration: bundled presets, grid runs, metrics export.

Presets operate on the bundled 10-node mesh configuration:

  fig3b-sweep   vary the optimizer cycle count and record per-flow mean
                delay (no QoS), one row per (cycles, seed, flow).
  table1        two mean-delay QoS flows (7 and 8) over a grid of target
                pairs and two priority weights.
  table2        hard-deadline flow 7 plus mean-delay flow 8 over a grid of
                deadline/target rows.
  custom        run a user-supplied config as-is.

All output is deterministic: rerunning with the same config and seeds gives
byte-identical files. Headers record the preset, config digest, seeds, and
horizon so a run can be reconstructed exactly.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import SimConfig, parse_config, with_optimizer, with_qos
from .control import QosSpec
from .engine import MetricsReport, run_simulation
from .network import ConfigError

PRESET_NAMES = ("fig3b-sweep", "table1", "table2", "custom")

FIG3B_ITERATIONS = (1, 2, 3, 4, 5, 7, 10, 12, 15, 20)
TABLE1_THETA = (6.0, 7.0)
TABLE1_TARGETS = ((50.0, 30.0), (40.0, 25.0), (30.0, 20.0), (25.0, 15.0))
TABLE2_THETA = (2.0, 1.5)
TABLE2_ROWS = (
    (180, 0.02, 50.0),
    (180, 0.02, 40.0),
    (180, 0.02, 35.0),
    (160, 0.02, 45.0),
    (140, 0.02, 30.0),
    (120, 0.02, 35.0),
)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

RUNS_COLUMNS = (
    "preset", "label", "seed", "flow", "created", "delivered", "on_time", "late",
    "mean_delay_slots", "drop_ratio", "mean_gap_bound_c3",
)
SUMMARY_COLUMNS = (
    "preset", "label", "flow", "n_seeds", "mean_delay_slots", "drop_ratio",
    "min_mean_delay_slots", "max_mean_delay_slots",
)
METRICS_COLUMNS = (
    "flow", "created", "delivered", "on_time", "late", "mean_delay_slots", "drop_ratio",
)


def bundled_preset_config() -> SimConfig:
    """The 10-node mesh configuration shipped with the package."""
    text = resources.files("drainsched.presets").joinpath("mesh10.yaml").read_text()
    return parse_config(text)


@dataclass(frozen=True)
class GridPoint:
    label: str
    config: SimConfig


def build_grid(preset: str, base: SimConfig | None = None) -> tuple[GridPoint, ...]:
    """Expand a preset name into labeled configurations."""
    if preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r} (expected one of {PRESET_NAMES})")
    if preset == "custom":
        if base is None:
            raise ConfigError("preset 'custom' requires a config")
        return (GridPoint("custom", base),)
    base = base if base is not None else bundled_preset_config()
    points = []
    if preset == "fig3b-sweep":
        stripped = with_qos(base, {})
        for iters in FIG3B_ITERATIONS:
            points.append(
                GridPoint(f"iters={iters}", with_optimizer(stripped, cycles=iters))
            )
    elif preset == "table1":
        for theta in TABLE1_THETA:
            for d7, d8 in TABLE1_TARGETS:
                qos = {
                    7: QosSpec(kind="mean_delay", target_slots=d7, theta_hat=theta),
                    8: QosSpec(kind="mean_delay", target_slots=d8, theta_hat=theta),
                }
                points.append(
                    GridPoint(f"theta={theta:g},targets={d7:g}/{d8:g}", with_qos(base, qos))
                )
    else:
        for deadline, ratio, d8 in TABLE2_ROWS:
            qos = {
                7: QosSpec(
                    kind="hard_deadline",
                    deadline_slots=deadline,
                    drop_ratio_target=ratio,
                    theta_hat=TABLE2_THETA[0],
                ),
                8: QosSpec(kind="mean_delay", target_slots=d8, theta_hat=TABLE2_THETA[1]),
            }
            points.append(
                GridPoint(
                    f"deadline={deadline},drop={ratio:g},target8={d8:g}", with_qos(base, qos)
                )
            )
    return tuple(points)


def _run_point(args) -> tuple[int, dict]:
    order, label, config, seed, horizon = args
    report = run_simulation(config, horizon=horizon, seed=seed, collect_periods=True)
    flows = {}
    for fid, fm in sorted(report.flows.items()):
        flows[fid] = {
            "created": fm.created,
            "delivered": fm.delivered,
            "on_time": fm.on_time,
            "late": fm.late,
            "mean_delay": fm.mean_delay,
            "drop_ratio": fm.drop_ratio,
        }
    n_periods = len(report.periods)
    mean_c3 = (
        sum(p.c3 for p in report.periods) / n_periods if n_periods else None
    )
    return order, {"label": label, "seed": seed, "flows": flows, "mean_gap_bound_c3": mean_c3}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header_lines: list[str], columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run_experiment(
    preset: str,
    out_dir,
    seeds=None,
    horizon: int | None = None,
    workers: int = 1,
    config: SimConfig | None = None,
) -> int:
    """Run every grid point for every seed and write tabular output.

    Writes <preset>_runs.csv (one row per grid point, seed, and flow),
    <preset>_summary.csv (seed-averaged), and <preset>_summary.json.
    Returns the process exit status (0 on completion).
    """
    grid = build_grid(preset, config)
    seeds = tuple(int(s) for s in (seeds if seeds is not None else DEFAULT_SEEDS))
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out}: {exc}")
        return 2

    jobs = []
    order = 0
    for point in grid:
        for seed in seeds:
            jobs.append((order, point.label, point.config, seed, horizon))
            order += 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_point, jobs))
    else:
        results = dict(map(_run_point, jobs))
    records = [results[i] for i in range(order)]

    digest = grid[0].config.digest() if grid else ""
    eff_horizon = horizon if horizon is not None else grid[0].config.run.horizon_slots
    header = [
        f"preset: {preset}",
        f"config_digest: {digest}",
        f"seeds: {','.join(str(s) for s in seeds)}",
        f"horizon_slots: {eff_horizon}",
    ]

    run_rows = []
    for rec in records:
        c3 = rec["mean_gap_bound_c3"]
        for fid, fm in sorted(rec["flows"].items()):
            run_rows.append(
                (
                    preset, rec["label"], rec["seed"], fid, fm["created"], fm["delivered"],
                    fm["on_time"], fm["late"], fm["mean_delay"], fm["drop_ratio"], c3,
                )
            )

    agg: dict[tuple[str, int], list[dict]] = {}
    for rec in records:
        for fid, fm in rec["flows"].items():
            agg.setdefault((rec["label"], fid), []).append(fm)
    summary_rows = []
    for point in grid:
        fids = sorted(fid for (label, fid) in agg if label == point.label)
        for fid in fids:
            group = agg[(point.label, fid)]
            delays = [g["mean_delay"] for g in group if g["mean_delay"] is not None]
            drops = [g["drop_ratio"] for g in group if g["drop_ratio"] is not None]
            summary_rows.append(
                (
                    preset, point.label, fid, len(group),
                    sum(delays) / len(delays) if delays else None,
                    sum(drops) / len(drops) if drops else None,
                    min(delays) if delays else None,
                    max(delays) if delays else None,
                )
            )

    try:
        _write_csv(out / f"{preset}_runs.csv", header, RUNS_COLUMNS, run_rows)
        _write_csv(out / f"{preset}_summary.csv", header, SUMMARY_COLUMNS, summary_rows)
        payload = {
            "preset": preset,
            "config_digest": digest,
            "seeds": list(seeds),
            "horizon_slots": eff_horizon,
            "runs": [
                {
                    "label": rec["label"],
                    "seed": rec["seed"],
                    "mean_gap_bound_c3": rec["mean_gap_bound_c3"],
                    "flows": {str(fid): fm for fid, fm in sorted(rec["flows"].items())},
                }
                for rec in records
            ],
        }
        with open(out / f"{preset}_summary.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
    except OSError as exc:
        print(f"failed writing experiment output: {exc}")
        return 2
    return 0


def export_metrics(report: MetricsReport, fmt: str, path) -> None:
    """Serialize one MetricsReport.

    csv: the stable per-flow table (columns in METRICS_COLUMNS, rows in
    ascending flow id; an empty report yields only the header row).
    json: the full report; re-importing with report_from_json gives back an
    equal report.
    """
    path = Path(path)
    if fmt == "csv":
        rows = []
        for fid, fm in sorted(report.flows.items()):
            rows.append(
                (
                    fid, fm.created, fm.delivered, fm.on_time, fm.late,
                    fm.mean_delay, fm.drop_ratio,
                )
            )
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown export format {fmt!r} (expected 'csv' or 'json')")


def report_from_json(text: str) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(text))

"""Experiment presets, result tables, and the reproducibility manifest.

Four presets mirror the headline evaluation: the coverage/age-of-sensing
trade-off across SINR floors, coverage decay with target altitude, the
per-point blocklength map under adaptive weighting, and the adaptive-versus-
fixed strategy comparison. Results land in one CSV per experiment plus a
manifest.json carrying the config echo, seeds, and library versions; CSV
content is a pure function of (config, seed), so repeated runs are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .config import ScenarioConfig, config_hash
from .scene import build_scene
from .scheduler import PointRecord, SweepResult, fixed_weight_sweep, sweep_area

EXPERIMENTS = (
    "coverage_vs_time",
    "coverage_vs_altitude",
    "blocklength_map",
    "table1_comparison",
)


@dataclass(frozen=True)
class ExperimentRecord:
    """One emitted table row plus optional per-point detail."""

    experiment: str
    params: dict
    coverage_pct: float
    aos_total_ms: float
    outage_count: int
    per_point: Optional[tuple[dict, ...]]
    wall_clock_s: float


def _aggregate(
    experiment: str,
    params: dict,
    sweep: SweepResult,
    started: float,
    *,
    coverage: Optional[float] = None,
    keep_points: bool = False,
) -> ExperimentRecord:
    return ExperimentRecord(
        experiment=experiment,
        params=params,
        coverage_pct=sweep.coverage_pct if coverage is None else coverage,
        aos_total_ms=1e3 * sweep.aos_total_s,
        outage_count=sweep.outage_count,
        per_point=tuple(r.to_row() for r in sweep.records) if keep_points else None,
        wall_clock_s=time.perf_counter() - started,
    )


def run_experiment(
    name: str,
    config: ScenarioConfig,
    *,
    progress: Optional[Callable[[str], None]] = None,
) -> list[ExperimentRecord]:
    """Run one preset (or "all") and return its records in emission order."""
    if name == "all":
        records = []
        for exp in EXPERIMENTS:
            records.extend(run_experiment(exp, config, progress=progress))
        return records
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    say = progress or (lambda msg: None)
    records: list[ExperimentRecord] = []

    if name == "coverage_vs_time":
        # one coverage/AoS curve per SINR floor, traced by the fixed weight grid
        for gamma_db in config.gamma_c_grid_db:
            cfg = config.replace(sinr_threshold_db=gamma_db)
            scene = build_scene(cfg, cfg.master_seed)
            for w0 in cfg.w0_grid_values():
                t0 = time.perf_counter()
                sweep = fixed_weight_sweep(scene, cfg, w0, progress=None)
                records.append(
                    _aggregate(
                        name,
                        {"gamma_c_db": gamma_db, "w0": w0},
                        sweep,
                        t0,
                    )
                )
                say(
                    f"  gamma_c={gamma_db:g} dB w0={w0:.2f}: "
                    f"coverage {sweep.coverage_pct:.1f}% "
                    f"aos {1e3 * sweep.aos_total_s:.3f} ms"
                )
        return records

    if name == "coverage_vs_altitude":
        # full-precision weights; one sweep per altitude scores every p_th
        for altitude in config.altitude_grid_m:
            cfg = config.replace(target_altitude_m=altitude)
            scene = build_scene(cfg, cfg.master_seed)
            t0 = time.perf_counter()
            sweep = fixed_weight_sweep(scene, cfg, 1.0, progress=None)
            for p_th in cfg.p_th_grid:
                records.append(
                    _aggregate(
                        name,
                        {"altitude_m": altitude, "p_th": p_th},
                        sweep,
                        t0,
                        coverage=sweep.coverage_at(p_th),
                    )
                )
            say(
                f"  altitude {altitude:g} m: coverage "
                + ", ".join(
                    f"{sweep.coverage_at(p):.1f}%@{p:g}" for p in cfg.p_th_grid
                )
            )
        return records

    if name == "blocklength_map":
        scene = build_scene(config, config.master_seed)
        t0 = time.perf_counter()
        sweep = sweep_area(scene, config, progress=say)
        records.append(_aggregate(name, {"strategy": "adaptive"}, sweep, t0, keep_points=True))
        say(
            f"  adaptive map: coverage {sweep.coverage_pct:.1f}% "
            f"aos {1e3 * sweep.aos_total_s:.3f} ms"
        )
        return records

    # table1_comparison
    scene = build_scene(config, config.master_seed)
    t0 = time.perf_counter()
    adaptive = sweep_area(scene, config, progress=None)
    records.append(
        _aggregate(name, {"strategy": "adaptive", "w0": float("nan")}, adaptive, t0)
    )
    say(
        f"  adaptive: coverage {adaptive.coverage_pct:.1f}% "
        f"aos {1e3 * adaptive.aos_total_s:.3f} ms"
    )
    for w0 in config.w0_grid_values():
        t0 = time.perf_counter()
        sweep = fixed_weight_sweep(scene, config, w0, progress=None)
        records.append(_aggregate(name, {"strategy": "fixed", "w0": w0}, sweep, t0))
        say(
            f"  fixed w0={w0:.2f}: coverage {sweep.coverage_pct:.1f}% "
            f"aos {1e3 * sweep.aos_total_s:.3f} ms"
        )
    return records


# ---------------------------------------------------------------------- #
# emission

_CSV_COLUMNS = {
    "coverage_vs_time": ("gamma_c_db", "w0", "coverage_pct", "aos_total_ms", "outage_count"),
    "coverage_vs_altitude": ("altitude_m", "p_th", "coverage_pct", "aos_total_ms"),
    "blocklength_map": PointRecord.CSV_FIELDS,
    "table1_comparison": ("strategy", "w0", "coverage_pct", "aos_total_ms", "outage_count"),
}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal
    return str(value)


def _rows_for(experiment: str, records: list[ExperimentRecord]) -> list[dict]:
    if experiment == "blocklength_map":
        rows = []
        for rec in records:
            rows.extend(rec.per_point or ())
        return rows
    rows = []
    for rec in records:
        row = dict(rec.params)
        row["coverage_pct"] = rec.coverage_pct
        row["aos_total_ms"] = rec.aos_total_ms
        row["outage_count"] = rec.outage_count
        rows.append(row)
    return rows


def emit_results(
    records: list[ExperimentRecord], out_dir: str | Path, config: ScenarioConfig
) -> list[Path]:
    """Write one CSV per experiment present in `records` plus manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    by_experiment: dict[str, list[ExperimentRecord]] = {}
    for rec in records:
        by_experiment.setdefault(rec.experiment, []).append(rec)
    for experiment, recs in by_experiment.items():
        columns = _CSV_COLUMNS[experiment]
        path = out_dir / f"{experiment}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in _rows_for(experiment, recs):
                writer.writerow([_fmt(row.get(col, "")) for col in columns])
        written.append(path)
    manifest = {
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "master_seed": config.master_seed,
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "library_versions": {
            "numpy": np.__version__,
            "cvxpy": _cvxpy_version(),
        },
        "experiments": [
            {
                "experiment": rec.experiment,
                "params": rec.params,
                "coverage_pct": rec.coverage_pct,
                "aos_total_ms": rec.aos_total_ms,
                "outage_count": rec.outage_count,
                "wall_clock_s": rec.wall_clock_s,
            }
            for rec in records
        ],
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_safe))
    written.append(manifest_path)
    return written


def _cvxpy_version() -> str:
    import cvxpy

    return cvxpy.__version__


def _json_safe(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")

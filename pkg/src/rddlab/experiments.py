"""Experiment orchestration: solve, simulate, and emit CSV + manifest.

Every run writes a results table (CSV or JSON) and a JSON manifest that
captures the fully resolved configuration, library version, seeds, wall
time, and any flagged invariant violations. Re-running the same config
produces byte-identical result tables; timestamps live only in the
manifest.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import core
from .config import ExperimentConfig
from .detectors import evaluate_detection
from .errors import ConfigError
from .idx import read_idx_images
from .jpeg import jpeg_experiment, synthetic_digits
from .rcs import rcs_experiment
from .rng import derive_seed
from .solver import (
    ConstraintKind,
    RddProblem,
    Status,
    XI_CLAMP,
    max_contrast_sum,
    solve_rdd_j,
    solve_rdd_z,
)
from .sweep import sweep

SCHEMA_VERSION = "1"

PARETO_HEADER = [
    "delta", "omega", "status", "rate_bits", "achieved_delta", "achieved_omega",
    "branch", "iterations", "restart_index", "slack", "certificate_max_omega",
]
DETECT_HEADER = [
    "delta", "omega", "status", "rate_bits",
    "pdet_ld", "se_ld", "pdet_npd", "se_npd", "n_samples",
]
RCS_HEADER = ["m_count", "selection_id", "rate_bits", "distortion", "pdet_ld", "pdet_npd"]
JPEG_HEADER = [
    "delta", "omega", "status", "rate_bits_per_image", "distortion_per_block",
    "pdet", "auc", "se",
]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def resolve_omega_grid(config: ExperimentConfig, lam: np.ndarray, anomaly,
                       kind: ConstraintKind, delta_min: float) -> list[float]:
    """Materialize the omega grid. The auto spec spaces points up to a
    fraction of the largest detectability achievable at the tightest
    distortion budget (so most cells of the sweep are feasible)."""
    grid = config.omega_grid
    if isinstance(grid, list):
        return [float(w) for w in grid]
    count = int(grid.get("count", 20))
    frac = float(grid.get("max_fraction", 0.9))
    if count < 1:
        raise ConfigError("auto omega grid needs count >= 1")
    support = lam > 0
    lam_s = lam[support]
    r_s = core.ratio_vector(lam, anomaly)[support]
    floor = max(float(lam_s.sum()) - float(delta_min), 0.0)
    best_pos, xi_pos = max_contrast_sum(r_s, lam_s, floor)
    best_neg, xi_neg = max_contrast_sum(-r_s, lam_s, floor)
    if kind is ConstraintKind.AGNOSTIC_Z:
        w_max = max(best_pos, best_neg, 0.0) / (2.0 * core.LN2)
    else:
        g_pos, _ = core.dist_j_nats_parts(r_s, np.minimum(xi_pos, XI_CLAMP))
        g_neg, _ = core.dist_j_nats_parts(r_s, np.minimum(xi_neg, XI_CLAMP))
        w_max = max(g_pos, g_neg, 0.0) / (2.0 * core.LN2)
    return [float(w) for w in np.linspace(0.0, frac * w_max, count)]


# ---------------------------------------------------------------------------
# runners: each returns (header, rows, extras-for-manifest)


def _surface_to_rows(surface):
    rows = []
    for p in surface.points:
        d = p.result.diagnostics
        rows.append([
            p.delta, p.omega, p.result.status.value, p.result.rate_bits,
            p.result.achieved_delta, p.result.achieved_omega,
            d.get("branch", ""), d.get("iterations", ""), d.get("restart_index", ""),
            d.get("slack", ""), d.get("certificate_max_omega", ""),
        ])
    return rows


def run_pareto(config: ExperimentConfig, jobs: int, out_dir=None):
    kind = (ConstraintKind.AGNOSTIC_Z if config.experiment == "pareto-z"
            else ConstraintKind.AWARE_J)
    lam = config.profile_values()
    anomaly = config.anomaly_model(lam.size)
    omegas = resolve_omega_grid(config, lam, anomaly, kind, min(config.delta_grid))
    surface = sweep(lam, anomaly, kind, config.delta_grid, omegas,
                    config.solver_config(), jobs=jobs)
    extras = {
        "resolved_omega_grid": omegas,
        "profile_values": lam.tolist(),
        "monotonicity_violations": surface.metadata["monotonicity_violations"],
    }
    return PARETO_HEADER, _surface_to_rows(surface), extras


def run_detect_sim(config: ExperimentConfig, jobs: int, out_dir=None):
    kind = config.constraint_kind()
    lam = config.profile_values()
    anomaly = config.anomaly_model(lam.size)
    omegas = resolve_omega_grid(config, lam, anomaly, kind, min(config.delta_grid))
    surface = sweep(lam, anomaly, kind, config.delta_grid, omegas,
                    config.solver_config(), jobs=jobs)
    rows = []
    for i, p in enumerate(surface.points):
        if p.result.status is Status.INFEASIBLE:
            rows.append([p.delta, p.omega, p.result.status.value, p.result.rate_bits,
                         math.nan, math.nan, math.nan, math.nan, config.n_samples])
            continue
        cell_seed = derive_seed(config.seed, "detect-sim", i)
        ld = evaluate_detection(lam, anomaly, p.result.xis, "ld", config.n_samples, cell_seed)
        npd = evaluate_detection(lam, anomaly, p.result.xis, "npd", config.n_samples, cell_seed)
        rows.append([p.delta, p.omega, p.result.status.value, p.result.rate_bits,
                     ld.pdet, ld.stderr, npd.pdet, npd.stderr, config.n_samples])
    extras = {"resolved_omega_grid": omegas, "profile_values": lam.tolist()}
    return DETECT_HEADER, rows, extras


def run_rcs(config: ExperimentConfig, jobs: int, out_dir=None):
    lam = config.profile_values()
    anomaly = config.anomaly_model(lam.size)
    m_counts = config.m_counts or list(range(1, lam.size))
    table = rcs_experiment(
        lam, anomaly, m_counts, cap=config.selection_cap,
        epsilon=config.epsilon, n_samples=config.n_samples, seed=config.seed,
        jobs=jobs,
    )
    rows = [[r[k] for k in RCS_HEADER] for r in table]
    extras = {"profile_values": lam.tolist(), "m_counts": list(m_counts)}
    return RCS_HEADER, rows, extras


def _load_jpeg_dataset(config: ExperimentConfig):
    doc = config.dataset
    kind = doc.get("kind")
    if kind == "synthetic":
        train = synthetic_digits(int(doc.get("train", 3000)), int(doc.get("size", 28)),
                                 seed=derive_seed(config.seed, "corpus", "train"),
                                 noise_std=float(doc.get("noise_std", 0.05)))
        test = synthetic_digits(int(doc.get("test", 800)), int(doc.get("size", 28)),
                                seed=derive_seed(config.seed, "corpus", "test"),
                                noise_std=float(doc.get("noise_std", 0.05)))
        return train, test
    if kind == "idx":
        train = read_idx_images(doc["train_images"]).astype(float) / 255.0
        test = read_idx_images(doc["test_images"]).astype(float) / 255.0
        if doc.get("train_limit"):
            train = train[: int(doc["train_limit"])]
        if doc.get("test_limit"):
            test = test[: int(doc["test_limit"])]
        return train, test
    raise ConfigError(f"unknown dataset kind {kind!r}")


def run_jpeg(config: ExperimentConfig, jobs: int, out_dir=None):
    train, test = _load_jpeg_dataset(config)
    omegas = (config.omega_grid if isinstance(config.omega_grid, list)
              else [0.0, 1000.0])
    table = jpeg_experiment(
        train, test, config.delta_grid, omegas, alpha=config.alpha, eta=config.eta,
        n_scored_blocks=config.n_scored_blocks, seed=config.seed,
        calibration=config.calibration, cfg=config.solver_config(),
        symbols_dir=(out_dir if config.dump_symbols else None),
    )
    rows = [[r[k] for k in JPEG_HEADER] for r in table]
    extras = {
        "resolved_omega_grid": [float(w) for w in omegas],
        "train_images": int(train.shape[0]),
        "test_images": int(test.shape[0]),
    }
    return JPEG_HEADER, rows, extras


def run_profile_report(config: ExperimentConfig, jobs: int, out_dir=None):
    kind = config.constraint_kind()
    lam = config.profile_values()
    anomaly = config.anomaly_model(lam.size)
    omegas = resolve_omega_grid(config, lam, anomaly, kind, config.delta)
    solve = solve_rdd_z if kind is ConstraintKind.AGNOSTIC_Z else solve_rdd_j
    cfg = config.solver_config()
    results = []
    for w in omegas:
        res = solve(RddProblem(lam, anomaly, config.delta, w, kind), cfg)
        results.append((w, res))
    header = ["j", "lambda_ok", "lambda_ko"] + [
        f"theta_rel_omega_{_fmt(w)}" for w, _ in results
    ]
    lam_ko = anomaly.variances(lam.size)
    rows = []
    for j in range(lam.size):
        row = [j, lam[j], lam_ko[j]]
        for _, res in results:
            row.append(1.0 - res.xis[j] if res.feasible else math.nan)
        rows.append(row)
    extras = {
        "resolved_omega_grid": omegas,
        "profile_values": lam.tolist(),
        "delta": config.delta,
        "statuses": {_fmt(w): res.status.value for w, res in results},
    }
    return header, rows, extras


_RUNNERS = {
    "pareto-z": run_pareto,
    "pareto-j": run_pareto,
    "detect-sim": run_detect_sim,
    "rcs": run_rcs,
    "jpeg": run_jpeg,
    "profile-report": run_profile_report,
}


# ---------------------------------------------------------------------------
# output writing


def _write_table_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_table_json(path: Path, header, rows):
    records = [dict(zip(header, [_json_safe(v) for v in row])) for row in rows]
    path.write_text(json.dumps(records, sort_keys=True, indent=2) + "\n")


def _json_safe(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def run(config: ExperimentConfig, out_dir, fmt: str = "csv", jobs: int = 1,
        plot: bool = False) -> dict:
    """Execute one experiment and write its artifacts. Returns the paths."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.monotonic()
    header, rows, extras = _RUNNERS[config.experiment](config, jobs, out)
    wall = time.monotonic() - t0

    stem = config.experiment
    results_path = out / f"{stem}.{fmt}"
    if fmt == "csv":
        _write_table_csv(results_path, header, rows)
    else:
        _write_table_json(results_path, header, rows)

    artifacts = {"results": str(results_path)}
    if plot:
        from . import plotting
        fig_path = out / f"{stem}.png"
        plotting.render(config.experiment, header, rows, extras, fig_path)
        artifacts["figure"] = str(fig_path)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "experiment": config.experiment,
        "config": config.to_manifest_dict(),
        "resolved": extras,
        "columns": header,
        "rows": len(rows),
        "jobs": jobs,
        "started_at": started.isoformat(),
        "wall_time_s": wall,
        "artifacts": artifacts,
    }
    manifest_path = out / f"{stem}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=_json_safe) + "\n")
    artifacts["manifest"] = str(manifest_path)
    return artifacts

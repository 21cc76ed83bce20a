"""Grid sweeps of the trade-off solvers into Pareto surfaces."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .solver import (
    ConstraintKind,
    RddProblem,
    SolveResult,
    SolverConfig,
    Status,
    solve_rdd_j,
    solve_rdd_z,
)

RATE_MONOTONE_TOL = 1e-6


@dataclass
class ParetoPoint:
    delta: float
    omega: float
    result: SolveResult


@dataclass
class ParetoSurface:
    points: list[ParetoPoint]
    metadata: dict = field(default_factory=dict)

    def grid(self, attr: str) -> np.ndarray:
        """Row-major (delta x omega) array of a scalar result attribute."""
        deltas = sorted({p.delta for p in self.points})
        omegas = sorted({p.omega for p in self.points})
        out = np.full((len(deltas), len(omegas)), np.nan)
        for p in self.points:
            out[deltas.index(p.delta), omegas.index(p.omega)] = getattr(p.result, attr)
        return out


def _validate_grid(grid, name):
    arr = [float(v) for v in grid]
    if not arr:
        raise DomainError(f"{name} grid must be non-empty")
    if any(b < a for a, b in zip(arr, arr[1:])):
        raise DomainError(f"{name} grid must be sorted ascending")
    return arr


def _solve_row(args):
    lam, anomaly, kind, delta, omega_grid, cfg = args
    solve = solve_rdd_z if kind is ConstraintKind.AGNOSTIC_Z else solve_rdd_j
    row = []
    warm = None
    for omega in omega_grid:
        problem = RddProblem(lam, anomaly, delta, omega, kind)
        res = solve(problem, cfg, warm=warm)
        if cfg.warm_start and res.feasible:
            warm = res.xis
        row.append(ParetoPoint(delta=delta, omega=omega, result=res))
    return row


def sweep(
    lam_ok,
    anomaly,
    kind: ConstraintKind,
    delta_grid,
    omega_grid,
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 1,
) -> ParetoSurface:
    """Solve every (delta, omega) cell. Infeasible cells are recorded, not
    dropped. Warm starts run along the omega axis inside one delta row, so
    results do not depend on how rows are scheduled across workers.
    """
    deltas = _validate_grid(delta_grid, "delta")
    omegas = _validate_grid(omega_grid, "omega")
    lam = np.asarray(lam_ok, dtype=float)

    tasks = [(lam, anomaly, kind, d, omegas, cfg) for d in deltas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_row, tasks))
    else:
        rows = [_solve_row(t) for t in tasks]

    points = [p for row in rows for p in row]
    violations = _monotonicity_flags(rows)
    meta = {
        "constraint_kind": kind.value,
        "n": int(lam.size),
        "trace": float(lam.sum()),
        "anomaly": repr(anomaly),
        "delta_grid": deltas,
        "omega_grid": omegas,
        "solver_config": cfg.to_dict(),
        "seed": cfg.seed,
        "monotonicity_violations": violations,
    }
    return ParetoSurface(points=points, metadata=meta)


def _monotonicity_flags(rows) -> list[dict]:
    """Rate must not decrease along omega at fixed delta, nor increase along
    delta at fixed omega. Violations beyond tolerance are reported, not fixed."""
    flags = []
    for row in rows:
        feas = [p for p in row if p.result.status is not Status.INFEASIBLE]
        for a, b in zip(feas, feas[1:]):
            if b.result.rate_bits < a.result.rate_bits - RATE_MONOTONE_TOL:
                flags.append({
                    "axis": "omega", "delta": a.delta,
                    "omega_pair": [a.omega, b.omega],
                    "rates": [a.result.rate_bits, b.result.rate_bits],
                })
    n_omega = len(rows[0]) if rows else 0
    for j in range(n_omega):
        col = [row[j] for row in rows if row[j].result.status is not Status.INFEASIBLE]
        for a, b in zip(col, col[1:]):
            if b.result.rate_bits > a.result.rate_bits + RATE_MONOTONE_TOL:
                flags.append({
                    "axis": "delta", "omega": a.omega,
                    "delta_pair": [a.delta, b.delta],
                    "rates": [a.result.rate_bits, b.result.rate_bits],
                })
    return flags

"""Minimum-rate encoder design under distortion and detectability floors.

Three entry points:

* :func:`solve_rd` — classical distortion-only problem, closed form
  (reverse water-filling, exact).
* :func:`solve_rdd_z` — agnostic-detector floor. The absolute-value
  constraint splits into two convex branches (positive and negative
  contrast), each solved by the interior-point method; the cheaper
  feasible branch wins.
* :func:`solve_rdd_j` — aware-detector floor. The constraint bounds a
  convex function from below (a reverse-convex program), solved
  heuristically by a penalty convex-concave procedure with multi-start.

All constraint satisfaction reported in results is re-verified through
the closed-form functions in :mod:`rddlab.core`, not solver internals.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import core
from .core import LN2, WhiteAnomaly, DiagonalAnomaly
from .errors import DomainError
from .ipm import solve_ipm
from .rng import substream

XI_CLAMP = 1.0 - 1e-12  # upper bound used inside subproblems; keeps rate finite


class Status(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"  # heuristic: constraints verified, optimality not certified
    INFEASIBLE = "infeasible"


class ConstraintKind(enum.Enum):
    AGNOSTIC_Z = "z"
    AWARE_J = "j"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    feas_tol: float = 1e-8
    restarts: int = 8
    max_outer_iters: int = 200
    penalty_init: float = 1.0
    penalty_growth: float = 5.0
    penalty_cap: float = 1e6
    seed: int = 0
    warm_start: bool = True

    @classmethod
    def from_json(cls, doc) -> "SolverConfig":
        """Build from a JSON document (string or already-parsed mapping)."""
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        if not isinstance(doc, dict):
            raise DomainError("solver config document must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise DomainError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RddProblem:
    lam_ok: np.ndarray
    anomaly: object
    delta: float
    omega: float
    constraint_kind: ConstraintKind

    def __post_init__(self):
        object.__setattr__(self, "lam_ok", core.as_spectrum(self.lam_ok))
        if self.delta < 0:
            raise DomainError(f"distortion budget must be >= 0, got {self.delta}")
        if self.omega < 0:
            raise DomainError(f"detectability floor must be >= 0, got {self.omega}")
        if self.constraint_kind is ConstraintKind.AGNOSTIC_Z:
            if not isinstance(self.anomaly, WhiteAnomaly):
                raise DomainError("the agnostic constraint requires a white anomaly")
        elif self.constraint_kind is ConstraintKind.AWARE_J:
            if not isinstance(self.anomaly, DiagonalAnomaly):
                raise DomainError("the aware constraint requires a diagonal anomaly")


@dataclass
class SolveResult:
    xis: np.ndarray
    rate_bits: float
    achieved_delta: float
    achieved_omega: float
    status: Status
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is not Status.INFEASIBLE


# ---------------------------------------------------------------------------
# classical distortion-only solution (exact)


def waterfill_theta(lam: np.ndarray, delta: float) -> np.ndarray:
    """Error-variance allocation theta_j = min(lam_j, gamma), sum = min(delta, trace).

    gamma found by a sorted cumulative search; no iteration involved.
    """
    lam = core.as_spectrum(lam)
    trace = float(lam.sum())
    target = min(float(delta), trace)
    if target <= 0.0:
        return np.zeros_like(lam)
    order = np.argsort(lam, kind="stable")
    lam_sorted = lam[order]
    m = lam.size
    prefix = np.concatenate([[0.0], np.cumsum(lam_sorted)])[:-1]
    # total absorbed error when the level sits exactly at lam_sorted[i]
    totals = prefix + lam_sorted * (m - np.arange(m))
    i = int(np.searchsorted(totals, target, side="left"))
    i = min(i, m - 1)
    gamma = (target - prefix[i]) / (m - i)
    return np.minimum(lam, gamma)


def solve_rd(lam_ok, delta: float) -> SolveResult:
    """Minimum-rate encoder for a distortion budget alone (reverse water-filling)."""
    lam = core.as_spectrum(lam_ok)
    theta = waterfill_theta(lam, delta)
    xi = np.zeros_like(lam)
    support = lam > 0
    xi[support] = 1.0 - theta[support] / lam[support]
    # exact zeros for fully distorted components, exact ones at delta = 0
    xi[support & (theta >= lam)] = 0.0
    rate_bits = core.rate(lam, xi)
    return SolveResult(
        xis=xi,
        rate_bits=rate_bits,
        achieved_delta=core.distortion(lam, xi),
        achieved_omega=math.nan,
        status=Status.OPTIMAL,
        diagnostics={"branch": "waterfill"},
    )


# ---------------------------------------------------------------------------
# greedy linear-program certificate for the agnostic branch


def max_contrast_sum(r: np.ndarray, lam: np.ndarray, floor: float) -> tuple[float, np.ndarray]:
    """Maximize sum r_j xi_j subject to sum lam_j xi_j >= floor, xi in [0,1]^n.

    Continuous-knapsack greedy: profitable components first, then the
    distortion floor is topped up with the cheapest objective loss per
    unit of variance mass. Exact for this LP. lam must be positive.
    """
    xi = np.zeros_like(r)
    gain = r > 0
    xi[gain] = 1.0
    budget = floor - float(lam[gain].sum())
    if budget > 1e-12 * max(1.0, abs(floor)):
        rest = np.flatnonzero(~gain)
        order = rest[np.argsort(-(r[rest] / lam[rest]), kind="stable")]
        for j in order:
            take = min(1.0, budget / lam[j])
            xi[j] = take
            budget -= take * lam[j]
            if budget <= 0:
                break
    return float(r @ xi), xi


# ---------------------------------------------------------------------------
# agnostic (two-branch) solver


def _strip_support(lam: np.ndarray):
    support = lam > 0
    return support, lam[support]


def _expand(support: np.ndarray, xi_s: np.ndarray) -> np.ndarray:
    xi = np.zeros(support.size)
    xi[support] = xi_s
    return xi


def _convex_solve(lam_s, rows, x0, cfg):
    """IPM call on the support-reduced problem. rows: list of (coef, bound)
    meaning coef . xi <= bound."""
    d = lam_s.size
    log_mask = np.ones(d, dtype=bool)
    if rows:
        A = np.vstack([c for c, _ in rows])
        b = np.array([b for _, b in rows])
    else:
        A = np.zeros((0, d))
        b = np.zeros(0)
    return solve_ipm(
        log_mask=log_mask,
        c=np.zeros(d),
        lb=np.zeros(d),
        ub=np.full(d, XI_CLAMP),
        A=A,
        b=b,
        x0=x0,
        tol=cfg.tol,
        feas_tol=cfg.feas_tol,
    )


def _distortion_row(lam_s, delta):
    """Row for sum lam xi >= trace - delta, or None when the budget is slack."""
    target = float(lam_s.sum()) - float(delta)
    if target <= 0:
        return None
    return (-lam_s, -target)


def _finish(lam, support, xi_s, problem, status, diag):
    xi = _expand(support, np.clip(xi_s, 0.0, 1.0))
    r_full = core.ratio_vector(lam, problem.anomaly)
    if problem.constraint_kind is ConstraintKind.AGNOSTIC_Z:
        achieved_omega = core.dist_z(r_full, xi)
    else:
        achieved_omega = core.dist_j(r_full, xi)
    clamped = np.flatnonzero((xi >= XI_CLAMP) & (lam > 0))
    if clamped.size:
        diag = dict(diag, clamped_components=clamped.tolist(),
                    note="rate effectively infinite at clamped components")
    return SolveResult(
        xis=xi,
        rate_bits=core.rate(lam, xi),
        achieved_delta=core.distortion(lam, xi),
        achieved_omega=achieved_omega,
        status=status,
        diagnostics=diag,
    )


def solve_rdd_z(
    problem: RddProblem,
    cfg: SolverConfig = SolverConfig(),
    warm: Optional[np.ndarray] = None,
) -> SolveResult:
    """Agnostic-detector problem: split the |contrast| >= floor constraint
    into its two sign branches, solve each convex branch, keep the cheaper."""
    if problem.constraint_kind is not ConstraintKind.AGNOSTIC_Z:
        raise DomainError("solve_rdd_z requires an agnostic-Z problem")
    lam = problem.lam_ok
    support, lam_s = _strip_support(lam)
    if lam_s.size == 0:
        return _finish(lam, support, np.zeros(0), problem,
                       Status.OPTIMAL if problem.omega == 0 else Status.INFEASIBLE,
                       {"branch": "empty"})
    r_s = core.ratio_vector(lam, problem.anomaly)[support]
    c2 = 2.0 * problem.omega * LN2
    drow = _distortion_row(lam_s, problem.delta)
    rows_base = [drow] if drow else []
    warm_s = warm[support] if (warm is not None and cfg.warm_start) else None

    if problem.omega == 0.0:
        # the |.| >= 0 row is vacuous; dropping it keeps the interior open
        x0 = warm_s if warm_s is not None else solve_rd(lam, problem.delta).xis[support]
        res = _convex_solve(lam_s, rows_base, x0, cfg)
        status = Status.OPTIMAL if res.converged else Status.FEASIBLE
        diag = {"branch": "rd", "iterations": res.iterations, "kkt_gap": res.gap,
                "primal_residual": res.primal_residual}
        return _finish(lam, support, res.x, problem, status, diag)

    floor = max(float(lam_s.sum()) - float(problem.delta), 0.0)
    candidates = []
    certificates = {}
    for branch, sign in (("pos", 1.0), ("neg", -1.0)):
        best, xi_lp = max_contrast_sum(sign * r_s, lam_s, floor)
        certificates[branch] = best
        margin = best - c2
        if margin < -1e-12 * max(1.0, c2):
            continue
        if margin <= 1e-10 * max(1.0, c2):
            # boundary-feasible: interior empty, the LP extreme point is the solution
            candidates.append((branch, xi_lp, None, True))
            continue
        rows = rows_base + [(-sign * r_s, -c2)]
        x0 = warm_s if warm_s is not None else xi_lp
        res = _convex_solve(lam_s, rows, x0, cfg)
        candidates.append((branch, res.x, res, False))

    if not candidates:
        max_omega = max(certificates.values()) / (2.0 * LN2)
        return SolveResult(
            xis=np.zeros(lam.size),
            rate_bits=math.nan,
            achieved_delta=math.nan,
            achieved_omega=math.nan,
            status=Status.INFEASIBLE,
            diagnostics={
                "certificate_max_omega": max_omega,
                "requested_omega": problem.omega,
                "branch_certificates": certificates,
            },
        )

    finished = []
    for branch, xi_s, res, boundary in candidates:
        diag = {"branch": branch, "boundary": boundary}
        status = Status.FEASIBLE
        if res is not None:
            diag.update(iterations=res.iterations, kkt_gap=res.gap,
                        primal_residual=res.primal_residual)
            status = Status.OPTIMAL if res.converged else Status.FEASIBLE
        finished.append(_finish(lam, support, xi_s, problem, status, diag))

    finished.sort(key=lambda s: s.rate_bits)
    if (
        len(finished) == 2
        and abs(finished[0].rate_bits - finished[1].rate_bits) <= cfg.tol
        and finished[1].achieved_omega > finished[0].achieved_omega
    ):
        return finished[1]
    return finished[0]


# ---------------------------------------------------------------------------
# aware (reverse-convex) solver: penalty convex-concave procedure


def _ccp_starts(lam_s, r_s, floor, cfg, warm_s):
    starts = [solve_rd_support(lam_s, floor)]
    _, xi_pos = max_contrast_sum(r_s, lam_s, floor)
    _, xi_neg = max_contrast_sum(-r_s, lam_s, floor)
    starts += [xi_pos, xi_neg]
    rng = substream(cfg.seed, "ccp-restarts")
    while len(starts) < max(cfg.restarts, 1):
        starts.append(rng.uniform(0.0, 1.0, size=lam_s.size))
    starts = starts[: max(cfg.restarts, 1)]
    if warm_s is not None:
        starts.append(warm_s)
    return starts


def solve_rd_support(lam_s: np.ndarray, floor: float) -> np.ndarray:
    """Water-filling restricted to a positive spectrum, by distortion floor."""
    delta = float(lam_s.sum()) - floor
    theta = waterfill_theta(lam_s, delta)
    xi = 1.0 - theta / lam_s
    xi[theta >= lam_s] = 0.0
    return xi


def solve_rdd_j(
    problem: RddProblem,
    cfg: SolverConfig = SolverConfig(),
    warm: Optional[np.ndarray] = None,
) -> SolveResult:
    """Aware-detector problem via the penalty convex-concave procedure.

    The detectability constraint bounds a convex g(xi) from below. Each
    outer iteration replaces g by its supporting hyperplane at the current
    iterate (an inner approximation, so any zero-slack subproblem solution
    is truly feasible) and solves the resulting convex program with a
    slack variable whose penalty weight grows geometrically and a proximal
    term that decays to zero. Multi-start; optimality is not certified.
    """
    if problem.constraint_kind is not ConstraintKind.AWARE_J:
        raise DomainError("solve_rdd_j requires an aware-J problem")
    lam = problem.lam_ok
    support, lam_s = _strip_support(lam)
    r_full = core.ratio_vector(lam, problem.anomaly)
    r_s = r_full[support]
    c2 = 2.0 * problem.omega * LN2
    floor = max(float(lam_s.sum()) - float(problem.delta), 0.0) if lam_s.size else 0.0

    if problem.omega == 0.0:
        # vacuous constraint: the convex distortion-only problem, solved exactly
        if lam_s.size == 0:
            return _finish(lam, support, np.zeros(0), problem, Status.OPTIMAL,
                           {"branch": "rd"})
        drow = _distortion_row(lam_s, problem.delta)
        res = _convex_solve(lam_s, [drow] if drow else [],
                            solve_rd_support(lam_s, floor), cfg)
        status = Status.OPTIMAL if res.converged else Status.FEASIBLE
        return _finish(lam, support, res.x, problem, status,
                       {"branch": "rd", "iterations": res.iterations,
                        "kkt_gap": res.gap})

    # certified upper bound: g is increasing coordinate-wise, so its maximum
    # over the box sits at the clamp corner
    g_cap, _ = core.dist_j_nats_parts(r_s, np.full(lam_s.size, XI_CLAMP)) if lam_s.size else (0.0, None)
    if g_cap < c2 * (1.0 - 1e-12):
        return SolveResult(
            xis=np.zeros(lam.size),
            rate_bits=math.nan,
            achieved_delta=math.nan,
            achieved_omega=math.nan,
            status=Status.INFEASIBLE,
            diagnostics={"certificate_max_omega": g_cap / (2.0 * LN2),
                         "requested_omega": problem.omega, "certified": True},
        )

    warm_s = warm[support] if (warm is not None and cfg.warm_start) else None
    drow = _distortion_row(lam_s, problem.delta)
    rows_base = [drow] if drow else []
    d = lam_s.size

    best = None
    best_residual = math.inf
    for restart_index, xi_start in enumerate(_ccp_starts(lam_s, r_s, floor, cfg, warm_s)):
        xi_k = np.clip(xi_start, 0.0, XI_CLAMP)
        tau = cfg.penalty_init
        # proximal damping: early subproblems stay near the start so the
        # linearization remains locally valid (zero-gradient coordinates make
        # undamped iterations migrate to concentrated stationary points);
        # the weight decays to zero, recovering the plain fixed-point condition
        prox = 1.0
        prev_rate = None
        slack = math.inf
        outer = 0
        for outer in range(1, cfg.max_outer_iters + 1):
            g0, grad = core.dist_j_nats_parts(r_s, xi_k)
            # linearized floor: grad . xi + s >= c2 - g0 + grad . xi_k
            const = c2 - g0 + float(grad @ xi_k)
            s_cap = max(const, 0.0) + 1.0
            rows = []
            for coef, bound in rows_base:
                rows.append((np.concatenate([coef, [0.0]]), bound))
            rows.append((np.concatenate([-grad, [-1.0]]), -const))
            x0 = np.concatenate([xi_k, [max(const - float(grad @ xi_k), 0.0) + 1e-3]])
            quad = None
            if prox > 1e-7:
                quad = (np.concatenate([np.full(d, prox), [0.0]]),
                        np.concatenate([xi_k, [0.0]]))
            res = solve_ipm(
                log_mask=np.concatenate([np.ones(d, bool), [False]]),
                c=np.concatenate([np.zeros(d), [tau]]),
                lb=np.zeros(d + 1),
                ub=np.concatenate([np.full(d, XI_CLAMP), [s_cap]]),
                A=np.vstack([c for c, _ in rows]),
                b=np.array([b for _, b in rows]),
                x0=x0,
                tol=cfg.tol,
                feas_tol=cfg.feas_tol,
                quad=quad,
            )
            xi_next = np.clip(res.x[:d], 0.0, XI_CLAMP)
            slack = float(res.x[d])
            rate_now = core.rate(lam_s, xi_next)
            xi_k = xi_next
            if prox <= 1e-7 and slack < cfg.feas_tol and prev_rate is not None and \
                    abs(rate_now - prev_rate) < max(cfg.tol, 1e-9):
                prev_rate = rate_now
                break
            prev_rate = rate_now
            tau = min(tau * cfg.penalty_growth, cfg.penalty_cap)
            prox *= 0.25

        g_final, _ = core.dist_j_nats_parts(r_s, xi_k)
        residual = max(c2 - g_final, 0.0) / (2.0 * LN2)
        feasible = slack < cfg.feas_tol and g_final >= c2 - cfg.feas_tol
        if feasible:
            cand_rate = core.rate(lam_s, xi_k)
            if best is None or cand_rate < best[1]:
                best = (xi_k.copy(), cand_rate, outer, restart_index, slack)
        best_residual = min(best_residual, residual)

    if best is None:
        return SolveResult(
            xis=np.zeros(lam.size),
            rate_bits=math.nan,
            achieved_delta=math.nan,
            achieved_omega=math.nan,
            status=Status.INFEASIBLE,
            diagnostics={"best_residual_omega": best_residual,
                         "requested_omega": problem.omega, "certified": False},
        )

    xi_k, _, outer, restart_index, slack = best
    diag = {
        "branch": "ccp",
        "iterations": outer,
        "restart_index": restart_index,
        "slack": slack,
    }
    return _finish(lam, support, xi_k, problem, Status.FEASIBLE, diag)

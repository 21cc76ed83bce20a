"""Primal-dual interior-point method for separable box-constrained problems.

Solves

    minimize    sum_{j in log_mask} -ln(1 - x_j)  +  c . x
                  [+ sum_j w_j/2 (x_j - m_j)^2 when a quad term is given]
    subject to  lb <= x <= ub
                A x <= b          (a handful of dense rows)

with Mehrotra predictor-corrector steps on the KKT system, followed by an
active-set polish: the bound/row pattern suggested by the interior-point
iterate is solved exactly by Newton on the reduced equality-constrained
problem and accepted only if the full KKT conditions verify. The polish
gives machine-precision solutions on degenerate instances (e.g. a
distortion water level that exactly grazes a variance).

The Hessian is diagonal and A has at most a few rows, so the Newton
normal equations ``(H + E' diag(z/s) E) dx = rhs`` reduce via the
Woodbury identity to a diagonal solve plus a k x k system, keeping every
iteration O(n).

This is the only optimizer in the package: the two-branch linear
distinguishability problem uses it directly, and the concave-constraint
problem calls it on a sequence of linearized subproblems.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# iterates must stay strictly inside the domain of -ln(1 - x)
_DOMAIN_MARGIN = 1e-13


@dataclass
class IpmResult:
    x: np.ndarray
    converged: bool
    iterations: int
    gap: float
    primal_residual: float
    dual_residual: float
    objective: float
    polished: bool = False
    # multipliers of the general rows A x <= b, for diagnostics
    row_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _objective(x, log_mask, c, quad=None):
    val = float(c @ x)
    if np.any(log_mask):
        val -= float(np.sum(np.log1p(-x[log_mask])))
    if quad is not None:
        w, center = quad
        val += 0.5 * float(w @ (x - center) ** 2)
    return val


def _grad(x, log_mask, c, quad=None):
    g = c.copy()
    g[log_mask] += 1.0 / (1.0 - x[log_mask])
    if quad is not None:
        w, center = quad
        g = g + w * (x - center)
    return g


def _hess_diag(x, log_mask, quad=None):
    h = np.zeros_like(x)
    one_minus = 1.0 - x[log_mask]
    h[log_mask] = 1.0 / (one_minus * one_minus)
    if quad is not None:
        h = h + quad[0]
    return h


def _newton_equality(x0, free, log_mask, c, A_act, h_act, quad=None, max_iter=60):
    """Solve min phi(x_free) s.t. A_act x_free = h_act exactly (Newton).

    Returns (x_free, nu) or None if the bordered system is singular or the
    iteration leaves the barrier domain.
    """
    nf = int(np.sum(free))
    ka = A_act.shape[0]
    x = x0[free].copy()
    lm = log_mask[free]
    cf = c[free]
    qf = (quad[0][free], quad[1][free]) if quad is not None else None
    nu = np.zeros(ka)
    for _ in range(max_iter):
        g = cf.copy()
        g[lm] += 1.0 / (1.0 - x[lm])
        if qf is not None:
            g = g + qf[0] * (x - qf[1])
        r1 = g + (A_act.T @ nu if ka else 0.0)
        r2 = (A_act @ x - h_act) if ka else np.zeros(0)
        if max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(r2), initial=0.0)) < 1e-12 * (
            1.0 + np.max(np.abs(g), initial=0.0)
        ):
            return x, nu
        h = np.zeros(nf)
        om = 1.0 - x[lm]
        h[lm] = 1.0 / (om * om)
        if qf is not None:
            h = h + qf[0]
        kkt = np.zeros((nf + ka, nf + ka))
        kkt[:nf, :nf] = np.diag(h)
        if ka:
            kkt[:nf, nf:] = A_act.T
            kkt[nf:, :nf] = A_act
        rhs = -np.concatenate([r1, r2])
        try:
            step = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        dx = step[:nf]
        dnu = step[nf:]
        t = 1.0
        rising = lm & (dx > 0)
        if np.any(rising):
            room = (1.0 - _DOMAIN_MARGIN) - x[rising]
            t = min(t, float(np.min(0.999 * room / dx[rising])))
        x = x + t * dx
        nu = nu + t * dnu
    return x, nu


def _polish(x_in, log_mask, c, lb, ub, A, b, obj_cap, quad=None):
    """Active-set crossover. Returns (x, row_duals) or None.

    Bound pattern is read off x_in; every subset of near-active general
    rows is tried (k <= 2, so at most four Newton solves) and the first
    candidate whose KKT conditions verify is returned. Verified candidates
    are exact global optima of the convex problem.
    """
    d = lb.size
    k = A.shape[0] if A.size else 0
    unit = np.maximum(np.abs(ub - lb), 1.0)
    at_lo = x_in <= lb + 1e-6 * unit
    at_up = (~at_lo) & (x_in >= ub - 1e-6 * unit)
    free = ~(at_lo | at_up)

    x_base = np.where(at_lo, lb, np.where(at_up, ub, x_in))
    if k:
        row_res = b - A @ x_base
        near = np.abs(row_res) <= 1e-5 * (1.0 + np.abs(b))
        candidates = sorted(
            (tuple(idx) for r in range(k + 1) for idx in itertools.combinations(range(k), r)),
            key=lambda t: (t != tuple(np.flatnonzero(near)), len(t)),
        )
    else:
        candidates = [()]

    for active_rows in candidates:
        act = list(active_rows)
        cand = _solve_active_set(
            x_base, at_lo, at_up, act, log_mask, c, lb, ub, A, b, unit, quad
        )
        if cand is None:
            continue
        x, nu, f_lo, f_up, f_free = cand
        if np.any(log_mask & (x >= 1.0)):
            continue

        # verify KKT: stationarity residual defines the bound multipliers
        g = _grad(x, log_mask, c, quad)
        nu_full = np.zeros(k)
        if act:
            nu_full[act] = nu
        stat = g + (A.T @ nu_full if k else 0.0)
        mu_lo = np.where(f_lo | (f_free & (np.abs(x - lb) < 1e-12)), stat, 0.0)
        mu_up = np.where(f_up, -stat, 0.0)
        free_strict = f_free & (np.abs(x - lb) >= 1e-12)
        ok = (
            np.all(mu_lo >= -1e-7)
            and np.all(mu_up >= -1e-7)
            and np.all(np.abs(stat[free_strict]) <= 1e-7 * (1.0 + np.abs(g[free_strict])))
            and np.all(nu_full >= -1e-9)
        )
        if k:
            ok = ok and np.all(A @ x - b <= 1e-9 * (1.0 + np.abs(b)))
        ok = ok and _objective(x, log_mask, c, quad) <= obj_cap + 1e-7 * (1.0 + abs(obj_cap))
        if ok:
            return x, nu_full
    return None


def _solve_active_set(x_base, at_lo, at_up, act, log_mask, c, lb, ub, A, b, unit, quad=None):
    """Newton-solve the equality-reduced problem, reclassifying any free
    variable whose unconstrained solution crosses a bound. Returns
    (x, nu, at_lo, at_up, free) or None.
    """
    k = A.shape[0] if A.size else 0
    at_lo = at_lo.copy()
    at_up = at_up.copy()
    x = np.where(at_lo, lb, np.where(at_up, ub, x_base))
    for _ in range(x_base.size + 2):
        free = ~(at_lo | at_up)
        A_act = A[act][:, free] if k else np.zeros((0, int(np.sum(free))))
        fixed = np.where(free, 0.0, x)
        h_act = (b[act] - A[act] @ fixed) if act else np.zeros(0)
        if np.any(free):
            sol = _newton_equality(x, free, log_mask, c, A_act, h_act, quad)
            if sol is None:
                return None
            x_f, nu = sol
            x = np.where(at_lo, lb, np.where(at_up, ub, x))
            x[free] = x_f
        else:
            nu = np.zeros(len(act))
            if act and np.max(np.abs(h_act), initial=0.0) > 1e-9 * (
                1.0 + np.max(np.abs(b), initial=0.0)
            ):
                return None
            return x, nu, at_lo, at_up, free
        cross_lo = free & (x < lb - 1e-10 * unit)
        cross_up = free & (x > ub + 1e-10 * unit)
        if not (np.any(cross_lo) or np.any(cross_up)):
            # snap fp dust onto the bounds
            x = np.clip(x, lb, ub)
            return x, nu, at_lo, at_up, free
        at_lo |= cross_lo
        at_up |= cross_up
        x = np.where(cross_lo, lb, np.where(cross_up, ub, x))
    return None


def solve_ipm(
    log_mask: np.ndarray,
    c: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-9,
    feas_tol: float = 1e-8,
    max_iter: int = 100,
    quad: tuple[np.ndarray, np.ndarray] | None = None,
) -> IpmResult:
    """Run the interior-point iteration, then polish. A may have zero rows.

    x0, when given, is projected strictly inside the box before use.
    """
    d = lb.size
    k = A.shape[0] if A.size else 0
    A0 = np.asarray(A, dtype=float).reshape(k, d).copy()
    b0 = np.asarray(b, dtype=float).reshape(k).copy()

    # row equilibration keeps the KKT system well scaled when constraint
    # coefficients span orders of magnitude
    if k:
        row_scale = np.maximum(np.max(np.abs(A0), axis=1), 1e-30)
        A = A0 / row_scale[:, None]
        b = b0 / row_scale
    else:
        row_scale = np.ones(0)
        A = A0
        b = b0

    width = ub - lb
    if x0 is None:
        x = lb + 0.5 * width
    else:
        # keep starts well off the corners: a barrier gradient of order 1/pad
        # at the first iterate wrecks the centrality of the whole run
        pad = 0.02 * np.maximum(width, 1e-12)
        x = np.clip(np.asarray(x0, dtype=float), lb + pad, ub - pad)
    x[log_mask] = np.minimum(x[log_mask], 1.0 - 1e-9)

    m = 2 * d + k

    def residual_rows(xv):
        # E x - f for E = [-I; I; A], f = [-lb; ub; b]
        out = np.concatenate([lb - xv, xv - ub, A @ xv - b if k else np.zeros(0)])
        return out

    scale = 1.0 + max(
        float(np.max(np.abs(b))) if k else 0.0,
        float(np.max(np.abs(ub))),
        float(np.max(np.abs(lb))),
    )
    s = np.maximum(-residual_rows(x), 1e-2 * scale)
    z = np.full(m, 1.0)

    best = None  # (merit, x, z_rows, gap, pres, dres)
    converged = False
    gap = pres = dres = np.inf
    it = 0

    # non-finite directions near numerical exhaustion are caught explicitly
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(1, max_iter + 1):
            g = _grad(x, log_mask, c, quad)
            h = _hess_diag(x, log_mask, quad)

            z_lo, z_up, z_g = z[:d], z[d : 2 * d], z[2 * d :]
            s_lo, s_up, s_g = s[:d], s[d : 2 * d], s[2 * d :]

            Etz = -z_lo + z_up + (A.T @ z_g if k else 0.0)
            rL = g + Etz
            rs = s + residual_rows(x)
            rsz = s * z
            mu = float(np.sum(rsz) / m)

            gap = mu
            pres = float(np.max(np.abs(rs)))
            dres = float(np.max(np.abs(rL)))
            gnorm = 1.0 + float(np.max(np.abs(g)))
            merit = max(mu, pres / scale, 1e-4 * dres / gnorm)
            if np.isfinite(merit) and (best is None or merit < best[0]):
                best = (merit, x.copy(), (z_g / row_scale).copy() if k else np.zeros(0), mu, pres, dres)

            thr_primal = scale * feas_tol
            if dres < gnorm * max(100.0 * tol, 1e-8) and pres < thr_primal and mu < tol:
                converged = True
                break
            if mu < 1e-14 and pres < thr_primal:
                # numerically exhausted; polish finishes the job
                break

            diag = h + z_lo / s_lo + z_up / s_up
            if k:
                w = z_g / s_g
                core = (A * (1.0 / diag)) @ A.T + np.diag(1.0 / w)

            def kkt_solve(r1, r2, r3):
                """(dx, dz, ds) for the Newton system with rhs (r1, r2, r3)."""
                r2_lo, r2_up, r2_g = r2[:d], r2[d : 2 * d], r2[2 * d :]
                r3_lo, r3_up, r3_g = r3[:d], r3[d : 2 * d], r3[2 * d :]
                t_lo = (z_lo * r2_lo - r3_lo) / s_lo
                t_up = (z_up * r2_up - r3_up) / s_up
                rhs = r1 - t_lo + t_up
                if k:
                    t_g = (z_g * r2_g - r3_g) / s_g
                    rhs = rhs + A.T @ t_g
                    u = rhs / diag
                    try:
                        y = np.linalg.solve(core, A @ u)
                    except np.linalg.LinAlgError:
                        return None
                    dx = u - (A.T @ y) / diag
                else:
                    dx = rhs / diag
                ds = r2 - np.concatenate([-dx, dx, A @ dx if k else np.zeros(0)])
                dz = (r3 - z * ds) / s
                if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dz)) and np.all(np.isfinite(ds))):
                    return None
                return dx, dz, ds

            sol = kkt_solve(-rL, -rs, -rsz)
            if sol is None:
                break
            dxa, dza, dsa = sol

            alpha_aff = 1.0
            neg = dza < 0
            if np.any(neg):
                alpha_aff = min(alpha_aff, float(np.min(-z[neg] / dza[neg])))
            neg = dsa < 0
            if np.any(neg):
                alpha_aff = min(alpha_aff, float(np.min(-s[neg] / dsa[neg])))
            mu_aff = float(np.sum((z + alpha_aff * dza) * (s + alpha_aff * dsa)) / m)
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

            sol = kkt_solve(-rL, -rs, -(rsz + dsa * dza - sigma * mu))
            if sol is None:
                break
            dx, dz, ds = sol

            alpha = 1.0
            neg = dz < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-z[neg] / dz[neg])))
            neg = ds < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-s[neg] / ds[neg])))
            alpha *= 0.99

            # never let a barrier coordinate cross its pole at 1
            rising = log_mask & (dx > 0)
            if np.any(rising):
                room = (1.0 - _DOMAIN_MARGIN) - x[rising]
                alpha = min(alpha, float(np.min(0.9999 * room / dx[rising])))

            if alpha < 1e-13:
                break

            x = x + alpha * dx
            z = z + alpha * dz
            s = s + alpha * ds

    if best is None:
        best = (np.inf, x, (z[2 * d :] / row_scale) if k else np.zeros(0), gap, pres, dres)
    _, x_best, duals_best, gap, pres, dres = best

    polished = _polish(x_best, log_mask, c, lb, ub, A0, b0,
                       obj_cap=_objective(x_best, log_mask, c, quad), quad=quad)
    if polished is not None:
        x_fin, duals = polished
        row_res = (A0 @ x_fin - b0) if k else np.zeros(0)
        return IpmResult(
            x=x_fin,
            converged=True,
            iterations=it,
            gap=0.0,
            primal_residual=float(np.max(row_res, initial=0.0)),
            dual_residual=0.0,
            objective=_objective(x_fin, log_mask, c, quad),
            polished=True,
            row_duals=duals,
        )

    if not converged and x0 is not None:
        # a poor warm start can stall the iteration; the cold start is robust
        return solve_ipm(log_mask, c, lb, ub, A0, b0, x0=None,
                         tol=tol, feas_tol=feas_tol, max_iter=max_iter, quad=quad)

    return IpmResult(
        x=x_best,
        converged=converged,
        iterations=it,
        gap=gap,
        primal_residual=pres,
        dual_residual=dres,
        objective=_objective(x_best, log_mask, c, quad),
        polished=False,
        row_duals=duals_best,
    )

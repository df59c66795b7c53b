"""Pseudo-arclength continuation of the solitary-wave branch in (w, F).

The branch is parameterized by arclength measured in the reduced
(v0, F)-plane, v0 being the interface displacement at the crest: a secant
predictor extrapolates the full field, and the corrector solves the
bordered system (height-equation rows plus one arclength normalization
row) by block elimination with two back-solves per factorization.

Continuation stops when the field approaches the stagnation boundary from
either side: loss of ellipticity (min h_p below threshold) or blow-up of
the streamline-height gradient (sup h_p above the reciprocal threshold,
the proxy for a horizontal stagnation point).  The second trigger is the
one a branch of elevation waves is expected to meet.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import splu

from .background import StratifiedBackground
from .grid import HeightField
from .solver import DiscreteProblem, SolverError, get_problem
from .sturm import CriticalData


class ContinuationError(RuntimeError):
    pass


@dataclass
class StepControl:
    ds0: float = 2e-3
    ds_min: float = 1e-8
    ds_max: float = 5e-2
    grow: float = 1.3
    easy_iterations: int = 3    # corrector counts as "easy" at or below this
    max_steps: int = 400
    newton_tol: float = 1e-10
    max_corrector: int = 12


@dataclass
class StopCriteria:
    min_hp: float = 0.05
    sup_hp: float = 20.0
    check_froude_bound: bool = True


@dataclass
class BranchPoint:
    """One accepted solution with its arclength and blow-up functional."""

    field: HeightField
    arc_s: float
    N_s: float
    F: float
    v0: float
    min_hp: float
    sup_hp: float
    newton_iterations: int = 0

    @property
    def blowup_norm(self) -> float:
        return self.N_s


def blowup_functional(field: HeightField, bg: StratifiedBackground,
                      F_cr: float) -> Tuple[float, float, float]:
    """N = |w|_C1 + 1/min(h_p) + F + 1/(F - F_cr), with the h_p extremes.

    The solution norm is approximated by the discrete C^1 norm; the true
    functional controls many more derivatives, all equivalent for the
    trend this diagnostic is used for.
    """
    w_C1 = field.sup_norm()
    for side in ("-", "+"):
        w_C1 = max(w_C1, float(np.max(np.abs(field.wq(side)))),
                   float(np.max(np.abs(field.wp(side)))))
    prob = get_problem(field.grid, bg)
    min_hp = prob.min_hp(field.w_lo, field.w_up)
    sup_hp = prob.max_hp(field.w_lo, field.w_up)
    if field.F <= F_cr:
        raise ContinuationError(f"branch point with F = {field.F} <= F_cr = {F_cr}")
    N = w_C1 + 1.0 / min_hp + field.F + 1.0 / (field.F - F_cr)
    return N, min_hp, sup_hp


def _make_point(field: HeightField, bg, F_cr, arc_s, iterations=0) -> BranchPoint:
    N, min_hp, sup_hp = blowup_functional(field, bg, F_cr)
    return BranchPoint(field=field, arc_s=arc_s, N_s=N, F=field.F,
                       v0=field.v0, min_hp=min_hp, sup_hp=sup_hp,
                       newton_iterations=iterations)


def _froude_bound_slack(point: BranchPoint, bg: StratifiedBackground) -> float:
    from .diagnostics import check_froude_upper_bound

    return check_froude_upper_bound(point.field, bg)


def _corrector(prob: DiscreteProblem, x, F, x_prev, F_prev, t_v, t_F, ds,
               v_idx, tol, max_iter, ellip_floor=1e-8):
    """Newton on the bordered system; returns (x, F, iterations)."""
    v0_prev = x_prev[v_idx]
    for it in range(max_iter):
        r = prob.residual(x, F)
        rc = t_v * (x[v_idx] - v0_prev) + t_F * (F - F_prev) - ds
        if max(np.max(np.abs(r)), abs(rc)) < tol:
            return x, F, it
        J = prob.jacobian(x, F)
        bF = prob.dF_vector(x, F)
        lu = splu(J.tocsc())
        u1 = lu.solve(r)
        u2 = lu.solve(bF)
        denom = t_F - t_v * u2[v_idx]
        if denom == 0:
            raise ContinuationError("singular bordered system")
        dF = (t_v * u1[v_idx] - rc) / denom
        dx = -u1 - dF * u2
        lam = 1.0
        for _ in range(10):
            x_try, F_try = x + lam * dx, F + lam * dF
            if prob.min_hp(*prob.unpack(x_try)) > ellip_floor and F_try > 0:
                break
            lam *= 0.5
        else:
            raise ContinuationError("corrector lost ellipticity")
        x, F = x_try, F_try
    r = prob.residual(x, F)
    rc = t_v * (x[v_idx] - v0_prev) + t_F * (F - F_prev) - ds
    if max(np.max(np.abs(r)), abs(rc)) < tol:
        return x, F, max_iter
    raise ContinuationError("corrector did not converge")


def continue_branch(start: HeightField, bg: StratifiedBackground,
                    critical: CriticalData,
                    step: Optional[StepControl] = None,
                    stop: Optional[StopCriteria] = None,
                    on_accept: Optional[Callable] = None,
                    second: Optional[HeightField] = None) -> Tuple[List[BranchPoint], str]:
    """Follow the branch from a converged solution toward stagnation.

    Returns the ordered list of accepted points (the start included) and
    the stop reason: ``min_hp``, ``sup_hp``, ``froude_bound``,
    ``step_underflow`` or ``max_steps``.  A converged ``second`` point may
    be supplied (branch resumption); otherwise one is generated by a small
    amplitude-extrapolated fixed-Froude solve.
    """
    from .solver import newton_solve

    step = step or StepControl()
    stop = stop or StopCriteria()
    F_cr = critical.F_cr
    prob = get_problem(start.grid, bg)
    v_idx = int(prob.idx_up[start.grid.crest_index, 0])

    pts: List[BranchPoint] = [_make_point(start, bg, F_cr, 0.0)]
    if on_accept:
        on_accept(pts[-1])

    if second is None:
        # second point by a small fixed-F solve: amplitude-extrapolated seed
        mu_cr = critical.mu_cr
        eps0_sq = mu_cr - 1.0 / start.F ** 2
        eps1_sq = eps0_sq * 1.21
        F1 = 1.0 / np.sqrt(mu_cr - eps1_sq)
        seed = start.copy()
        scale = eps1_sq / eps0_sq
        seed.w_lo *= scale
        seed.w_up *= scale
        seed.F = float(F1)
        second, info = newton_solve(seed, bg, tol=step.newton_tol)
        iterations = info.iterations
    else:
        if second.grid is not start.grid and second.grid != start.grid:
            raise ContinuationError("second point lives on a different grid")
        iterations = int(second.meta.get("newton_iterations", 0))
    ds_prev = float(np.hypot(second.v0 - start.v0, second.F - start.F))
    pts.append(_make_point(second, bg, F_cr, ds_prev, iterations))
    if on_accept:
        on_accept(pts[-1])

    x_prev = prob.pack(pts[-2].field)
    x_cur = prob.pack(pts[-1].field)
    F_prev, F_cur = pts[-2].F, pts[-1].F

    ds = step.ds0
    easy_streak = 0
    reason = "max_steps"
    for _ in range(step.max_steps):
        # secant tangent in the (v0, F) plane, unit normalized
        dv = x_cur[v_idx] - x_prev[v_idx]
        dFt = F_cur - F_prev
        norm = np.hypot(dv, dFt)
        if norm == 0:
            raise ContinuationError("degenerate secant direction")
        t_v, t_F = dv / norm, dFt / norm

        # full-state secant predictor
        ratio = ds / norm
        x_pred = x_cur + ratio * (x_cur - x_prev)
        F_pred = F_cur + ratio * dFt

        try:
            x_new, F_new, iters = _corrector(prob, x_pred, F_pred, x_cur, F_cur,
                                             t_v, t_F, ds, v_idx,
                                             step.newton_tol, step.max_corrector)
        except (ContinuationError, SolverError, RuntimeError):
            ds *= 0.5
            easy_streak = 0
            if ds < step.ds_min:
                if len(pts) <= 2:
                    raise ContinuationError(
                        "first corrector failed at the minimal step")
                reason = "step_underflow"
                break
            continue

        fld = prob.field(x_new, F_new, dict(pts[-1].field.meta))
        fld.meta["newton_iterations"] = iters
        pt = _make_point(fld, bg, F_cr, pts[-1].arc_s + ds, iters)
        pts.append(pt)
        if on_accept:
            on_accept(pt)

        x_prev, F_prev = x_cur, F_cur
        x_cur, F_cur = x_new, F_new

        if pt.min_hp < stop.min_hp:
            reason = "min_hp"
            break
        if pt.sup_hp > stop.sup_hp:
            reason = "sup_hp"
            break
        if stop.check_froude_bound and _froude_bound_slack(pt, bg) < -1e-8:
            reason = "froude_bound"
            break

        if iters <= step.easy_iterations:
            easy_streak += 1
            if easy_streak >= 2:
                ds = min(ds * step.grow, step.ds_max)
                easy_streak = 0
        else:
            easy_streak = 0
    return pts, reason

"""Finite-difference discretization and Newton solver for the height equation.

The quasilinear transmission problem for w = h - H,

    d/dp E(w_p, w_q) + d/dq G(w_p, w_q) - rho_p w / F^2 = 0      in both layers,
    -E(w_p, w_q) + rho w / F^2 = 0                                on the top,
    -[[E(w_p, w_q)]] + [[rho]] w / F^2 = 0                        at the interface,
    w = 0                                                         on the bed,

with the divergence-form fluxes

    E = -(1 + w_q^2) / (2 (H_p + w_p)^2) + 1 / (2 H_p^2),
    G = w_q / (H_p + w_p),

is discretized conservatively: interior rows balance fluxes evaluated at
cell faces (second order), the top and transmission rows use one-sided
second-order p-stencils, the crest column imposes evenness, and the far
column imposes decay (Dirichlet).  The Jacobian is the exact derivative of
the discrete residual, assembled sparsely.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .background import StratifiedBackground
from .grid import HeightField, SlitGrid


class SolverError(RuntimeError):
    pass


class StagnationBoundaryError(SolverError):
    """Ellipticity could not be maintained while damping the Newton step."""


# ----------------------------------------------------------------------
# flux closures and their partials
def _E(wp, wq, a):
    return -(1.0 + wq ** 2) / (2.0 * (a + wp) ** 2) + 1.0 / (2.0 * a ** 2)

def _E1(wp, wq, a):     # dE/dwq
    return -wq / (a + wp) ** 2

def _E2(wp, wq, a):     # dE/dwp
    return (1.0 + wq ** 2) / (a + wp) ** 3

def _G(wp, wq, a):
    return wq / (a + wp)

def _G1(wp, wq, a):     # dG/dwq
    return 1.0 / (a + wp)

def _G2(wp, wq, a):     # dG/dwp
    return -wq / (a + wp) ** 2


@dataclass
class _SubGrid:
    """Per-layer samples of the background on one sub-grid."""

    p: np.ndarray
    dp: float
    Hp: np.ndarray         # at nodes
    Hp_half: np.ndarray    # at p-faces
    rhop: np.ndarray       # streamline-density derivative at nodes
    rho: np.ndarray


class DiscreteProblem:
    """Square nonlinear system for the unknown interior/top/interface values.

    Unknown layout, column-major in q: for each q-column, the lower-layer
    nodes above the bed (j = 1..np_minus-1, the last being the interface
    lower limit) followed by the upper-layer nodes (j = 0..np_plus-1, the
    first being the interface upper limit, the last the top).
    """

    def __init__(self, grid: SlitGrid, bg: StratifiedBackground):
        if abs(grid.p_hat - bg.p_hat) > 1e-12:
            raise SolverError("grid p_hat does not match the background")
        self.grid = grid
        self.bg = bg
        self.lo = self._sample(bg, grid.p_lo, "-")
        self.up = self._sample(bg, grid.p_up, "+")
        self.rho_top = float(bg.rho(0.0, "+"))
        self.jump_rho = bg.rho_jump()
        self.Hp_hat_lo = float(bg.H_p(bg.p_hat, "-"))
        self.Hp_hat_up = float(bg.H_p(bg.p_hat, "+"))

        nq, nm, npp = grid.nq, grid.np_minus, grid.np_plus
        per_col = (nm - 1) + npp
        self.n_unknowns = nq * per_col
        idx_lo = np.full((nq, nm), -1, dtype=np.int64)
        idx_up = np.full((nq, npp), -1, dtype=np.int64)
        cols = np.arange(nq)[:, None]
        idx_lo[:, 1:] = cols * per_col + np.arange(nm - 1)[None, :]
        idx_up[:, :] = cols * per_col + (nm - 1) + np.arange(npp)[None, :]
        self.idx_lo, self.idx_up = idx_lo, idx_up

    @staticmethod
    def _sample(bg: StratifiedBackground, p: np.ndarray, side: str) -> _SubGrid:
        half = 0.5 * (p[:-1] + p[1:])
        return _SubGrid(p=p, dp=float(p[1] - p[0]),
                        Hp=bg.H_p(p, side), Hp_half=bg.H_p(half, side),
                        rhop=bg.rho.deriv(p, side), rho=bg.rho(p, side))

    # -- packing -------------------------------------------------------
    def pack(self, field: HeightField) -> np.ndarray:
        x = np.empty(self.n_unknowns)
        x[self.idx_lo[:, 1:].ravel()] = field.w_lo[:, 1:].ravel()
        x[self.idx_up.ravel()] = field.w_up.ravel()
        return x

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        nq = self.grid.nq
        w_lo = np.zeros((nq, self.grid.np_minus))
        w_lo[:, 1:] = x[self.idx_lo[:, 1:].ravel()].reshape(nq, -1)
        w_up = x[self.idx_up.ravel()].reshape(nq, self.grid.np_plus)
        return w_lo, w_up

    def field(self, x: np.ndarray, F: float, meta=None) -> HeightField:
        w_lo, w_up = self.unpack(x)
        return HeightField(self.grid, float(F), w_lo, w_up, meta or {})

    # -- ellipticity ----------------------------------------------------
    def min_hp(self, w_lo, w_up) -> float:
        return min(self._hp_extreme(w_lo, self.lo, np.min),
                   self._hp_extreme(w_up, self.up, np.min))

    def max_hp(self, w_lo, w_up) -> float:
        return max(self._hp_extreme(w_lo, self.lo, np.max),
                   self._hp_extreme(w_up, self.up, np.max))

    @staticmethod
    def _hp_extreme(w, sub: _SubGrid, reducer) -> float:
        dp = sub.dp
        wp = np.empty_like(w)
        wp[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2 * dp)
        wp[:, 0] = (-3 * w[:, 0] + 4 * w[:, 1] - w[:, 2]) / (2 * dp)
        wp[:, -1] = (3 * w[:, -1] - 4 * w[:, -2] + w[:, -3]) / (2 * dp)
        return float(reducer(sub.Hp[None, :] + wp))

    # -- residual -------------------------------------------------------
    def residual(self, x: np.ndarray, F: float) -> np.ndarray:
        w_lo, w_up = self.unpack(x)
        mu = 1.0 / F ** 2
        g = self.grid
        dq = g.dq
        r = np.zeros(self.n_unknowns)

        for sub, w, idx in ((self.lo, w_lo, self.idx_lo), (self.up, w_up, self.idx_up)):
            self._interior_residual(r, sub, w, idx, mu, dq)

        self._top_residual(r, w_up, mu)
        self._interface_residual(r, w_lo, w_up, mu)

        # continuity of the duplicated interface rows
        i_int = np.arange(0 if g.symmetric else 1, g.nq - 1)
        r[self.idx_up[i_int, 0]] = w_up[i_int, 0] - w_lo[i_int, -1]

        if g.symmetric:
            # evenness wall at the crest, one-sided second order
            for w, idx, j0 in ((w_lo, self.idx_lo, 1), (w_up, self.idx_up, 1)):
                js = np.arange(j0, w.shape[1])
                r[idx[0, js]] = (-3 * w[0, js] + 4 * w[1, js] - w[2, js]) / (2 * dq)
        else:
            self._dirichlet_edge(r, x, 0)
        self._dirichlet_edge(r, x, g.nq - 1)
        return r

    def _dirichlet_edge(self, r, x, i):
        ids = np.concatenate([self.idx_lo[i, 1:], self.idx_up[i, :]])
        r[ids] = x[ids]

    def _interior_residual(self, r, sub: _SubGrid, w, idx, mu, dq):
        nq = self.grid.nq
        n = w.shape[1]
        if n < 3:
            return
        dp = sub.dp
        # p-face fluxes E at (i, j+1/2) for interior columns
        wp_h = (w[:, 1:] - w[:, :-1]) / dp
        wq_h = np.zeros_like(wp_h)
        wq_h[1:-1, :] = (w[2:, 1:] + w[2:, :-1] - w[:-2, 1:] - w[:-2, :-1]) / (4 * dq)
        E = _E(wp_h, wq_h, sub.Hp_half[None, :])
        # q-face fluxes G at (i+1/2, j) for interior rows
        wq_g = (w[1:, :] - w[:-1, :]) / dq
        wp_g = np.zeros_like(wq_g)
        wp_g[:, 1:-1] = (w[:-1, 2:] + w[1:, 2:] - w[:-1, :-2] - w[1:, :-2]) / (4 * dp)
        G = _G(wp_g[:, 1:-1], wq_g[:, 1:-1], sub.Hp[None, 1:-1])

        res = ((E[1:-1, 1:] - E[1:-1, :-1]) / dp
               + (G[1:, :] - G[:-1, :]) / dq
               - mu * sub.rhop[None, 1:-1] * w[1:-1, 1:-1])
        rows = idx[1:-1, 1:-1]
        mask = rows >= 0
        r[rows[mask]] = res[mask]

    def _top_stencil(self, w_up):
        g = self.grid
        J = g.np_plus - 1
        dq, dpp = g.dq, g.dpp
        i = np.arange(1, g.nq - 1)
        xi1 = (w_up[i + 1, J] - w_up[i - 1, J]) / (2 * dq)
        xi2 = (3 * w_up[i, J] - 4 * w_up[i, J - 1] + w_up[i, J - 2]) / (2 * dpp)
        return i, J, xi1, xi2

    def _top_residual(self, r, w_up, mu):
        i, J, xi1, xi2 = self._top_stencil(w_up)
        a = self.up.Hp[-1]
        res = (1 + xi1 ** 2) / (2 * (a + xi2) ** 2) - 1 / (2 * a ** 2) + mu * self.rho_top * w_up[i, J]
        r[self.idx_up[i, J]] = res

    def _interface_stencil(self, w_lo, w_up):
        g = self.grid
        m = g.np_minus - 1
        dq, dpm, dpp = g.dq, g.dpm, g.dpp
        i = np.arange(1, g.nq - 1)
        xi1 = (w_lo[i + 1, m] - w_lo[i - 1, m]) / (2 * dq)
        xi2m = (3 * w_lo[i, m] - 4 * w_lo[i, m - 1] + w_lo[i, m - 2]) / (2 * dpm)
        xi2p = (-3 * w_up[i, 0] + 4 * w_up[i, 1] - w_up[i, 2]) / (2 * dpp)
        return i, m, xi1, xi2m, xi2p

    def _interface_residual(self, r, w_lo, w_up, mu):
        i, m, xi1, xi2m, xi2p = self._interface_stencil(w_lo, w_up)
        am, ap = self.Hp_hat_lo, self.Hp_hat_up
        res = ((1 + xi1 ** 2) / (2 * (ap + xi2p) ** 2)
               - (1 + xi1 ** 2) / (2 * (am + xi2m) ** 2)
               - (1 / (2 * ap ** 2) - 1 / (2 * am ** 2))
               + mu * self.jump_rho * w_lo[i, m])
        r[self.idx_lo[i, m]] = res

    # -- Jacobian ---------------------------------------------------------
    def jacobian(self, x: np.ndarray, F: float) -> sp.csr_matrix:
        w_lo, w_up = self.unpack(x)
        mu = 1.0 / F ** 2
        g = self.grid
        dq = g.dq
        rows, cols, vals = [], [], []

        def put(r_idx, c_idx, v):
            r_flat = np.asarray(r_idx).ravel()
            c_flat = np.asarray(c_idx).ravel()
            v_flat = np.broadcast_to(v, np.asarray(r_idx).shape).ravel()
            keep = (r_flat >= 0) & (c_flat >= 0)
            rows.append(r_flat[keep])
            cols.append(c_flat[keep])
            vals.append(v_flat[keep])

        for sub, w, idx in ((self.lo, w_lo, self.idx_lo), (self.up, w_up, self.idx_up)):
            self._interior_jacobian(put, sub, w, idx, mu, dq)

        self._top_jacobian(put, w_up, mu)
        self._interface_jacobian(put, w_lo, w_up, mu)

        i_int = np.arange(0 if g.symmetric else 1, g.nq - 1)
        put(self.idx_up[i_int, 0], self.idx_up[i_int, 0], 1.0)
        put(self.idx_up[i_int, 0], self.idx_lo[i_int, -1], -1.0)

        if g.symmetric:
            for w, idx in ((w_lo, self.idx_lo), (w_up, self.idx_up)):
                js = np.arange(1, w.shape[1])
                put(idx[0, js], idx[0, js], -3 / (2 * dq))
                put(idx[0, js], idx[1, js], 4 / (2 * dq))
                put(idx[0, js], idx[2, js], -1 / (2 * dq))
        else:
            ids = np.concatenate([self.idx_lo[0, 1:], self.idx_up[0, :]])
            put(ids, ids, 1.0)
        ids = np.concatenate([self.idx_lo[g.nq - 1, 1:], self.idx_up[g.nq - 1, :]])
        put(ids, ids, 1.0)

        J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.n_unknowns, self.n_unknowns))
        return J.tocsr()

    def _interior_jacobian(self, put, sub: _SubGrid, w, idx, mu, dq):
        n = w.shape[1]
        if n < 3:
            return
        dp = sub.dp
        # face states, as in the residual
        wp_h = (w[:, 1:] - w[:, :-1]) / dp
        wq_h = np.zeros_like(wp_h)
        wq_h[1:-1, :] = (w[2:, 1:] + w[2:, :-1] - w[:-2, 1:] - w[:-2, :-1]) / (4 * dq)
        A1 = _E1(wp_h, wq_h, sub.Hp_half[None, :])
        A2 = _E2(wp_h, wq_h, sub.Hp_half[None, :])
        wq_g = (w[1:, :] - w[:-1, :]) / dq
        wp_g = np.zeros_like(wq_g)
        wp_g[:, 1:-1] = (w[:-1, 2:] + w[1:, 2:] - w[:-1, :-2] - w[1:, :-2]) / (4 * dp)
        B1 = _G1(wp_g, wq_g, sub.Hp[None, :])
        B2 = _G2(wp_g, wq_g, sub.Hp[None, :])

        I = np.arange(1, w.shape[0] - 1)[:, None]
        Jj = np.arange(1, n - 1)[None, :]
        R = idx[I, Jj]

        def ix(di, dj):
            return idx[I + di, Jj + dj]

        # shorthand: face arrays sliced to the interior row block
        A1u, A2u = A1[1:-1, 1:], A2[1:-1, 1:]          # face j+1/2
        A1d, A2d = A1[1:-1, :-1], A2[1:-1, :-1]        # face j-1/2
        B1r, B2r = B1[1:, 1:-1], B2[1:, 1:-1]          # face i+1/2
        B1l, B2l = B1[:-1, 1:-1], B2[:-1, 1:-1]        # face i-1/2

        put(R, ix(0, 0), -(A2u + A2d) / dp ** 2 - (B1r + B1l) / dq ** 2
            - mu * sub.rhop[None, 1:-1])
        put(R, ix(0, 1), A2u / dp ** 2 + (B2r - B2l) / (4 * dp * dq))
        put(R, ix(0, -1), A2d / dp ** 2 - (B2r - B2l) / (4 * dp * dq))
        put(R, ix(1, 0), (A1u - A1d) / (4 * dq * dp) + B1r / dq ** 2)
        put(R, ix(-1, 0), -(A1u - A1d) / (4 * dq * dp) + B1l / dq ** 2)
        put(R, ix(1, 1), A1u / (4 * dq * dp) + B2r / (4 * dp * dq))
        put(R, ix(1, -1), -A1d / (4 * dq * dp) - B2r / (4 * dp * dq))
        put(R, ix(-1, 1), -A1u / (4 * dq * dp) - B2l / (4 * dp * dq))
        put(R, ix(-1, -1), A1d / (4 * dq * dp) + B2l / (4 * dp * dq))

    def _top_jacobian(self, put, w_up, mu):
        g = self.grid
        dq, dpp = g.dq, g.dpp
        i, J, xi1, xi2 = self._top_stencil(w_up)
        a = self.up.Hp[-1]
        T1 = xi1 / (a + xi2) ** 2
        T2 = -(1 + xi1 ** 2) / (a + xi2) ** 3
        R = self.idx_up[i, J]
        put(R, self.idx_up[i + 1, J], T1 / (2 * dq))
        put(R, self.idx_up[i - 1, J], -T1 / (2 * dq))
        put(R, self.idx_up[i, J], 3 * T2 / (2 * dpp) + mu * self.rho_top)
        put(R, self.idx_up[i, J - 1], -2 * T2 / dpp)
        put(R, self.idx_up[i, J - 2], T2 / (2 * dpp))

    def _interface_jacobian(self, put, w_lo, w_up, mu):
        g = self.grid
        dq, dpm, dpp = g.dq, g.dpm, g.dpp
        i, m, xi1, xi2m, xi2p = self._interface_stencil(w_lo, w_up)
        am, ap = self.Hp_hat_lo, self.Hp_hat_up
        T1 = xi1 * (1 / (ap + xi2p) ** 2 - 1 / (am + xi2m) ** 2)
        Tp = -(1 + xi1 ** 2) / (ap + xi2p) ** 3
        Tm = (1 + xi1 ** 2) / (am + xi2m) ** 3
        R = self.idx_lo[i, m]
        put(R, self.idx_lo[i + 1, m], T1 / (2 * dq))
        put(R, self.idx_lo[i - 1, m], -T1 / (2 * dq))
        put(R, self.idx_lo[i, m], 3 * Tm / (2 * dpm) + mu * self.jump_rho)
        put(R, self.idx_lo[i, m - 1], -2 * Tm / dpm)
        put(R, self.idx_lo[i, m - 2], Tm / (2 * dpm))
        put(R, self.idx_up[i, 0], -3 * Tp / (2 * dpp))
        put(R, self.idx_up[i, 1], 2 * Tp / dpp)
        put(R, self.idx_up[i, 2], -Tp / (2 * dpp))

    # -- Froude derivative ------------------------------------------------
    def dF_vector(self, x: np.ndarray, F: float) -> np.ndarray:
        w_lo, w_up = self.unpack(x)
        g = self.grid
        out = np.zeros(self.n_unknowns)
        c = 2.0 / F ** 3
        for sub, w, idx in ((self.lo, w_lo, self.idx_lo), (self.up, w_up, self.idx_up)):
            if w.shape[1] < 3:
                continue
            rows = idx[1:-1, 1:-1]
            vals = c * sub.rhop[None, 1:-1] * w[1:-1, 1:-1]
            mask = rows >= 0
            out[rows[mask]] = vals[mask]
        i = np.arange(1, g.nq - 1)
        J = g.np_plus - 1
        out[self.idx_up[i, J]] = -c * self.rho_top * w_up[i, J]
        out[self.idx_lo[i, g.np_minus - 1]] = -c * self.jump_rho * w_lo[i, g.np_minus - 1]
        return out


# ----------------------------------------------------------------------
_PROBLEM_CACHE: Dict[Tuple[int, int], DiscreteProblem] = {}


def get_problem(grid: SlitGrid, bg: StratifiedBackground) -> DiscreteProblem:
    key = (id(grid), id(bg))
    prob = _PROBLEM_CACHE.get(key)
    if prob is None:
        prob = DiscreteProblem(grid, bg)
        if len(_PROBLEM_CACHE) > 32:
            _PROBLEM_CACHE.clear()
        _PROBLEM_CACHE[key] = prob
    return prob


def assemble_residual(field: HeightField, bg: StratifiedBackground,
                      flag_ellipticity: bool = True) -> np.ndarray:
    """Residual of the discrete height equation at the given field."""
    prob = get_problem(field.grid, bg)
    x = prob.pack(field)
    if flag_ellipticity and prob.min_hp(field.w_lo, field.w_up) <= 0:
        field.meta["ellipticity_lost"] = True
    return prob.residual(x, field.F)


def assemble_jacobian(field: HeightField, bg: StratifiedBackground) -> sp.csr_matrix:
    """Exact Jacobian of the discrete residual."""
    prob = get_problem(field.grid, bg)
    return prob.jacobian(prob.pack(field), field.F)


@dataclass
class NewtonInfo:
    iterations: int = 0
    residuals: list = dc_field(default_factory=list)
    step_norms: list = dc_field(default_factory=list)
    quad_ratios: list = dc_field(default_factory=list)
    converged: bool = False


def newton_solve(seed: HeightField, bg: StratifiedBackground, tol: float = 1e-10,
                 max_iter: int = 50, rhs: Optional[np.ndarray] = None,
                 ellipticity_floor: float = 1e-8,
                 verbose: bool = False) -> Tuple[HeightField, NewtonInfo]:
    """Damped Newton iteration on the discrete height equation.

    Backtracking (factor 0.5, at most 12 halvings) controls both the
    residual decrease (Armijo on the sup norm) and ellipticity of every
    iterate.  ``rhs``, if given, is subtracted from the residual (used by
    manufactured-solution runs).
    """
    prob = get_problem(seed.grid, bg)
    x = prob.pack(seed)
    F = seed.F
    info = NewtonInfo()

    def res(xv):
        r = prob.residual(xv, F)
        return r if rhs is None else r - rhs

    w_lo, w_up = prob.unpack(x)
    if prob.min_hp(w_lo, w_up) <= ellipticity_floor:
        raise StagnationBoundaryError("seed is not elliptic")

    r = res(x)
    rnorm = float(np.max(np.abs(r)))
    info.residuals.append(rnorm)
    for it in range(max_iter):
        if rnorm < tol:
            info.converged = True
            break
        J = prob.jacobian(x, F)
        try:
            lu = splu(J.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"Jacobian factorization failed: {exc}") from exc
        step = lu.solve(-r)
        if not np.all(np.isfinite(step)):
            raise SolverError("Newton step is not finite")

        lam = 1.0
        accepted = False
        for _ in range(13):
            x_try = x + lam * step
            w_lo, w_up = prob.unpack(x_try)
            if prob.min_hp(w_lo, w_up) > ellipticity_floor:
                r_try = res(x_try)
                rnorm_try = float(np.max(np.abs(r_try)))
                if rnorm_try < (1.0 - 1e-4 * lam) * rnorm or rnorm_try < tol:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            if prob.min_hp(*prob.unpack(x + lam * step)) <= ellipticity_floor:
                raise StagnationBoundaryError(
                    "cannot maintain ellipticity along the Newton step")
            raise SolverError(
                f"Newton stalled at iteration {it} with residual {rnorm:.3e}")

        if rnorm > 0:
            info.quad_ratios.append(rnorm_try / rnorm ** 2)
        info.step_norms.append(float(np.max(np.abs(lam * step))))
        x, r, rnorm = x_try, r_try, rnorm_try
        info.residuals.append(rnorm)
        info.iterations = it + 1
        if verbose:
            print(f"  newton it {it + 1}: |r|_inf = {rnorm:.3e} (lambda {lam:g})")
    else:
        raise SolverError(f"Newton did not converge in {max_iter} iterations "
                          f"(best residual {rnorm:.3e})")

    out = prob.field(x, F, dict(seed.meta))
    out.meta["newton_iterations"] = info.iterations
    out.meta["newton_residual"] = rnorm
    return out, info


def refine_and_transfer(field: HeightField, new_grid: SlitGrid,
                        bg: Optional[StratifiedBackground] = None,
                        tol: float = 1e-10) -> HeightField:
    """Move a field to a new grid by per-layer bicubic interpolation.

    Interpolation never crosses the interface slit.  If a background is
    supplied the transferred field is re-converged by Newton before return.
    """
    from scipy.interpolate import RectBivariateSpline

    g, ng = field.grid, new_grid
    if abs(g.p_hat - ng.p_hat) > 1e-12:
        raise SolverError("interpolation across the interface slit requested")
    if ng.L > g.L * (1 + 1e-12):
        raise SolverError("new grid exceeds the source truncation length")
    if g.symmetric != ng.symmetric:
        raise SolverError("cannot change domain symmetry during transfer")

    def move(w, p_old, p_new):
        spl = RectBivariateSpline(g.q, p_old, w, kx=3, ky=3)
        return spl(ng.q, p_new)

    w_lo = move(field.w_lo, g.p_lo, ng.p_lo)
    w_up = move(field.w_up, g.p_up, ng.p_up)
    w_lo[:, 0] = 0.0
    out = HeightField(ng, field.F, w_lo, w_up, dict(field.meta))
    if bg is not None:
        out, _ = newton_solve(out, bg, tol=tol)
    return out

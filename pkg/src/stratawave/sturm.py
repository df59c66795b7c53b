"""Transversal eigenvalue problem of the laminar flow by transmission shooting.

The linearization of the height equation about the background current,
restricted to functions of p alone, is a Sturm-Liouville problem with an
interior jump at the interface streamline:

    (phi_p / H_p^3)_p - mu*rho_p*phi = nu*phi/H_p     on both layers,
    [[phi_p / H_p^3]] = mu*[[rho]]*phi                at p = p_hat,
    phi = 0, phi_p = 1                                at p = -1,
    A := -phi_p/H_p^3 + mu*rho*phi = 0                at p = 0,

with mu = 1/F^2.  The critical Froude number is the smallest mu > 0 at
which the top condition holds for the nu = 0 solution.  With the sign
convention above, the spectrum at criticality descends from nu_0 = 0 and
oscillatory behaviour sets in for nu < 0.

Shooting propagates (phi, phi_p/H_p^3): the co-normal second component is
what jumps at the interface, so the transmission condition is a plain
additive update.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .background import StratifiedBackground

_ODE_TOL = 1e-12
_MU_CAP = 1e6
_NU_FLOOR = -1e6


class SturmError(RuntimeError):
    """Shooting or root-search failure."""


@dataclass(frozen=True)
class ShootingState:
    """Solution value and co-normal flux phi_p/H_p^3 at the top p = 0."""

    phi: float
    flux: float


@dataclass
class CriticalData:
    """Critical spectral data of the background.

    ``phi0`` callables are normalized to 1 at the interface; the raw
    shooting solution (unit slope at the bed) is ``phi0_scale`` times
    larger.  ``spectrum`` is filled by :func:`spectrum_at_criticality`.
    """

    mu_cr: float
    F_cr: float
    phi0_scale: float
    spectrum: Optional[np.ndarray] = None
    dirichlet: Optional[np.ndarray] = None
    _phi_lo: Callable = field(default=None, repr=False)
    _phi_up: Callable = field(default=None, repr=False)
    _dphi_lo: Callable = field(default=None, repr=False)
    _dphi_up: Callable = field(default=None, repr=False)

    def phi0(self, p, side: str, normalized: bool = True):
        f = self._phi_lo if side in ("-", "lower", "lo") else self._phi_up
        val = f(np.asarray(p, dtype=float))
        return val / self.phi0_scale if normalized else val

    def dphi0(self, p, side: str, normalized: bool = True):
        f = self._dphi_lo if side in ("-", "lower", "lo") else self._dphi_up
        val = f(np.asarray(p, dtype=float))
        return val / self.phi0_scale if normalized else val


# ----------------------------------------------------------------------
_COEFF_CACHE = {}


def _coeff_splines(bg: StratifiedBackground):
    """Cubic-spline samplings of H_p and rho_p per layer.

    The shooting right-hand side is evaluated hundreds of thousands of
    times across root searches; spline lookups of the smooth per-branch
    coefficients (sampled densely, interpolation error ~1e-13) replace the
    much costlier profile call chains.
    """
    from scipy.interpolate import InterpolatedUnivariateSpline

    key = id(bg)
    hit = _COEFF_CACHE.get(key)
    if hit is not None and hit[0] is bg:
        return hit[1]
    out = {}
    for side, lo, hi in (("-", -1.0, bg.p_hat), ("+", bg.p_hat, 0.0)):
        ps = np.linspace(lo, hi, 2001)
        out[side] = (InterpolatedUnivariateSpline(ps, bg.H_p(ps, side), k=3),
                     InterpolatedUnivariateSpline(ps, bg.rho.deriv(ps, side), k=3))
    if len(_COEFF_CACHE) > 16:
        _COEFF_CACHE.clear()
    _COEFF_CACHE[key] = (bg, out)
    return out


def _integrate(bg: StratifiedBackground, mu: float, nu: float, dense: bool = False,
               tol: float = _ODE_TOL):
    """March (phi, flux) from the bed to the surface across the interface."""
    coeffs = _coeff_splines(bg)

    def rhs(side):
        hp_s, rp_s = coeffs[side]

        def f(p, y):
            phi, s = y
            hp = hp_s(p)
            return [s * hp ** 3, mu * rp_s(p) * phi + nu * phi / hp]

        return f

    hp_bed = float(bg.H_p(-1.0, "-"))
    y0 = [0.0, 1.0 / hp_bed ** 3]  # phi(-1) = 0, phi_p(-1) = 1
    sol_lo = solve_ivp(rhs("-"), (-1.0, bg.p_hat), y0, method="DOP853",
                       rtol=tol, atol=tol, dense_output=dense)
    if not sol_lo.success:
        raise SturmError(f"shooting failed in the lower layer near p = {sol_lo.t[-1]:.6f}")
    phi_hat, s_minus = sol_lo.y[0, -1], sol_lo.y[1, -1]
    if phi_hat == 0.0 and s_minus == 0.0:
        raise SturmError("shooting state vanished identically at the interface")

    s_plus = s_minus + mu * bg.rho_jump() * phi_hat
    sol_up = solve_ivp(rhs("+"), (bg.p_hat, 0.0), [phi_hat, s_plus], method="DOP853",
                       rtol=tol, atol=tol, dense_output=dense)
    if not sol_up.success:
        raise SturmError(f"shooting failed in the upper layer near p = {sol_up.t[-1]:.6f}")
    if sol_up.y[0, -1] == 0.0 and sol_up.y[1, -1] == 0.0:
        raise SturmError("shooting state vanished identically at the surface")
    return sol_lo, sol_up


def shoot(bg: StratifiedBackground, mu: float, nu: float = 0.0,
          tol: float = _ODE_TOL) -> ShootingState:
    """Shooting solution of the transversal problem, evaluated at p = 0."""
    _, sol_up = _integrate(bg, mu, nu, tol=tol)
    return ShootingState(phi=float(sol_up.y[0, -1]), flux=float(sol_up.y[1, -1]))


def eval_A(bg: StratifiedBackground, mu: float) -> float:
    """Top boundary functional whose first positive root defines criticality."""
    st = shoot(bg, mu, 0.0)
    return -st.flux + mu * float(bg.rho(0.0, "+")) * st.phi


def find_mu_cr(bg: StratifiedBackground) -> CriticalData:
    """Locate the critical spectral parameter and the principal eigenfunction.

    Brackets the smallest positive root of A by geometric expansion from
    mu = 1, refines by bisection, and polishes with a secant-Newton step.
    """
    lo = hi = 1.0
    A_lo = A_hi = eval_A(bg, 1.0)
    while A_hi < 0.0:
        hi *= 2.0
        if hi > _MU_CAP:
            raise SturmError(f"no sign change of A for mu up to {_MU_CAP:g}; "
                             "background outside the supported regime")
        A_hi = eval_A(bg, hi)
    while A_lo >= 0.0:
        lo *= 0.5
        if lo < 1e-12:
            raise SturmError("A is non-negative down to mu = 1e-12; "
                             "background outside the supported regime")
        A_lo = eval_A(bg, lo)

    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if eval_A(bg, mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * hi:
            break
    mu = 0.5 * (lo + hi)

    # secant-Newton polish
    for _ in range(6):
        A0 = eval_A(bg, mu)
        dmu = 1e-7 * mu
        dA = (eval_A(bg, mu + dmu) - eval_A(bg, mu - dmu)) / (2 * dmu)
        if dA == 0.0:
            break
        step = A0 / dA
        mu -= step
        if abs(A0) < 1e-12 * (1.0 + abs(dA) * mu):
            break
    if not (mu > 0.0) or abs(eval_A(bg, mu)) > 1e-9 * (1.0 + mu):
        raise SturmError(f"criticality polish failed at mu = {mu}")

    # confirm this is the first crossing: A < 0 strictly below
    for frac in np.geomspace(0.02, 1.0 - 1e-3, 12):
        if eval_A(bg, frac * mu) >= 0.0:
            raise SturmError("A changes sign below the located root; "
                             "smallest-root bracketing failed")

    sol_lo, sol_up = _integrate(bg, mu, 0.0, dense=True)
    scale = float(sol_lo.y[0, -1])  # value at the interface
    if scale <= 0.0:
        raise SturmError("principal eigenfunction is not positive at the interface")

    hp3_lo = lambda p: bg.H_p(p, "-") ** 3
    hp3_up = lambda p: bg.H_p(p, "+") ** 3
    return CriticalData(
        mu_cr=float(mu), F_cr=float(1.0 / np.sqrt(mu)), phi0_scale=scale,
        _phi_lo=lambda p: sol_lo.sol(p)[0],
        _phi_up=lambda p: sol_up.sol(p)[0],
        _dphi_lo=lambda p: sol_lo.sol(p)[1] * hp3_lo(p),
        _dphi_up=lambda p: sol_up.sol(p)[1] * hp3_up(p),
    )


# ----------------------------------------------------------------------
def _eigen_residual(bg: StratifiedBackground, mu_cr: float, nu: float) -> float:
    """Smooth function of nu whose zeros are exactly the eigenvalues."""
    st = shoot(bg, mu_cr, nu)
    return -st.flux + mu_cr * float(bg.rho(0.0, "+")) * st.phi


def _dirichlet_value(bg: StratifiedBackground, mu_cr: float, nu: float) -> float:
    return shoot(bg, mu_cr, nu).phi


def dirichlet_spectrum(bg: StratifiedBackground, critical: CriticalData,
                       count: int) -> np.ndarray:
    """Largest ``count`` eigenvalues of the clamped (phi(0)=0) problem.

    The solution oscillates with local wavenumber ~ k*H_p for nu = -k^2,
    so a uniform scan in k with steps well below pi cannot skip roots.
    """
    mu = critical.mu_cr
    roots = []
    dk = 0.2
    k_prev = 1e-9
    f_prev = _dirichlet_value(bg, mu, -k_prev ** 2)
    k = dk
    while len(roots) < count:
        if -k ** 2 < _NU_FLOOR:
            break
        f = _dirichlet_value(bg, mu, -k ** 2)
        if f_prev * f < 0:
            kr = brentq(lambda kk: _dirichlet_value(bg, mu, -kk ** 2), k_prev, k,
                        xtol=1e-13, rtol=8.9e-16)
            roots.append(-kr ** 2)
        k_prev, f_prev = k, f
        k += dk
    return np.asarray(roots)


def spectrum_at_criticality(bg: StratifiedBackground, critical: CriticalData,
                            count: int) -> np.ndarray:
    """Descending eigenvalues nu_0 = 0 > nu_1 > ... at mu = mu_cr.

    The eigenvalue residual is monotone between consecutive clamped-problem
    eigenvalues, which interlace the spectrum, so each interval is searched
    by bracketed root finding.  Returns fewer than ``count`` values (with a
    warning) if the search floor is reached.
    """
    import warnings

    mu = critical.mu_cr
    g0 = _eigen_residual(bg, mu, 0.0)
    if abs(g0) > 1e-7 * (1.0 + mu):
        raise SturmError(f"top condition not satisfied at nu = 0: residual {g0:.3e}")
    spectrum = [0.0]
    if count <= 1:
        out = np.asarray(spectrum[:count])
        critical.spectrum = out
        return out

    poles = dirichlet_spectrum(bg, critical, count)
    critical.dirichlet = poles
    if len(poles) < count:
        warnings.warn(f"eigenvalue search floor {_NU_FLOOR:g} reached: "
                      f"returning {len(poles)} of {count} requested eigenvalues")

    # nu_{j+1} lies strictly between consecutive clamped eigenvalues
    delta = 1e-9
    for j in range(min(count, len(poles)) - 1):
        hi = poles[j] - delta * max(1.0, abs(poles[j]))
        lo = poles[j + 1] + delta * max(1.0, abs(poles[j + 1]))
        fa, fb = _eigen_residual(bg, mu, lo), _eigen_residual(bg, mu, hi)
        if fa * fb > 0:
            raise SturmError(f"no eigenvalue bracket in ({lo:.6g}, {hi:.6g})")
        nu = brentq(lambda v: _eigen_residual(bg, mu, v), lo, hi,
                    xtol=1e-12, rtol=8.9e-16)
        spectrum.append(nu)
    out = np.asarray(spectrum)
    critical.spectrum = out
    return out

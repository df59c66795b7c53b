"""Physical-plane reconstruction from streamline coordinates.

Inverts the semi-Lagrangian map: a height field h(q, p) on the slitted
strip becomes surfaces y = h - 1 indexed by streamline, with velocities

    c - u = 1 / (sqrt(rho) h_p),      v = -h_q / (sqrt(rho) h_p),

pressure from the streamline Bernoulli energy, and (optionally) all
quantities restored to dimensional units via the recorded scale factors.
Output stays streamline-indexed: no interpolation ever crosses the free
surface or the internal interface.  A Cartesian resampler is provided for
plotting only.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, Optional

import numpy as np

from .background import ScaleReport, StratifiedBackground
from .grid import HeightField


class EulerianError(RuntimeError):
    pass


@dataclass
class EulerianWave:
    """Streamline-indexed physical fields of one wave (dimensionless unless noted)."""

    x: np.ndarray                    # horizontal stations (= q columns)
    eta: np.ndarray                  # free-surface elevation
    zeta: np.ndarray                 # internal-interface elevation
    p_lo: np.ndarray
    p_up: np.ndarray
    y_lo: np.ndarray                 # streamline heights, shape (nx, np)
    y_up: np.ndarray
    du_lo: np.ndarray                # u - c (negative everywhere)
    du_up: np.ndarray
    v_lo: np.ndarray
    v_up: np.ndarray
    P_lo: np.ndarray = None
    P_up: np.ndarray = None
    F: float = np.nan
    Q_surface: float = np.nan        # Bernoulli head on the free surface
    Q_interface: float = np.nan      # jump head on the internal interface
    dimensional: bool = False
    meta: Dict = dc_field(default_factory=dict)

    def streamline_ordering_defect(self) -> float:
        """Max violation of y strictly increasing in p (0 for a valid wave)."""
        d = 0.0
        for y in (self.y_lo, self.y_up):
            d = max(d, float(np.max(np.diff(y, axis=1) * -1.0)))
        d = max(d, float(np.max(self.y_lo[:, -1] - self.y_up[:, 0])))
        return d


def dj_inverse(field: HeightField, bg: StratifiedBackground) -> EulerianWave:
    """Reconstruct interfaces and velocities from a height field."""
    g = field.grid
    out = {}
    for side in ("-", "+"):
        p = g.p_lo if side == "-" else g.p_up
        w = field.w_lo if side == "-" else field.w_up
        H = bg.H(p, side)
        rho = bg.rho(p, side)
        hp = bg.H_p(p, side)[None, :] + field.wp(side)
        if np.any(hp <= 0):
            raise EulerianError("h_p <= 0: stagnation inside the domain")
        hq = field.wq(side)
        y = w + H[None, :] - 1.0
        du = -1.0 / (np.sqrt(rho)[None, :] * hp)        # u - c < 0
        v = -hq / (np.sqrt(rho)[None, :] * hp)
        out[side] = (y, du, v)

    y_lo, du_lo, v_lo = out["-"]
    y_up, du_up, v_up = out["+"]
    wave = EulerianWave(
        x=g.q.copy(), eta=y_up[:, -1].copy(), zeta=y_up[:, 0].copy(),
        p_lo=g.p_lo, p_up=g.p_up,
        y_lo=y_lo, y_up=y_up, du_lo=du_lo, du_up=du_up, v_lo=v_lo, v_up=v_up,
        F=field.F, meta=dict(field.meta),
    )
    # Bernoulli heads evaluated on the far-field laminar state
    F2 = field.F ** 2
    Hp0 = float(bg.H_p(0.0, "+"))
    wave.Q_surface = 1.0 / Hp0 ** 2 + 2.0 / F2 * float(bg.rho(0.0, "+"))
    jump_kin = float(1.0 / bg.H_p(bg.p_hat, "+") ** 2 - 1.0 / bg.H_p(bg.p_hat, "-") ** 2)
    y_hat = float(bg.H(bg.p_hat, "+")) - 1.0
    wave.Q_interface = jump_kin + 2.0 / F2 * bg.rho_jump() * (y_hat + 1.0)
    return wave


def bernoulli_energy(bg: StratifiedBackground, F: float):
    """E(p) per branch: d/dp E = beta, anchored at the far-field surface.

    Carries the interface jump [[E]] = 0.5*[[1/H_p^2]] + [[rho]]*y_hat/F^2
    implied by pressure continuity in the far field.
    """
    from scipy.integrate import quad

    F2 = F ** 2
    E0 = 0.5 / float(bg.H_p(0.0, "+")) ** 2

    def beta(p, side):
        return bg.beta_a(p, side) + bg.beta_b(p, side) / F2

    def E_up(p):
        return E0 + np.asarray([quad(lambda s: beta(s, "+"), 0.0, float(v),
                                     epsabs=1e-12, epsrel=1e-12)[0]
                                for v in np.atleast_1d(p)]).reshape(np.shape(p))

    E_hat_up = float(E_up(bg.p_hat))
    y_hat = float(bg.H(bg.p_hat, "+")) - 1.0
    jump_E = 0.5 * float(1.0 / bg.H_p(bg.p_hat, "+") ** 2
                         - 1.0 / bg.H_p(bg.p_hat, "-") ** 2) + bg.rho_jump() * y_hat / F2
    E_hat_lo = E_hat_up - jump_E

    def E_lo(p):
        return E_hat_lo + np.asarray([quad(lambda s: beta(s, "-"), bg.p_hat, float(v),
                                           epsabs=1e-12, epsrel=1e-12)[0]
                                      for v in np.atleast_1d(p)]).reshape(np.shape(p))

    return E_lo, E_up


def pressure_field(wave: EulerianWave, bg: StratifiedBackground,
                   F: Optional[float] = None) -> EulerianWave:
    """Attach P = E(p) - rho*((u-c)^2 + v^2)/2 - rho*y/F^2 on streamline nodes."""
    F = wave.F if F is None else F
    E_lo, E_up = bernoulli_energy(bg, F)
    for side, y, du, v in (("-", wave.y_lo, wave.du_lo, wave.v_lo),
                           ("+", wave.y_up, wave.du_up, wave.v_up)):
        p = wave.p_lo if side == "-" else wave.p_up
        rho = bg.rho(p, side)[None, :]
        E = (E_lo if side == "-" else E_up)(p)[None, :]
        P = E - 0.5 * rho * (du ** 2 + v ** 2) - rho * y / F ** 2
        if side == "-":
            wave.P_lo = P
        else:
            wave.P_up = P
    return wave


def redimensionalize(wave: EulerianWave, scales: ScaleReport,
                     P_atm: float = 0.0) -> EulerianWave:
    """Restore dimensional units using the recorded scale factors.

    Lengths scale with d, velocities with F*sqrt(g d), pressures with
    F^2*g*rho0*d (offset by the ambient pressure).  The relative velocity
    u - c is scaled; the absolute u needs the recorded wave speed c.
    """
    if wave.dimensional:
        raise EulerianError("wave is already dimensional")
    d = scales.length_scale
    vel = wave.F * scales.velocity_scale_per_froude
    pres = wave.F ** 2 * scales.pressure_scale_per_froude2
    out = EulerianWave(
        x=wave.x * d, eta=wave.eta * d, zeta=wave.zeta * d,
        p_lo=wave.p_lo, p_up=wave.p_up,
        y_lo=wave.y_lo * d, y_up=wave.y_up * d,
        du_lo=wave.du_lo * vel, du_up=wave.du_up * vel,
        v_lo=wave.v_lo * vel, v_up=wave.v_up * vel,
        P_lo=None if wave.P_lo is None else wave.P_lo * pres + P_atm,
        P_up=None if wave.P_up is None else wave.P_up * pres + P_atm,
        F=wave.F, Q_surface=wave.Q_surface, Q_interface=wave.Q_interface,
        dimensional=True, meta=dict(wave.meta),
    )
    return out


def cartesian_resample(wave: EulerianWave, ny: int = 64):
    """Sample (u-c, v, P) on a Cartesian y-grid per layer, for plotting only."""
    out = []
    for y, du, v, P in ((wave.y_lo, wave.du_lo, wave.v_lo, wave.P_lo),
                        (wave.y_up, wave.du_up, wave.v_up, wave.P_up)):
        y0, y1 = float(np.max(y[:, 0])), float(np.min(y[:, -1]))
        yg = np.linspace(y0, y1, ny)
        nx = y.shape[0]
        du_g = np.full((nx, ny), np.nan)
        v_g = np.full((nx, ny), np.nan)
        P_g = np.full((nx, ny), np.nan)
        for i in range(nx):
            du_g[i] = np.interp(yg, y[i], du[i])
            v_g[i] = np.interp(yg, y[i], v[i])
            if P is not None:
                P_g[i] = np.interp(yg, y[i], P[i])
        out.append({"y": yg, "du": du_g, "v": v_g, "P": P_g if P is not None else None})
    return out


def interface_table(wave: EulerianWave) -> str:
    """CSV of (x, eta, zeta)."""
    rows = ["x,eta,zeta"]
    for x, e, z in zip(wave.x, wave.eta, wave.zeta):
        rows.append(f"{x:.17g},{e:.17g},{z:.17g}")
    return "\n".join(rows) + "\n"


def streamline_table(wave: EulerianWave) -> str:
    """CSV of streamline nodes: layer, p, x, y, du, v, P."""
    rows = ["layer,p,x,y,du,v,P"]
    for layer, p_arr, y, du, v, P in (("lower", wave.p_lo, wave.y_lo, wave.du_lo,
                                       wave.v_lo, wave.P_lo),
                                      ("upper", wave.p_up, wave.y_up, wave.du_up,
                                       wave.v_up, wave.P_up)):
        for j, p in enumerate(p_arr):
            for i, x in enumerate(wave.x):
                Pv = np.nan if P is None else P[i, j]
                rows.append(f"{layer},{p:.17g},{x:.17g},{y[i, j]:.17g},"
                            f"{du[i, j]:.17g},{v[i, j]:.17g},{Pv:.17g}")
    return "\n".join(rows) + "\n"

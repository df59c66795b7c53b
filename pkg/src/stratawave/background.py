"""Far-field state of a two-layer stratified shear current.

Builds the dimensionless background that every other module consumes: the
streamline coordinate of the internal interface, the asymptotic height of
each streamline above the bed, the streamline density, and the Bernoulli
forcing split into its Froude-independent and Froude-dependent parts.

Conventions.  Streamlines are labelled by p in [-1, 0]: p = 0 is the free
surface, p = -1 the bed, and p = p_hat in (-1, 0) the internal interface.
The relative far-field velocity is normalized so that the pseudo mass flux
integral of sqrt(rho)*(c - u) over the column equals one, which pins the
total depth of the asymptotic height to one as well.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
import numpy as np
from scipy.integrate import quad, solve_ivp

from .profiles import PiecewiseProfile

_IVP_TOL = 1e-10          # asymptotic-height integrator tolerance
_ANCHOR_TOL = 1e-6        # acceptable defect in H(0) = 1 for user input


class BackgroundError(ValueError):
    """Rejected background input (unstable stratification, stagnation, ...)."""


@dataclass(frozen=True)
class FluidParameters:
    """Dimensional description of the column: wave speed, gravity, layer depths."""

    c: float
    g: float
    d_plus: float
    d_minus: float

    def __post_init__(self):
        for name in ("c", "g", "d_plus", "d_minus"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) <= 0:
                raise BackgroundError(f"{name} must be strictly positive")

    @property
    def d(self) -> float:
        return self.d_plus + self.d_minus


@dataclass(frozen=True)
class ScaleReport:
    """Record of every factor applied while non-dimensionalizing.

    ``velocity_scale_per_froude`` and ``pressure_scale_per_froude2`` carry
    the Froude-number dependence symbolically: the actual scales are
    F*velocity_scale_per_froude and F^2*pressure_scale_per_froude2, since
    the mass flux m = F*m_over_froude is only fixed once a wave (with its
    Froude number) is chosen.
    """

    d: float
    rho0: float
    g: float
    c: float
    normalization_integral: float    # integral sqrt(rho)*u_rel dy before rescaling
    ustar_rescale: float             # factor applied to the shear profile
    m_over_froude: float             # sqrt(g * rho0 * d^3) after rescaling
    froude_relation: float           # g*rho0*d^3 / m_over_froude^2, = 1 after rescaling
    length_scale: float
    density_scale: float
    velocity_scale_per_froude: float
    pressure_scale_per_froude2: float


def nondimensionalize(params: FluidParameters,
                      density_of_y: PiecewiseProfile,
                      ustar_of_y: PiecewiseProfile):
    """Rescale dimensional density/shear profiles onto the unit column.

    Returns ``(rho, u_rel, report)`` where both profiles live on y in
    [-1, 0] with breakpoint at -d_plus/d, rho is the density over the
    surface value, and u_rel is the relative velocity profile scaled so
    that integral sqrt(rho)*u_rel dy = 1.  The shear profile is rescaled
    (never rejected) if the caller's normalization is off; the factor is
    recorded in the report.
    """
    d = params.d
    lo, hi = density_of_y.domain
    if abs(lo + d) > 1e-9 * d or abs(hi) > 1e-9 * d:
        raise BackgroundError(f"density profile domain {density_of_y.domain} does not match [-d, 0]")
    if abs(density_of_y.breakpoint + params.d_plus) > 1e-9 * d:
        raise BackgroundError("density breakpoint must sit at the interface y = -d_plus")

    _check_positive(density_of_y, "density")
    _check_positive(ustar_of_y, "shear")
    _check_stable(density_of_y)

    rho0 = float(density_of_y.upper(0.0))

    def integrand(y):
        return np.sqrt(density_of_y(y, side=None)) * ustar_of_y(y, side=None)

    bp = density_of_y.breakpoint
    integral = (quad(integrand, -d, bp, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
                + quad(integrand, bp, 0.0, epsabs=1e-13, epsrel=1e-13, limit=200)[0])
    if not np.isfinite(integral) or integral <= 0:
        raise BackgroundError("normalization integral of sqrt(rho)*u* is not positive")

    target = np.sqrt(params.g * rho0 * d ** 3)
    lam = target / integral

    # dimensionless profiles on [-1, 0]; relative velocity absorbs 1/sqrt(g d)
    rho = density_of_y.rescale(1.0 / rho0, domain_factor=d)
    u_rel = ustar_of_y.rescale(lam / np.sqrt(params.g * d), domain_factor=d)

    report = ScaleReport(
        d=d, rho0=rho0, g=params.g, c=params.c,
        normalization_integral=integral,
        ustar_rescale=lam,
        m_over_froude=target,
        froude_relation=params.g * rho0 * d ** 3 / target ** 2,
        length_scale=d,
        density_scale=rho0,
        velocity_scale_per_froude=np.sqrt(params.g * d),
        pressure_scale_per_froude2=params.g * rho0 * d,
    )
    return rho, u_rel, report


def _check_positive(profile: PiecewiseProfile, name: str):
    for br in (profile.lower, profile.upper):
        xs = np.linspace(br.lo, br.hi, 65)
        if np.any(br(xs) <= 0):
            raise BackgroundError(f"{name} profile must be strictly positive")


def _check_stable(density: PiecewiseProfile):
    for br in (density.lower, density.upper):
        xs = np.linspace(br.lo, br.hi, 65)
        if np.any(br.deriv(xs) > 1e-10 * max(1.0, float(np.max(br(xs))))):
            raise BackgroundError("density must be non-increasing in y (stable stratification)")
    if density.jump() > 1e-12:
        raise BackgroundError("density must not increase upward across the interface")


# ----------------------------------------------------------------------
@dataclass
class StratifiedBackground:
    """Dimensionless far-field state shared by all solver stages.

    Immutable after construction; profiles are indexed by the streamline
    label p in [-1, 0] with the interface at ``p_hat``.
    """

    p_hat: float
    rho: PiecewiseProfile          # streamline density rho(p)
    H: PiecewiseProfile            # asymptotic height above the bed
    H_p: PiecewiseProfile
    beta_a: PiecewiseProfile       # Froude-independent Bernoulli part
    beta_b: PiecewiseProfile       # coefficient of 1/F^2
    f_relation_constant: float
    scales: ScaleReport
    rho_y: PiecewiseProfile = field(repr=False, default=None)   # density over y, dimensionless
    u_rel: PiecewiseProfile = field(repr=False, default=None)   # c - u over y, dimensionless

    def rho_jump(self) -> float:
        return self.rho.jump()

    def beta(self, p, F: float, side: str):
        return self.beta_a(p, side) + self.beta_b(p, side) / F ** 2

    def column_mass(self, p, side: str):
        """integral_0^p rho*H_p dp' evaluated through the y-substitution."""
        p = np.asarray(p, dtype=float)
        y = self.H(p, side) - 1.0
        return np.asarray([_mass_to(self, float(v)) for v in np.atleast_1d(y)]).reshape(p.shape)

    def content_hash(self) -> str:
        """Hash of the dimensionless state, used to stamp output artifacts."""
        xs_lo = np.linspace(-1.0, self.p_hat, 129)
        xs_up = np.linspace(self.p_hat, 0.0, 129)
        payload = np.concatenate([
            [self.p_hat], self.rho(xs_lo, "-"), self.rho(xs_up, "+"),
            self.H(xs_lo, "-"), self.H(xs_up, "+"),
            self.H_p(xs_lo, "-"), self.H_p(xs_up, "+"),
        ])
        return hashlib.sha256(np.round(payload, 12).tobytes()).hexdigest()[:16]


def _mass_to(bg: StratifiedBackground, y: float) -> float:
    """integral_0^y rho(y') dy' with the interface respected."""
    yb = bg.rho_y.breakpoint
    if y >= yb:
        return quad(lambda s: bg.rho_y(s, "+"), 0.0, y, epsabs=1e-13, epsrel=1e-13)[0]
    upper = quad(lambda s: bg.rho_y(s, "+"), 0.0, yb, epsabs=1e-13, epsrel=1e-13)[0]
    lower = quad(lambda s: bg.rho_y(s, "-"), yb, y, epsabs=1e-13, epsrel=1e-13)[0]
    return upper + lower


def solve_asymptotic_height(rho_y: PiecewiseProfile, u_rel: PiecewiseProfile,
                            p_hat: float):
    """Integrate the streamline-height problem dH/dp = 1/(sqrt(rho)(c-u)).

    The right-hand side is evaluated at y = H(p) - 1 on the matching layer.
    Returns dense solutions for the two branches of H, anchored at
    H(-1) = 0, along with their derivative closures.
    """
    d_frac = -rho_y.breakpoint  # = d_plus/d

    def rhs(side):
        br_r = rho_y.branch(side)
        br_u = u_rel.branch(side)

        def f(p, H):
            y = np.clip(H - 1.0, br_r.lo, br_r.hi)
            val = np.sqrt(br_r(y)) * br_u(y)
            if np.any(val <= 0):
                raise BackgroundError("stagnation in the background current")
            return 1.0 / val

        return f

    sol_lo = solve_ivp(rhs("-"), (-1.0, p_hat), [0.0], method="DOP853",
                       rtol=_IVP_TOL, atol=_IVP_TOL, dense_output=True)
    if not sol_lo.success:
        raise BackgroundError(f"height integration failed in the lower layer: {sol_lo.message}")
    H_hat = float(sol_lo.y[0, -1])
    if abs(H_hat - (1.0 - d_frac)) > 1e-6:
        raise BackgroundError(
            f"H(p_hat) = {H_hat:.9f} does not meet the interface height {1-d_frac:.9f}; "
            "profiles are inconsistent with the interface placement")
    sol_up = solve_ivp(rhs("+"), (p_hat, 0.0), [H_hat], method="DOP853",
                       rtol=_IVP_TOL, atol=_IVP_TOL, dense_output=True)
    if not sol_up.success:
        raise BackgroundError(f"height integration failed in the upper layer: {sol_up.message}")
    H_top = float(sol_up.y[0, -1])
    if abs(H_top - 1.0) > _ANCHOR_TOL:
        raise BackgroundError(
            f"H(0) = {H_top:.9f} differs from 1 by more than {_ANCHOR_TOL}; "
            "the shear profile does not satisfy the mass-flux normalization")

    def H_branch(sol, side):
        f_rhs = rhs(side)

        def H(p):
            return sol.sol(np.asarray(p, dtype=float))[0]

        def Hp(p):
            return f_rhs(p, H(p))

        return H, Hp

    H_lo, Hp_lo = H_branch(sol_lo, "-")
    H_up, Hp_up = H_branch(sol_up, "+")
    H = PiecewiseProfile(p_hat, H_lo, H_up, domain=(-1.0, 0.0),
                         lower_deriv=lambda p: Hp_lo(p), upper_deriv=lambda p: Hp_up(p))
    H_p = PiecewiseProfile(p_hat, Hp_lo, Hp_up, domain=(-1.0, 0.0))
    return H, H_p


def compute_beta(rho_y: PiecewiseProfile, u_rel: PiecewiseProfile,
                 H: PiecewiseProfile, H_p: PiecewiseProfile, p_hat: float):
    """Split Bernoulli forcing beta = beta_a + beta_b/F^2 along streamlines.

    In terms of the far-field data, with U_rel = c - u evaluated at the
    asymptotic height of streamline p,

        beta_b(p) = (H(p) - 1) * rho_p(p),
        beta_a(p) = -0.5*U_rel^2*rho_p(p) + rho*U_rel*dU_rel/dy*H_p,

    so that beta_b carries exactly the hydrostatic 1/F^2 part.
    """

    def branch_pair(side):
        br_r = rho_y.branch(side)
        br_u = u_rel.branch(side)
        br_H = H.branch(side)
        br_Hp = H_p.branch(side)

        def y_of(p):
            return np.clip(br_H(p) - 1.0, br_r.lo, br_r.hi)

        def rho_p(p):
            return br_r.deriv(y_of(p)) * br_Hp(p)

        def beta_a(p):
            y = y_of(p)
            ur = br_u(y)
            dur = br_u.deriv(y)
            return -0.5 * ur ** 2 * rho_p(p) + br_r(y) * ur * dur * br_Hp(p)

        def beta_b(p):
            return (br_H(p) - 1.0) * rho_p(p)

        return beta_a, beta_b

    a_lo, b_lo = branch_pair("-")
    a_up, b_up = branch_pair("+")
    beta_a = PiecewiseProfile(p_hat, a_lo, a_up, domain=(-1.0, 0.0))
    beta_b = PiecewiseProfile(p_hat, b_lo, b_up, domain=(-1.0, 0.0))
    for prof, name in ((beta_a, "beta_a"), (beta_b, "beta_b")):
        for br in (prof.lower, prof.upper):
            if not np.all(np.isfinite(br(np.linspace(br.lo, br.hi, 33)))):
                raise BackgroundError(f"{name} is not finite; check profile derivatives")
    return beta_a, beta_b


def build_background(params: FluidParameters,
                     density_of_y: PiecewiseProfile,
                     ustar_of_y: PiecewiseProfile) -> StratifiedBackground:
    """Full pipeline from dimensional profiles to the dimensionless state."""
    rho_y, u_rel, report = nondimensionalize(params, density_of_y, ustar_of_y)

    # interface streamline: p_hat = -integral over the upper layer of sqrt(rho)(c-u)
    yb = rho_y.breakpoint
    p_hat = -quad(lambda y: np.sqrt(rho_y(y, "+")) * u_rel(y, "+"),
                  yb, 0.0, epsabs=1e-13, epsrel=1e-13)[0]
    if not (-1.0 < p_hat < 0.0):
        raise BackgroundError(f"interface streamline p_hat = {p_hat} outside (-1, 0)")

    H, H_p = solve_asymptotic_height(rho_y, u_rel, p_hat)

    def rho_branch(side):
        br_r = rho_y.branch(side)
        br_H = H.branch(side)
        br_Hp = H_p.branch(side)

        def f(p):
            return br_r(np.clip(br_H(p) - 1.0, br_r.lo, br_r.hi))

        def df(p):
            y = np.clip(br_H(p) - 1.0, br_r.lo, br_r.hi)
            return br_r.deriv(y) * br_Hp(p)

        return f, df

    rlo, drlo = rho_branch("-")
    rup, drup = rho_branch("+")
    rho = PiecewiseProfile(p_hat, rlo, rup, domain=(-1.0, 0.0),
                           lower_deriv=drlo, upper_deriv=drup)

    beta_a, beta_b = compute_beta(rho_y, u_rel, H, H_p, p_hat)

    return StratifiedBackground(
        p_hat=p_hat, rho=rho, H=H, H_p=H_p,
        beta_a=beta_a, beta_b=beta_b,
        f_relation_constant=report.froude_relation,
        scales=report, rho_y=rho_y, u_rel=u_rel,
    )


def background_table(bg: StratifiedBackground, n_per_branch: int = 101) -> str:
    """Render the background report table (p, H, H_p, rho, beta_a, beta_b)."""
    rows = []
    header = "# p  H  H_p  rho  beta_a  beta_b"
    for side, lo, hi in (("-", -1.0, bg.p_hat), ("+", bg.p_hat, 0.0)):
        ps = np.linspace(lo, hi, n_per_branch)
        cols = (ps, bg.H(ps, side), bg.H_p(ps, side), bg.rho(ps, side),
                bg.beta_a(ps, side), bg.beta_b(ps, side))
        for vals in zip(*cols):
            rows.append("  ".join(f"{v:.15g}" for v in vals))
    return "\n".join([header] + rows) + "\n"

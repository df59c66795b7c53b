"""End-to-end run on a smoothly stratified sheared column.

The piecewise-constant fixtures never activate the interior density
gradient source; this background has rho_p != 0 inside both layers, a
density jump, and shear, so every coefficient path is live at once.
"""
import numpy as np
import pytest

from stratawave.background import FluidParameters, build_background
from stratawave.diagnostics import compute_diagnostics
from stratawave.grid import SlitGrid, laminar_field
from stratawave.profiles import PiecewiseProfile
from stratawave.reduced import build_reduced_model, elevation_ansatz
from stratawave.solver import get_problem, newton_solve
from stratawave.sturm import find_mu_cr, spectrum_at_criticality


@pytest.fixture(scope="module")
def smooth_case():
    par = FluidParameters(c=1.0, g=1.0, d_plus=0.4, d_minus=0.6)
    rho = PiecewiseProfile(
        -0.4, lambda y: 1.05 - 0.06 * np.exp(np.asarray(y, float)),
        lambda y: 0.98 - 0.04 * np.asarray(y, float), domain=(-1.0, 0.0),
        lower_deriv=lambda y: -0.06 * np.exp(np.asarray(y, float)),
        upper_deriv=lambda y: np.full_like(np.asarray(y, float), -0.04))
    shear = PiecewiseProfile(
        -0.4, lambda y: 1.0 + 0.08 * np.asarray(y, float),
        lambda y: 1.0 + 0.08 * np.asarray(y, float), domain=(-1.0, 0.0),
        lower_deriv=lambda y: np.full_like(np.asarray(y, float), 0.08),
        upper_deriv=lambda y: np.full_like(np.asarray(y, float), 0.08))
    bg = build_background(par, rho, shear)
    crit = find_mu_cr(bg)
    model = build_reduced_model(bg, crit)
    return bg, crit, model


def test_critical_data_sane(smooth_case):
    bg, crit, model = smooth_case
    assert 0.5 < crit.mu_cr < 2.0
    spec = spectrum_at_criticality(bg, crit, 3)
    assert abs(spec[0]) < 1e-8 and np.all(np.diff(spec) < 0)
    assert model.B1 > 0 > model.B2
    assert model.B1_bordered == pytest.approx(model.B1, rel=1e-8)
    assert model.B2_bordered == pytest.approx(model.B2, rel=1e-8)


def test_jacobian_matches_fd_with_active_density_gradient(smooth_case):
    bg, crit, model = smooth_case
    grid = SlitGrid(L=25.0, nq=21, np_minus=11, np_plus=11, p_hat=bg.p_hat)
    prob = get_problem(grid, bg)
    rng = np.random.default_rng(1)
    fld = laminar_field(grid, 1.1)
    fld.w_lo[:, 1:] += 0.01 * rng.standard_normal(fld.w_lo[:, 1:].shape)
    fld.w_up += 0.01 * rng.standard_normal(fld.w_up.shape)
    x = prob.pack(fld)
    J = prob.jacobian(x, fld.F)
    for _ in range(3):
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        h = 1e-6
        fd = (prob.residual(x + h * d, fld.F) - prob.residual(x - h * d, fld.F)) / (2 * h)
        assert np.max(np.abs(J @ d - fd)) <= 1e-6 * max(1.0, float(np.max(np.abs(fd))))


def test_seed_to_solution_and_diagnostics(smooth_case):
    bg, crit, model = smooth_case
    eps = 0.08
    L = 40.0 / (eps * np.sqrt(model.B1))
    grid = SlitGrid(L=L, nq=241, np_minus=49, np_plus=49, p_hat=bg.p_hat)
    seed = elevation_ansatz(model, bg, crit, grid, eps)
    sol, info = newton_solve(seed, bg, tol=1e-11)
    assert info.iterations <= 6
    dev = abs(sol.v0 - seed.meta["predicted_v0"]) / abs(seed.meta["predicted_v0"])
    assert dev < 0.05
    d = compute_diagnostics(sol, bg)
    assert d.nodal_ok and d.elevation_ok and d.symmetry_ok
    assert d.froude_bound_slack > 0
    assert d.identity_residual < 1e-8
    assert d.flow_force_drift < 1e-6

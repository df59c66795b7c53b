import numpy as np
import pytest

from stratawave.background import FluidParameters, build_background
from stratawave.profiles import PiecewiseProfile
from stratawave.reduced import build_reduced_model
from stratawave.sturm import find_mu_cr


def constant_profiles(value, bp, domain=(-1.0, 0.0)):
    return PiecewiseProfile.constant(value, bp, domain=domain)


@pytest.fixture(scope="session")
def bg_const():
    """Uniform density and shear, interface streamline at mid depth."""
    par = FluidParameters(c=1.0, g=1.0, d_plus=0.5, d_minus=0.5)
    return build_background(par, constant_profiles(1.0, -0.5),
                            constant_profiles(1.0, -0.5))


@pytest.fixture(scope="session")
def crit_const(bg_const):
    return find_mu_cr(bg_const)


@pytest.fixture(scope="session")
def model_const(bg_const, crit_const):
    return build_reduced_model(bg_const, crit_const)


@pytest.fixture(scope="session")
def bg_surface_interface():
    """Uniform column with the interface streamline pushed to the surface.

    In this limit the interface-normalized eigenfunction is p+1 itself, so
    the hand-evaluated model constants (B1 = 3, B2 = -9/2, ...) apply
    directly.
    """
    d_plus = 1e-9
    par = FluidParameters(c=1.0, g=1.0, d_plus=d_plus, d_minus=1.0 - d_plus)
    return build_background(par, constant_profiles(1.0, -d_plus),
                            constant_profiles(1.0, -d_plus))


@pytest.fixture(scope="session")
def crit_surface(bg_surface_interface):
    return find_mu_cr(bg_surface_interface)


@pytest.fixture(scope="session")
def bg_two_layer():
    """Density jump of -0.02 across the mid-depth interface, uniform shear."""
    par = FluidParameters(c=1.0, g=1.0, d_plus=0.5, d_minus=0.5)
    rho = PiecewiseProfile(-0.5, lambda y: np.full_like(np.asarray(y, float), 1.02),
                           lambda y: np.full_like(np.asarray(y, float), 1.0),
                           domain=(-1.0, 0.0))
    return build_background(par, rho, constant_profiles(1.0, -0.5))


@pytest.fixture(scope="session")
def crit_two_layer(bg_two_layer):
    return find_mu_cr(bg_two_layer)


@pytest.fixture(scope="session")
def model_two_layer(bg_two_layer, crit_two_layer):
    return build_reduced_model(bg_two_layer, crit_two_layer)


@pytest.fixture(scope="session")
def bg_shear():
    """Linear shear over uniform density (nontrivial Bernoulli forcing)."""
    par = FluidParameters(c=1.0, g=1.0, d_plus=0.5, d_minus=0.5)
    shear = PiecewiseProfile(-0.5, lambda y: 1.0 + 0.1 * np.asarray(y, float),
                             lambda y: 1.0 + 0.1 * np.asarray(y, float),
                             domain=(-1.0, 0.0),
                             lower_deriv=lambda y: np.full_like(np.asarray(y, float), 0.1),
                             upper_deriv=lambda y: np.full_like(np.asarray(y, float), 0.1))
    return build_background(par, constant_profiles(1.0, -0.5), shear)

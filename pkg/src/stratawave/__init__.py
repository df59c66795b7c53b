"""Solitary internal and surface waves over two-layer stratified shear currents.

A solver library and CLI built around the streamline (semi-Lagrangian)
formulation of steady two-layer flows: critical Froude number by
transmission shooting, weakly nonlinear sech^2 seeds, Newton/continuation
solutions of the quasilinear height equation on a truncated slitted strip,
and numerical verification of conserved quantities, bounds, and
monotonicity properties.
"""

__version__ = "0.1.0"

from .background import (BackgroundError, FluidParameters, ScaleReport,
                         StratifiedBackground, build_background, compute_beta,
                         nondimensionalize, solve_asymptotic_height)
from .continuation import (BranchPoint, StepControl, StopCriteria,
                           blowup_functional, continue_branch)
from .diagnostics import (NodalReport, WaveDiagnostics, check_critical_triviality,
                          check_flow_force_identity, check_froude_upper_bound,
                          check_nodal, compute_diagnostics, flow_force,
                          flow_force_drift, stagnation_and_velocity)
from .eulerian import EulerianWave, dj_inverse, pressure_field, redimensionalize
from .grid import HeightField, SlitGrid, default_half_length, laminar_field
from .profiles import PiecewiseProfile
from .reduced import (ReducedModel, build_reduced_model, compute_B1, compute_B2,
                      elevation_ansatz, sech_seed, solve_correction)
from .solver import (NewtonInfo, SolverError, StagnationBoundaryError,
                     assemble_jacobian, assemble_residual, newton_solve,
                     refine_and_transfer)
from .sturm import (CriticalData, ShootingState, dirichlet_spectrum, eval_A,
                    find_mu_cr, shoot, spectrum_at_criticality)

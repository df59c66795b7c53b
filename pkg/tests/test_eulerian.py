import numpy as np
import pytest

from stratawave.background import FluidParameters, build_background
from stratawave.eulerian import (EulerianError, bernoulli_energy, cartesian_resample,
                                 dj_inverse, interface_table, pressure_field,
                                 redimensionalize, streamline_table)
from stratawave.grid import SlitGrid, laminar_field
from stratawave.profiles import PiecewiseProfile
from stratawave.reduced import elevation_ansatz
from stratawave.solver import newton_solve


@pytest.fixture(scope="module")
def wave(bg_const, crit_const, model_const):
    grid = SlitGrid(L=120.0, nq=161, np_minus=33, np_plus=33, p_hat=bg_const.p_hat)
    seed = elevation_ansatz(model_const, bg_const, crit_const, grid, 0.1)
    sol, _ = newton_solve(seed, bg_const, tol=1e-12)
    return sol


class TestInverse:
    def test_laminar_reconstruction(self, bg_const):
        grid = SlitGrid(L=40.0, nq=33, np_minus=17, np_plus=17, p_hat=bg_const.p_hat)
        w = dj_inverse(laminar_field(grid, 1.2), bg_const)
        assert np.max(np.abs(w.eta)) < 1e-12
        assert np.max(np.abs(w.zeta + 0.5)) < 1e-10
        assert np.max(np.abs(w.du_lo + 1.0)) < 1e-10
        assert np.max(np.abs(w.v_up)) < 1e-12

    def test_crest_height_equals_surface_displacement(self, bg_const, wave):
        ew = dj_inverse(wave, bg_const)
        assert ew.eta[0] == pytest.approx(wave.w_up[0, -1], abs=1e-12)

    def test_streamline_ordering(self, bg_const, wave):
        ew = dj_inverse(wave, bg_const)
        assert ew.streamline_ordering_defect() <= 0.0

    def test_vertical_velocity_sign(self, bg_const, wave):
        """v = -h_q/(sqrt(rho) h_p) pointwise, hence sign(v) = -sign(h_q).

        Right of the crest a monotone elevation wave has h_q < 0
        (streamline heights fall), and the flow runs leftward in the wave
        frame, so fluid particles there move upward: v > 0 for q in (0, L).
        """
        ew = dj_inverse(wave, bg_const)
        v = ew.v_up[1:-1, 1:-1]
        hq = wave.wq("+")[1:-1, 1:-1]
        live = np.abs(hq) > 1e-12
        assert np.all(np.sign(v[live]) == -np.sign(hq[live]))
        assert np.all(v[live] > 0)

    def test_stagnant_field_rejected(self, bg_const):
        grid = SlitGrid(L=40.0, nq=33, np_minus=17, np_plus=17, p_hat=bg_const.p_hat)
        fld = laminar_field(grid, 1.2)
        fld.w_lo[:, 1:] = -1.2 * (grid.p_lo[1:] + 1.0)[None, :]
        with pytest.raises(EulerianError):
            dj_inverse(fld, bg_const)

    def test_roundtrip_heights(self, bg_const, wave):
        # y(q, p) + 1 - H(p) reproduces the stored deviation exactly
        ew = dj_inverse(wave, bg_const)
        H_lo = bg_const.H(wave.grid.p_lo, "-")
        assert np.max(np.abs((ew.y_lo + 1.0 - H_lo[None, :]) - wave.w_lo)) < 1e-12

    def test_interface_streamline_value_consistency(self, bg_const, wave):
        """The pseudo streamfunction drop over the upper layer equals -p_hat.

        Integrate sqrt(rho)(c - u) over y at a few columns of the wave; the
        trapezoid over streamline nodes is exact in the p variable.
        """
        ew = dj_inverse(wave, bg_const)
        p = wave.grid.p_up
        for i in (0, wave.grid.nq // 2):
            # integral over the upper layer of sqrt(rho)(c-u) dy
            #   = integral dp (by construction of the map), done numerically:
            rho = bg_const.rho(p, "+")
            integrand = np.sqrt(rho) * (-ew.du_up[i, :])
            val = np.trapezoid(integrand * np.gradient(ew.y_up[i, :], p), p)
            assert val == pytest.approx(-bg_const.p_hat, abs=5e-4)


class TestPressure:
    def test_laminar_uniform_column_is_hydrostatic(self, bg_const):
        grid = SlitGrid(L=40.0, nq=33, np_minus=17, np_plus=17, p_hat=bg_const.p_hat)
        F = 1.2
        ew = pressure_field(dj_inverse(laminar_field(grid, F), bg_const), bg_const)
        for P, y in ((ew.P_lo, ew.y_lo), (ew.P_up, ew.y_up)):
            assert np.max(np.abs(P - (-y / F ** 2))) < 1e-10

    def test_surface_pressure_and_interface_jump_decay(self, bg_const, crit_const,
                                                       model_const):
        sups, jumps = [], []
        for nq, npn in ((61, 13), (121, 25), (241, 49)):
            grid = SlitGrid(L=120.0, nq=nq, np_minus=npn, np_plus=npn,
                            p_hat=bg_const.p_hat)
            seed = elevation_ansatz(model_const, bg_const, crit_const, grid, 0.1)
            sol, _ = newton_solve(seed, bg_const, tol=1e-12)
            ew = pressure_field(dj_inverse(sol, bg_const), bg_const)
            sups.append(np.max(np.abs(ew.P_up[:, -1])))
            jumps.append(np.max(np.abs(ew.P_up[:, 0] - ew.P_lo[:, -1])))
        assert np.log2(sups[0] / sups[1]) > 1.5
        assert np.log2(sups[1] / sups[2]) > 1.5
        assert max(jumps) < 1e-10  # jump vanishes identically by construction

    def test_bernoulli_jump_relation_on_interface(self, bg_two_layer, crit_two_layer,
                                                  model_two_layer):
        """0.5*[[|grad psi|^2]] = [[E]] - [[rho]]*y/F^2 on the moving interface.

        This is the jump of the Bernoulli energy with the pressure term
        cancelled by its continuity; it must hold on the wave column to
        discretization order.
        """
        grid = SlitGrid(L=120.0, nq=121, np_minus=25, np_plus=25,
                        p_hat=bg_two_layer.p_hat)
        seed = elevation_ansatz(model_two_layer, bg_two_layer, crit_two_layer,
                                grid, 0.1)
        sol, _ = newton_solve(seed, bg_two_layer, tol=1e-12)
        ew = dj_inverse(sol, bg_two_layer)
        F2 = sol.F ** 2
        rho_m = float(bg_two_layer.rho(bg_two_layer.p_hat, "-"))
        rho_p = float(bg_two_layer.rho(bg_two_layer.p_hat, "+"))
        grad2_m = rho_m * (ew.du_lo[:, -1] ** 2 + ew.v_lo[:, -1] ** 2)
        grad2_p = rho_p * (ew.du_up[:, 0] ** 2 + ew.v_up[:, 0] ** 2)
        E_lo, E_up = bernoulli_energy(bg_two_layer, sol.F)
        jump_E = float(E_up(bg_two_layer.p_hat)) - float(E_lo(bg_two_layer.p_hat))
        jump_rho = rho_p - rho_m
        y = ew.zeta
        res = 0.5 * (grad2_p - grad2_m) - (jump_E - jump_rho * y / F2)
        assert np.max(np.abs(res)) < 5e-5  # discretization order

    def test_pressure_lower_bound_sanity(self, bg_const, wave):
        ew = pressure_field(dj_inverse(wave, bg_const), bg_const)
        # hydrostatic-dominated: pressure stays above a mild linear bound
        assert np.min(ew.P_lo) > -1.0
        assert np.min(ew.P_up) > -1.0


class TestRedimensionalize:
    def test_roundtrip_laminar(self):
        d = 50.0
        par = FluidParameters(c=2.0, g=9.81, d_plus=0.4 * d, d_minus=0.6 * d)
        rho = PiecewiseProfile.constant(1025.0, -0.4 * d, domain=(-d, 0.0))
        ust = PiecewiseProfile.constant(1.0, -0.4 * d, domain=(-d, 0.0))
        bg = build_background(par, rho, ust)
        grid = SlitGrid(L=30.0, nq=33, np_minus=17, np_plus=17, p_hat=bg.p_hat)
        F = 1.1
        ew = pressure_field(dj_inverse(laminar_field(grid, F), bg), bg)
        dim = redimensionalize(ew, bg.scales, P_atm=101325.0)
        assert dim.dimensional
        # lengths scale with d
        assert np.max(np.abs(dim.x - ew.x * d)) < 1e-9
        assert np.max(np.abs(dim.y_up - ew.y_up * d)) < 1e-9
        # velocity scale F*sqrt(g d)
        vel = F * np.sqrt(9.81 * d)
        assert np.max(np.abs(dim.du_lo - ew.du_lo * vel)) < 1e-9
        # pressure scale F^2 g rho0 d on top of the ambient offset
        pres = F ** 2 * 9.81 * 1000.0 * d  # hmm rho0 is the surface density
        pres = F ** 2 * 9.81 * bg.scales.rho0 * d
        assert np.max(np.abs(dim.P_up - (ew.P_up * pres + 101325.0))) < 1e-6
        with pytest.raises(EulerianError):
            redimensionalize(dim, bg.scales)

    def test_amplitude_scales_linearly_with_depth(self, bg_const, wave):
        # the same dimensionless wave in a 100 m column: eta scales by d
        import dataclasses
        ew = dj_inverse(wave, bg_const)
        scales = dataclasses.replace(bg_const.scales, length_scale=100.0)
        dim = redimensionalize(ew, scales)
        assert dim.eta[0] == pytest.approx(100.0 * ew.eta[0], rel=1e-12)

    def test_wave_speed_relation(self):
        # dimensional far-field velocity deficit: c - u = F*sqrt(g d)*u_rel
        d, g = 25.0, 9.81
        par = FluidParameters(c=3.0, g=g, d_plus=0.5 * d, d_minus=0.5 * d)
        rho = PiecewiseProfile.constant(1000.0, -0.5 * d, domain=(-d, 0.0))
        ust = PiecewiseProfile.constant(2.0, -0.5 * d, domain=(-d, 0.0))
        bg = build_background(par, rho, ust)
        grid = SlitGrid(L=30.0, nq=33, np_minus=17, np_plus=17, p_hat=bg.p_hat)
        F = 1.15
        ew = dj_inverse(laminar_field(grid, F), bg)
        dim = redimensionalize(ew, bg.scales)
        # dimensionless laminar deficit is 1/(sqrt(rho)H_p) = u_rel = 1
        assert np.max(np.abs(-dim.du_up - F * np.sqrt(g * d))) < 1e-9


class TestOutput:
    def test_tables_and_resampler(self, bg_const, wave):
        ew = pressure_field(dj_inverse(wave, bg_const), bg_const)
        itab = interface_table(ew)
        assert itab.splitlines()[0] == "x,eta,zeta"
        assert len(itab.splitlines()) == wave.grid.nq + 1
        stab = streamline_table(ew)
        assert stab.splitlines()[0].startswith("layer,p,x")
        layers = cartesian_resample(ew, ny=16)
        assert layers[0]["du"].shape == (wave.grid.nq, 16)
        assert np.all(np.isfinite(layers[1]["v"]))

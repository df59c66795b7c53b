import subprocess
import sys
import numpy as np
import pytest

from stratawave.cli import main
from stratawave.config import ConfigError, compile_expression, load_config
from stratawave.grid import HeightField, SlitGrid


CONST_CONFIG = """
[fluid]
c = 1.0
g = 1.0
d_plus = 0.5
d_minus = 0.5

[density]
lower = 1.0
upper = 1.0

[shear]
lower = 1.0
upper = 1.0

[numerics]
epsilon = 0.1
nq = 81
np_minus = 17
np_plus = 17
L = 80
"""

TWO_LAYER_CONFIG = CONST_CONFIG.replace("lower = 1.0\nupper = 1.0\n\n[shear]",
                                        "lower = 1.02\nupper = 1.0\n\n[shear]")


@pytest.fixture()
def const_cfg(tmp_path):
    path = tmp_path / "const.ini"
    path.write_text(CONST_CONFIG)
    return path


class TestExpressions:
    def test_basic_arithmetic(self):
        f = compile_expression("1.0 + 0.5*y**2 - exp(y)/2")
        ys = np.linspace(-1, 0, 5)
        assert np.allclose(f(ys), 1.0 + 0.5 * ys ** 2 - np.exp(ys) / 2)

    def test_constants_and_functions(self):
        f = compile_expression("sqrt(abs(y)) + pi*tanh(y)")
        assert f(-0.25) == pytest.approx(0.5 + np.pi * np.tanh(-0.25))

    def test_rejects_unknown_names(self):
        with pytest.raises(ConfigError):
            compile_expression("__import__('os')")(0.0)
        with pytest.raises(ConfigError):
            compile_expression("open('x')")(0.0)
        with pytest.raises(ConfigError):
            compile_expression("z + 1")(0.0)


class TestConfig:
    def test_load_and_defaults(self, const_cfg):
        cfg = load_config(const_cfg)
        assert cfg.numerics.epsilon == 0.1
        assert cfg.numerics.newton_tol == 1e-10  # default materialized
        assert cfg.fluid.d == 1.0

    def test_missing_section_is_config_error(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[fluid]\nc = 1\ng = 1\nd_plus = 0.5\nd_minus = 0.5\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_values_are_config_errors(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text(CONST_CONFIG.replace("nq = 81", "nq = 4"))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_profile_from_sample_file(self, tmp_path):
        ys = np.linspace(-1, 0, 41)
        rho = np.where(ys < -0.5, 1.02, 1.0)
        table = tmp_path / "rho.dat"
        rows = [f"{y} {r}" for y, r in zip(ys, rho)]
        rows.insert(21, f"-0.5 1.02")  # duplicated breakpoint row, lower first
        table.write_text("\n".join(rows))
        path = tmp_path / "cfg.ini"
        path.write_text(CONST_CONFIG.replace(
            "[density]\nlower = 1.0\nupper = 1.0",
            "[density]\nfile = rho.dat"))
        cfg = load_config(path)
        assert cfg.density(-0.75, "-") == pytest.approx(1.02, abs=1e-9)
        assert cfg.density(-0.25, "+") == pytest.approx(1.0, abs=1e-9)


class TestRuns:
    def test_critical_prints_unit_froude(self, const_cfg, tmp_path, capsys):
        rc = main(["critical", "--config", str(const_cfg),
                   "--out", str(tmp_path / "out")])
        out = capsys.readouterr().out
        assert rc == 0
        line = [l for l in out.splitlines() if l.startswith("F_cr")][0]
        assert abs(float(line.split("=")[1]) - 1.0) < 1e-8
        assert (tmp_path / "out" / "phi0.png").exists()
        assert (tmp_path / "out" / "background.dat").exists()
        assert (tmp_path / "out" / "effective_config.ini").exists()

    def test_solve_writes_reloadable_field(self, const_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["solve", "--config", str(const_cfg), "--out", str(out)])
        assert rc == 0
        fld = HeightField.load(out / "solution_field.dat")
        assert fld.grid.nq == 81
        assert fld.v0 > 0
        assert fld.meta["background"]

    def test_field_roundtrip_is_exact(self, tmp_path):
        grid = SlitGrid(L=20.0, nq=9, np_minus=8, np_plus=9, p_hat=-0.37)
        rng = np.random.default_rng(5)
        fld = HeightField(grid, 1.23456789012345,
                          rng.standard_normal((9, 8)),
                          rng.standard_normal((9, 9)),
                          meta={"epsilon": 0.125})
        fld.w_lo[:, 0] = 0.0
        path = tmp_path / "field.dat"
        fld.save(path, "cafe")
        back = HeightField.load(path)
        assert back.F == fld.F
        assert np.array_equal(back.w_lo, fld.w_lo)
        assert np.array_equal(back.w_up, fld.w_up)
        assert back.meta["epsilon"] == 0.125
        assert back.meta["background"] == "cafe"

    def test_determinism_byte_identical(self, const_cfg, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["continue", "--config", str(const_cfg), "--out", str(out),
                       "--max-steps", "8", "--stop-sup-hp", "1.02"])
            assert rc == 4  # stagnation-boundary stop is the successful end
            outs.append((out / "branch_summary.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_reconstruct_and_diagnose(self, const_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["solve", "--config", str(const_cfg), "--out", str(out)]) == 0
        field = str(out / "solution_field.dat")
        assert main(["diagnose", "--config", str(const_cfg), "--out", str(out),
                     field]) == 0
        text = capsys.readouterr().out
        assert "flow_force_drift" in text
        assert main(["reconstruct", "--config", str(const_cfg), "--out", str(out),
                     field]) == 0
        assert (out / "solution_field_interfaces.csv").exists()
        assert (out / "solution_field_wave.png").exists()

    def test_diagnose_branch_aggregates(self, const_cfg, tmp_path):
        out = tmp_path / "out"
        rc = main(["continue", "--config", str(const_cfg), "--out", str(out),
                   "--max-steps", "8", "--stop-sup-hp", "1.02"])
        assert rc == 4
        rc = main(["diagnose-branch", "--config", str(const_cfg), "--out", str(out),
                   "--jobs", "2", str(out / "branch")])
        assert rc == 0
        lines = (out / "branch_diagnostics.csv").read_text().splitlines()
        assert lines[0].startswith("file,F,v0")
        assert len(lines) >= 3

    def test_resume_appends_branch(self, const_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["continue", "--config", str(const_cfg), "--out", str(out),
                   "--max-steps", "3", "--stop-sup-hp", "1.2"])
        assert rc == 0  # max_steps reached, branch unfinished
        n_before = len(list((out / "branch").glob("point_*.dat")))
        rc = main(["continue", "--config", str(const_cfg), "--out", str(out),
                   "--resume", "--max-steps", "4", "--stop-sup-hp", "1.2"])
        assert "resuming from" in capsys.readouterr().out
        n_after = len(list((out / "branch").glob("point_*.dat")))
        assert n_after > n_before  # append-only: files extend, none replaced

    def test_config_error_exit_code(self, tmp_path, capsys):
        missing = tmp_path / "nope.ini"
        assert main(["critical", "--config", str(missing), "--out",
                     str(tmp_path / "o")]) == 2
        bad = tmp_path / "bad.ini"
        bad.write_text(CONST_CONFIG.replace("d_plus = 0.5", "d_plus = -0.5"))
        assert main(["critical", "--config", str(bad), "--out",
                     str(tmp_path / "o")]) == 2

    def test_entry_point_subprocess(self, const_cfg, tmp_path):
        rc = subprocess.run([sys.executable, "-m", "stratawave.cli", "critical",
                             "--config", str(const_cfg), "--out",
                             str(tmp_path / "out")],
                            capture_output=True, text=True)
        assert rc.returncode == 0
        assert "mu_cr" in rc.stdout

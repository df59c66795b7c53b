"""Command-line interface: critical / reduced / solve / continue / diagnose /
diagnose-branch / reconstruct.

Every artifact is self-describing: output files carry the background
content hash, and the effective configuration (all defaults materialized)
is written next to the outputs.  Exit codes: 0 ok, 2 config error,
3 numerical failure, 4 stagnation-boundary stop (successful branch end).
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .background import BackgroundError, background_table
from .config import ConfigError, RunConfig, effective_config_text, load_config
from .continuation import StepControl, StopCriteria, continue_branch
from .diagnostics import check_critical_triviality, compute_diagnostics, flow_force_drift
from .eulerian import (cartesian_resample, dj_inverse, interface_table,
                       pressure_field, redimensionalize, streamline_table)
from .grid import HeightField, SlitGrid, default_half_length
from .reduced import ReducedModelError, build_reduced_model, elevation_ansatz, sech_seed
from .solver import SolverError, StagnationBoundaryError, newton_solve
from .sturm import SturmError, find_mu_cr, spectrum_at_criticality

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STAGNATION_STOP = 4


def _prepare(cfg: RunConfig):
    bg = cfg.build_background()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    bg_hash = bg.content_hash()
    text = effective_config_text(cfg, bg_hash)
    text += (f"\n# shear profile rescaled by {bg.scales.ustar_rescale:.17g} "
             "to meet the mass-flux normalization\n")
    (cfg.out_dir / "effective_config.ini").write_text(text)
    return bg, bg_hash


def _grid_for(cfg: RunConfig, bg, model) -> SlitGrid:
    num = cfg.numerics
    L = num.L if num.L > 0 else default_half_length(num.epsilon, model.B1)
    return SlitGrid(L=L, nq=num.nq, np_minus=num.np_minus, np_plus=num.np_plus,
                    p_hat=bg.p_hat)


def _critical_pipeline(cfg: RunConfig, bg):
    crit = find_mu_cr(bg)
    spectrum_at_criticality(bg, crit, cfg.numerics.spectrum_count)
    return crit


# ----------------------------------------------------------------------
def cmd_critical(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    crit = _critical_pipeline(cfg, bg)
    print(f"mu_cr = {crit.mu_cr:.12g}")
    print(f"F_cr  = {crit.F_cr:.12g}")
    print("eigenvalues at criticality (descending):")
    for j, nu in enumerate(crit.spectrum):
        print(f"  nu_{j} = {nu:.12g}")

    out = cfg.out_dir
    (out / "background.dat").write_text(
        f"# background {bg_hash}\n" + background_table(bg))
    rows = [f"# background {bg_hash}", "# p  phi0"]
    for side, lo, hi in (("-", -1.0, bg.p_hat), ("+", bg.p_hat, 0.0)):
        ps = np.linspace(lo, hi, 201)
        rows += [f"{p:.15g}  {v:.15g}" for p, v in zip(ps, crit.phi0(ps, side))]
    (out / "phi0.dat").write_text("\n".join(rows) + "\n")
    with open(out / "critical.dat", "w") as fh:
        fh.write(f"# background {bg_hash}\n")
        fh.write(f"mu_cr {crit.mu_cr:.17g}\nF_cr {crit.F_cr:.17g}\n")
        fh.write(f"phi0_scale {crit.phi0_scale:.17g}\n")
        for j, nu in enumerate(crit.spectrum):
            fh.write(f"nu_{j} {nu:.17g}\n")
        for j, nu in enumerate(crit.dirichlet if crit.dirichlet is not None else []):
            fh.write(f"nu_dirichlet_{j} {nu:.17g}\n")
    from . import plots
    plots.save_eigenfunction(crit, bg, out / "phi0.png")
    return EXIT_OK


def cmd_reduced(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    crit = _critical_pipeline(cfg, bg)
    model = build_reduced_model(bg, crit, epsilon=cfg.numerics.epsilon)
    print(f"B1 = {model.B1:.12g}  (bordered route {model.B1_bordered:.12g})")
    print(f"B2 = {model.B2:.12g}  (bordered route {model.B2_bordered:.12g})")
    eps = cfg.numerics.epsilon
    v, _ = sech_seed(model, eps)
    grid = _grid_for(cfg, bg, model)
    q = grid.q
    out = cfg.out_dir
    rows = [f"# background {bg_hash}", f"# epsilon {eps}", "# q  v_elevation"]
    rows += [f"{qi:.15g}  {-v(qi):.15g}" for qi in q]
    (out / "seed_interface.dat").write_text("\n".join(rows) + "\n")
    seed = elevation_ansatz(model, bg, crit, grid, eps,
                            orientation=cfg.numerics.seed_orientation)
    seed.save(out / "seed_field.dat", bg_hash)
    from . import plots
    plots.save_seed_profile(q, -v(q), out / "seed_interface.png")
    plots.save_field(seed, bg, out / "seed_field.png", title=f"seed, eps={eps}")
    print(f"seed amplitude v(0) = {seed.meta['predicted_v0']:.12g} "
          f"({seed.meta['seed_orientation']})")
    return EXIT_OK


def _solve_once(cfg: RunConfig, bg, bg_hash):
    crit = _critical_pipeline(cfg, bg)
    model = build_reduced_model(bg, crit, epsilon=cfg.numerics.epsilon)
    grid = _grid_for(cfg, bg, model)
    seed = elevation_ansatz(model, bg, crit, grid, cfg.numerics.epsilon,
                            orientation=cfg.numerics.seed_orientation)
    sol, info = newton_solve(seed, bg, tol=cfg.numerics.newton_tol)
    return crit, model, sol, info


def cmd_solve(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    try:
        crit, model, sol, info = _solve_once(cfg, bg, bg_hash)
    except (SolverError, ReducedModelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"converged in {info.iterations} Newton iterations, "
          f"residual {info.residuals[-1]:.3e}")
    print(f"F = {sol.F:.12g}, v0 = {sol.v0:.12g} "
          f"(seed prediction {sol.meta['predicted_v0']:.12g})")
    out = cfg.out_dir
    sol.save(out / "solution_field.dat", bg_hash)
    diag = compute_diagnostics(sol, bg)
    _write_diag_report(out / "solution_diagnostics.dat", diag, bg_hash)
    from . import plots
    plots.save_field(sol, bg, out / "solution_field.png")
    return EXIT_OK


def _write_diag_report(path, diag, bg_hash):
    with open(path, "w") as fh:
        fh.write(f"# background {bg_hash}\n")
        fh.write("# single-solution diagnostics\n")
        for key, val in diag.as_dict().items():
            fh.write(f"{key} {val:.17g}\n")
        if diag.nodal is not None:
            for chk in (diag.nodal.elevation, diag.nodal.wq, diag.nodal.wqq_crest,
                        diag.nodal.wqp_bottom, diag.nodal.wqqp_corner):
                fh.write(f"nodal.{chk.name.split('<')[0].split('>')[0].strip()}"
                         f".ok {int(chk.ok)}\n")
                fh.write(f"nodal.{chk.name.split('<')[0].split('>')[0].strip()}"
                         f".worst {chk.worst_value:.17g} at q={chk.worst_location[0]:.6g} "
                         f"p={chk.worst_location[1]:.6g} band={chk.band:.3e}\n")


def cmd_continue(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    out = cfg.out_dir
    branch_dir = out / "branch"
    branch_dir.mkdir(exist_ok=True)
    num = cfg.numerics
    existing = sorted(branch_dir.glob("point_*.dat"))
    second = None
    try:
        if getattr(args, "resume", False) and len(existing) >= 2:
            # append-only resumption: re-validate the last stored point by a
            # fresh Newton solve before extending the branch
            crit = _critical_pipeline(cfg, bg)
            prev = HeightField.load(existing[-2])
            last = HeightField.load(existing[-1])
            for fld in (prev, last):
                if fld.meta.get("background") not in ("", bg_hash):
                    print(f"config error: stored branch belongs to background "
                          f"{fld.meta.get('background')}, not {bg_hash}",
                          file=sys.stderr)
                    return EXIT_CONFIG
            start, _ = newton_solve(prev, bg, tol=num.newton_tol)
            second, _ = newton_solve(last, bg, tol=num.newton_tol)
            second.grid = start.grid
            print(f"resuming from {existing[-1].name} (re-validated)")
            existing = existing[:-2]
        else:
            crit, model, start, _ = _solve_once(cfg, bg, bg_hash)
    except (SolverError, ReducedModelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    rows = []
    offset = len(existing)

    def on_accept(pt):
        k = offset + len(rows)
        pt.field.save(branch_dir / f"point_{k:04d}.dat", bg_hash)
        from .diagnostics import stagnation_and_velocity
        stag, vel = stagnation_and_velocity(pt.field, bg)
        rows.append({"s": pt.arc_s, "F": pt.F, "v0": pt.v0,
                     "min_hp": pt.min_hp, "sup_hp": pt.sup_hp, "N": pt.N_s,
                     "stagnation_metric": stag,
                     "flow_force_drift": flow_force_drift(pt.field, bg)})
        print(f"  s={pt.arc_s:9.5f} F={pt.F:.8f} v0={pt.v0:.6f} "
              f"min_hp={pt.min_hp:.4f} sup_hp={pt.sup_hp:9.4f} N={pt.N_s:10.3f}")

    try:
        pts, reason = continue_branch(
            start, bg, crit,
            StepControl(ds0=num.ds0, ds_min=num.ds_min, ds_max=num.ds_max,
                        max_steps=num.max_steps, newton_tol=num.newton_tol),
            StopCriteria(min_hp=num.stop_min_hp, sup_hp=num.stop_sup_hp),
            on_accept=on_accept, second=second)
    except (SolverError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    summary = out / "branch_summary.csv"
    new_file = not (summary.exists() and offset)
    with open(summary, "w" if new_file else "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["s", "F", "v0", "min_hp", "N", "flow_force_drift",
                             "sup_hp", "stagnation_metric"])
        for r in rows:
            writer.writerow([f"{r[k]:.17g}" for k in
                             ("s", "F", "v0", "min_hp", "N", "flow_force_drift",
                              "sup_hp", "stagnation_metric")])
    from . import plots
    plots.save_branch(rows, out / "branch_summary.png")
    print(f"branch stopped: {reason} after {len(pts)} points")
    if reason in ("min_hp", "sup_hp"):
        print(f"stagnation boundary reached ({reason})")
        return EXIT_STAGNATION_STOP
    if reason == "max_steps":
        return EXIT_OK
    return EXIT_NUMERICAL if reason == "froude_bound" else EXIT_OK


def cmd_diagnose(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    field = HeightField.load(args.field)
    if field.meta.get("background") and field.meta["background"] != bg_hash:
        print(f"warning: field was computed for background "
              f"{field.meta['background']}, config gives {bg_hash}", file=sys.stderr)
    diag = compute_diagnostics(field, bg)
    out = cfg.out_dir
    _write_diag_report(out / (Path(args.field).stem + "_diagnostics.dat"),
                       diag, bg_hash)
    print("single-solution diagnostics")
    for key, val in diag.as_dict().items():
        print(f"  {key} = {val:.10g}")
    if args.triviality:
        crit = _critical_pipeline(cfg, bg)
        model = build_reduced_model(bg, crit)
        rep = check_critical_triviality(bg, crit, model)
        print(f"  critical_collapse_sup_norm = {rep.critical_sup_norm:.3e} "
              f"(L = {rep.L_used})")
        print(f"  supercritical_control_v0 = {rep.supercritical_v0:.6g}")
        for msg in rep.messages:
            print(f"  note: {msg}")
    from . import plots
    plots.save_field(field, bg, out / (Path(args.field).stem + "_diagnostics.png"))
    return EXIT_OK


def cmd_diagnose_branch(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    files = sorted(Path(args.branch_dir).glob("point_*.dat"))
    if not files:
        print(f"no point_*.dat files in {args.branch_dir}", file=sys.stderr)
        return EXIT_CONFIG

    def work(path):
        field = HeightField.load(path)
        diag = compute_diagnostics(field, bg)
        return path.name, diag

    if cfg.numerics.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.numerics.jobs) as pool:
            results = list(pool.map(work, files))
    else:
        results = [work(f) for f in files]

    out = cfg.out_dir / "branch_diagnostics.csv"
    keys = ["F", "v0", "flow_force_drift", "froude_bound_slack",
            "identity_residual", "elevation_ok", "symmetry_ok", "nodal_ok",
            "stagnation_metric", "velocity_sup", "min_hp", "sup_hp"]
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file"] + keys)
        for name, diag in results:
            d = diag.as_dict()
            writer.writerow([name] + [f"{d[k]:.17g}" for k in keys])
    print(f"wrote {out} ({len(results)} points)")
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig, args) -> int:
    bg, bg_hash = _prepare(cfg)
    field = HeightField.load(args.field)
    wave = dj_inverse(field, bg)
    wave = pressure_field(wave, bg)
    if args.dimensional:
        wave = redimensionalize(wave, bg.scales)
    out = cfg.out_dir
    stem = Path(args.field).stem
    (out / f"{stem}_interfaces.csv").write_text(interface_table(wave))
    (out / f"{stem}_streamlines.csv").write_text(streamline_table(wave))
    layers = cartesian_resample(wave)
    with open(out / f"{stem}_contours.dat", "w") as fh:
        fh.write(f"# background {bg_hash}\n# layer x y du v P rows\n")
        for name, layer in zip(("lower", "upper"), layers):
            for i, x in enumerate(wave.x):
                for k, y in enumerate(layer["y"]):
                    P = layer["P"][i, k] if layer["P"] is not None else np.nan
                    fh.write(f"{name} {x:.12g} {y:.12g} {layer['du'][i, k]:.12g} "
                             f"{layer['v'][i, k]:.12g} {P:.12g}\n")
    from . import plots
    plots.save_wave(wave, out / f"{stem}_wave.png")
    print(f"eta(0) = {wave.eta[field.grid.crest_index]:.10g}, "
          f"zeta(0) = {wave.zeta[field.grid.crest_index]:.10g}"
          + (" [dimensional]" if args.dimensional else ""))
    return EXIT_OK


# ----------------------------------------------------------------------
_NUMERIC_OVERRIDES = ("nq", "np_minus", "np_plus", "L", "epsilon", "newton_tol",
                      "spectrum_count", "ds0", "ds_min", "ds_max", "max_steps",
                      "stop_min_hp", "stop_sup_hp", "seed_orientation", "seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stratawave",
        description="Solitary-wave solver for two-layer stratified shear flows")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="background config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None, help="parallel workers")
        for name in _NUMERIC_OVERRIDES:
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)

    for name, fn, extra in (
            ("critical", cmd_critical, ()),
            ("reduced", cmd_reduced, ()),
            ("solve", cmd_solve, ()),
            ("continue", cmd_continue, ("--resume",)),
            ("diagnose", cmd_diagnose, ("field", "--triviality")),
            ("diagnose-branch", cmd_diagnose_branch, ("branch_dir",)),
            ("reconstruct", cmd_reconstruct, ("field", "--dimensional"))):
        p = sub.add_parser(name)
        common(p)
        for arg in extra:
            if arg.startswith("--"):
                p.add_argument(arg, action="store_true")
            else:
                p.add_argument(arg)
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {name: getattr(args, name) for name in _NUMERIC_OVERRIDES
                 if getattr(args, name, None) is not None}
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    try:
        cfg = load_config(args.config, out_dir=args.out, overrides=overrides)
    except (ConfigError, BackgroundError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(cfg, args)
    except (ConfigError, BackgroundError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StagnationBoundaryError as exc:
        print(f"stagnation boundary: {exc}", file=sys.stderr)
        return EXIT_STAGNATION_STOP
    except (SolverError, SturmError, ReducedModelError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

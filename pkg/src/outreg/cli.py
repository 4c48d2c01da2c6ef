"""Scenario-driven command line: synthesize, simulate, analyze, reproduce.

Exit codes: 0 success, 2 configuration error, 3 synthesis precondition or
self-check failure, 4 simulation failure, 5 analysis precondition or a
failed verification check (the failing check is named on stderr).

A scenario is a single JSON document:

{
  "schema_version": 1,
  "plant":      {"kind": "heat2d", "n": 16} | {"kind": "bundle", "path": "..."},
  "gains":      {"kind": "heat"} | {"kind": "bundle", "path": "..."},
  "exosystem":  {"kind": "heat-example", "N": 10} | {"kind": "json", "path": "..."},
  "controller": {"variant": "new-structure", "gamma0": 12.0, "kappa": 0.125,
                 "beta": null, "family": [ {"label": "...", "B_scale": 1.1}, ... ]},
  "run":        {"T": 37.699, "dt": 0.001},
  "analysis":   {"resolvent_scan": true, "scan_kmax": 10,
                 "fit_decay": false, "decay_window": [5.0, 30.0]},
  "out":        "results"
}
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import analysis as ana
from . import bundles, closedloop, exosystem, plant as plantmod, synthesis
from .closedloop import similarity_triangularization
from .numerics import opnorm, spectral_abscissa

CHECK_TOL = 1e-8


class ConfigError(Exception):
    pass


def load_scenario(path):
    if not os.path.isfile(path):
        raise ConfigError(f"scenario file not found: {path}")
    with open(path) as fh:
        try:
            scn = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc
    if scn.get("schema_version") != 1:
        raise ConfigError("scenario schema_version must be 1")
    for key in ("plant", "gains", "exosystem", "controller"):
        if key not in scn:
            raise ConfigError(f"scenario is missing the '{key}' section")
    return scn


def build_plant(spec):
    kind = spec.get("kind")
    if kind == "heat2d":
        n = int(spec.get("n", 16))
        if n < 4:
            raise ConfigError("heat2d grid needs n >= 4")
        return plantmod.build_heat2d(n)
    if kind == "bundle":
        return bundles.load_plant(spec["path"])
    raise ConfigError(f"unknown plant kind {kind!r}")


def build_gains(spec, plant):
    kind = spec.get("kind")
    if kind == "heat":
        return plantmod.heat_stabilizers(plant)
    if kind == "zero":
        return plantmod.StabilizationGains(
            K2=np.zeros((plant.inputs, plant.n)), L1=np.zeros((plant.n, plant.outputs))
        )
    if kind == "bundle":
        return bundles.load_gains(spec["path"])
    raise ConfigError(f"unknown gains kind {kind!r}")


def build_exosystem(spec):
    kind = spec.get("kind")
    if kind == "heat-example":
        return exosystem.heat_example_profiles(int(spec.get("N", 10)))
    if kind == "json":
        return exosystem.load_json(spec["path"])
    raise ConfigError(f"unknown exosystem kind {kind!r}")


def build_params(spec):
    variant = spec.get("variant", "new-structure")
    if variant not in synthesis.VARIANTS:
        raise ConfigError(f"unknown controller variant {variant!r}")
    try:
        return synthesis.SynthesisParams(
            variant=variant,
            gamma0=float(spec.get("gamma0", 1.0)),
            kappa=float(spec.get("kappa", 0.125)),
            beta=spec.get("beta"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_family(spec):
    family = [plantmod.identity_perturbation()]
    for entry in spec.get("family", []):
        kwargs = {k: v for k, v in entry.items()}
        family.append(plantmod.PerturbationSpec(**kwargs))
    return family


def synthesize_controller(plant, gains, exo, spec):
    params = build_params(spec)
    if params.variant == "new-structure":
        return synthesis.synth_new_structure(plant, gains, exo, params)
    if params.variant == "observer":
        return synthesis.synth_observer_based(plant, gains, exo, params)
    if params.variant == "non-robust":
        return synthesis.synth_nonrobust(plant, gains, exo, params)
    return synthesis.synth_reduced_im(plant, gains, exo, build_family(spec), params)


def out_dir(scn, args):
    out = args.out or scn.get("out")
    if not out:
        raise ConfigError("no output directory (set 'out' in the scenario or pass --out)")
    os.makedirs(out, exist_ok=True)
    return out


def apply_overrides(scn, args):
    if getattr(args, "variant", None):
        scn["controller"]["variant"] = args.variant
    if getattr(args, "grid", None):
        if scn["plant"].get("kind") != "heat2d":
            raise ConfigError("--grid applies only to the builtin heat2d plant")
        scn["plant"]["n"] = args.grid
    if getattr(args, "modes", None):
        if scn["exosystem"].get("kind") != "heat-example":
            raise ConfigError("--modes applies only to the builtin heat-example exosystem")
        scn["exosystem"]["N"] = args.modes
    return scn


def cmd_synthesize(args):
    scn = apply_overrides(load_scenario(args.scenario), args)
    out = out_dir(scn, args)
    plant = build_plant(scn["plant"])
    gains = build_gains(scn["gains"], plant)
    exo = build_exosystem(scn["exosystem"])
    ctrl = synthesize_controller(plant, gains, exo, scn["controller"])
    bundles.save_plant(plant, os.path.join(out, "plant"))
    bundles.save_gains(gains, os.path.join(out, "gains"))
    bundles.save_controller(ctrl, os.path.join(out, "controller"))
    exosystem.save_json(exo, os.path.join(out, "exosystem.json"))
    print(f"controller variant: {ctrl.variant}")
    print(f"modes: {len(ctrl.omegas)}  internal-model dim: {ctrl.dim_im}  controller dim: {ctrl.dim}")
    for name, value in ctrl.self_checks.items():
        print(f"self-check {name}: residual {value:.3e}")
    print(f"bundle written to {out}")
    return 0


def _load_run(scn):
    run = scn.get("run", {})
    T = float(run.get("T", 12 * np.pi))
    dt = float(run.get("dt", 1e-3))
    if dt <= 0:
        raise ConfigError("run.dt must be positive")
    if T < 2.0:
        raise ConfigError("run.T must cover at least two metric windows (T >= 2)")
    return T, dt


def _load_bundles(out):
    for sub in ("plant", "gains", "controller"):
        if not os.path.isdir(os.path.join(out, sub)):
            raise ConfigError(f"missing {sub} bundle under {out}; run synthesize first")
    plant = bundles.load_plant(os.path.join(out, "plant"))
    gains = bundles.load_gains(os.path.join(out, "gains"))
    ctrl = bundles.load_controller(os.path.join(out, "controller"))
    exo = exosystem.load_json(os.path.join(out, "exosystem.json"))
    return plant, gains, ctrl, exo


def cmd_simulate(args):
    scn = load_scenario(args.scenario)
    out = out_dir(scn, args)
    T, dt = _load_run(scn)
    plant, _, ctrl, exo = _load_bundles(out)
    cl = closedloop.assemble(plant, ctrl, exo)
    abscissa = spectral_abscissa(cl.Ae)
    t0 = time.time()
    try:
        traj = closedloop.simulate(cl, exo, T=T, dt=dt)
        dec = closedloop.error_metrics(traj)
    except (RuntimeError, ValueError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 4
    wall = time.time() - t0
    closedloop.write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    closedloop.write_decay_csv(dec, os.path.join(out, "error_integrals.csv"))
    report = {
        "spectral_abscissa": abscissa,
        "max_imag_residue": traj.max_imag_residue,
        "wall_clock_seconds": wall,
        "T": T,
        "dt": dt,
        "final_error_integral": float(dec.I[-1]),
        "initial_error_integral": float(dec.I[0]),
    }
    ana.report_to_json(report, os.path.join(out, "run_report.json"))
    print(f"spectral abscissa: {abscissa:.6g}")
    print(f"max imaginary residue: {traj.max_imag_residue:.3e}")
    print(f"wall clock: {wall:.1f} s")
    return 0


def cmd_analyze(args):
    scn = load_scenario(args.scenario)
    out = out_dir(scn, args)
    toggles = scn.get("analysis", {})
    plant, gains, ctrl, exo = _load_bundles(out)
    cl = closedloop.assemble(plant, ctrl, exo)

    failures = []
    report = {}

    gcond = ana.check_g_conditions(ctrl, exo)
    report["g_conditions"] = gcond
    if not gcond["all_pass"]:
        failures.append("g_conditions")

    # structural identities recomputed from the stored controller parts
    AL = plant.A + gains.L1 @ plant.C
    BL = plant.B + gains.L1 @ plant.D
    if ctrl.variant == "observer":
        AK = plant.A + plant.B @ ctrl.K21
        CKm = plant.C + plant.D @ ctrl.K21
        syl = opnorm(ctrl.im_G1 @ ctrl.H - ctrl.H @ AK - ctrl.im_G2 @ CKm) / max(
            opnorm(ctrl.H) * max(opnorm(ctrl.im_G1), 1.0), 1e-300)
        adj = opnorm(ctrl.H @ plant.B + ctrl.im_G2 @ plant.D + ctrl.K1.conj().T) / max(
            opnorm(ctrl.K1), 1e-300)
    else:
        syl = opnorm(ctrl.H @ ctrl.im_G1 - AL @ ctrl.H - BL @ ctrl.K1) / max(
            opnorm(ctrl.H) * max(opnorm(ctrl.im_G1), 1.0), 1e-300)
        adj = opnorm(plant.C @ ctrl.H + plant.D @ ctrl.K1 + ctrl.im_G2.conj().T) / max(
            opnorm(ctrl.im_G2), 1e-300)
    report["sylvester_residual"] = syl
    report["adjoint_coupling_residual"] = adj
    if syl > CHECK_TOL:
        failures.append("sylvester")
    if adj > CHECK_TOL:
        failures.append("adjoint_coupling")

    tri = similarity_triangularization(cl, ctrl)
    report["similarity"] = tri
    if tri["relative_zero_residual"] > CHECK_TOL:
        failures.append("similarity_triangularization")

    im_rows = ana.im_norm_identity(ctrl.im_G1, ctrl.im_G2, ctrl.omegas, ctrl.block_sizes)
    dev = max((r["deviation"] for r in im_rows if r["exact_identity"]), default=0.0)
    report["im_norm_identity"] = {"max_deviation": dev, "modes": im_rows}
    if dev > CHECK_TOL:
        failures.append("im_norm_identity")

    reg = ana.regulator_residuals(cl, exo)
    report["regulator"] = {
        "max_relative_residual": reg.max_relative_residual,
        "residuals": reg.residuals.tolist(),
    }
    if reg.max_relative_residual > CHECK_TOL:
        failures.append("regulator_residuals")

    if toggles.get("resolvent_scan", True):
        kmax = int(toggles.get("scan_kmax", int(np.max(np.abs(exo.omegas)))))
        peaks = np.array([w for w in exo.omegas if 0 < w <= kmax + 1e-9])
        grid = ana.scan_frequencies(peaks)
        vals = ana.resolvent_scan(cl.Ae, grid)
        with open(os.path.join(out, "resolvent_scan.csv"), "w") as fh:
            fh.write("omega,resolvent_norm\n")
            for w, v in zip(grid, vals):
                fh.write(f"{w:.15g},{v:.15g}\n")
        peak_vals = np.array([vals[np.argmin(np.abs(grid - w))] for w in peaks])
        try:
            fit = ana.fit_growth(peaks, peak_vals)
            report["resolvent_growth"] = {
                "model": fit.model, "exponent": fit.exponent,
                "r2_polynomial": fit.r2_polynomial, "r2_exponential": fit.r2_exponential,
            }
        except ValueError as exc:
            report["resolvent_growth"] = {"skipped": str(exc)}

    decay_path = os.path.join(out, "error_integrals.csv")
    if toggles.get("fit_decay", False):
        if os.path.isfile(decay_path):
            data = np.genfromtxt(decay_path, delimiter=",", names=True)
            dec = closedloop.DecaySamples(t=np.atleast_1d(data["t"]), I=np.atleast_1d(data["I"]))
            window = toggles.get("decay_window") or [max(2.0, dec.t[0]), dec.t[-1]]
            fit = ana.fit_decay(dec, (float(window[0]), float(window[1])))
            report["decay_fit"] = {
                "slope_loglog": fit.slope_loglog,
                "slope_logcorrected": fit.slope_logcorrected,
                "r2": fit.r2,
                "window": list(fit.window),
                "narrow_window": fit.narrow_window,
            }
            ana.report_to_json(report["decay_fit"], os.path.join(out, "decay_fit.json"))
        else:
            report["decay_fit"] = {"skipped": "no error_integrals.csv (run simulate first)"}

    ana.report_to_json(report, os.path.join(out, "analysis_report.json"))
    rows = [{"check": "g_conditions", "value": "pass" if gcond["all_pass"] else "FAIL"},
            {"check": "sylvester", "value": f"{syl:.3e}"},
            {"check": "adjoint_coupling", "value": f"{adj:.3e}"},
            {"check": "similarity", "value": f"{tri['relative_zero_residual']:.3e}"},
            {"check": "im_norm_identity", "value": f"{dev:.3e}"},
            {"check": "regulator_residuals", "value": f"{reg.max_relative_residual:.3e}"}]
    print(ana.format_table(rows, ["check", "value"]))
    if failures:
        print(f"FAILED checks: {', '.join(failures)}", file=sys.stderr)
        return 5
    print("all checks passed")
    return 0


def cmd_reproduce_heat(args):
    out = args.out or "heat_study_out"
    os.makedirs(out, exist_ok=True)
    n = args.grid or 16
    N = args.modes or 10
    variant = args.variant or "new-structure"
    T = args.T or 12 * np.pi
    dt = args.dt or 1e-3

    print(f"building heat plant ({n}x{n} grid) ...")
    plant = plantmod.build_heat2d(n)
    gains = plantmod.heat_stabilizers(plant)
    exo = exosystem.heat_example_profiles(N)
    spec = {"variant": variant, "gamma0": 12.0, "kappa": 0.125}
    print(f"synthesizing {variant} controller (N={N}, kappa=1/8, gamma0=12) ...")
    ctrl = synthesize_controller(plant, gains, exo, spec)
    cl = closedloop.assemble(plant, ctrl, exo)
    abscissa = spectral_abscissa(cl.Ae)
    print(f"closed-loop dim {cl.dim}, spectral abscissa {abscissa:.6g}")
    print(f"simulating T={T:.4g}, dt={dt:.4g} ...")
    t0 = time.time()
    traj = closedloop.simulate(cl, exo, T=T, dt=dt)
    dec = closedloop.error_metrics(traj)
    print(f"simulation took {time.time() - t0:.1f} s")

    # tracking record restricted to the plotted interval [4 pi, 12 pi]
    lo = np.searchsorted(traj.t, 4 * np.pi)
    sub = closedloop.Trajectory(
        t=traj.t[lo:], y=traj.y[:, lo:], y_ref=traj.y_ref[:, lo:], e=traj.e[:, lo:],
        u=traj.u[:, lo:], e_norm=traj.e_norm[lo:], snapshot_t=traj.snapshot_t,
        snapshots=traj.snapshots, max_imag_residue=traj.max_imag_residue, dt=traj.dt,
    )
    closedloop.write_trajectory_csv(sub, os.path.join(out, "tracking.csv"))
    closedloop.write_decay_csv(dec, os.path.join(out, "error_integrals.csv"))
    if plant.geometry is not None:
        closedloop.write_boundary_csv(traj, plant.geometry, os.path.join(out, "boundary_gamma3.csv"))

    gate = None
    if T >= 10 * np.pi + 1:
        I_pi = float(dec.I[np.argmin(np.abs(dec.t - np.pi))])
        I_10pi = float(dec.I[np.argmin(np.abs(dec.t - 10 * np.pi))])
        gate = {"I_pi": I_pi, "I_10pi": I_10pi, "ratio": I_10pi / I_pi,
                "threshold": 0.05, "pass": bool(I_10pi <= 0.05 * I_pi)}
        print(f"error-integral contraction: I(10pi)/I(pi) = {gate['ratio']:.4f} "
              f"(gate 0.05): {'PASS' if gate['pass'] else 'FAIL'}")
    ana.report_to_json({
        "grid": n, "modes": N, "variant": variant, "T": T, "dt": dt,
        "spectral_abscissa": abscissa,
        "max_imag_residue": traj.max_imag_residue,
        "contraction_gate": gate,
    }, os.path.join(out, "reproduce_report.json"))
    print(f"artifacts written to {out}")
    return 0


def cmd_robustness(args):
    scn = load_scenario(args.scenario)
    out = out_dir(scn, args)
    plant = build_plant(scn["plant"])
    gains = build_gains(scn["gains"], plant)
    exo = build_exosystem(scn["exosystem"])
    ctrl = synthesize_controller(plant, gains, exo, scn["controller"])
    rb = scn.get("robustness", {})
    specs = [plantmod.PerturbationSpec(**entry) for entry in rb.get("specs", [])]
    if not specs:
        specs = [
            plantmod.PerturbationSpec(label="diffusion x 0.95", A_scale=0.95),
            plantmod.PerturbationSpec(label="diffusion x 1.05", A_scale=1.05),
            plantmod.PerturbationSpec(label="B x 0.9", B_scale=0.9),
            plantmod.PerturbationSpec(label="B x 1.1", B_scale=1.1),
        ]
    T = float(rb.get("T", 12 * np.pi))
    dt = float(rb.get("dt", 1e-3))
    reports = ana.robustness_suite(plant, ctrl, exo, specs, T=T, dt=dt)
    ana.report_to_json(reports, os.path.join(out, "robustness_report.json"))
    rows = [{
        "label": r["label"],
        "abscissa": f"{r['abscissa']:.5g}",
        "stable": r["stable"],
        "error_ratio": f"{r['error_ratio']:.4g}",
        "regulator_residual": f"{r['max_regulator_residual']:.3e}",
    } for r in reports]
    print(ana.format_table(rows, ["label", "abscissa", "stable", "error_ratio", "regulator_residual"]))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="outreg",
        description="Synthesis and verification toolkit for robust output regulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--out", help="output directory (overrides the scenario)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")

    p = sub.add_parser("synthesize", help="construct a controller bundle")
    common(p)
    p.add_argument("--variant", choices=synthesis.VARIANTS)
    p.add_argument("--grid", type=int)
    p.add_argument("--modes", type=int)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run the closed loop from an existing bundle")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="verify structural conditions and fit growth/decay laws")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reproduce-heat", help="end-to-end boundary-controlled heat study")
    common(p, scenario=False)
    p.add_argument("--variant", choices=synthesis.VARIANTS)
    p.add_argument("--grid", type=int)
    p.add_argument("--modes", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_reproduce_heat)

    p = sub.add_parser("robustness", help="perturbation suite with a fixed controller")
    common(p)
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (synthesis.SynthesisPrecondition, synthesis.SelfCheckFailure) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return 3
    except ana.AnalysisPrecondition as exc:
        print(f"analysis precondition failed: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())

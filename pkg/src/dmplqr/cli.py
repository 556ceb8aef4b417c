"""Command-line interface.

Every command writes CSV data, SVG plots and a ``manifest.json`` holding the
resolved configuration, the system fingerprint and library versions into its
output directory. Errors are reported as one JSON object on stderr with exit
codes 2 (validation), 3 (numerical failure) and 4 (no feasible design).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io, svg
from .dmp import DEFAULT_RHO, DEFAULT_TAU_G, compute_budget_sweep, flop_count, rho_tau_sweep
from .errors import DmpError, InfeasibleError, ValidationError
from .pipeline import BENCHMARK_SEED, DEFAULT_ORDERS, StudyConfig, deployed_design_tau, run_study
from .sector import deployed_gain
from .simulation import (
    default_substep,
    monte_carlo_subopt,
    local_optimal_tau,
    simulate_baseline,
    simulate_deployed,
    unit_sphere_samples,
    verify_small_gain_trajectory,
)
from .systems import LtiSystem, PoleSpec, generate_benchmark_system

OUT_ENV = "DMPLQR_OUT"

DEFAULTS = {
    "seed": BENCHMARK_SEED, "nx": 97, "nu": 1, "unstable": [0.4], "slow": [-0.5, -1.2], "fast_bound": -30.0,
    "imag_bound": 10.0, "coupling": 1.0, "fast_input_weight": 0.1, "input_norm": None, "system": None,
    "models": list(DEFAULT_ORDERS), "rho": DEFAULT_RHO, "tau_g": DEFAULT_TAU_G, "grid": [1e-4, 0.04, 2000],
    "samples": 10, "sample_seed": 0, "fit_form": "fitted_alpha", "x0_norm": 1.0,
    "rho_grid": [0.5, 0.99, 50], "mhz": [16.0, 32.0, 64.0, 128.0], "model": None, "tau": None, "tsim": 10.0,
    "runs": 1000, "mc_seed": 0, "x0_seed": 0,
}


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected lo:hi:n")
    try:
        return [float(parts[0]), float(parts[1]), int(parts[2])]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from exc


def _add_system_args(p):
    g = p.add_argument_group("system")
    g.add_argument("--system", help="system JSON file (overrides generation flags)")
    g.add_argument("--seed", type=int)
    g.add_argument("--nx", type=int)
    g.add_argument("--nu", type=int)
    g.add_argument("--unstable", type=_floats, help="comma-separated unstable poles")
    g.add_argument("--slow", type=_floats, help="comma-separated slow stable poles")
    g.add_argument("--fast-bound", dest="fast_bound", type=float)
    g.add_argument("--imag-bound", dest="imag_bound", type=float)
    g.add_argument("--coupling", type=float)
    g.add_argument("--fast-input-weight", dest="fast_input_weight", type=float)
    g.add_argument("--input-norm", dest="input_norm", type=float)


def _add_study_args(p):
    g = p.add_argument_group("design problem")
    g.add_argument("--models", type=_ints, help="model orders, e.g. 97,6,3,1")
    g.add_argument("--rho", type=float)
    g.add_argument("--tau-g", dest="tau_g", type=float, help="seconds per flop")
    g.add_argument("--grid", type=_range, help="tau grid lo:hi:n (log spaced)")
    g.add_argument("--samples", type=int, help="sector samples per model")
    g.add_argument("--sample-seed", dest="sample_seed", type=int)
    g.add_argument("--fit-form", dest="fit_form", choices=["linear", "quadratic", "fitted_alpha"])
    g.add_argument("--x0-norm", dest="x0_norm", type=float)


def _add_common(p):
    p.add_argument("--config", help="JSON config file; explicit flags take precedence")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or ./<command>)")


def build_parser():
    ap = argparse.ArgumentParser(prog="dmplqr", description="Compute-aware receding-horizon LQR design")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-system", help="generate a benchmark plant")
    _add_system_args(p)
    _add_common(p)

    for name, helptext in [("solve-dmp", "solve the design problem across models"),
                           ("fit-bounds", "sample and fit sector gains only")]:
        p = sub.add_parser(name, help=helptext)
        _add_system_args(p)
        _add_study_args(p)
        _add_common(p)

    p = sub.add_parser("sweep-rho", help="feasibility and objective over a rho x tau grid")
    _add_system_args(p)
    _add_study_args(p)
    p.add_argument("--rho-grid", dest="rho_grid", type=_range, help="lo:hi:n (linear)")
    _add_common(p)

    p = sub.add_parser("sweep-compute", help="feasible tau sets for several clock rates")
    _add_system_args(p)
    _add_study_args(p)
    p.add_argument("--mhz", type=_floats, help="clock rates in MHz (16 MHz means tau_g = 6.25e-8)")
    _add_common(p)

    for name, helptext in [("simulate", "baseline vs deployed closed-loop trajectories"),
                           ("monte-carlo", "suboptimality gap distribution over unit initial states")]:
        p = sub.add_parser(name, help=helptext)
        _add_system_args(p)
        _add_study_args(p)
        p.add_argument("--model", help="model label (M0, M1, ...) or order; default: winner and coarsest")
        p.add_argument("--tau", type=float, help="sampling time (default: the model's design tau)")
        p.add_argument("--tsim", type=float)
        if name == "monte-carlo":
            p.add_argument("--runs", type=int)
            p.add_argument("--mc-seed", dest="mc_seed", type=int)
        else:
            p.add_argument("--x0-seed", dest="x0_seed", type=int)
        _add_common(p)

    p = sub.add_parser("verify", help="recompute and compare system fingerprints of a results directory")
    p.add_argument("directory")
    return ap


def resolve_config(args):
    cfg = {k: v for k, v in DEFAULTS.items()}
    if getattr(args, "config", None):
        loaded = io.read_json(args.config)
        loaded = loaded.get("config", loaded)
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def load_system(cfg):
    if cfg["system"]:
        d = io.read_json(cfg["system"])
        return LtiSystem.from_dict(d.get("system", d))
    spec = PoleSpec(tuple(cfg["unstable"]), tuple(cfg["slow"]), cfg["fast_bound"], cfg["imag_bound"])
    return generate_benchmark_system(cfg["seed"], cfg["nx"], cfg["nu"], spec, cfg["coupling"],
                                     cfg["fast_input_weight"], cfg["input_norm"])


def study_config(cfg, n_x):
    lo, hi, n = cfg["grid"]
    return StudyConfig(tuple(min(int(o), n_x) for o in cfg["models"]), float(cfg["rho"]), float(cfg["tau_g"]),
                       float(lo), float(hi), int(n), int(cfg["samples"]), int(cfg["sample_seed"]),
                       cfg["fit_form"], float(cfg["x0_norm"]))


def out_dir(args, command):
    if args.out:
        d = Path(args.out)
    else:
        d = Path(os.environ.get(OUT_ENV, ".")) / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _finish(d, command, cfg, system, files):
    io.write_json(d / "system.json", {"system": system.to_dict(), "fingerprint": system.fingerprint()})
    io.write_json(d / "config.json", {"config": cfg})
    files = list(files) + ["system.json", "config.json"]
    io.write_json(d / "manifest.json", io.manifest(command, cfg, system.fingerprint(), files))


def _fit_rows(study):
    return {r.model.label: {"order": r.model.order, "alpha": r.model.alpha, "L_M": r.model.L_M,
                            "baseline": r.fit_star.to_dict(), "deployed": r.fit_hat.to_dict()}
            for r in study.models}


def _write_samples(d, study):
    rows = [dict(model=r.model.label, **s.to_row()) for r in study.models for s in r.samples]
    io.write_csv(d / "sector_samples.csv", io.SAMPLE_COLUMNS, rows)
    io.write_json(d / "fits.json", {"fits": _fit_rows(study), "fingerprint": study.system.fingerprint()})
    return ["sector_samples.csv", "fits.json"]


def cmd_gen_system(args, cfg):
    system = load_system(cfg)
    if args.out and args.out.endswith(".json"):
        path = Path(args.out)
    else:
        path = out_dir(args, "gen-system") / "system.json"
    io.write_json(path, {"system": system.to_dict(), "fingerprint": system.fingerprint(),
                         "manifest": io.manifest("gen-system", cfg, system.fingerprint(), [path.name])})
    print(json.dumps({"system": str(path), "fingerprint": system.fingerprint(), "n_x": system.n_x}))
    return 0


def _study(cfg):
    system = load_system(cfg)
    return run_study(system, None, study_config(cfg, system.n_x))


def cmd_fit_bounds(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "fit-bounds")
    files = _write_samples(d, study)
    for r in study.models:
        files.append(_plot_model(d, study, r, local_opt=False))
    _finish(d, "fit-bounds", cfg, study.system, files)
    print(json.dumps({"out": str(d), "fits": {k: v["baseline"]["relative_rms"] for k, v in _fit_rows(study).items()}}))
    return 0


def _plot_model(d, study, r, local_opt=True):
    grid = study.config.dmp_config().tau_grid
    T = grid**2 / (study.config.tau_g * flop_count(r.model.order, study.system.n_u))
    rhs = r.solution.rhs if r.solution is not None else float("nan")
    vlines = []
    if local_opt:
        A_lqr = study.system.A + study.system.B @ study.K_star
        lo = local_optimal_tau(A_lqr, study.system, study.gain_builder(r.model),
                               (study.config.tau_min, study.config.tau_max))
        vlines.append((lo.tau, "#2980b9"))
    series = [
        {"x": grid, "y": r.fit_star.evaluate(grid, T), "label": "fit L* (baseline)"},
        {"x": grid, "y": r.fit_hat.evaluate(grid, T) - r.fit_hat.L_M, "label": "fit L^ - L_M (deployed)"},
        {"x": [s.tau for s in r.samples], "y": [s.L_star for s in r.samples], "label": "samples L*", "style": "points"},
    ]
    name = f"sector_{r.model.label}.svg"
    svg.line_plot(d / name, series, title=f"{r.model.label} (order {r.model.order})", xlabel="tau [s]",
                  ylabel="sector gain", logx=True, logy=True, vlines=vlines,
                  hlines=[(rhs, "#c0392b")] if np.isfinite(rhs) else [])
    return name


def cmd_solve_dmp(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "solve-dmp")
    files = _write_samples(d, study)
    for r in study.models:
        name = f"curve_{r.model.label}.csv"
        grid = np.array([row["tau"] for row in r.solution.objective_curve])
        T = np.array([row["T"] for row in r.solution.objective_curve])
        fs, fh = r.fit_star.evaluate(grid, T), r.fit_hat.evaluate(grid, T)
        rows = [dict(model=r.model.label, fit_star=a, fit_hat=b, **row)
                for row, a, b in zip(r.solution.objective_curve, fs, fh)]
        io.write_csv(d / name, io.CURVE_COLUMNS, rows)
        files += [name, _plot_model(d, study, r)]
    sol = {
        "winner": study.winner.to_dict(),
        "models": [r.solution.to_dict() for r in study.models],
        "diss_constants": study.consts.to_dict(),
        "L_x": study.L_x, "L_pi": study.L_pi,
        "fingerprint": study.system.fingerprint(),
    }
    io.write_json(d / "solution.json", sol)
    files.append("solution.json")
    _finish(d, "solve-dmp", cfg, study.system, files)
    print(json.dumps({"out": str(d), "winner": study.winner.model_index, "tau_opt": study.winner.tau_opt,
                      "infeasible": [r.model.label for r in study.models if r.solution.infeasible]}))
    if study.winner.infeasible:
        raise InfeasibleError("no model admits a feasible sampling time")
    return 0


def cmd_sweep_rho(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "sweep-rho")
    lo, hi, n = cfg["rho_grid"]
    rhos = np.linspace(float(lo), float(hi), int(n))
    grid = study.config.dmp_config().tau_grid
    rows, summary, files = [], {}, []
    for r in study.models:
        mrows, counts = rho_tau_sweep(r.model, r.fit_star, r.fit_hat, study.consts, study.cost, rhos, grid,
                                      study.config.tau_g)
        rows += mrows
        summary[r.model.label] = {"feasible_counts": counts, "monotone": bool(np.all(np.diff(counts) >= 0))}
        Z = np.array([row["feasible"] for row in mrows], dtype=float).reshape(len(rhos), len(grid))
        name = f"feasibility_{r.model.label}.svg"
        svg.heatmap(d / name, grid, rhos, Z, title=f"feasible region {r.model.label}", xlabel="tau [s]",
                    ylabel="rho", logx=True)
        files.append(name)
    io.write_csv(d / "sweep_rho.csv", io.SWEEP_COLUMNS, rows)
    io.write_json(d / "sweep_rho.json", summary)
    _finish(d, "sweep-rho", cfg, study.system, files + ["sweep_rho.csv", "sweep_rho.json"])
    print(json.dumps({"out": str(d), "monotone": all(v["monotone"] for v in summary.values())}))
    return 0


def cmd_sweep_compute(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "sweep-compute")
    mhz = [float(v) for v in cfg["mhz"]]
    if any(v <= 0 for v in mhz):
        raise ValidationError("clock rates must be positive")
    budgets = {m: DEFAULT_TAU_G * 16.0 / m for m in mhz}
    grid = study.config.dmp_config().tau_grid
    rows, summary, series = [], {}, []
    for r in study.models:
        regions, nested = compute_budget_sweep(r.model, r.fit_star, r.fit_hat, study.consts, study.cost,
                                               study.config.rho, grid, list(budgets.values()))
        summary[r.model.label] = {"nested": nested,
                                  "feasible_counts": {str(m): int(len(regions[budgets[m]])) for m in mhz}}
        for m in mhz:
            mask = np.isin(grid, regions[budgets[m]])
            rows += [dict(model=r.model.label, mhz=m, tau_g=budgets[m], tau=float(t), feasible=bool(f))
                     for t, f in zip(grid, mask)]
        series.append({"x": mhz, "y": [len(regions[budgets[m]]) for m in mhz], "label": r.model.label})
    io.write_csv(d / "sweep_compute.csv", io.BUDGET_COLUMNS, rows)
    io.write_json(d / "sweep_compute.json", summary)
    svg.line_plot(d / "sweep_compute.svg", series, title="feasible grid points vs clock rate", xlabel="MHz",
                  ylabel="feasible tau count", logx=True)
    _finish(d, "sweep-compute", cfg, study.system, ["sweep_compute.csv", "sweep_compute.json", "sweep_compute.svg"])
    print(json.dumps({"out": str(d), "nested": all(v["nested"] for v in summary.values())}))
    return 0


def _selected(study, cfg):
    if cfg["model"] is not None:
        key = str(cfg["model"])
        try:
            return [study.result(int(key) if key.isdigit() else key)]
        except KeyError as exc:
            raise ValidationError(f"unknown model {key!r}") from exc
    picked = []
    if not study.winner.infeasible:
        picked.append(study.result(study.winner.model_index))
    coarsest = study.models[-1]
    if coarsest not in picked:
        picked.append(coarsest)
    return picked


def _design(study, r, cfg):
    if cfg["tau"] is not None:
        return float(cfg["tau"]), None
    return deployed_design_tau(r)


def cmd_simulate(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "simulate")
    x0 = unit_sphere_samples(cfg["x0_seed"], 1, study.system.n_x)[:, 0]
    A_lqr = study.system.A + study.system.B @ study.K_star
    files, report, series = [], {}, []
    for r in _selected(study, cfg):
        tau, feasible = _design(study, r, cfg)
        h = default_substep(tau)
        K = deployed_gain(r.model, study.cost, tau, study.config.tau_g).K_dep
        base = simulate_baseline(A_lqr, x0, cfg["tsim"], h, study.K_star, study.cost.Q, study.cost.R)
        dep = simulate_deployed(study.system, K, tau, x0, cfg["tsim"], h, study.cost.Q, study.cost.R)
        for kind, tr in (("baseline", base), ("deployed", dep)):
            name = f"trajectory_{r.model.label}_{kind}.csv"
            io.write_csv(d / name, io.TRAJECTORY_COLUMNS, tr.rows())
            files.append(name)
        report[r.model.label] = {"tau": tau, "design_feasible": feasible, "diverged": dep.diverged,
                                 "baseline_cost": float(base.cumulative_cost[-1]),
                                 "deployed_cost": float(dep.cumulative_cost[-1]),
                                 "small_gain_check": verify_small_gain_trajectory(base, dep, study.consts,
                                                                                  study.config.rho)}
        if not series:
            series.append({"x": base.times, "y": np.linalg.norm(base.states, axis=1), "label": "baseline"})
        series.append({"x": dep.times, "y": np.linalg.norm(dep.states, axis=1),
                       "label": f"{r.model.label} tau={tau:.3g}"})
    svg.line_plot(d / "trajectories.svg", series, title="state norm", xlabel="t [s]", ylabel="||x||", logy=True)
    io.write_json(d / "simulation.json", report)
    _finish(d, "simulate", cfg, study.system, files + ["trajectories.svg", "simulation.json"])
    print(json.dumps({"out": str(d), "models": list(report)}))
    return 0


def cmd_monte_carlo(args, cfg):
    study = _study(cfg)
    d = out_dir(args, "monte-carlo")
    files, report, series = [], {}, []
    for k, r in enumerate(_selected(study, cfg)):
        tau, feasible = _design(study, r, cfg)
        K = deployed_gain(r.model, study.cost, tau, study.config.tau_g).K_dep
        stats = monte_carlo_subopt(study.system, study.cost, K, tau, int(cfg["runs"]), float(cfg["tsim"]),
                                   int(cfg["mc_seed"]), K_star=study.K_star)
        name = f"gaps_{r.model.label}.csv"
        io.write_csv(d / name, io.GAP_COLUMNS,
                     [dict(run=i, gap=g, deployed_cost=a, baseline_cost=b)
                      for i, (g, a, b) in enumerate(zip(stats.gaps, stats.deployed_costs, stats.baseline_costs))])
        files.append(name)
        report[r.model.label] = dict(tau=tau, design_feasible=feasible, **stats.to_dict())
        series.append({"x": [k + 1] * 3, "y": [stats.q1, stats.median, stats.q3], "label": f"{r.model.label} quartiles",
                       "style": "points"})
    svg.line_plot(d / "gaps.svg", series, title="suboptimality gap quartiles", xlabel="model", ylabel="gap",
                  logy=True)
    io.write_json(d / "monte_carlo.json", report)
    _finish(d, "monte-carlo", cfg, study.system, files + ["gaps.svg", "monte_carlo.json"])
    print(json.dumps({"out": str(d), "median": {k: v["median"] for k, v in report.items()}}))
    return 0


def cmd_verify(args):
    d = Path(args.directory)
    sysfile = io.read_json(d / "system.json")
    system = LtiSystem.from_dict(sysfile["system"])
    fp = system.fingerprint()
    mismatches = []
    for f in sorted(d.glob("*.json")):
        data = io.read_json(f)
        if isinstance(data, dict) and "fingerprint" in data and data["fingerprint"] != fp:
            mismatches.append(f.name)
    print(json.dumps({"fingerprint": fp, "ok": not mismatches, "mismatches": mismatches}))
    if mismatches:
        raise ValidationError(f"fingerprint mismatch in {mismatches}")
    return 0


COMMANDS = {
    "gen-system": cmd_gen_system, "solve-dmp": cmd_solve_dmp, "fit-bounds": cmd_fit_bounds,
    "sweep-rho": cmd_sweep_rho, "sweep-compute": cmd_sweep_compute, "simulate": cmd_simulate,
    "monte-carlo": cmd_monte_carlo,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except DmpError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: scenario commands, reports and parameter sweeps.

Exit codes: 0 all checks passed, 1 at least one inequality violation,
2 configuration error, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .estimates import (collect_sup_samples, cutoff_profile, eps_scan,
                        sup_quantities, verify_estimate)
from .geometry import Cylinder, extract_bounds
from .harnack import log_integral_margin, sample_pairs, verify_harnack
from .identities import (bochner_residual, commutator_residual,
                         harnack_evolution_residual, inequality_margin,
                         pressure_equation_residual, quotient_rule_residual,
                         variant_label)
from .params import ParamError
from .scenarios import ConfigError, Scenario, load_scenario
from .solver import SolverError, weighted_mass
from .symfun import Profile, R, T

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _write_summary(out: Path, lines, payload):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(out / "summary.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_fmt)
        fh.write("\n")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(sc: Scenario, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    result = sc.run_solver()
    grid = sc.grid
    rows = []
    for i, r in enumerate(grid.r):
        for j, t in enumerate(grid.t):
            rows.append([r, t, result.u.values[i, j], result.v.values[i, j]])
    _write_csv(out / "solution.csv", ("r", "t", "u", "v"), rows)

    lines = [f"scenario: {sc.name}", "command: solve",
             f"grid: {grid.n_r} x {grid.n_t}  dr={grid.dr:.6g}  dt={grid.dt:.6g}",
             f"scheme: {result.meta['scheme']}",
             f"clamp events: {result.clamp_events} (fraction {result.clamp_fraction:.3e})"]
    payload = {"scenario": sc.name, "command": "solve", "meta": result.meta}
    if result.meta.get("clamp_warning"):
        lines.append("WARNING: clamp fraction above threshold")
    if sc.oracle_u is not None:
        rr, tt = grid.mesh()
        exact = sc.oracle_u(rr, tt)
        interior = grid.r <= 0.8 * grid.r_max
        err = float(np.max(np.abs(result.u.values[interior] - exact[interior])))
        lines.append(f"interior max error vs oracle: {err:.6e}")
        payload["oracle_interior_error"] = err
    if sc.pde is not None and sc.pde.outer_boundary == "neumann-zero" and sc.nonlinearity.form == "zero":
        m0 = weighted_mass(result.u.values[:, 0], sc.geom, grid, grid.t[0])
        m1 = weighted_mass(result.u.values[:, -1], sc.geom, grid, grid.t[-1])
        drift = abs(m1 - m0) / max(abs(m0), 1e-300)
        lines.append(f"weighted-mass relative drift: {drift:.3e}")
        payload["mass_drift"] = drift
    _write_summary(out, lines, payload)
    return EXIT_OK


def _identity_sample(sc: Scenario):
    geom = sc.geom
    n_r, n_t = 33, 17
    r_lo = 0.0 if geom.mode == "pole" else geom.r_max / 64
    r = np.linspace(r_lo, 0.95 * geom.r_max, n_r)[:, None]
    t = np.linspace(sc.t0 + sc.duration / 64, sc.t_hi, n_t)[None, :]
    return r, t


def cmd_check_identities(sc: Scenario, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    if sc.solution_kind == "numeric":
        raise ConfigError("solution.kind", "identity checks need a closed-form pressure field")
    sol = sc.analytic_handle()
    geom, params, nl = sc.geom, sc.params, sc.nonlinearity
    r, t = _identity_sample(sc)
    checks = []

    def residual_row(name, res, scale=1.0, threshold=1e-9):
        res = np.abs(np.asarray(res))
        checks.append((name, float(np.max(res)), float(np.mean(res)), scale, threshold))

    residual_row("pressure-equation",
                 pressure_equation_residual(sc.v_profile, geom, params.p, nl, r, t))

    f = Profile(1 + R**2 / 3 + T / 2, "f")
    g = Profile(2 + R**2 * T / 5, "g")
    residual_row("operator-quotient-rule",
                 quotient_rule_residual(f, g, sc.v_profile, geom, params.p, r, t))

    resid, table = harnack_evolution_residual(sol, geom, params, nl, r=r, t=t)
    residual_row("harnack-evolution-identity", resid,
                 scale=max(1.0, float(np.max(np.abs(table.LpvF)))))

    margin_rows = []
    bounds = extract_bounds(geom, Cylinder(1e18, sc.t0, sc.t_hi))
    for stage in ("pointwise", "quadratic", "bounded"):
        marg, tab = inequality_margin(stage, sol, geom, params, nl,
                                      bounds=bounds, r=r, t=t)
        mscale = max(1.0, float(np.max(np.abs(tab.LpvF))))
        margin_rows.append((f"evolution-inequality[{stage}]", float(np.min(marg)), mscale, -1e-6))
    if geom.metric_static:
        marg, tab = inequality_margin("pointwise", sol, geom, params, nl,
                                      bounds=bounds, r=r, t=t, sharper_static=True)
        mscale = max(1.0, float(np.max(np.abs(tab.LpvF))))
        margin_rows.append(("evolution-inequality[pointwise,sharp-static]",
                            float(np.min(marg)), mscale, -1e-6))

    residual_row("weighted-bochner", bochner_residual(sc.v_profile, geom, r, t))

    commutator_table = {}
    adjudicated = None
    if not geom.metric_static:
        results = commutator_residual(sc.v_profile, geom, r, t)
        commutator_table = {variant_label(k): v[0] for k, v in results.items()}
        winners = sorted(k for k, v in results.items() if v[0] <= 1e-9)
        adjudicated = [variant_label(k) for k in winners]

    lines = [f"scenario: {sc.name}", "command: check-identities",
             f"geometry: {geom.name} ({geom.family}, n={geom.n}, m={geom.m:g})"]
    rows = []
    failed = 0
    for name, value, mean, scale, thresh in checks:
        ok = value <= thresh * scale
        failed += 0 if ok else 1
        rows.append([name, value, mean, scale, thresh, "pass" if ok else "FAIL"])
        lines.append(f"  {name:42s} max residual {value:.3e} (mean {mean:.3e}, "
                     f"scale {scale:.3g})  {'pass' if ok else 'FAIL'}")
    for name, value, scale, thresh in margin_rows:
        ok = value >= thresh * scale
        failed += 0 if ok else 1
        rows.append([name, value, "", scale, thresh, "pass" if ok else "FAIL"])
        lines.append(f"  {name:42s} min margin {value:+.3e} (scale {scale:.3g})  "
                     f"{'pass' if ok else 'FAIL'}")
    if commutator_table:
        lines.append("  commutator variant residuals:")
        for label, value in sorted(commutator_table.items()):
            lines.append(f"    {label:64s} {value:.3e}")
        lines.append(f"  consistent variant(s) on this scenario: {adjudicated}")
        if not adjudicated:
            failed += 1
            lines.append("  FAIL: no sign convention reproduces the commutator")
        elif len(adjudicated) == 1:
            lines.append(f"  adjudicated convention: {adjudicated[0]}")
        else:
            lines.append("  note: a single scenario pins only the terms it excites; "
                         "run both evolving families to single one out")

    _write_csv(out / "residuals.csv",
               ("check", "max", "mean", "scale", "threshold", "status"), rows)
    payload = {
        "scenario": sc.name, "command": "check-identities",
        "checks": ([{"name": n, "max": v, "mean": mu, "scale": s, "threshold": th}
                    for n, v, mu, s, th in checks]
                   + [{"name": n, "min_margin": v, "scale": s, "threshold": th}
                      for n, v, s, th in margin_rows]),
        "commutator": commutator_table,
        "adjudicated": adjudicated,
        "failed": failed,
    }
    _write_summary(out, lines, payload)
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


def cmd_check_estimate(sc: Scenario, out: Path, negative_control: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    sol = sc.solution_handle()
    geom, params, nl = sc.geom, sc.params, sc.nonlinearity
    ver = sc.verification
    cyl = Cylinder(ver["radius"], sc.t0, sc.t_hi)
    cutoff = cutoff_profile()
    rhs_scale = 0.5 if negative_control else 1.0
    tau_probe = np.linspace(sc.duration / 256, sc.duration, 64)

    reports = []
    for variant in ver["variants"]:
        family = "second" if "second" in variant else "first"
        if variant.startswith("static"):
            eps_values = [None]
        else:
            eps_values = eps_scan(params, tau_probe, family, ver["eps_fractions"])
        for eps in eps_values:
            rep = verify_estimate(
                sol, geom, params, nl, variant, cyl, sc.t0, cutoff=cutoff,
                eps=eps, density=ver["sup_density"], eval_density=ver["eval_density"],
                tolerance_factor=ver["tolerance_factor"], rhs_scale=rhs_scale,
            )
            reports.append(rep)

    rows = []
    for rep in reports:
        for i in range(rep.margin.size):
            rows.append([rep.variant, "" if rep.eps is None else rep.eps,
                         rep.r[i], rep.t_abs[i], rep.lhs[i], rep.rhs[i], rep.margin[i]])
    _write_csv(out / "report.csv", ("variant", "eps", "r", "t", "lhs", "rhs", "margin"), rows)

    total_violations = sum(len(rep.violations) for rep in reports)
    lines = [f"scenario: {sc.name}", "command: check-estimate",
             f"verification cylinder: radius {ver['radius']:g}, "
             f"t in [{sc.t0:g}, {sc.t_hi:g}] (clock starts at t0)",
             f"sup sampling density: {ver['sup_density']}"]
    if negative_control:
        lines.append("NEGATIVE CONTROL: right-hand sides scaled by 0.5")
    best = {}
    for rep in reports:
        tag = f"{rep.variant:22s} eps={'limit' if rep.eps is None else f'{rep.eps:.5g}'}"
        lines.append(f"  {tag:44s} min margin {rep.min_margin:+.6e} at "
                     f"(r={rep.argmin[0]:.4g}, tau={rep.argmin[1]:.4g})  "
                     f"violations {len(rep.violations)}")
        prev = best.get(rep.variant)
        if prev is None or rep.min_margin > prev.min_margin:
            best[rep.variant] = rep
    for variant, rep in best.items():
        lines.append(f"  best eps for {variant}: "
                     f"{'limit' if rep.eps is None else f'{rep.eps:.5g}'} "
                     f"(min margin {rep.min_margin:+.6e})")
    lines.append(f"total violations: {total_violations}")
    payload = {
        "scenario": sc.name, "command": "check-estimate",
        "negative_control": negative_control,
        "reports": [rep.summary() for rep in reports],
        "violations": total_violations,
    }
    _write_summary(out, lines, payload)
    return EXIT_OK if total_violations == 0 else EXIT_VIOLATION


def cmd_check_harnack(sc: Scenario, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    sol = sc.solution_handle()
    geom, params, nl = sc.geom, sc.params, sc.nonlinearity
    if not params.coeffs.alpha.time_independent:
        raise ConfigError("harnack.alpha", "the integrated inequality needs constant alpha")
    ver = sc.verification
    full = Cylinder(1e18, sc.t0, sc.t_hi)
    bounds = extract_bounds(geom, full, grid_density=ver["sup_density"])
    samples = collect_sup_samples(sol, geom, params, nl, full, sc.t0,
                                  density=ver["sup_density"])
    v_inf = float(np.min(samples.v))
    cutoff = cutoff_profile()
    tau_probe = np.linspace(sc.duration / 256, sc.duration, 64)
    rng = np.random.default_rng(sc.seed)
    pairs = sample_pairs(rng, ver["pairs"], geom.r_max,
                         sc.duration / 64, sc.duration)

    lines = [f"scenario: {sc.name}", "command: check-harnack",
             f"pairs: {len(pairs)} (seed {sc.seed})", f"inf v: {v_inf:.6g}"]
    payload = {"scenario": sc.name, "command": "check-harnack", "seed": sc.seed,
               "pairs": len(pairs), "v_inf": v_inf, "families": {}}
    rows = []
    violations = 0
    for family in ("first", "second"):
        eps = 0.5 * params.eps_ceiling(tau_probe, family)
        q = sup_quantities(samples, bounds, params, geom.n, ver["radius"], cutoff,
                           eps, family=family, scope="global")
        rep = verify_harnack(sol, geom, params, nl, q, pairs, sc.t0, v_inf,
                             tolerance_factor=ver["harnack_tolerance_factor"])
        log_margins = []
        for (r1, a, r2, b2) in pairs:
            log_margins.append(log_integral_margin(sol, geom, params, rep["H"],
                                                   v_inf, r1, a, r2, b2, sc.t0))
        worst = min(row["margin"] for row in rep["rows"])
        worst_log = min(log_margins)
        violations += rep["violations"]
        log_viol = sum(1 for x in log_margins if x < -ver["harnack_tolerance_factor"])
        violations += log_viol
        lines.append(f"  family {family:6s}: H = {rep['H']:.6g}, "
                     f"violations {rep['violations']}, worst margin {worst:+.6e}, "
                     f"worst log-integral margin {worst_log:+.6e}")
        payload["families"][family] = {
            "H": rep["H"], "violations": rep["violations"],
            "worst_margin": worst, "worst_log_integral_margin": worst_log,
            "log_integral_violations": log_viol,
        }
        for row, lm in zip(rep["rows"], log_margins):
            rows.append([family, row["r1"], row["tau1"], row["r2"], row["tau2"],
                         row["energy"], row["ratio"], row["bound"], row["margin"],
                         lm, "pass" if row["passed"] else "FAIL"])
    _write_csv(out / "pairs.csv",
               ("family", "r1", "tau1", "r2", "tau2", "energy", "ratio", "bound",
                "margin", "log_integral_margin", "status"), rows)
    lines.append(f"total violations: {violations}")
    payload["violations"] = violations
    _write_summary(out, lines, payload)
    return EXIT_OK if violations == 0 else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _set_path(doc: dict, dotted: str, value):
    parts = dotted.split(".")
    node = doc
    for key in parts[:-1]:
        node = node.setdefault(key, {})
    node[parts[-1]] = value


def run_sweep(sweep_doc: dict, out: Path, workers: int = 1) -> int:
    for key in sweep_doc:
        if key not in ("template", "axes", "cap", "command"):
            raise ConfigError(f"sweep.{key}", "unknown key")
    template = sweep_doc.get("template")
    if not isinstance(template, dict):
        raise ConfigError("sweep.template", "missing scenario template")
    command = sweep_doc.get("command", "check-estimate")
    if command != "check-estimate":
        raise ConfigError("sweep.command", f"sweeps only drive check-estimate, got {command!r}")
    axes = sweep_doc.get("axes", {})
    if not axes:
        raise ConfigError("sweep.axes", "need at least one axis")
    for name, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.axes.{name}", "axis must be a non-empty list")
    cap = int(sweep_doc.get("cap", 64))
    names = list(axes.keys())
    combos = list(itertools.product(*(axes[n] for n in names)))
    if len(combos) > cap:
        raise ConfigError("sweep.axes", f"{len(combos)} combinations exceed the cap {cap}")

    from .scenarios import parse_scenario

    def one(combo):
        doc = json.loads(json.dumps(template))
        for name, value in zip(names, combo):
            _set_path(doc, name, value)
        started = time.time()
        sc = parse_scenario(doc)
        sol = sc.solution_handle()
        ver = sc.verification
        cyl = Cylinder(ver["radius"], sc.t0, sc.t_hi)
        tau_probe = np.linspace(sc.duration / 256, sc.duration, 64)
        min_margin = np.inf
        violations = 0
        for variant in ver["variants"]:
            family = "second" if "second" in variant else "first"
            eps_values = ([None] if variant.startswith("static")
                          else eps_scan(sc.params, tau_probe, family, ver["eps_fractions"]))
            for eps in eps_values:
                rep = verify_estimate(sol, sc.geom, sc.params, sc.nonlinearity,
                                      variant, cyl, sc.t0, eps=eps,
                                      density=ver["sup_density"],
                                      eval_density=ver["eval_density"],
                                      tolerance_factor=ver["tolerance_factor"])
                min_margin = min(min_margin, rep.min_margin)
                violations += len(rep.violations)
        return combo, min_margin, violations, time.time() - started

    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, combos))
    else:
        results = [one(c) for c in combos]

    rows = [list(combo) + [margin, viol, f"{runtime:.3f}"]
            for combo, margin, viol, runtime in results]
    _write_csv(out / "sweep.csv", tuple(names) + ("min_margin", "violations", "runtime_s"), rows)
    total_violations = sum(v for _, _, v, _ in results)
    lines = ["command: sweep", f"axes: {names}", f"combinations: {len(combos)}",
             f"total violations: {total_violations}"]
    payload = {"command": "sweep", "axes": names,
               "combinations": len(combos), "violations": total_violations,
               "rows": [{"combo": list(c), "min_margin": m, "violations": v}
                        for c, m, v, _ in results]}
    _write_summary(out, lines, payload)
    return EXIT_OK if total_violations == 0 else EXIT_VIOLATION


def cmd_report(out: Path) -> int:
    path = out / "summary.json"
    if not path.exists():
        raise FileNotFoundError(f"no summary.json under {out}")
    payload = json.loads(path.read_text())
    text = (out / "summary.txt")
    if text.exists():
        sys.stdout.write(text.read_text())
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harnacklab",
        description="Verification laboratory for gradient estimates and Harnack "
                    "inequalities for weighted slow diffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "check-identities", "check-estimate", "check-harnack", "sweep"):
        cp = sub.add_parser(name)
        cp.add_argument("--config", required=True, help="scenario JSON path")
        cp.add_argument("--out", required=True, help="output directory")
        cp.add_argument("--seed", type=int, default=None, help="override scenario seed")
        cp.add_argument("--workers", type=int, default=1)
        if name == "check-estimate":
            cp.add_argument("--negative-control", action="store_true",
                            help="scale right-hand sides by 0.5; the check must fail")
    rp = sub.add_parser("report")
    rp.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = Path(args.out)
        if args.command == "report":
            return cmd_report(out)
        if args.command == "sweep":
            with open(args.config) as fh:
                sweep_doc = json.load(fh)
            out.mkdir(parents=True, exist_ok=True)
            return run_sweep(sweep_doc, out, workers=args.workers)
        sc = load_scenario(args.config)
        if args.seed is not None:
            sc.seed = args.seed
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(sc, out)
        if args.command == "check-identities":
            return cmd_check_identities(sc, out)
        if args.command == "check-estimate":
            return cmd_check_estimate(sc, out, negative_control=args.negative_control)
        if args.command == "check-harnack":
            return cmd_check_harnack(sc, out)
        raise ConfigError("command", f"unknown command {args.command!r}")
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ParamError, ValueError) as exc:
        # domain errors from the computational layers (geometry, estimates,
        # identities, fields) are configuration problems at the CLI surface
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
